# coding: utf-8

# # Checking analytic gradients
#
# Every loss ships a hand-derived gradient. We compare it with central
# differences on random pairs that stay away from kinks (edge ties, zero
# offsets, equal sizes), where a finite difference would straddle a corner.

import numpy as np

from boxloss.gradcheck import check_gradients, kink_distance, sample_smooth_pairs
from boxloss.losses import LossKind, grad, grad_fd

rng = np.random.default_rng(0)
pred, gt, skipped = sample_smooth_pairs(rng, 2000)
print(f"kept 2000 pairs, rejected {skipped} draws near a kink")
print("smallest kink distance kept:", kink_distance(pred, gt).min())

# ## One pair up close

p, g = pred[0], gt[0]
print("analytic:", grad("siou", p, g))
print("central :", grad_fd("siou", p, g))

# ## All losses

for kind in LossKind:
    report = check_gradients(kind, pred, gt)
    print(f"{kind.value:5s} max rel err {report.max_rel_error:.2e}  mean {report.mean_rel_error:.2e}")
