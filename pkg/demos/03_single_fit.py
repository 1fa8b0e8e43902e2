# coding: utf-8

# # Regressing one box
#
# Adam drives an anchor onto a target. We track the L1 distance between the
# two boxes and note the first iteration where it drops below the tolerance.

import numpy as np

from boxloss import Box2D
from boxloss.regression import AdamConfig, fit

target = Box2D(10.0, 10.0, 1.0, 1.0)
off_axis = Box2D(10 + 2 * np.cos(np.pi / 6), 10 + 2 * np.sin(np.pi / 6), 1.0, 1.0)
on_axis = Box2D(10 + 2 * np.cos(np.pi / 6) + 1.0, 10.0, 1.0, 1.0)  # same L1 distance

cfg = AdamConfig(iterations=1000, tol=1e-2)

# ## Convergence iteration per loss

for name, anchor in (("off-axis", off_axis), ("on-axis", on_axis)):
    for kind in ("iou", "giou", "diou", "ciou", "siou"):
        traj = fit(anchor, target, kind, config=cfg)
        print(f"{name:8s} {kind:5s} converged at {traj.converged_at}  final L1 {traj.l1_errors[-1]:.2e}")

# ## Error curve
#
# The plain IoU loss has no gradient once the boxes stop overlapping, so a
# disjoint anchor never moves.

far = Box2D(14.0, 10.0, 1.0, 1.0)
for kind in ("iou", "siou"):
    e = fit(far, target, kind, config=cfg).l1_errors
    print(kind, np.round(e[[0, 10, 50, 100, -1]], 4))
