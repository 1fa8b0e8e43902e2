# coding: utf-8

# # Anatomy of the SIoU loss
#
# The loss adds three penalties on top of `1 - IoU`: an angle cost, a distance
# cost that the angle cost modulates, and a shape cost. Here we poke at each
# one with hand-picked boxes.

import numpy as np

from boxloss import Box2D
from boxloss.losses import LossKind, SiouParams, angle_cost, loss, siou_loss

target = Box2D(0.0, 0.0, 2.0, 2.0)

# ## Angle cost
#
# Move a box around the target on a circle. The angle cost is zero when the
# offset lies on an axis and peaks at one on the diagonals.

for deg in (0, 15, 30, 45, 60, 90):
    a = np.radians(deg)
    pred = Box2D(3 * np.cos(a), 3 * np.sin(a), 2.0, 2.0)
    print(f"{deg:3d} deg  angle cost = {angle_cost(pred, target):.6f}")

# ## Full breakdown
#
# A diagonal offset with mismatched widths exercises every term.

pred = Box2D(1.0, 1.0, 3.0, 1.5)
parts = siou_loss(pred, target)
print(parts)

# ## Shape exponent
#
# Larger exponents flatten the shape cost for small mismatches.

for theta in (2.0, 4.0, 6.0):
    print(f"theta={theta}  shape cost={siou_loss(pred, target, SiouParams(theta=theta)).shape_cost:.6f}")

# ## Against the baselines
#
# Same pair, every loss in the family.

for kind in LossKind:
    print(f"{kind.value:5s} {loss(kind, pred, target):.6f}")
