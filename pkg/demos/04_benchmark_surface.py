# coding: utf-8

# # A small simulation benchmark
#
# Anchors of seven scales and seven aspect ratios sit on points scattered in
# a disk; each regresses onto seven targets at the disk center. We shrink the
# point count so this runs in seconds, then bin the per-point final error onto
# a grid.

import numpy as np

from boxloss.sim_bench import SimConfig, case_count, generate_points, run, surface, with_kind

base = SimConfig(num_points=60, seed=3)
print("cases per run:", case_count(base))

# ## Total error per iteration

series = {k: run(with_kind(base, k)) for k in ("giou", "diou", "ciou", "siou")}
for k, s in series.items():
    print(f"{k:5s} E(0)={s.per_iteration_total[0]:10.2f}  E(50)={s.per_iteration_total[50]:9.2f}  final={s.final:8.2f}")

# ## Where the residual error lives

pts = generate_points(base)
surf = surface(series["siou"], pts, resolution=6)
np.set_printoptions(precision=3, suppress=True)
print(surf.mean.T[::-1])  # rows top to bottom, NaN for empty cells
