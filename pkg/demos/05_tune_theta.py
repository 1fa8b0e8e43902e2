# coding: utf-8

# # Tuning the shape exponent
#
# The shape cost has one free exponent. A tiny genetic search over its range
# is cheap to compare against an exhaustive grid on a toy benchmark.

from boxloss.sim_bench import SimConfig
from boxloss.tuner import GaConfig, grid_sweep, tune_theta

sim = SimConfig(num_points=20, seed=0)

thetas, values = grid_sweep(sim, n=9)
for t, v in zip(thetas, values):
    print(f"theta={t:.2f}  final E={v:.3f}")

result = tune_theta(GaConfig(population=6, generations=4, seed=1), sim)
print("GA best theta:", round(result.best_theta, 4), "fitness:", round(result.best_fitness, 3))
print("best-so-far per generation:", [round(h, 3) for h in result.history])
print("distinct evaluations:", len(result.evaluated))
