"""Genetic-algorithm search for the SIoU shape exponent.

Fitness is the final total error of a (reduced) simulation run; lower is
better. The genome is a single real value clipped to the theta bounds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .losses import THETA_BOUNDS, LossKind
from .sim_bench import SimConfig, run

__all__ = ["GaConfig", "GaResult", "fitness", "grid_sweep", "tune_theta"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaConfig:
    population: int = 16
    generations: int = 20
    theta_bounds: tuple = THETA_BOUNDS
    mutation_sigma: float = 0.3
    crossover_rate: float = 0.5
    blend_alpha: float = 0.5
    fitness_threshold: Optional[float] = None
    seed: int = 0
    initial: Optional[tuple] = None  # explicit starting population

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        lo, hi = self.theta_bounds
        if not lo < hi:
            raise ValueError("theta_bounds must be ordered")
        if not (THETA_BOUNDS[0] <= lo and hi <= THETA_BOUNDS[1]):
            raise ValueError(f"theta_bounds must lie inside {THETA_BOUNDS}")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.mutation_sigma < 0:
            raise ValueError("mutation_sigma must be >= 0")
        if self.initial is not None and len(self.initial) != self.population:
            raise ValueError("initial population must have `population` entries")


@dataclass
class GaResult:
    best_theta: float
    best_fitness: float
    history: list  # best-so-far fitness after each generation, generation 0 first
    evaluated: list = field(default_factory=list)  # (theta, fitness) in evaluation order
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return {
            "best_theta": self.best_theta,
            "best_fitness": self.best_fitness,
            "history": list(self.history),
            "evaluated": [list(e) for e in self.evaluated],
            "stopped_early": self.stopped_early,
        }


def fitness(theta: float, sim: SimConfig, threads: Optional[int] = None) -> float:
    """Final ``E`` of a SIoU simulation with shape exponent ``theta``."""
    cfg = replace(sim, kind=LossKind.SIOU, params=replace(sim.params, theta=float(theta)))
    return run(cfg, threads=threads).final


def grid_sweep(sim: SimConfig, n: int = 17, bounds=THETA_BOUNDS, threads=None):
    """Evaluate fitness on ``n`` evenly spaced thetas; returns ``(thetas, values)``."""
    thetas = np.linspace(bounds[0], bounds[1], n)
    return thetas, np.array([fitness(t, sim, threads) for t in thetas])


def _tournament(rng, pop, fit):
    i, j = rng.integers(len(pop), size=2)
    return pop[i] if fit[i] <= fit[j] else pop[j]


def tune_theta(ga: GaConfig, sim: SimConfig, evaluate: Optional[Callable[[float], float]] = None,
               threads: Optional[int] = None) -> GaResult:
    """Search theta with tournament selection, blend crossover and Gaussian mutation.

    The best individual always survives unchanged, so the best fitness never
    increases between generations. Every child draws from its own random
    stream keyed by ``(seed, generation, index)``.

    Args:
        ga: GA settings.
        sim: simulation used for fitness; usually a reduced point count.
        evaluate: replaces the simulation fitness (``theta -> error``).
        threads: passed to the simulation.
    """
    lo, hi = ga.theta_bounds
    cache: dict = {}
    evaluated = []

    def score(theta):
        if theta not in cache:
            cache[theta] = float(evaluate(theta) if evaluate else fitness(theta, sim, threads))
            evaluated.append((theta, cache[theta]))
        return cache[theta]

    if ga.initial is not None:
        pop = [float(np.clip(t, lo, hi)) for t in ga.initial]
    else:
        rng0 = np.random.default_rng([ga.seed, 0])
        pop = [float(t) for t in rng0.uniform(lo, hi, ga.population)]
    fit = [score(t) for t in pop]
    best = int(np.argmin(fit))
    best_theta, best_fit = pop[best], fit[best]
    history = [best_fit]

    def reached():
        return ga.fitness_threshold is not None and best_fit < ga.fitness_threshold

    stopped = reached()
    for gen in range(1, ga.generations + 1):
        if stopped:
            break
        children = [best_theta]
        for i in range(1, ga.population):
            rng = np.random.default_rng([ga.seed, gen, i])
            a, b = _tournament(rng, pop, fit), _tournament(rng, pop, fit)
            child = a
            if rng.random() < ga.crossover_rate:
                span = abs(b - a)
                child = rng.uniform(min(a, b) - ga.blend_alpha * span, max(a, b) + ga.blend_alpha * span)
            if ga.mutation_sigma > 0:
                child += rng.normal(0.0, ga.mutation_sigma)
            children.append(float(np.clip(child, lo, hi)))
        pop = children
        fit = [score(t) for t in pop]
        i = int(np.argmin(fit))
        if fit[i] < best_fit:
            best_theta, best_fit = pop[i], fit[i]
        history.append(best_fit)
        log.info("generation %d: best theta %.4f fitness %.6g", gen, best_theta, best_fit)
        stopped = reached()

    return GaResult(best_theta, best_fit, history, evaluated, stopped_early=stopped and len(history) - 1 < ga.generations)
