"""Gradient-descent fitting of anchor boxes to target boxes with Adam.

One iteration is one Adam step on one regression case. The learning rate
follows a step schedule ``lr0 * gamma ** (k // step_size)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import Box2D, as_array
from .losses import Grad4, LossKind, SiouParams, _kernel

__all__ = [
    "AdamConfig",
    "AdamState",
    "Trajectory",
    "BatchFit",
    "MIN_SIZE",
    "lr_at",
    "adam_step",
    "l1_error",
    "fit",
    "fit_batch",
]

MIN_SIZE = 1e-6


@dataclass(frozen=True)
class AdamConfig:
    lr0: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_size: int = 80
    gamma: float = 0.1
    iterations: int = 100
    tol: float = 1e-2

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.step_size < 1:
            raise ValueError("step_size must be >= 1")
        if not (0 < self.gamma <= 1):
            raise ValueError("gamma must lie in (0, 1]")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


@dataclass
class AdamState:
    """Adam moment accumulators for one box, ordered ``(cx, cy, w, h)``."""

    m: np.ndarray = field(default_factory=lambda: np.zeros(4))
    v: np.ndarray = field(default_factory=lambda: np.zeros(4))
    t: int = 0


@dataclass
class Trajectory:
    boxes: np.ndarray  # (iterations + 1, 4)
    l1_errors: np.ndarray  # (iterations + 1,)
    converged_at: Optional[int]
    rejected_steps: int = 0
    clamped_steps: int = 0

    @property
    def final_box(self) -> Box2D:
        return Box2D.from_array(self.boxes[-1])


@dataclass
class BatchFit:
    """Result of fitting many cases at once.

    ``l1`` has shape ``(iterations + 1, n_cases)``; ``boxes`` has shape
    ``(iterations + 1, n_cases, 4)`` and is only kept on request.
    """

    l1: np.ndarray
    rejected: np.ndarray
    clamped: np.ndarray
    boxes: Optional[np.ndarray] = None


def lr_at(config: AdamConfig, iteration: int) -> float:
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return config.lr0 * config.gamma ** (iteration // config.step_size)


def l1_error(box, gt):
    """Sum of absolute differences over ``(cx, cy, w, h)``."""
    d = np.abs(as_array(box) - as_array(gt)).sum(axis=-1)
    return float(d) if isinstance(box, Box2D) and isinstance(gt, Box2D) else d


def _update(m, v, t, g, rows, lr, cfg: AdamConfig):
    """In-place Adam update on ``(4, n)`` arrays; returns (rejected, clamped) masks.

    ``t`` is a per-case step counter so a rejected step leaves that case's
    bias correction untouched.
    """
    ok = np.isfinite(g).all(axis=0)
    g = np.where(ok, g, 0.0)
    m_new = cfg.beta1 * m + (1.0 - cfg.beta1) * g
    v_new = cfg.beta2 * v + (1.0 - cfg.beta2) * (g * g)
    t_new = t + 1
    m_hat = m_new / (1.0 - cfg.beta1**t_new)
    v_hat = v_new / (1.0 - cfg.beta2**t_new)
    step = lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    moved = rows - step
    sizes = moved[2:]
    clamped = (sizes < MIN_SIZE).any(axis=0) & ok
    np.maximum(sizes, MIN_SIZE, out=sizes)

    m[...] = np.where(ok, m_new, m)
    v[...] = np.where(ok, v_new, v)
    t[...] = np.where(ok, t_new, t)
    rows[...] = np.where(ok, moved, rows)
    return ~ok, clamped


def adam_step(state: AdamState, grad, lr: float, box, config: AdamConfig = AdamConfig()):
    """One bias-corrected Adam step on a single box.

    Returns ``(new_state, new_box, flags)`` where ``flags`` is a dict with
    ``rejected`` (non-finite gradient, nothing changed) and ``clamped``
    (width or height floored at ``MIN_SIZE``).
    """
    g = grad.to_array() if isinstance(grad, Grad4) else np.asarray(grad, dtype=np.float64)
    m = state.m.astype(np.float64).reshape(4, 1)
    v = state.v.astype(np.float64).reshape(4, 1)
    t = np.array([state.t])
    rows = as_array(box).astype(np.float64).reshape(4, 1)
    rejected, clamped = _update(m, v, t, g.reshape(4, 1), rows, lr, config)
    new_state = AdamState(m[:, 0].copy(), v[:, 0].copy(), int(t[0]))
    new_box = Box2D.from_array(rows[:, 0]) if isinstance(box, Box2D) else rows[:, 0]
    return new_state, new_box, {"rejected": bool(rejected[0]), "clamped": bool(clamped[0])}


def fit_batch(anchors, targets, kind, params: SiouParams = SiouParams(), config: AdamConfig = AdamConfig(),
              keep_boxes: bool = False) -> BatchFit:
    """Fit each anchor to its target independently.

    Cases never interact, so the per-case numbers do not depend on how cases
    are grouped into batches.
    """
    kind = LossKind.parse(kind)
    a = np.atleast_2d(as_array(anchors))
    tg = np.broadcast_to(np.atleast_2d(as_array(targets)), a.shape)
    n = a.shape[0]
    rows = np.ascontiguousarray(a.T)
    tgt = np.ascontiguousarray(tg.T)
    m = np.zeros((4, n))
    v = np.zeros((4, n))
    t = np.zeros(n, dtype=np.int64)
    rejected = np.zeros(n, dtype=np.int64)
    clamped = np.zeros(n, dtype=np.int64)

    iters = config.iterations
    l1 = np.empty((iters + 1, n))
    boxes = np.empty((iters + 1, n, 4)) if keep_boxes else None
    l1[0] = np.abs(rows - tgt).sum(axis=0)
    if keep_boxes:
        boxes[0] = rows.T
    for k in range(iters):
        _, g, _, _, _ = _kernel(kind, rows[0], rows[1], rows[2], rows[3],
                                tgt[0], tgt[1], tgt[2], tgt[3], params)
        rej, clp = _update(m, v, t, g, rows, lr_at(config, k), config)
        rejected += rej
        clamped += clp
        l1[k + 1] = np.abs(rows - tgt).sum(axis=0)
        if keep_boxes:
            boxes[k + 1] = rows.T
    return BatchFit(l1=l1, rejected=rejected, clamped=clamped, boxes=boxes)


def _first_below(errors, tol):
    hits = np.flatnonzero(errors < tol)
    return int(hits[0]) if hits.size else None


def fit(anchor, target, kind, params: SiouParams = SiouParams(), config: AdamConfig = AdamConfig()) -> Trajectory:
    """Regress one anchor box onto one target box.

    Examples:
        >>> traj = fit(Box2D(10, 8, 1, 1), Box2D(10, 10, 1, 1), "siou")
        >>> traj.l1_errors[-1] < traj.l1_errors[0]
        True
    """
    res = fit_batch(as_array(anchor).reshape(1, 4), as_array(target).reshape(1, 4), kind, params, config,
                    keep_boxes=True)
    errors = res.l1[:, 0]
    return Trajectory(
        boxes=res.boxes[:, 0, :],
        l1_errors=errors,
        converged_at=_first_below(errors, config.tol),
        rejected_steps=int(res.rejected[0]),
        clamped_steps=int(res.clamped[0]),
    )
