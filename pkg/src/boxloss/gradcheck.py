"""Analytic-versus-finite-difference gradient checks on random box pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import LossKind, SiouParams, grad, grad_fd

__all__ = ["GradCheckReport", "kink_distance", "sample_smooth_pairs", "check_gradients"]


@dataclass
class GradCheckReport:
    kind: LossKind
    samples: int
    max_rel_error: float
    mean_rel_error: float
    kink_skipped: int
    worst_pred: np.ndarray
    worst_gt: np.ndarray

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_rel_error <= tol

    def to_dict(self) -> dict:
        return {
            "loss": self.kind.value,
            "samples": self.samples,
            "max_rel_error": self.max_rel_error,
            "mean_rel_error": self.mean_rel_error,
            "kink_skipped": self.kink_skipped,
            "worst_pred": self.worst_pred.tolist(),
            "worst_gt": self.worst_gt.tolist(),
        }


def kink_distance(pred, gt):
    """Smallest gap to any tie where a loss stops being differentiable.

    Covers edge ties between the boxes, zero overlap extents, zero center
    offsets and equal widths/heights.
    """
    p, g = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    px1, px2 = p[..., 0] - p[..., 2] / 2, p[..., 0] + p[..., 2] / 2
    py1, py2 = p[..., 1] - p[..., 3] / 2, p[..., 1] + p[..., 3] / 2
    gx1, gx2 = g[..., 0] - g[..., 2] / 2, g[..., 0] + g[..., 2] / 2
    gy1, gy2 = g[..., 1] - g[..., 3] / 2, g[..., 1] + g[..., 3] / 2
    gaps = np.stack([
        px1 - gx1, px2 - gx2, py1 - gy1, py2 - gy2,
        px2 - gx1, gx2 - px1, py2 - gy1, gy2 - py1,
        g[..., 0] - p[..., 0], g[..., 1] - p[..., 1],
        p[..., 2] - g[..., 2], p[..., 3] - g[..., 3],
    ])
    return np.abs(gaps).min(axis=0)


def sample_smooth_pairs(rng, n, min_gap=1e-3, center_range=2.0, size_range=(0.25, 3.0)):
    """Draw ``n`` random (pred, gt) pairs whose kink distance exceeds ``min_gap``.

    Returns ``(pred, gt, skipped)`` where ``skipped`` counts rejected draws.
    """
    preds, gts, skipped, have = [], [], 0, 0
    while have < n:
        m = max(2 * (n - have), 16)
        c = rng.uniform(-center_range, center_range, size=(2, m, 2))
        s = rng.uniform(*size_range, size=(2, m, 2))
        p = np.concatenate([c[0], s[0]], axis=1)
        g = np.concatenate([c[1], s[1]], axis=1)
        ok = kink_distance(p, g) > min_gap
        skipped += int((~ok).sum())
        preds.append(p[ok])
        gts.append(g[ok])
        have += int(ok.sum())
    return np.concatenate(preds)[:n], np.concatenate(gts)[:n], skipped


def check_gradients(kind, pred, gt, params: SiouParams = SiouParams(), h: float = 1e-6,
                    kink_skipped: int = 0) -> GradCheckReport:
    """Compare :func:`grad` and :func:`grad_fd` on arrays of pairs.

    Relative error is ``|analytic - fd| / max(1, |analytic|)`` per component.
    """
    kind = LossKind.parse(kind)
    a = grad(kind, pred, gt, params)
    f = grad_fd(kind, pred, gt, params, h)
    rel = np.abs(a - f) / np.maximum(1.0, np.abs(a))
    per_pair = rel.max(axis=-1)
    worst = int(np.argmax(per_pair))
    return GradCheckReport(
        kind=kind,
        samples=len(per_pair),
        max_rel_error=float(per_pair[worst]),
        mean_rel_error=float(rel.mean()),
        kink_skipped=kink_skipped,
        worst_pred=np.asarray(pred)[worst],
        worst_gt=np.asarray(gt)[worst],
    )
