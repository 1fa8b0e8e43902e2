"""SIoU box loss, its IoU-family baselines, and their gradients.

All losses are functions of a predicted box and a fixed ground-truth box,
both ``(cx, cy, w, h)``. Gradients are taken with respect to the four
predicted parameters only.

Subgradient conventions at non-differentiable points:

* ``d|u|/du`` at ``u == 0`` is 0,
* ``d max(u, v)`` (and ``min``) at a tie splits 1/2 to each argument,

which makes ``pred == gt`` a stationary point of every loss here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .geometry import Box2D, as_array

__all__ = [
    "LossKind",
    "SiouParams",
    "LossBreakdown",
    "Grad4",
    "LossEval",
    "angle_cost",
    "distance_cost",
    "shape_cost",
    "siou_loss",
    "baseline_loss",
    "loss",
    "loss_and_grad",
    "grad",
    "grad_fd",
    "THETA_BOUNDS",
    "GRAD_EPS",
]

THETA_BOUNDS = (2.0, 6.0)
GRAD_EPS = 1e-6
CH_MODES = ("enclosing", "center-offset")

_FOUR_OVER_PI2 = 4.0 / math.pi**2


class LossKind(str, enum.Enum):
    IOU = "iou"
    GIOU = "giou"
    DIOU = "diou"
    CIOU = "ciou"
    SIOU = "siou"

    @classmethod
    def parse(cls, value) -> "LossKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown loss kind {value!r}; expected one of {choices}") from None

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SiouParams:
    """Knobs of the SIoU loss.

    Attributes:
        theta: shape-cost exponent, restricted to ``[2, 6]``.
        ch_mode: denominator of the vertical distance ratio. ``"enclosing"``
            uses the enclosing-box height; ``"center-offset"`` uses the
            absolute vertical center offset, which pins that ratio to 1
            whenever the centers differ vertically.
    """

    theta: float = 4.0
    ch_mode: str = "enclosing"

    def __post_init__(self):
        lo, hi = THETA_BOUNDS
        if not (lo <= self.theta <= hi):
            raise ValueError(f"theta must lie in [{lo}, {hi}], got {self.theta}")
        if self.ch_mode not in CH_MODES:
            raise ValueError(f"ch_mode must be one of {CH_MODES}, got {self.ch_mode!r}")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-component SIoU record; fields are floats or equally-shaped arrays."""

    iou: float
    angle_cost: float
    distance_cost: float
    shape_cost: float
    total: float


@dataclass(frozen=True)
class Grad4:
    d_cx: float
    d_cy: float
    d_w: float
    d_h: float
    # True when a subgradient convention was needed (tie in max/min, |.| at 0).
    at_kink: bool = False

    def to_array(self) -> np.ndarray:
        return np.array([self.d_cx, self.d_cy, self.d_w, self.d_h])


class LossEval(NamedTuple):
    value: np.ndarray
    grad: Optional[np.ndarray]  # shape (4, ...) in (cx, cy, w, h) order
    kink: Optional[np.ndarray]
    ciou_alpha: Optional[np.ndarray]


def _half_step(u):
    """Derivative of max(u, 0): 1 above, 0 below, 1/2 at the tie."""
    return 0.5 * (1.0 + np.sign(u))


def _unpack(box):
    b = as_array(box)
    return b[..., 0], b[..., 1], b[..., 2], b[..., 3]


# ---------------------------------------------------------------------------
# components (value only)


def _angle(dx, dy):
    adx, ady = np.abs(dx), np.abs(dy)
    sigma = np.hypot(dx, dy)
    safe = np.where(sigma > 0, sigma, 1.0)
    # sine of the angle to the nearest axis: keeps arcsin away from 1 where it
    # is ill-conditioned; the cost is symmetric under swapping the axes.
    minor = np.minimum(adx, ady)
    x = np.clip(minor / safe, 0.0, 1.0)
    lam = 1.0 - 2.0 * np.sin(np.arcsin(x) - math.pi / 4) ** 2
    # sin^2(-pi/4) rounds to 0.5 + 1e-16; on-axis offsets are exactly 0
    return np.where(minor > 0, lam, 0.0)


def _distance(dx, dy, cw, ch_den, lam):
    gamma = 2.0 - lam
    rho_x = (dx / cw) ** 2
    rho_y = _rho_y(dy, ch_den)
    return (1.0 - np.exp(-gamma * rho_x)) + (1.0 - np.exp(-gamma * rho_y))


def _rho_y(dy, ch_den):
    safe = np.where(ch_den > 0, ch_den, 1.0)
    return np.where(ch_den > 0, (dy / safe) ** 2, 0.0)


def _shape(w, h, wg, hg, theta):
    om_w = np.abs(w - wg) / np.maximum(w, wg)
    om_h = np.abs(h - hg) / np.maximum(h, hg)
    return (1.0 - np.exp(-om_w)) ** theta + (1.0 - np.exp(-om_h)) ** theta


def _scalar_pair(pred, gt):
    return isinstance(pred, Box2D) and isinstance(gt, Box2D)


def _out(pred, gt, value):
    return float(value) if _scalar_pair(pred, gt) else value


def angle_cost(pred, gt):
    """Angle cost: 0 when the centers share an axis, 1 on the diagonal.

    Analytically equal to ``sin(2 * alpha)`` where ``alpha`` is the angle of the
    center-to-center vector to the horizontal axis. Coincident centers give 0.
    """
    x, y, _, _ = _unpack(pred)
    xg, yg, _, _ = _unpack(gt)
    return _out(pred, gt, _angle(xg - x, yg - y))


def _ch_denominator(dy, ch, ch_mode):
    return ch if ch_mode == "enclosing" else np.abs(dy)


def distance_cost(pred, gt, angle, ch_mode: str = "enclosing"):
    """Distance cost, center offsets normalized by the enclosing box.

    ``angle`` is the angle cost of the same pair; the exponent is ``2 - angle``.
    """
    x, y, w, h = _unpack(pred)
    xg, yg, wg, hg = _unpack(gt)
    cw = np.maximum(x + w / 2, xg + wg / 2) - np.minimum(x - w / 2, xg - wg / 2)
    ch = np.maximum(y + h / 2, yg + hg / 2) - np.minimum(y - h / 2, yg - hg / 2)
    dx, dy = xg - x, yg - y
    return _out(pred, gt, _distance(dx, dy, cw, _ch_denominator(dy, ch, ch_mode), angle))


def shape_cost(pred, gt, params: SiouParams = SiouParams()):
    _, _, w, h = _unpack(pred)
    _, _, wg, hg = _unpack(gt)
    return _out(pred, gt, _shape(w, h, wg, hg, params.theta))


# ---------------------------------------------------------------------------
# combined kernel


def _kernel(kind, x, y, w, h, xg, yg, wg, hg, params, need_grad=True, ciou_alpha=None):
    """Loss value (and gradient rows) for arrays of box parameters."""
    px1, px2 = x - w / 2, x + w / 2
    py1, py2 = y - h / 2, y + h / 2
    gx1, gx2 = xg - wg / 2, xg + wg / 2
    gy1, gy2 = yg - hg / 2, yg + hg / 2

    iw_raw = np.minimum(px2, gx2) - np.maximum(px1, gx1)
    ih_raw = np.minimum(py2, gy2) - np.maximum(py1, gy1)
    iw = np.maximum(iw_raw, 0.0)
    ih = np.maximum(ih_raw, 0.0)
    inter = iw * ih
    # areas from the rounded edges keep IoU exactly 1 for identical boxes
    pw, ph = px2 - px1, py2 - py1
    a_sum = pw * ph + (gx2 - gx1) * (gy2 - gy1)
    union = a_sum - inter
    iou = inter / union

    need_enclosure = kind is not LossKind.IOU
    if need_enclosure:
        cw = np.maximum(px2, gx2) - np.minimum(px1, gx1)
        ch = np.maximum(py2, gy2) - np.minimum(py1, gy1)
    dx, dy = xg - x, yg - y

    alpha = None
    parts = {}
    if kind is LossKind.IOU:
        value = 1.0 - iou
    elif kind is LossKind.GIOU:
        c_area = cw * ch
        value = 1.0 - iou + (c_area - union) / c_area
    elif kind in (LossKind.DIOU, LossKind.CIOU):
        sig2 = dx * dx + dy * dy
        d2 = cw * cw + ch * ch
        value = 1.0 - iou + sig2 / d2
        if kind is LossKind.CIOU:
            atan_diff = np.arctan(wg / hg) - np.arctan(w / h)
            v = _FOUR_OVER_PI2 * atan_diff**2
            if ciou_alpha is None:
                den = (1.0 - iou) + v
                alpha = np.where(den > 0, v / np.where(den > 0, den, 1.0), 0.0)
            else:
                alpha = np.asarray(ciou_alpha, dtype=np.float64)
            value = value + alpha * v
    else:
        lam = _angle(dx, dy)
        ch_den = _ch_denominator(dy, ch, params.ch_mode)
        gamma = 2.0 - lam
        rho_x = (dx / cw) ** 2
        rho_y = _rho_y(dy, ch_den)
        ex = np.exp(-gamma * rho_x)
        ey = np.exp(-gamma * rho_y)
        dist = (1.0 - ex) + (1.0 - ey)
        om_w = np.abs(w - wg) / np.maximum(w, wg)
        om_h = np.abs(h - hg) / np.maximum(h, hg)
        sw = 1.0 - np.exp(-om_w)
        sh = 1.0 - np.exp(-om_h)
        theta = params.theta
        shape = sw**theta + sh**theta
        value = 1.0 - iou + (dist + shape) / 2.0
        parts = dict(iou=iou, angle_cost=lam, distance_cost=dist, shape_cost=shape)

    if not need_grad:
        return value, None, None, alpha, parts

    # d(inter) through the clipped overlap extents
    fw = _half_step(iw_raw)
    fh = _half_step(ih_raw)
    diw_dp2 = fw * _half_step(gx2 - px2)
    diw_dp1 = -fw * _half_step(px1 - gx1)
    dih_dp2 = fh * _half_step(gy2 - py2)
    dih_dp1 = -fh * _half_step(py1 - gy1)
    dI_x = ih * (diw_dp1 + diw_dp2)
    dI_w = ih * (diw_dp2 - diw_dp1) / 2.0
    dI_y = iw * (dih_dp1 + dih_dp2)
    dI_h = iw * (dih_dp2 - dih_dp1) / 2.0

    u2 = union * union
    g_x = -(dI_x * a_sum) / u2
    g_y = -(dI_y * a_sum) / u2
    g_w = -(dI_w * a_sum - inter * ph) / u2
    g_h = -(dI_h * a_sum - inter * pw) / u2

    kink = (
        (px1 == gx1) | (px2 == gx2) | (py1 == gy1) | (py2 == gy2)
        | (iw_raw == 0) | (ih_raw == 0)
    )

    if need_enclosure:
        dcw_p2 = _half_step(px2 - gx2)
        dcw_p1 = -_half_step(gx1 - px1)
        dch_p2 = _half_step(py2 - gy2)
        dch_p1 = -_half_step(gy1 - py1)
        dcw_x = dcw_p1 + dcw_p2
        dcw_w = (dcw_p2 - dcw_p1) / 2.0
        dch_y = dch_p1 + dch_p2
        dch_h = (dch_p2 - dch_p1) / 2.0

    if kind is LossKind.GIOU:
        # penalty = 1 - union / c_area
        c2 = c_area * c_area
        dU_x, dU_y = -dI_x, -dI_y
        dU_w, dU_h = ph - dI_w, pw - dI_h
        dC_x, dC_w = dcw_x * ch, dcw_w * ch
        dC_y, dC_h = cw * dch_y, cw * dch_h
        g_x = g_x - (dU_x * c_area - union * dC_x) / c2
        g_y = g_y - (dU_y * c_area - union * dC_y) / c2
        g_w = g_w - (dU_w * c_area - union * dC_w) / c2
        g_h = g_h - (dU_h * c_area - union * dC_h) / c2
    elif kind in (LossKind.DIOU, LossKind.CIOU):
        d4 = d2 * d2
        g_x = g_x + (-2.0 * dx * d2 - sig2 * 2.0 * cw * dcw_x) / d4
        g_y = g_y + (-2.0 * dy * d2 - sig2 * 2.0 * ch * dch_y) / d4
        g_w = g_w - sig2 * 2.0 * cw * dcw_w / d4
        g_h = g_h - sig2 * 2.0 * ch * dch_h / d4
        if kind is LossKind.CIOU:
            # alpha is held constant
            k = 2.0 * _FOUR_OVER_PI2 * atan_diff / (w * w + h * h)
            g_w = g_w - alpha * k * h
            g_h = g_h + alpha * k * w
    elif kind is LossKind.SIOU:
        adx, ady = np.abs(dx), np.abs(dy)
        sig2 = dx * dx + dy * dy
        s4 = np.where(sig2 > 0, sig2 * sig2, 1.0)
        # lam = 2|dx||dy| / sigma^2, differentiated w.r.t. pred (d dx / d x = -1)
        dlam_x = np.where(sig2 > 0, -2.0 * np.sign(dx) * ady * (ady * ady - adx * adx) / s4, 0.0)
        dlam_y = np.where(sig2 > 0, -2.0 * np.sign(dy) * adx * (adx * adx - ady * ady) / s4, 0.0)

        drx_x = 2.0 * (dx / cw) * (-1.0 / cw - dx * dcw_x / (cw * cw))
        drx_w = -2.0 * dx * dx * dcw_w / (cw * cw * cw)
        if params.ch_mode == "enclosing":
            dry_y = 2.0 * (dy / ch) * (-1.0 / ch - dy * dch_y / (ch * ch))
            dry_h = -2.0 * dy * dy * dch_h / (ch * ch * ch)
        else:
            dry_y = dry_h = 0.0
        # d dist = sum_t e_t (gamma d rho_t - rho_t d lam)
        rho_e = rho_x * ex + rho_y * ey
        gd_x = ex * gamma * drx_x - rho_e * dlam_x
        gd_y = ey * gamma * dry_y - rho_e * dlam_y
        gd_w = ex * gamma * drx_w
        gd_h = ey * gamma * dry_h

        dsw = theta * sw ** (theta - 1.0) * (1.0 - sw)
        dsh = theta * sh ** (theta - 1.0) * (1.0 - sh)
        dom_w = np.where(w > wg, wg / (w * w), np.where(w < wg, -1.0 / wg, 0.0))
        dom_h = np.where(h > hg, hg / (h * h), np.where(h < hg, -1.0 / hg, 0.0))

        g_x = g_x + gd_x / 2.0
        g_y = g_y + gd_y / 2.0
        g_w = g_w + (gd_w + dsw * dom_w) / 2.0
        g_h = g_h + (gd_h + dsh * dom_h) / 2.0
        kink = kink | (dx == 0) | (dy == 0) | (w == wg) | (h == hg)

    grad_rows = np.stack(np.broadcast_arrays(g_x, g_y, g_w, g_h))
    return value, grad_rows, kink, alpha, parts


def loss_and_grad(kind, pred, gt, params: SiouParams = SiouParams(), *, need_grad=True, ciou_alpha=None) -> LossEval:
    """Vectorized loss evaluation.

    Args:
        kind: a :class:`LossKind` or its string tag.
        pred, gt: arrays of shape ``(..., 4)`` (broadcastable) or boxes.
        params: SIoU parameters, ignored by the baselines.
        need_grad: skip the gradient when False.
        ciou_alpha: freeze the CIoU trade-off factor at these values instead of
            recomputing it from ``pred``.

    Returns:
        :class:`LossEval` with ``grad`` of shape ``(4, ...)`` ordered
        ``(cx, cy, w, h)``.
    """
    kind = LossKind.parse(kind)
    value, g, kink, alpha, _ = _kernel(kind, *_unpack(pred), *_unpack(gt), params, need_grad, ciou_alpha)
    return LossEval(value, g, kink, alpha)


def loss(kind, pred, gt, params: SiouParams = SiouParams(), *, ciou_alpha=None):
    """Scalar loss of any kind."""
    value = loss_and_grad(kind, pred, gt, params, need_grad=False, ciou_alpha=ciou_alpha).value
    return _out(pred, gt, value)


def siou_loss(pred, gt, params: SiouParams = SiouParams()) -> LossBreakdown:
    """SIoU loss with its components.

    ``total == 1 - iou + (distance_cost + shape_cost) / 2``.
    """
    value, _, _, _, parts = _kernel(LossKind.SIOU, *_unpack(pred), *_unpack(gt), params, need_grad=False)
    if _scalar_pair(pred, gt):
        return LossBreakdown(total=float(value), **{k: float(v) for k, v in parts.items()})
    return LossBreakdown(total=value, **parts)


def baseline_loss(kind, pred, gt):
    """IoU, GIoU, DIoU or CIoU loss (plain CIoU trade-off factor, no IoU gating)."""
    kind = LossKind.parse(kind)
    if kind is LossKind.SIOU:
        raise ValueError("baseline_loss covers the IoU/GIoU/DIoU/CIoU baselines; use siou_loss")
    return loss(kind, pred, gt)


def _check_size(pred, eps):
    _, _, w, h = _unpack(pred)
    if np.any(w <= eps) or np.any(h <= eps):
        raise ValueError(f"predicted width and height must exceed {eps}")


def grad(kind, pred, gt, params: SiouParams = SiouParams()):
    """Analytic gradient with respect to ``pred``.

    Returns a :class:`Grad4` for a pair of boxes, or an array of shape
    ``(..., 4)`` for array input.
    """
    _check_size(pred, GRAD_EPS)
    ev = loss_and_grad(kind, pred, gt, params)
    if _scalar_pair(pred, gt):
        g = ev.grad
        return Grad4(float(g[0]), float(g[1]), float(g[2]), float(g[3]), at_kink=bool(ev.kink))
    return np.moveaxis(ev.grad, 0, -1)


def grad_fd(kind, pred, gt, params: SiouParams = SiouParams(), h: float = 1e-6, *, fn=None):
    """Central-difference gradient of the loss with respect to ``pred``.

    For CIoU the trade-off factor is frozen at ``pred``, matching the
    objective whose analytic gradient :func:`grad` returns. ``fn`` replaces the
    loss with any ``fn(pred_array) -> value`` callable.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    p = as_array(pred)
    g = as_array(gt)
    if fn is None:
        _check_size(p, 2 * h)
        kind = LossKind.parse(kind)
        alpha = None
        if kind is LossKind.CIOU:
            alpha = loss_and_grad(kind, p, g, need_grad=False).ciou_alpha

        def fn(q):
            return loss_and_grad(kind, q, g, params, need_grad=False, ciou_alpha=alpha).value

    out = np.empty(np.broadcast_shapes(p.shape, g.shape))
    for i in range(4):
        step = np.zeros(4)
        step[i] = h
        out[..., i] = (fn(p + step) - fn(p - step)) / (2 * h)
    if _scalar_pair(pred, gt):
        return Grad4(*(float(v) for v in out))
    return out
