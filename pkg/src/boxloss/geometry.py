"""Axis-aligned boxes and the overlap primitives shared by every loss.

Boxes are stored as ``(cx, cy, w, h)``. Functions accept either a
:class:`Box2D` or an array of shape ``(..., 4)``; a pair of :class:`Box2D`
inputs yields plain floats, arrays yield arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

__all__ = [
    "Box2D",
    "Enclosure",
    "area",
    "as_array",
    "corners",
    "intersection_area",
    "union_area",
    "iou",
    "enclosing",
]


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned box given by its center and size."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"box fields must be finite, got {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box width and height must be positive, got w={self.w}, h={self.h}")

    @classmethod
    def from_array(cls, arr) -> "Box2D":
        cx, cy, w, h = (float(v) for v in np.asarray(arr, dtype=np.float64).reshape(4))
        return cls(cx, cy, w, h)

    def to_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=np.float64)

    @property
    def area(self) -> float:
        return self.w * self.h


class Enclosure(NamedTuple):
    """Width and height of the smallest box containing two boxes."""

    cw: float
    ch: float


BoxLike = Union[Box2D, np.ndarray]


def as_array(box) -> np.ndarray:
    """Return ``box`` as a float64 array with trailing dimension 4."""
    if isinstance(box, Box2D):
        return box.to_array()
    arr = np.asarray(box, dtype=np.float64)
    if arr.shape[-1:] != (4,):
        raise ValueError(f"expected trailing dimension 4, got shape {arr.shape}")
    return arr


def _scalar_out(a, b, value):
    if isinstance(a, Box2D) and isinstance(b, Box2D):
        return float(value)
    return value


def corners(box) -> tuple:
    """Split boxes into ``(x1, y1, x2, y2)`` edge arrays."""
    b = as_array(box)
    cx, cy, w, h = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2


def area(box):
    b = as_array(box)
    out = b[..., 2] * b[..., 3]
    return float(out) if isinstance(box, Box2D) else out


def _overlap_extents(a, b):
    ax1, ay1, ax2, ay2 = corners(a)
    bx1, by1, bx2, by2 = corners(b)
    iw = np.maximum(np.minimum(ax2, bx2) - np.maximum(ax1, bx1), 0.0)
    ih = np.maximum(np.minimum(ay2, by2) - np.maximum(ay1, by1), 0.0)
    return iw, ih


def intersection_area(a: BoxLike, b: BoxLike):
    """Area of ``a ∩ b``; exactly 0 for disjoint or edge-touching boxes."""
    iw, ih = _overlap_extents(a, b)
    return _scalar_out(a, b, iw * ih)


def union_area(a: BoxLike, b: BoxLike):
    ax1, ay1, ax2, ay2 = corners(a)
    bx1, by1, bx2, by2 = corners(b)
    inter = intersection_area(as_array(a), as_array(b))
    out = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return _scalar_out(a, b, out)


def iou(a: BoxLike, b: BoxLike):
    """Intersection over union of two boxes, in ``[0, 1]``.

    Examples:
        >>> iou(Box2D(0, 0, 2, 2), Box2D(1, 0, 2, 2))
        0.3333333333333333
    """
    ax1, ay1, ax2, ay2 = corners(a)
    bx1, by1, bx2, by2 = corners(b)
    iw = np.maximum(np.minimum(ax2, bx2) - np.maximum(ax1, bx1), 0.0)
    ih = np.maximum(np.minimum(ay2, by2) - np.maximum(ay1, by1), 0.0)
    inter = iw * ih
    # areas from the same rounded edges, so identical boxes give exactly 1
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return _scalar_out(a, b, inter / union)


def enclosing(a: BoxLike, b: BoxLike):
    """Width and height of the smallest axis-aligned box covering both inputs."""
    ax1, ay1, ax2, ay2 = corners(a)
    bx1, by1, bx2, by2 = corners(b)
    cw = np.maximum(ax2, bx2) - np.minimum(ax1, bx1)
    ch = np.maximum(ay2, by2) - np.minimum(ay1, by1)
    if isinstance(a, Box2D) and isinstance(b, Box2D):
        return Enclosure(float(cw), float(ch))
    return Enclosure(cw, ch)
