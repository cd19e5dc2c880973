"""Planar geometry used by the simulator: rectangles, segments and ray casts."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np


class Rect(NamedTuple):
    x0: float
    y0: float
    x1: float
    y1: float

    @classmethod
    def around(cls, cx: float, cy: float, w: float, h: float) -> "Rect":
        return cls(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        return (self.x0 - margin <= x <= self.x1 + margin
                and self.y0 - margin <= y <= self.y1 + margin)

    def contains_rect(self, other: "Rect") -> bool:
        return (self.x0 <= other.x0 and other.x1 <= self.x1
                and self.y0 <= other.y0 and other.y1 <= self.y1)

    def overlaps(self, other: "Rect") -> bool:
        return (self.x0 < other.x1 and other.x0 < self.x1
                and self.y0 < other.y1 and other.y0 < self.y1)

    def distance_to_point(self, x: float, y: float) -> float:
        dx = max(self.x0 - x, 0.0, x - self.x1)
        dy = max(self.y0 - y, 0.0, y - self.y1)
        return math.hypot(dx, dy)

    def moved_to(self, cx: float, cy: float) -> "Rect":
        return Rect.around(cx, cy, self.width, self.height)

    def half_diagonal(self) -> float:
        return math.hypot(self.width, self.height) / 2


def _point_segment_distance(px, py, ax, ay, bx, by) -> float:
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    t = 0.0 if denom == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / denom))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def segment_intersects_rect(a: tuple[float, float], b: tuple[float, float], r: Rect) -> bool:
    return bool(segments_hit_rects(np.array([a]), np.array([b]), np.array([r]))[0, 0])


def segment_rect_distance(a: tuple[float, float], b: tuple[float, float], r: Rect) -> float:
    if segment_intersects_rect(a, b, r):
        return 0.0
    d = min(r.distance_to_point(*a), r.distance_to_point(*b))
    for cx, cy in ((r.x0, r.y0), (r.x0, r.y1), (r.x1, r.y0), (r.x1, r.y1)):
        d = min(d, _point_segment_distance(cx, cy, a[0], a[1], b[0], b[1]))
    return d


def _slab(origins: np.ndarray, dirs: np.ndarray, rects: np.ndarray):
    """Entry/exit parameters of lines ``o + t d`` against boxes, shape (M, N)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        ox = origins[:, 0:1]
        oy = origins[:, 1:2]
        tx1 = (rects[None, :, 0] - ox) * inv[:, 0:1]
        tx2 = (rects[None, :, 2] - ox) * inv[:, 0:1]
        ty1 = (rects[None, :, 1] - oy) * inv[:, 1:2]
        ty2 = (rects[None, :, 3] - oy) * inv[:, 1:2]
    # zero direction component: inside the slab -> (-inf, inf), outside -> empty
    zx = dirs[:, 0:1] == 0
    zy = dirs[:, 1:2] == 0
    inside_x = (rects[None, :, 0] <= ox) & (ox <= rects[None, :, 2])
    inside_y = (rects[None, :, 1] <= oy) & (oy <= rects[None, :, 3])
    lox = np.where(zx, np.where(inside_x, -np.inf, np.inf), np.minimum(tx1, tx2))
    hix = np.where(zx, np.where(inside_x, np.inf, -np.inf), np.maximum(tx1, tx2))
    loy = np.where(zy, np.where(inside_y, -np.inf, np.inf), np.minimum(ty1, ty2))
    hiy = np.where(zy, np.where(inside_y, np.inf, -np.inf), np.maximum(ty1, ty2))
    return np.maximum(lox, loy), np.minimum(hix, hiy)


def segments_hit_rects(starts: np.ndarray, ends: np.ndarray, rects: np.ndarray) -> np.ndarray:
    """Boolean (M, N): does segment m cross (or touch) rectangle n."""
    if len(rects) == 0 or len(starts) == 0:
        return np.zeros((len(starts), len(rects)), dtype=bool)
    starts = np.asarray(starts, dtype=float)
    d = np.asarray(ends, dtype=float) - starts
    tmin, tmax = _slab(starts, d, np.asarray(rects, dtype=float))
    return (tmin <= tmax) & (tmax >= 0.0) & (tmin <= 1.0)


def cast_rays(origin: tuple[float, float], angles_deg: Sequence[float], rects: np.ndarray,
              room: Rect, max_range: float) -> np.ndarray:
    """Distance along each ray to the first rectangle or the room boundary."""
    ang = np.radians(np.asarray(angles_deg, dtype=float))
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    dirs[np.abs(dirs) < 1e-12] = 0.0
    origins = np.repeat(np.asarray([origin], dtype=float), len(ang), axis=0)
    _, room_exit = _slab(origins, dirs, np.asarray([room], dtype=float))
    best = np.minimum(room_exit[:, 0], max_range)
    if len(rects):
        tmin, tmax = _slab(origins, dirs, np.asarray(rects, dtype=float))
        hit = (tmin <= tmax) & (tmax >= 0.0)
        t = np.where(hit, np.maximum(tmin, 0.0), np.inf)
        best = np.minimum(best, t.min(axis=1))
    return np.maximum(best, 0.0)


def angle_diff(a: float, b: float) -> float:
    """Signed smallest difference ``a - b`` in degrees, in (-180, 180]."""
    d = (a - b) % 360.0
    return d - 360.0 if d > 180.0 else d


def bearing(dx: float, dy: float) -> float:
    return math.degrees(math.atan2(dy, dx)) % 360.0
