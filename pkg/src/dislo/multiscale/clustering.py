"""Jump clustering for one-dimensional characteristic functions.

Going from fine to coarse levels, jumps closer than ``2**-h`` form clusters.
An odd cluster collapses to its leftmost point and an even one disappears,
so the function outside the cluster hulls is unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class JumpSet1D:
    """Sorted jump points of a ``{0, 1}``-valued function on an interval.

    Parameters
    ----------
    points : tuple of float
        Strictly increasing jump locations inside ``interval``.
    left_value : int
        Value to the left of the first jump.
    interval : tuple of float
    """

    points: tuple
    left_value: int = 0
    interval: tuple = (-1.0, 1.0)

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("jump points must be strictly increasing")
        a, b = self.interval
        if pts and (pts[0] <= a or pts[-1] >= b):
            raise ValueError("jump points must lie inside the interval")
        if self.left_value not in (0, 1):
            raise ValueError("left_value must be 0 or 1")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def value(self, x):
        """Characteristic function at ``x`` (right-continuous)."""
        x = np.asarray(x, dtype=float)
        cnt = np.searchsorted(np.asarray(self.points), x, side="right")
        return (self.left_value + cnt) % 2

    def with_points(self, points):
        return JumpSet1D(tuple(points), self.left_value, self.interval)


def clusters(points, gap):
    """Maximal runs of consecutive points with spacing ``< gap``."""
    out = []
    for p in points:
        if out and p - out[-1][-1] < gap:
            out[-1].append(p)
        else:
            out.append([p])
    return out


def _reduce(points, gap):
    kept = []
    for c in clusters(points, gap):
        if len(c) % 2:
            kept.append(c[0])
    return tuple(kept)


@dataclass(frozen=True)
class ClusterLevel:
    h: int
    jumps: JumpSet1D
    critical: bool
    drift: float


def l1_distance(a, b):
    """Exact ``L1`` distance of two characteristic functions on the same interval."""
    lo, hi = a.interval
    pts = sorted(set(a.points) | set(b.points) | {lo, hi})
    total = []
    for x0, x1 in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (x0 + x1)
        if a.value(mid) != b.value(mid):
            total.append(x1 - x0)
    return math.fsum(total)


def cluster_1d(jumps, k, h_min=0):
    """Run the clustering from level ``k`` down to ``h_min``.

    Level ``h`` clusters the jumps of level ``h + 1`` (level ``k + 1`` holds
    the input) with gap threshold ``2**-h``.

    Returns
    -------
    list of ClusterLevel
        Ordered by decreasing ``h``.
    """
    prev = jumps
    out = []
    for h in range(int(k), int(h_min) - 1, -1):
        cur = prev.with_points(_reduce(prev.points, 2.0**-h))
        out.append(ClusterLevel(h, cur, cur.points != prev.points, l1_distance(cur, prev)))
        prev = cur
    return out


def is_isolated(points, h):
    return all(b - a >= 2.0**-h for a, b in zip(points, points[1:]))


def good_levels(levels, m, k):
    """Levels ``h`` in ``[1, k]`` such that ``h, ..., h + m - 1`` are not critical.

    Levels above ``k`` never change the jump set and count as non-critical.
    """
    crit = {lv.h for lv in levels if lv.critical}
    return [h for h in range(1, int(k) + 1) if not any(h + j in crit for j in range(int(m)))]
