"""Pareto dominance, NSGA-II sorting/crowding, hypervolume and the archive.

All functions assume minimisation. Points are plain sequences of floats or
objects exposing ``.vector`` (see :class:`modedse.dse.Individual`).
"""

from __future__ import annotations

import bisect
import math
from typing import Sequence

import numpy as np


def _vec(p) -> tuple:
    return tuple(p.vector) if hasattr(p, "vector") else tuple(p)


def dominates(a, b) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and better somewhere."""
    a, b = _vec(a), _vec(b)
    better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def dominance_matrix(points) -> np.ndarray:
    """``D[i, j]`` is True iff point i dominates point j."""
    P = np.asarray([_vec(p) for p in points], dtype=float)
    if P.size == 0:
        return np.zeros((0, 0), dtype=bool)
    le = (P[:, None, :] <= P[None, :, :]).all(axis=2)
    lt = (P[:, None, :] < P[None, :, :]).any(axis=2)
    return le & lt


def nondominated_sort(points) -> list[list[int]]:
    """Fast nondominated sorting; returns fronts as lists of indices."""
    n = len(points)
    if n == 0:
        return []
    D = dominance_matrix(points)
    dominated_by = D.sum(axis=0)
    fronts = []
    current = [i for i in range(n) if dominated_by[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in np.flatnonzero(D[i]):
                dominated_by[j] -= 1
                if dominated_by[j] == 0:
                    nxt.append(int(j))
        current = sorted(nxt)
    return fronts


def crowding_distance(front) -> list[float]:
    """Crowding distance of each member of ``front`` (same order).

    Boundary members of every objective get ``inf``; objectives with zero
    range add nothing to interior members.
    """
    n = len(front)
    if n == 0:
        return []
    P = [_vec(p) for p in front]
    dist = [0.0] * n
    for m in range(len(P[0])):
        idx = sorted(range(n), key=lambda i: (P[i][m], i))
        dist[idx[0]] = math.inf
        dist[idx[-1]] = math.inf
        span = P[idx[-1]][m] - P[idx[0]][m]
        if span <= 0:
            continue
        for k in range(1, n - 1):
            i = idx[k]
            if dist[i] != math.inf:
                dist[i] += (P[idx[k + 1]][m] - P[idx[k - 1]][m]) / span
    return dist


# --------------------------------------------------------------------------- hypervolume


def _hv2(points, ref) -> float:
    pts = sorted(points)
    vol = 0.0
    best_y = ref[1]
    for i, (x, y) in enumerate(pts):
        best_y = min(best_y, y)
        nx = pts[i + 1][0] if i + 1 < len(pts) else ref[0]
        vol += (nx - x) * (ref[1] - best_y)
    return vol


class _Staircase:
    """Incrementally maintained 2-D nondominated set and its dominated area."""

    def __init__(self, ref):
        self.rx, self.ry = ref
        self.xs: list[float] = []
        self.ys: list[float] = []
        self.area = 0.0

    def _area_of(self, lo, hi):
        # area contributed by steps lo..hi-1 (each up to the next x or ref)
        a = 0.0
        for k in range(lo, hi):
            nx = self.xs[k + 1] if k + 1 < len(self.xs) else self.rx
            a += (nx - self.xs[k]) * (self.ry - self.ys[k])
        return a

    def add(self, x, y):
        xs, ys = self.xs, self.ys
        k = bisect.bisect_left(xs, x)
        if (k > 0 and ys[k - 1] <= y) or (k < len(xs) and xs[k] == x and ys[k] <= y):
            return  # weakly dominated by a point already on the staircase
        # points at or after k with y >= new y are dominated by the new point
        end = k
        while end < len(xs) and ys[end] >= y:
            end += 1
        lo = max(k - 1, 0)
        before = self._area_of(lo, min(end + 1, len(xs)))
        del xs[k:end]
        del ys[k:end]
        xs.insert(k, x)
        ys.insert(k, y)
        after_hi = min(k + 2, len(xs))
        self.area += self._area_of(lo, after_hi) - before


def _hv3(points, ref) -> float:
    pts = sorted(points, key=lambda p: p[2])
    stair = _Staircase(ref[:2])
    vol = 0.0
    for i, p in enumerate(pts):
        stair.add(p[0], p[1])
        nz = pts[i + 1][2] if i + 1 < len(pts) else ref[2]
        if nz > p[2]:
            vol += stair.area * (nz - p[2])
    return vol


def _hv(points, ref) -> float:
    if not points:
        return 0.0
    d = len(ref)
    if d == 1:
        return ref[0] - min(p[0] for p in points)
    if d == 2:
        return _hv2(points, ref)
    if d == 3:
        return _hv3(points, ref)
    pts = sorted(points, key=lambda p: p[-1])
    vol = 0.0
    for i, p in enumerate(pts):
        nz = pts[i + 1][-1] if i + 1 < len(pts) else ref[-1]
        if nz > p[-1]:
            vol += _hv([q[:-1] for q in pts[: i + 1]], ref[:-1]) * (nz - p[-1])
    return vol


def hypervolume(points, ref: Sequence[float]) -> float:
    """Exact volume dominated by ``points`` and bounded by ``ref``.

    Points not strictly better than ``ref`` in every objective add nothing.
    """
    ref = tuple(float(r) for r in ref)
    pts = [tuple(float(v) for v in _vec(p)) for p in points]
    pts = [p for p in pts if all(v < r for v, r in zip(p, ref))]
    if not pts:
        return 0.0
    front = nondominated_sort(pts)[0]
    return _hv([pts[i] for i in front], ref)


# --------------------------------------------------------------------------- archive


class ParetoArchive:
    """Mutually nondominated set of evaluated individuals.

    A candidate is rejected if an entry dominates it or has an identical
    objective vector; otherwise it enters and evicts every entry it
    dominates. With a ``capacity`` the most crowded entry is dropped on
    overflow.
    """

    def __init__(self, capacity: int | None = None):
        self.capacity = capacity
        self.entries: list = []
        self.stats: dict = {}

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def add(self, individual) -> bool:
        v = _vec(individual)
        for e in self.entries:
            ev = _vec(e)
            if ev == v or dominates(ev, v):
                return False
        self.entries = [e for e in self.entries if not dominates(v, e)]
        self.entries.append(individual)
        if self.capacity is not None and len(self.entries) > self.capacity:
            dist = crowding_distance(self.entries)
            drop = min(range(len(dist)), key=lambda i: (dist[i], -i))
            del self.entries[drop]
        return True

    def update(self, individuals) -> int:
        return sum(self.add(ind) for ind in individuals)

    def vectors(self) -> list[tuple]:
        return [_vec(e) for e in self.entries]

    def is_mutually_nondominated(self) -> bool:
        vs = self.vectors()
        return not any(dominates(a, b) for a in vs for b in vs if a is not b)
