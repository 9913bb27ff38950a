"""Finite metric spaces.

Two concrete representations share one interface: a dense distance matrix
(`MatrixMetric`) and a closed-form star (`StarMetric`).  The star is kept
structured because the adversarial capacitated instances use ~10^4 leaves,
where a dense matrix and an O(N^3) triangle check are not affordable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TOL = 1e-9


class MetricError(ValueError):
    """A distance matrix violates one of the metric axioms."""


class MetricSpace:
    """Points are the dense integer ids ``0..n-1``."""

    n: int

    def dist(self, a: int, b: int) -> float:
        raise NotImplementedError

    def dists_from(self, a: int, points: np.ndarray) -> np.ndarray:
        """Distances from ``a`` to every id in ``points`` (vectorised)."""
        raise NotImplementedError

    def cross(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Distance block between point arrays ``a`` (rows) and ``b`` (columns)."""
        raise NotImplementedError

    def matrix(self) -> np.ndarray:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def min_distance(self) -> float:
        """Smallest distance between distinct points (inf if n == 1)."""
        raise NotImplementedError

    def ball_first(self, rank: np.ndarray, radius: float) -> np.ndarray:
        """For each point x, the point of smallest ``rank`` within ``radius`` of x."""
        raise NotImplementedError

    def cluster_diameter(self, points: np.ndarray) -> float:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def __len__(self) -> int:
        return self.n


class MatrixMetric(MetricSpace):
    def __init__(self, d: np.ndarray):
        self._d = d
        self._d.setflags(write=False)
        self.n = d.shape[0]

    @property
    def d(self) -> np.ndarray:
        return self._d

    def dist(self, a, b):
        return float(self._d[a, b])

    def dists_from(self, a, points):
        return self._d[a, points]

    def cross(self, a, b):
        return self._d[np.ix_(a, b)]

    def matrix(self):
        return self._d

    def diameter(self):
        return float(self._d.max()) if self.n > 1 else 0.0

    def min_distance(self):
        if self.n < 2:
            return math.inf
        off = self._d[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    def ball_first(self, rank, radius):
        out = np.empty(self.n, dtype=np.int64)
        order = np.argsort(rank)
        # chunk rows so the boolean mask stays small
        step = max(1, 2_000_000 // max(self.n, 1))
        ranked = self._d[:, order]
        for lo in range(0, self.n, step):
            inside = ranked[lo:lo + step] <= radius
            out[lo:lo + step] = order[inside.argmax(axis=1)]
        return out

    def cluster_diameter(self, points):
        if len(points) < 2:
            return 0.0
        return float(self._d[np.ix_(points, points)].max())

    def to_json(self):
        return {"n": self.n, "dist": self._d.tolist()}

    def __eq__(self, other):
        return isinstance(other, MatrixMetric) and np.array_equal(self._d, other._d)

    def __repr__(self):
        return f"MatrixMetric(n={self.n})"


class StarMetric(MetricSpace):
    """Center at index 0; leaves ``1..k`` at ``radius`` from it, ``leaf_dist`` apart."""

    def __init__(self, k: int, radius: float, leaf_dist: float | None = None):
        if k < 0:
            raise ValueError("k must be non-negative")
        if leaf_dist is None:
            leaf_dist = 2.0 * radius
        if radius < 0 or leaf_dist < 0:
            raise MetricError("negative distance in star metric")
        if k >= 2 and leaf_dist > 2.0 * radius + TOL:
            raise MetricError(
                f"triangle violation at (1,0,2): leaf distance {leaf_dist} > 2*{radius}"
            )
        self.k = k
        self.radius = float(radius)
        self.leaf_dist = float(leaf_dist)
        self.n = k + 1

    def dist(self, a, b):
        if a == b:
            return 0.0
        if a == 0 or b == 0:
            return self.radius
        return self.leaf_dist

    def dists_from(self, a, points):
        points = np.asarray(points)
        if a == 0:
            return np.where(points == 0, 0.0, self.radius)
        return np.where(points == a, 0.0, np.where(points == 0, self.radius, self.leaf_dist))

    def cross(self, a, b):
        a = np.asarray(a)[:, None]
        b = np.asarray(b)[None, :]
        d = np.where((a == 0) | (b == 0), self.radius, self.leaf_dist)
        return np.where(a == b, 0.0, d)

    def matrix(self):
        d = np.full((self.n, self.n), self.leaf_dist)
        d[0, :] = d[:, 0] = self.radius
        np.fill_diagonal(d, 0.0)
        return d

    def diameter(self):
        if self.k == 0:
            return 0.0
        return max(self.radius, self.leaf_dist) if self.k >= 2 else self.radius

    def min_distance(self):
        if self.k == 0:
            return math.inf
        return min(self.radius, self.leaf_dist) if self.k >= 2 else self.radius

    def ball_first(self, rank, radius):
        rank = np.asarray(rank)
        idx = np.arange(self.n)
        best = idx.copy()
        best_rank = rank.copy()
        if self.k == 0:
            return best
        if self.radius <= radius:
            # every leaf sees the center; the center sees every leaf
            lower = rank[0] < best_rank
            lower[0] = False
            best[lower] = 0
            best_rank[lower] = rank[0]
            leaf = 1 + int(np.argmin(rank[1:]))
            if rank[leaf] < best_rank[0]:
                best[0] = leaf
                best_rank[0] = rank[leaf]
        if self.k >= 2 and self.leaf_dist <= radius:
            leaf = 1 + int(np.argmin(rank[1:]))
            lower = rank[leaf] < best_rank
            lower[0] = False
            best[lower] = leaf
            best_rank[lower] = rank[leaf]
        return best

    def cluster_diameter(self, points):
        points = np.unique(points)
        if len(points) < 2:
            return 0.0
        leaves = int((points != 0).sum())
        out = self.radius if points[0] == 0 else 0.0
        if leaves >= 2:
            out = max(out, self.leaf_dist)
        return out

    def to_json(self):
        out = {"k": self.k, "eps": self.radius}
        if self.leaf_dist != 2.0 * self.radius:
            out["leaf_dist"] = self.leaf_dist
        return {"star": out}

    def __eq__(self, other):
        return (
            isinstance(other, StarMetric)
            and (self.k, self.radius, self.leaf_dist) == (other.k, other.radius, other.leaf_dist)
        )

    def __repr__(self):
        return f"StarMetric(k={self.k}, radius={self.radius}, leaf_dist={self.leaf_dist})"


@dataclass(frozen=True)
class NormalizedMetric:
    """Diameter 1 and every distinct-pair distance in ``[1/upsilon, 1]``."""

    base: MetricSpace
    upsilon: int

    @property
    def floor(self) -> float:
        return 1.0 / self.upsilon

    @property
    def n(self) -> int:
        return self.base.n


def validate(matrix, tol: float = TOL) -> MatrixMetric:
    """Check the metric axioms and wrap the matrix.

    Raises MetricError naming the first violated axiom and its indices.
    """
    d = np.array(matrix, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise MetricError(f"distance matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    if n < 1:
        raise MetricError("metric needs at least one point")
    if not np.all(np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        raise MetricError(f"non-finite distance at ({i},{j})")
    if (d < 0).any():
        i, j = np.argwhere(d < 0)[0]
        raise MetricError(f"negative distance at ({i},{j})")
    diag = np.abs(np.diag(d)) > tol
    if diag.any():
        i = int(np.argmax(diag))
        raise MetricError(f"non-zero self distance at ({i},{i})")
    asym = np.abs(d - d.T) > tol
    if asym.any():
        i, j = np.argwhere(asym)[0]
        raise MetricError(f"asymmetry at ({i},{j}): {d[i, j]} != {d[j, i]}")
    for a in range(n):
        # bad[b, c]: dist(a,c) > dist(a,b) + dist(b,c)
        bad = d[a][None, :] > d[a][:, None] + d + tol
        if bad.any():
            b, c = np.argwhere(bad)[0]
            raise MetricError(
                f"triangle violation at ({a},{b},{c}): "
                f"dist({a},{c})={d[a, c]} > dist({a},{b})+dist({b},{c})={d[a, b] + d[b, c]}"
            )
    np.fill_diagonal(d, 0.0)
    return MatrixMetric(d)


def star_metric(k: int, eps: float) -> StarMetric:
    if k < 1:
        raise ValueError("star metric needs k >= 1 leaves")
    if not eps > 0:
        raise ValueError("star radius must be positive")
    return StarMetric(k, eps)


def normalize(m: MetricSpace, upsilon: int) -> NormalizedMetric:
    """Scale to diameter 1, then raise distinct-pair distances below 1/upsilon to it."""
    if upsilon < 1:
        raise ValueError("upsilon must be a positive integer")
    if isinstance(m, NormalizedMetric):
        m = m.base
    if m.n < 2:
        return NormalizedMetric(m, upsilon)
    floor = 1.0 / upsilon
    diam = m.diameter()
    if isinstance(m, StarMetric):
        out = StarMetric(
            m.k,
            max(m.radius / diam, floor),
            max(m.leaf_dist / diam, floor),
        )
        return NormalizedMetric(out, upsilon)
    d = m.matrix() / diam
    off = ~np.eye(m.n, dtype=bool)
    d[off] = np.maximum(d[off], floor)
    try:
        return NormalizedMetric(validate(d), upsilon)
    except MetricError as exc:  # pragma: no cover - clamping to a floor <= diameter keeps the axioms
        raise MetricError(f"normalisation broke the metric: {exc}") from exc


def metric_from_json(obj: dict) -> MetricSpace:
    """Accepts ``{"n": N, "dist": [[...]]}`` or ``{"star": {"k": K, "eps": E}}``."""
    if "star" in obj:
        s = obj["star"]
        return StarMetric(int(s["k"]), float(s["eps"]), s.get("leaf_dist"))
    if "dist" in obj:
        m = validate(obj["dist"])
        if "n" in obj and int(obj["n"]) != m.n:
            raise MetricError(f"declared n={obj['n']} but matrix has {m.n} rows")
        return m
    raise MetricError("metric JSON needs either 'dist' or 'star'")


def load_metric(path: str | Path) -> MetricSpace:
    with open(path) as fh:
        return metric_from_json(json.load(fh))
