"""Random 2-HST embedding of a normalized metric.

Edge lengths are fixed by depth: the edge between depth i and i+1 has length
2^-i and every leaf sits at depth h, so the distance between two leaves only
depends on the depth j of their lowest common ancestor::

    dist_T = 2^(2-j) - 2^(2-h)

The tree is built by random hierarchical ball carving (random permutation of
centers, one radius multiplier beta ~ U[1, 2) shared by all levels).  Level j
clusters come from balls of radius beta * 2^-(j+1), so a depth-j cluster has
diameter below 2^(1-j) <= dist_T(j): the tree dominates the metric by
construction.  At depth h the radius is below 2^-h <= 1/upsilon, the minimum
normalized distance, so every leaf holds exactly one point.
"""

from __future__ import annotations

import json
import math
from functools import cached_property

import numpy as np

from .metric import TOL, NormalizedMetric

MAX_RETRIES = 8


def tree_depth(upsilon: int) -> int:
    """h = max(1, ceil(log2 upsilon))."""
    return max(1, (int(upsilon) - 1).bit_length())


def level_distance(j: int, h: int) -> float:
    """Tree distance between two leaves whose LCA has depth j."""
    if j >= h:
        return 0.0
    return 2.0 ** (2 - j) - 2.0 ** (2 - h)


class Hst:
    """Immutable tree: ``anc[p, j]`` is the depth-j ancestor of point p's leaf."""

    def __init__(self, anc: np.ndarray, parent: np.ndarray, depth: np.ndarray, h: int, seed=None):
        self.anc = anc
        self.parent = parent
        self.depth = depth
        self.h = h
        self.seed = seed
        for arr in (anc, parent, depth):
            arr.setflags(write=False)
        self.level_dist = tuple(level_distance(j, h) for j in range(h + 1))

    @property
    def n_points(self) -> int:
        return self.anc.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.parent.shape[0]

    def leaf_of(self, p: int) -> int:
        return int(self.anc[p, self.h])

    @cached_property
    def anc_rows(self) -> list[tuple[int, ...]]:
        """Ancestor chains as Python tuples, for scalar lookups in hot loops."""
        return [tuple(int(x) for x in row) for row in self.anc]

    def lca_depth(self, u: int, v: int) -> int:
        self._check(u)
        self._check(v)
        a, b = self.anc_rows[u], self.anc_rows[v]
        j = 0
        while j < self.h and a[j + 1] == b[j + 1]:
            j += 1
        return j

    def lca_depths(self, u: int, points: np.ndarray) -> np.ndarray:
        """Vectorised LCA depth of u against each point (h when equal)."""
        return (self.anc[points] == self.anc[u]).sum(axis=1) - 1

    def _check(self, p):
        if not 0 <= p < self.n_points:
            raise KeyError(f"unknown point {p}")

    def children(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for node, par in enumerate(self.parent):
            if par >= 0:
                out.setdefault(int(par), []).append(node)
        return out

    def to_json(self) -> dict:
        """Nested dump: every node with its depth, children and (for leaves) point id."""
        kids = self.children()
        point_at = {int(self.anc[p, self.h]): p for p in range(self.n_points)}

        def node(x):
            out = {"id": x, "depth": int(self.depth[x])}
            if x in point_at:
                out["point"] = point_at[x]
            if x in kids:
                out["children"] = [node(c) for c in kids[x]]
            return out

        return {"h": self.h, "root": node(0)}

    def to_text(self) -> str:
        kids = self.children()
        point_at = {int(self.anc[p, self.h]): p for p in range(self.n_points)}
        lines = []
        stack = [0]
        while stack:
            x = stack.pop()
            label = f"point {point_at[x]}" if x in point_at else f"node {x}"
            lines.append("  " * int(self.depth[x]) + label)
            stack.extend(reversed(kids.get(x, [])))
        return "\n".join(lines)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _carve(metric, h: int, rng: np.random.Generator):
    n = metric.n
    rank = rng.permutation(n)
    beta = rng.uniform(1.0, 2.0)
    anc = np.zeros((n, h + 1), dtype=np.int64)
    parent = [-1]
    depth = [0]
    labels = np.zeros(n, dtype=np.int64)
    for j in range(1, h + 1):
        center = metric.ball_first(rank, beta * 2.0 ** -(j + 1))
        keys, inv = np.unique(labels * n + center, return_inverse=True)
        first = len(parent)
        parent.extend((keys // n).tolist())
        depth.extend([j] * len(keys))
        labels = first + inv.reshape(-1)
        anc[:, j] = labels
    return anc, np.asarray(parent, dtype=np.int64), np.asarray(depth, dtype=np.int64)


def _dominates(metric, anc: np.ndarray, h: int) -> bool:
    # leaves must be singletons; each depth-j cluster must fit inside dist_T(j)
    if len(np.unique(anc[:, h])) != anc.shape[0]:
        return False
    for j in range(h):
        order = np.argsort(anc[:, j], kind="stable")
        labels = anc[order, j]
        cuts = np.flatnonzero(np.diff(labels)) + 1
        bound = level_distance(j, h) + TOL
        for group in np.split(order, cuts):
            if len(group) > 1 and metric.cluster_diameter(group) > bound:
                return False
    return True


def build_hst(m: NormalizedMetric, seed=0) -> Hst:
    """Sample a dominating 2-HST of depth ceil(log2 upsilon) over ``m``.

    A tree that fails the dominance check is rebuilt from a derived sub-seed;
    after MAX_RETRIES failures a RuntimeError is raised.
    """
    h = tree_depth(m.upsilon)
    metric = m.base
    for attempt in range(MAX_RETRIES):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), attempt]))
        anc, parent, depth = _carve(metric, h, rng)
        if _dominates(metric, anc, h):
            return Hst(anc, parent, depth, h, seed=seed)
    raise RuntimeError(f"no dominating HST after {MAX_RETRIES} attempts")


def tree_dist(t: Hst, u: int, v: int) -> float:
    if u == v:
        t._check(u)
        return 0.0
    return t.level_dist[t.lca_depth(u, v)]


def bucket(t: Hst, u: int, v: int) -> int:
    """Depth of the LCA of two distinct points, in [0, h-1]."""
    if u == v:
        raise ValueError("bucket is undefined for a point and itself")
    return t.lca_depth(u, v)


def distlog_floor(t: Hst, u: int, v: int) -> int:
    """floor(-log2 dist_T(u, v)); kept to audit against ``bucket``."""
    if u == v:
        raise ValueError("distlog is undefined for a point and itself")
    return math.floor(-math.log2(tree_dist(t, u, v)))
