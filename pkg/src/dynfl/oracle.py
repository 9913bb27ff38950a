"""Exact offline optimum for the clients active at the end of a stream.

Facilities may open only at client locations, opening cost 1 each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .harness import Instance
from .metric import MetricSpace

UNCAP_LIMIT = 20
CAP_LIMIT = 14


class OracleLimitError(ValueError):
    """Instance too large for exhaustive search; use ``opt_bounds`` instead."""


@dataclass
class OfflineInstance:
    clients: list[int]
    locations: list[int]
    metric: MetricSpace
    upsilon: int | None = None

    @property
    def n(self) -> int:
        return len(self.clients)

    def distances(self) -> np.ndarray:
        loc = np.asarray(self.locations, dtype=np.int64)
        if len(loc) == 0:
            return np.zeros((0, 0))
        return np.asarray(self.metric.cross(loc, loc), dtype=float)

    @classmethod
    def from_instance(cls, inst: Instance, upsilon: int | None = None) -> OfflineInstance:
        active = inst.stream.final_active()
        return cls(list(active), list(active.values()), inst.metric, upsilon)


@dataclass
class Solution:
    cost: float
    facilities: list[int]
    assignment: dict[int, int]


def _bits(mask: int, n: int) -> list[int]:
    return [i for i in range(n) if mask >> i & 1]


def _witness(inst: OfflineInstance, idx: list[int], assign_idx) -> Solution:
    d = inst.distances()
    assignment = {inst.clients[c]: inst.clients[f] for c, f in enumerate(assign_idx)}
    conn = math.fsum(d[c, f] for c, f in enumerate(assign_idx))
    return Solution(len(idx) + conn, [inst.clients[i] for i in idx], assignment)


def opt_uncap(inst: OfflineInstance) -> Solution:
    """Minimise |F| + sum of nearest-facility distances over non-empty F.

    Subsets are scanned in chunks: the low bits enumerate every pattern once,
    the high bits are iterated, and nearest distances combine by minimum.
    Ties go to the smallest subset bitmask.
    """
    n = inst.n
    if n < 1:
        raise ValueError("offline instance has no clients")
    if n > UNCAP_LIMIT:
        raise OracleLimitError(f"{n} clients exceed the exhaustive limit {UNCAP_LIMIT}; use bounds")
    d = inst.distances()
    lo_bits = min(n, 12)
    hi_bits = n - lo_bits
    lo_masks = np.arange(1 << lo_bits)
    # nearest distance from each client to the low-bit facilities of each mask
    lo_near = np.full((1 << lo_bits, n), np.inf)
    for b in range(lo_bits):
        has = (lo_masks >> b & 1).astype(bool)
        lo_near[has] = np.minimum(lo_near[has], d[b])
    lo_count = np.array([bin(m).count("1") for m in range(1 << lo_bits)])
    best_cost, best_mask = math.inf, -1
    for hi in range(1 << hi_bits):
        hi_near = np.full(n, np.inf)
        hi_idx = [lo_bits + b for b in range(hi_bits) if hi >> b & 1]
        for f in hi_idx:
            hi_near = np.minimum(hi_near, d[f])
        near = np.minimum(lo_near, hi_near)
        cost = lo_count + len(hi_idx) + near.sum(axis=1)
        if hi == 0:
            cost[0] = np.inf
        i = int(np.argmin(cost))
        # bitmask order: hi dominates, so the first strict improvement wins ties
        if cost[i] < best_cost - 1e-12:
            best_cost, best_mask = float(cost[i]), (hi << lo_bits) | i
    idx = _bits(best_mask, n)
    assign = [idx[int(np.argmin(d[c, idx]))] for c in range(n)]
    return _witness(inst, idx, assign)


def capacitated_assignment(d: np.ndarray, facilities: list[int], upsilon: int):
    """Cheapest assignment of all clients to ``facilities`` with at most ``upsilon``
    clients per facility (each facility serving itself); None if infeasible."""
    n = d.shape[0]
    if len(facilities) * upsilon < n:
        return None
    # every client takes one facility slot; replicate each facility upsilon times
    cols = np.repeat(np.asarray(facilities), upsilon)
    cost = d[:, cols]
    # a facility must serve itself: forbid its own point from any other slot family
    big = cost.max() * (n + 1) + n + 1
    for f in facilities:
        cost[f, cols != f] += big
    rows, picked = linear_sum_assignment(cost)
    assign = [int(cols[p]) for p in picked[np.argsort(rows)]]
    total = float(d[np.arange(n), assign].sum())
    if any(assign[f] != f for f in facilities):
        return None  # pragma: no cover - a facility always reaches itself at cost 0
    return total, assign


def opt_cap(inst: OfflineInstance, upsilon: int | None = None) -> Solution:
    """Capacitated optimum: every subset with |F| >= ceil(n/upsilon), each solved
    as a minimum-cost assignment of clients to replicated facility slots."""
    upsilon = upsilon if upsilon is not None else inst.upsilon
    if upsilon is None or upsilon < 1:
        raise ValueError("opt_cap needs upsilon >= 1")
    n = inst.n
    if n < 1:
        raise ValueError("offline instance has no clients")
    if n > CAP_LIMIT:
        raise OracleLimitError(f"{n} clients exceed the exhaustive limit {CAP_LIMIT}; use bounds")
    d = inst.distances()
    need = -(-n // upsilon)
    best = (math.inf, None, None)
    for mask in range(1, 1 << n):
        size = bin(mask).count("1")
        if size < need or size >= best[0]:
            continue
        idx = _bits(mask, n)
        got = capacitated_assignment(d, idx, upsilon)
        if got is None:
            continue
        cost = size + got[0]
        if cost < best[0] - 1e-12:
            best = (cost, idx, got[1])
    return _witness(inst, best[1], best[2])


def opt_bounds(inst: OfflineInstance, upsilon: int | None = None) -> tuple[float, float]:
    """(lower, upper) on the optimum at any size.

    Lower: max of 1, ceil(n/upsilon) when capacitated, and the sum over clients
    of min(1, distance to the nearest other client).  Upper: greedily open the
    first unserved client and give it its nearest unserved clients closer than
    1, up to capacity.
    """
    upsilon = upsilon if upsilon is not None else inst.upsilon
    n = inst.n
    if n < 1:
        raise ValueError("offline instance has no clients")
    if n == 1:
        return 1.0, 1.0
    d = inst.distances()
    off = d + np.diag(np.full(n, np.inf))
    # each client either opens (cost 1) or pays at least its nearest other client
    conn_lb = float(np.minimum(off.min(axis=1), 1.0).sum())
    lower = max(1.0, conn_lb)
    if upsilon is not None:
        lower = max(lower, float(-(-n // upsilon)))
    cap = upsilon if upsilon is not None else n
    served = np.zeros(n, dtype=bool)
    upper = 0.0
    for f in range(n):
        if served[f]:
            continue
        served[f] = True
        upper += 1.0
        free = np.flatnonzero(~served)
        if len(free) == 0 or cap <= 1:
            continue
        order = free[np.argsort(d[f, free], kind="stable")]
        take = [c for c in order[: cap - 1] if d[f, c] < 1.0]
        served[take] = True
        upper += float(d[f, take].sum())
    return lower, upper
