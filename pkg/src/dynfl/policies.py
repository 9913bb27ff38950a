"""Online facility location policies for fully dynamic client streams.

Every policy owns a `SolutionState` and reacts to ``on_insert`` / ``on_delete``.
Deleting an open facility closes it and re-processes its clients (a cascade)
in their original assignment order unless configured otherwise.

Policy ids:

    m       Meyerson's algorithm (insertions only)
    mstar   Meyerson with re-insertion of orphaned clients
    alg1    flip only when the new distance more than doubles p_x
    capm    Meyerson restricted to unsaturated facilities (insertions only)
    naive   alg1 with the flip probability floored at 10/upsilon (negative control)
    alg2    capacitated fully dynamic algorithm on an HST, per-bucket capacities

Coin flips with probability <= 0 are not flips (no RNG draw, nothing logged);
flips with probability >= 1 are logged as heads without an RNG draw.  Every
other flip consumes exactly one ``rng.random()``.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_left, insort
from itertools import groupby
from dataclasses import dataclass, field, fields

import numpy as np

from .hst import Hst
from .metric import MetricSpace

ALGORITHMS = ("m", "mstar", "alg1", "capm", "naive", "alg2")
CAPACITATED = frozenset({"capm", "naive", "alg2"})
INSERTION_ONLY = frozenset({"m", "capm"})
REASSIGN_ORDERS = ("fifo", "lifo", "random")


def bucket_capacity(upsilon: int, h: int) -> int:
    """Per-bucket capacity floor(upsilon/h) of an Algorithm 2 facility."""
    return upsilon // h


def alg2_probability(dist_t: float, h: int, q: int, upsilon: int, boost: float = 12.0) -> float:
    """min(1, dist_T + boost * h * ln(q) / upsilon)."""
    return min(1.0, dist_t + boost * h * math.log(q) / upsilon)


class UnsupportedEvent(ValueError):
    """The policy cannot process this kind of event (e.g. a delete for an insertion-only policy)."""


class UnknownClient(KeyError):
    pass


@dataclass(frozen=True, slots=True)
class Event:
    kind: str  # "ins" or "del"
    client: int
    location: int | None = None

    def to_json(self) -> dict:
        if self.kind == "ins":
            return {"op": "ins", "id": self.client, "at": self.location}
        return {"op": "del", "id": self.client}

    @classmethod
    def from_json(cls, obj: dict) -> Event:
        if obj["op"] == "ins":
            return cls("ins", int(obj["id"]), int(obj["at"]))
        if obj["op"] == "del":
            return cls("del", int(obj["id"]))
        raise ValueError(f"unknown event op {obj['op']!r}")


@dataclass
class PolicyConfig:
    algorithm: str
    upsilon: int | None = None
    q: int | None = None
    reassign: str = "fifo"
    # multiplier of h*ln(q)/upsilon in Algorithm 2's flip probability
    boost: float = 12.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.reassign not in REASSIGN_ORDERS:
            raise ValueError(f"reassign must be one of {REASSIGN_ORDERS}")
        if self.algorithm in CAPACITATED:
            if self.upsilon is None or int(self.upsilon) != self.upsilon or self.upsilon < 1:
                raise ValueError(f"{self.algorithm} needs a positive integer capacity upsilon")
            if self.algorithm == "alg2" and self.upsilon < 2:
                raise ValueError("alg2 needs upsilon >= 2")


@dataclass
class Counters:
    requests: int = 0
    flips: int = 0
    openings: int = 0
    closings: int = 0
    connections: int = 0
    cascades: int = 0
    max_cascade: int = 0
    reassigned: int = 0
    unavailable: int = 0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SolutionState:
    location: dict[int, int] = field(default_factory=dict)
    assigned: dict[int, int] = field(default_factory=dict)
    # facility -> external clients, in assignment order
    clients_of: dict[int, dict[int, None]] = field(default_factory=dict)
    # connection distance of each client in the cost metric (0 for facilities)
    conn: dict[int, float] = field(default_factory=dict)
    # p_x (alg1, naive) or max_v (alg2)
    memory: dict[int, float] = field(default_factory=dict)
    residual: dict[int, int] = field(default_factory=dict)
    caps: dict[int, list[int]] = field(default_factory=dict)
    bucket_of: dict[int, int] = field(default_factory=dict)
    connection_cost: float = 0.0

    @property
    def facilities(self):
        return self.clients_of.keys()

    def snapshot(self) -> dict:
        return {
            "facilities": sorted(self.clients_of),
            "assigned": dict(sorted(self.assigned.items())),
            "residual": dict(sorted(self.residual.items())),
            "caps": {f: list(c) for f, c in sorted(self.caps.items())},
        }


class NearestIndex:
    """Eligible facilities grouped by location; nearest queries break ties by smallest id."""

    CACHE_LIMIT = 512

    def __init__(self, metric: MetricSpace):
        self.metric = metric
        self.members: set[int] = set()
        self._by_loc: dict[int, list[int]] = {}
        self._locs = np.zeros(16, dtype=np.int64)
        self._reps = np.zeros(16, dtype=np.int64)
        self._slot: dict[int, int] = {}
        self._size = 0
        self._cache: dict[int, tuple[int, float] | None] = {}
        # distinct points at distance 0 would defeat the co-location shortcut
        self._shortcut = metric.n < 2 or metric.min_distance() > 0

    def __contains__(self, fid):
        return fid in self.members

    def __len__(self):
        return len(self.members)

    def add(self, fid: int, loc: int):
        self._cache_add(fid, loc)
        self.members.add(fid)
        fids = self._by_loc.get(loc)
        if fids is not None:
            insort(fids, fid)
            if fids[0] == fid:
                self._reps[self._slot[loc]] = fid
            return
        self._by_loc[loc] = [fid]
        if self._size == len(self._locs):
            self._locs = np.concatenate([self._locs, np.zeros_like(self._locs)])
            self._reps = np.concatenate([self._reps, np.zeros_like(self._reps)])
        self._locs[self._size] = loc
        self._reps[self._size] = fid
        self._slot[loc] = self._size
        self._size += 1

    def remove(self, fid: int, loc: int):
        self.members.remove(fid)
        fids = self._by_loc[loc]
        i = bisect_left(fids, fid)
        del fids[i]
        if fids:
            if i == 0:
                self._reps[self._slot[loc]] = fids[0]
            self._cache_remove(fid)
            return
        del self._by_loc[loc]
        s = self._slot.pop(loc)
        last = self._size - 1
        if s != last:
            moved = int(self._locs[last])
            self._locs[s] = moved
            self._reps[s] = self._reps[last]
            self._slot[moved] = s
        self._size = last
        self._cache_remove(fid)

    def _cache_remove(self, fid):
        # answers that pointed at fid are recomputed together in one batch
        cache = self._cache
        stale = [q for q, hit in cache.items() if hit is not None and hit[0] == fid]
        if not stale:
            return
        if self._size == 0:
            cache.update(dict.fromkeys(stale))
            return
        locs = self._locs[: self._size]
        reps = self._reps[: self._size]
        d = self.metric.cross(np.array(stale), locs)
        best = d.min(axis=1)
        who = np.where(d == best[:, None], reps, np.iinfo(np.int64).max).min(axis=1)
        cache.update(zip(stale, zip(who.tolist(), best.tolist())))

    def _cache_add(self, fid, loc):
        # a new facility can only take over cached answers; patch them in place
        cache = self._cache
        if not cache:
            return
        if len(cache) > self.CACHE_LIMIT:
            cache.clear()
            return
        qs = list(cache)
        ds = self.metric.dists_from(loc, np.array(qs)).tolist()
        for q, d in zip(qs, ds):
            hit = cache[q]
            if hit is None or d < hit[1] or (d == hit[1] and fid < hit[0]):
                cache[q] = (fid, d)

    def nearest(self, loc: int) -> tuple[int, float] | None:
        try:
            return self._cache[loc]
        except KeyError:
            pass
        fids = self._by_loc.get(loc)
        if fids and self._shortcut:
            out = (fids[0], 0.0)
        elif self._size == 0:
            out = None
        else:
            d = self.metric.dists_from(loc, self._locs[: self._size])
            i = int(np.argmin(d))
            ties = np.flatnonzero(d == d[i])
            if len(ties) > 1:
                i = int(ties[np.argmin(self._reps[ties])])
            out = (int(self._reps[i]), float(d[i]))
        self._cache[loc] = out
        return out


class Policy:
    name = ""
    insertion_only = False
    # orphans co-located with an open facility reconnect without randomness
    colocated_fast_path = False

    def __init__(self, metric: MetricSpace, config: PolicyConfig, rng: random.Random,
                 cost_metric: MetricSpace | None = None):
        self.metric = metric
        self.cost_metric = cost_metric if cost_metric is not None else metric
        self.config = config
        self.rng = rng
        self.state = SolutionState()
        self.counters = Counters()
        # the harness points this at the current event's op list (None: counters only)
        self.ops: list | None = None

    # -- events -------------------------------------------------------------

    def on_insert(self, client: int, location: int):
        st = self.state
        if client in st.location:
            raise ValueError(f"client {client} is already active")
        if not 0 <= location < self.metric.n:
            raise ValueError(f"location {location} is not a metric point")
        st.location[client] = location
        self._request(client)

    def on_delete(self, client: int):
        if self.insertion_only:
            raise UnsupportedEvent(f"policy {self.name} handles insertions only")
        st = self.state
        if client not in st.location:
            raise UnknownClient(client)
        if self.ops is not None:
            self.ops.append(("remove", client))
        orphans = None
        if st.assigned[client] == client:
            orphans = list(st.clients_of[client])
            self._close(client)
        else:
            self._detach(client)
        del st.location[client]
        del st.assigned[client]
        del st.conn[client]
        st.memory.pop(client, None)
        if orphans:
            self._cascade(orphans)

    # -- shared machinery ---------------------------------------------------

    def _cascade(self, orphans: list[int]):
        c = self.counters
        c.cascades += 1
        c.reassigned += len(orphans)
        if len(orphans) > c.max_cascade:
            c.max_cascade = len(orphans)
        if self.ops is not None:
            self.ops.append(("cascade", len(orphans)))
        order = self.config.reassign
        if order == "lifo":
            orphans.reverse()
        elif order == "random":
            self.rng.shuffle(orphans)
        if self.colocated_fast_path:
            self._reassign_runs(orphans)
        else:
            for x in orphans:
                self._request(x)

    def _reassign_runs(self, orphans: list[int]):
        loc = self.state.location
        i = 0
        for here, group in groupby(map(loc.__getitem__, orphans)):
            end = i + len(list(group))
            while i < end:
                near = self.index.nearest(here)
                if near is not None and near[1] == 0.0:
                    self._attach_run(orphans[i:end], near[0])
                    i = end
                else:
                    self._request(orphans[i])
                    i += 1

    def _attach_run(self, run: list[int], f: int):
        # same outcome as requesting each client in turn: distance 0, no flip
        st = self.state
        st.assigned.update(dict.fromkeys(run, f))
        st.clients_of[f].update(dict.fromkeys(run))
        zero = self.cost_metric is self.metric
        if zero:
            st.conn.update(dict.fromkeys(run, 0.0))
        else:
            lf = st.location[f]
            for x in run:
                c = self.cost_metric.dist(st.location[x], lf)
                st.conn[x] = c
                st.connection_cost += c
        self._remember_run(run)
        self.counters.requests += len(run)
        self.counters.connections += len(run)
        if self.ops is not None:
            for x in run:
                self.ops.append(("request", x))
                self.ops.append(("connect", x, f, 0.0))

    def _remember_run(self, run):
        pass

    def _request(self, x: int):
        self.counters.requests += 1
        if self.ops is not None:
            self.ops.append(("request", x))
        self._decide(x)

    def _decide(self, x: int):
        raise NotImplementedError

    def _flip(self, x: int, p: float) -> bool:
        if p <= 0.0:
            return False
        heads = p >= 1.0 or self.rng.random() < p
        self.counters.flips += 1
        if self.ops is not None:
            self.ops.append(("flip", x, p, heads))
        return heads

    def _open(self, x: int):
        st = self.state
        st.assigned[x] = x
        st.clients_of[x] = {}
        st.conn[x] = 0.0
        self.counters.openings += 1
        if self.ops is not None:
            self.ops.append(("open", x, st.location[x]))

    def _attach(self, x: int, f: int, d: float):
        st = self.state
        st.assigned[x] = f
        st.clients_of[f][x] = None
        if self.cost_metric is self.metric:
            c = d
        else:
            c = self.cost_metric.dist(st.location[x], st.location[f])
        st.conn[x] = c
        st.connection_cost += c
        self.counters.connections += 1
        if self.ops is not None:
            self.ops.append(("connect", x, f, d))

    def _detach(self, x: int):
        st = self.state
        f = st.assigned[x]
        del st.clients_of[f][x]
        st.connection_cost -= st.conn[x]

    def _close(self, f: int):
        st = self.state
        orphans = st.clients_of.pop(f)
        conn = st.conn
        st.connection_cost -= math.fsum(map(conn.__getitem__, orphans))
        self.counters.closings += 1
        if self.ops is not None:
            self.ops.append(("close", f))

    # -- invariants ---------------------------------------------------------

    def violations(self, focus=None) -> list[str]:
        """Broken state invariants, restricted to ``focus`` ids when given."""
        st = self.state
        out = []
        if focus is None:
            clients = list(st.location)
            facs = list(st.clients_of)
        else:
            clients = [x for x in focus if x in st.location]
            facs = [x for x in focus if x in st.clients_of]
            facs += [st.assigned[x] for x in clients if x in st.assigned]
        for x in clients:
            f = st.assigned.get(x)
            if f is None or f not in st.clients_of:
                out.append(f"client {x} is not assigned to an open facility")
            elif f != x and x not in st.clients_of[f]:
                out.append(f"client {x} missing from facility {f}'s client list")
            if x in st.clients_of and f != x:
                out.append(f"facility {x} is not assigned to itself")
        for f in set(facs):
            if f not in st.location:
                out.append(f"facility {f} is not an active client")
                continue
            for x in st.clients_of[f]:
                if st.assigned.get(x) != f:
                    out.append(f"facility {f} lists client {x} assigned elsewhere")
        for x in clients:
            f = st.assigned.get(x)
            if f is not None and f in st.location:
                want = self.cost_metric.dist(st.location[x], st.location[f])
                if abs(st.conn.get(x, math.nan) - want) > 1e-9:
                    out.append(f"client {x} connection distance out of date")
        if focus is None:
            total = math.fsum(st.conn.values())
            if abs(total - st.connection_cost) > 1e-7 * max(1.0, total):
                out.append(f"connection cost drift: {st.connection_cost} vs {total}")
        return out


class _Uncapacitated(Policy):
    colocated_fast_path = True

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.index = NearestIndex(self.metric)

    def _open(self, x):
        super()._open(x)
        self.index.add(x, self.state.location[x])

    def _close(self, f):
        super()._close(f)
        self.index.remove(f, self.state.location[f])


class AlgorithmMStar(_Uncapacitated):
    """Meyerson's rule for arrivals; orphans are simply re-inserted."""

    name = "mstar"

    def _decide(self, x):
        near = self.index.nearest(self.state.location[x])
        if near is None:
            self.counters.unavailable += 1
            d = 1.0
        else:
            d = near[1] if near[1] < 1.0 else 1.0
        if self._flip(x, d):
            self._open(x)
        else:
            self._attach(x, near[0], near[1])


class AlgorithmM(AlgorithmMStar):
    name = "m"
    insertion_only = True


class Algorithm1(_Uncapacitated):
    """Re-flip an orphan only if its new distance exceeds twice its last flip probability."""

    name = "alg1"

    def _distance(self, near):
        if near is None:
            return 1.0
        return near[1] if near[1] < 1.0 else 1.0

    def _decide(self, x):
        near = self.index.nearest(self.state.location[x])
        if near is None:
            self.counters.unavailable += 1
        d = self._distance(near)
        mem = self.state.memory
        if x in mem and d <= 2.0 * mem[x]:
            if near is None:
                # nothing left to connect to: open without a flip
                self._open(x)
            else:
                self._attach(x, near[0], near[1])
            return
        if self._flip(x, d):
            self._open(x)
        else:
            self._attach(x, near[0], near[1])
            mem[x] = d

    def _remember_run(self, run):
        mem = self.state.memory
        if not all(map(mem.__contains__, run)):
            for x in run:
                mem.setdefault(x, 0.0)


class _ScalarCapacity:
    """Each facility serves at most upsilon clients, itself included."""

    def _open(self, x):
        Policy._open(self, x)
        left = self.config.upsilon - 1
        self.state.residual[x] = left
        if left > 0:
            self.index.add(x, self.state.location[x])

    def _attach(self, x, f, d):
        Policy._attach(self, x, f, d)
        st = self.state
        st.residual[f] -= 1
        if self.ops is not None:
            self.ops.append(("dec", f, None, x))
        if st.residual[f] == 0:
            self.index.remove(f, st.location[f])

    def _detach(self, x):
        st = self.state
        f = st.assigned[x]
        Policy._detach(self, x)
        st.residual[f] += 1
        if self.ops is not None:
            self.ops.append(("restore", f, None))
        if st.residual[f] == 1:
            self.index.add(f, st.location[f])

    def _close(self, f):
        Policy._close(self, f)
        st = self.state
        if f in self.index:
            self.index.remove(f, st.location[f])
        del st.residual[f]

    def violations(self, focus=None):
        out = Policy.violations(self, focus)
        st = self.state
        cap = self.config.upsilon
        facs = st.clients_of if focus is None else [f for f in _focus_facilities(st, focus)]
        for f in facs:
            served = len(st.clients_of[f]) + 1
            if served > cap:
                out.append(f"facility {f} serves {served} > {cap} clients")
            if st.residual.get(f) != cap - served:
                out.append(f"facility {f} residual {st.residual.get(f)} != {cap - served}")
            if (st.residual.get(f, 0) > 0) != (f in self.index):
                out.append(f"facility {f} eligibility out of sync")
        return out


def _focus_facilities(st: SolutionState, focus):
    facs = {x for x in focus if x in st.clients_of}
    facs.update(st.assigned[x] for x in focus if x in st.assigned)
    return [f for f in facs if f in st.clients_of]


class CapacitatedMeyerson(_ScalarCapacity, AlgorithmMStar):
    """Meyerson's rule against the nearest facility that still has capacity."""

    name = "capm"
    insertion_only = True
    colocated_fast_path = False


class NaiveCapacitated(_ScalarCapacity, Algorithm1):
    """Algorithm 1 with d' = max(distance to nearest unsaturated facility, 10/upsilon)."""

    name = "naive"
    colocated_fast_path = False

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.floor = 10.0 / self.config.upsilon

    def _distance(self, near):
        if near is None:
            return 1.0
        d = near[1] if near[1] > self.floor else self.floor
        return d if d < 1.0 else 1.0


class Algorithm2(Policy):
    """Capacitated fully dynamic policy on an HST.

    A facility's capacity is split into h buckets of floor(upsilon/h); bucket i
    only serves clients whose LCA with the facility has depth i.  A client at
    the facility's own point uses bucket h-1.  The facility serves itself
    without consuming a bucket.
    """

    name = "alg2"

    def __init__(self, metric, config, rng, cost_metric=None, *, tree: Hst, q: int):
        super().__init__(metric, config, rng, cost_metric)
        self.tree = tree
        self.h = tree.h
        self.base_cap = bucket_capacity(config.upsilon, self.h)
        # the distance-independent part of the flip probability
        self.extra = alg2_probability(0.0, self.h, q, config.upsilon, config.boost)
        self._anc = tree.anc_rows
        self._ldist = tree.level_dist
        # tree node -> sorted ids of facilities below it with spare capacity in
        # the node's bucket (depth, or h-1 for leaves)
        self.pools: dict[int, list[int]] = {}

    def client_bucket(self, a: int, b: int) -> int:
        """Bucket used between points a and b (h-1 when co-located)."""
        if a == b:
            return self.h - 1
        return min(self.tree.lca_depth(a, b), self.h - 1)

    def _nodes(self, f, b):
        chain = self._anc[self.state.location[f]]
        if b < self.h - 1:
            return (chain[b],)
        return (chain[self.h - 1], chain[self.h])

    def _pool_add(self, f, b):
        for node in self._nodes(f, b):
            pool = self.pools.get(node)
            if pool is None:
                self.pools[node] = [f]
            else:
                insort(pool, f)

    def _pool_remove(self, f, b):
        for node in self._nodes(f, b):
            pool = self.pools[node]
            del pool[bisect_left(pool, f)]
            if not pool:
                del self.pools[node]

    def closest(self, x: int):
        """(facility, tree distance, bucket) of the closest facility with room for x."""
        loc = self.state.location
        chain = self._anc[loc[x]]
        h = self.h
        pool = self.pools.get(chain[h])
        if pool:
            return pool[0], 0.0, h - 1
        for j in range(h - 1, -1, -1):
            pool = self.pools.get(chain[j])
            if not pool:
                continue
            child = chain[j + 1]
            for f in pool:
                if self._anc[loc[f]][j + 1] != child:
                    return f, self._ldist[j], j
        return None

    def _decide(self, v):
        mem = self.state.memory
        m = mem.setdefault(v, 0.0)
        cand = self.closest(v)
        if cand is None:
            self.counters.unavailable += 1
            self._open(v)
            return
        u, dt, b = cand
        p = dt + self.extra
        if p > 1.0:
            p = 1.0
        if p <= 2.0 * m:
            self._connect(v, u, b, dt)
            return
        mem[v] = p
        if self._flip(v, p):
            self._open(v)
        else:
            self._connect(v, u, b, dt)

    def _open(self, v):
        super()._open(v)
        self.state.caps[v] = [self.base_cap] * self.h
        if self.base_cap > 0:
            for b in range(self.h):
                self._pool_add(v, b)

    def _connect(self, v, u, b, dt):
        self._attach(v, u, dt)
        st = self.state
        caps = st.caps[u]
        caps[b] -= 1
        st.bucket_of[v] = b
        if self.ops is not None:
            self.ops.append(("dec", u, b, v))
        if caps[b] == 0:
            self._pool_remove(u, b)

    def _detach(self, v):
        st = self.state
        u = st.assigned[v]
        super()._detach(v)
        b = st.bucket_of.pop(v)
        caps = st.caps[u]
        caps[b] += 1
        if self.ops is not None:
            self.ops.append(("restore", u, b))
        if caps[b] == 1:
            self._pool_add(u, b)

    def _close(self, f):
        st = self.state
        for x in st.clients_of[f]:
            st.bucket_of.pop(x, None)
        super()._close(f)
        for b, c in enumerate(st.caps.pop(f)):
            if c > 0:
                self._pool_remove(f, b)

    def violations(self, focus=None):
        out = super().violations(focus)
        st = self.state
        facs = list(st.clients_of) if focus is None else _focus_facilities(st, focus)
        for f in facs:
            used = [0] * self.h
            lf = st.location[f]
            for x in st.clients_of[f]:
                b = self.client_bucket(st.location[x], lf)
                used[b] += 1
                if st.bucket_of.get(x) != b:
                    out.append(f"client {x} recorded in bucket {st.bucket_of.get(x)} not {b}")
            caps = st.caps.get(f)
            if caps is None:
                out.append(f"facility {f} has no buckets")
                continue
            for b in range(self.h):
                if caps[b] < 0:
                    out.append(f"facility {f} bucket {b} negative")
                if self.base_cap - caps[b] != used[b]:
                    out.append(
                        f"facility {f} bucket {b}: {self.base_cap - caps[b]} used, {used[b]} clients"
                    )
                for node in self._nodes(f, b):
                    pool = self.pools.get(node, ())
                    i = bisect_left(pool, f)
                    listed = i < len(pool) and pool[i] == f
                    if listed != (caps[b] > 0):
                        out.append(f"facility {f} bucket {b} pool membership out of sync")
        return out


def make_policy(config: PolicyConfig, metric: MetricSpace, rng: random.Random, *,
                tree: Hst | None = None, q: int | None = None,
                cost_metric: MetricSpace | None = None) -> Policy:
    """Instantiate the policy named by ``config.algorithm``.

    ``alg2`` runs on ``metric`` as normalized for ``tree`` and reports costs in
    ``cost_metric``; the other policies use ``metric`` for both.
    """
    kinds = {
        "m": AlgorithmM,
        "mstar": AlgorithmMStar,
        "alg1": Algorithm1,
        "capm": CapacitatedMeyerson,
        "naive": NaiveCapacitated,
    }
    if config.algorithm == "alg2":
        if tree is None or q is None:
            raise ValueError("alg2 needs an HST and the stream horizon q")
        return Algorithm2(metric, config, rng, cost_metric, tree=tree, q=q)
    return kinds[config.algorithm](metric, config, rng, cost_metric)
