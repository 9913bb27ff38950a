"""Simulation driver: streams, runs, cost reports, traces, replay and probes."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hst import Hst, build_hst
from .metric import MetricSpace, StarMetric, metric_from_json, normalize
from .policies import (
    Algorithm2,
    Event,
    Policy,
    PolicyConfig,
    make_policy,
)


class StreamError(ValueError):
    """An event stream breaks the insert/delete discipline."""


class InvariantViolation(AssertionError):
    pass


class HorizonError(ValueError):
    """Algorithm 2's declared horizon q is shorter than the stream."""


@dataclass
class EventStream:
    events: list[Event]

    @property
    def q(self) -> int:
        return len(self.events)

    def validate(self, n_points: int | None = None):
        seen: set[int] = set()
        active: set[int] = set()
        for i, ev in enumerate(self.events):
            if ev.kind == "ins":
                if ev.client in seen:
                    raise StreamError(f"event {i}: client {ev.client} inserted twice")
                if n_points is not None and not 0 <= ev.location < n_points:
                    raise StreamError(f"event {i}: location {ev.location} outside the metric")
                seen.add(ev.client)
                active.add(ev.client)
            elif ev.kind == "del":
                if ev.client not in active:
                    raise StreamError(f"event {i}: delete of inactive client {ev.client}")
                active.remove(ev.client)
            else:
                raise StreamError(f"event {i}: unknown kind {ev.kind!r}")
        return self

    def final_active(self) -> dict[int, int]:
        """Active clients at the end, mapped to their locations (insertion order)."""
        out: dict[int, int] = {}
        for ev in self.events:
            if ev.kind == "ins":
                out[ev.client] = ev.location
            else:
                del out[ev.client]
        return out

    @property
    def n_fin(self) -> int:
        return len(self.final_active())

    @property
    def has_deletions(self) -> bool:
        return any(ev.kind == "del" for ev in self.events)


@dataclass
class Instance:
    metric: MetricSpace
    stream: EventStream
    # reassignment order the construction relies on, if any
    reassign: str | None = None
    name: str = ""

    def to_json(self) -> dict:
        out = {
            "metric": self.metric.to_json(),
            "events": [ev.to_json() for ev in self.stream.events],
            "q": self.stream.q,
        }
        if self.reassign:
            out["reassign"] = self.reassign
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, obj: dict) -> Instance:
        _reject_nonuniform(obj)
        metric = metric_from_json(obj["metric"])
        stream = EventStream([Event.from_json(e) for e in obj["events"]])
        if "q" in obj and int(obj["q"]) != stream.q:
            raise StreamError(f"declared q={obj['q']} but the stream has {stream.q} events")
        stream.validate(metric.n)
        return cls(metric, stream, obj.get("reassign"), obj.get("name", ""))


def _reject_nonuniform(obj: dict):
    # only uniform opening cost 1 and one shared capacity are modelled
    for key in ("opening_costs", "opening_cost", "facility_costs"):
        if key in obj:
            vals = obj[key] if isinstance(obj[key], list) else [obj[key]]
            if any(float(v) != 1.0 for v in vals):
                raise ValueError(f"non-uniform opening costs are not supported ({key})")
    if "capacities" in obj:
        vals = obj["capacities"] if isinstance(obj["capacities"], list) else [obj["capacities"]]
        if len(set(vals)) > 1:
            raise ValueError("non-uniform capacities are not supported")


def save_instance(inst: Instance, path: str | Path):
    with open(path, "w") as fh:
        json.dump(inst.to_json(), fh)


def load_instance(path: str | Path) -> Instance:
    with open(path) as fh:
        return Instance.from_json(json.load(fh))


@dataclass
class CostReport:
    opening_cost: int
    connection_cost: float
    counters: dict
    n_fin: int
    q: int

    @property
    def total(self) -> float:
        return self.opening_cost + self.connection_cost

    def as_dict(self) -> dict:
        return {
            "opening": self.opening_cost,
            "connection": self.connection_cost,
            "total": self.total,
            "n_fin": self.n_fin,
            "q": self.q,
            **self.counters,
        }


@dataclass
class EventRecord:
    index: int
    event: Event
    ops: list

    def to_json(self) -> dict:
        return {"i": self.index, "event": self.event.to_json(), "ops": [list(op) for op in self.ops]}


@dataclass
class Trace:
    meta: dict
    mode: str
    records: list[EventRecord] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)
    tree: Hst | None = None
    policy: Policy | None = None

    def ops(self):
        for rec in self.records:
            yield from rec.ops

    def dumps(self) -> str:
        """JSON lines: a header, one line per event, then the final snapshot."""
        lines = [json.dumps({"meta": self.meta, "mode": self.mode})]
        lines.extend(json.dumps(r.to_json()) for r in self.records)
        lines.append(json.dumps({"counters": self.counters, "final": _jsonable(self.final)}))
        return "\n".join(lines) + "\n"

    def fingerprint(self) -> tuple:
        return tuple((r.index, tuple(r.ops)) for r in self.records)


def _jsonable(snap: dict) -> dict:
    return {k: ({str(a): b for a, b in v.items()} if isinstance(v, dict) else v) for k, v in snap.items()}


def derive_seeds(seed: int) -> tuple[int, int]:
    """Independent (policy RNG, HST) seeds from one run seed."""
    a, b = np.random.SeedSequence(int(seed)).spawn(2)
    return int(a.generate_state(1, np.uint64)[0]), int(b.generate_state(1, np.uint64)[0])


def prepare(config: PolicyConfig, inst: Instance, seed: int) -> Policy:
    rng_seed, tree_seed = derive_seeds(seed)
    rng = random.Random(rng_seed)
    if config.algorithm != "alg2":
        return make_policy(config, inst.metric, rng)
    norm = normalize(inst.metric, config.upsilon)
    tree = build_hst(norm, tree_seed)
    q = config.q if config.q is not None else inst.stream.q
    return make_policy(config, norm.base, rng, tree=tree, q=max(q, 1), cost_metric=inst.metric)


def _touched(ev: Event, ops: list) -> set[int]:
    ids = {ev.client}
    for op in ops:
        if op[0] in ("request", "open", "close", "remove"):
            ids.add(op[1])
        elif op[0] in ("connect", "dec"):
            ids.add(op[1])
            ids.add(op[2] if op[0] == "connect" else op[3])
        elif op[0] == "restore":
            ids.add(op[1])
    return ids


def run(config: PolicyConfig, inst: Instance, seed: int, *, trace: str = "full",
        check: bool = False, full_every: int = 500) -> tuple[CostReport, Trace]:
    """Drive one policy over the instance's stream.

    ``trace`` is "full" (every op recorded) or "counters".  With ``check`` the
    state invariants are verified after each event (touched ids) and in full
    every ``full_every`` events and at the end.
    """
    if trace not in ("full", "counters"):
        raise ValueError("trace must be 'full' or 'counters'")
    policy = prepare(config, inst, seed)
    tree = getattr(policy, "tree", None)
    meta = {
        "algorithm": config.algorithm,
        "upsilon": config.upsilon,
        "seed": int(seed),
        "reassign": config.reassign,
        "q": inst.stream.q,
    }
    if isinstance(policy, Algorithm2):
        meta.update(h=policy.h, base_cap=policy.base_cap, horizon=config.q or inst.stream.q)
    full = trace == "full"
    out = Trace(meta, trace, tree=tree)
    for i, ev in enumerate(inst.stream.events):
        ops = [] if (full or check) else None
        policy.ops = ops
        if ev.kind == "ins":
            policy.on_insert(ev.client, ev.location)
        else:
            policy.on_delete(ev.client)
        if full:
            out.records.append(EventRecord(i, ev, ops))
        if check:
            bad = policy.violations(_touched(ev, ops))
            if (i + 1) % full_every == 0:
                bad += policy.violations()
            if bad:
                raise InvariantViolation(f"after event {i} ({ev}): {bad[:5]}")
    policy.ops = None
    if check:
        bad = policy.violations()
        if bad:
            raise InvariantViolation(f"at stream end: {bad[:5]}")
    if config.algorithm == "alg2" and config.q is not None and config.q < inst.stream.q:
        raise HorizonError(f"declared q={config.q} is shorter than the stream ({inst.stream.q})")
    st = policy.state
    report = CostReport(
        opening_cost=len(st.clients_of),
        connection_cost=max(0.0, st.connection_cost),
        counters=policy.counters.as_dict(),
        n_fin=len(st.location),
        q=inst.stream.q,
    )
    out.counters = report.counters
    out.final = st.snapshot()
    out.policy = policy
    return report, out


def recompute_cost(policy: Policy) -> float:
    """Total cost from scratch in the policy's cost metric."""
    st = policy.state
    m = policy.cost_metric
    conn = math.fsum(m.dist(st.location[x], st.location[f]) for x, f in st.assigned.items())
    return len(st.clients_of) + conn


# -- replay and trace checks -------------------------------------------------


def replay(trace: Trace) -> dict:
    """Rebuild the final snapshot from the recorded ops alone."""
    if trace.mode != "full":
        raise ValueError("replay needs a full trace")
    meta = trace.meta
    assigned: dict[int, int] = {}
    facilities: set[int] = set()
    residual: dict[int, int] = {}
    caps: dict[int, list[int]] = {}
    for rec in trace.records:
        for op in rec.ops:
            kind = op[0]
            if kind == "open":
                c = op[1]
                facilities.add(c)
                assigned[c] = c
                if meta["algorithm"] in ("capm", "naive"):
                    residual[c] = meta["upsilon"] - 1
                elif meta["algorithm"] == "alg2":
                    caps[c] = [meta["base_cap"]] * meta["h"]
            elif kind == "connect":
                assigned[op[1]] = op[2]
            elif kind == "dec":
                if op[2] is None:
                    residual[op[1]] -= 1
                else:
                    caps[op[1]][op[2]] -= 1
            elif kind == "restore":
                if op[2] is None:
                    residual[op[1]] += 1
                else:
                    caps[op[1]][op[2]] += 1
            elif kind == "remove":
                del assigned[op[1]]
            elif kind == "close":
                facilities.discard(op[1])
                residual.pop(op[1], None)
                caps.pop(op[1], None)
    return {
        "facilities": sorted(facilities),
        "assigned": dict(sorted(assigned.items())),
        "residual": dict(sorted(residual.items())),
        "caps": dict(sorted(caps.items())),
    }


def check_trace(trace: Trace) -> list[str]:
    """Bucket discipline and monotone flip probabilities, read off a full trace."""
    out = []
    algo = trace.meta["algorithm"]
    loc: dict[int, int] = {}
    last_p: dict[int, float] = {}
    tree = trace.tree
    for rec in trace.records:
        if rec.event.kind == "ins":
            loc[rec.event.client] = rec.event.location
        for op in rec.ops:
            if op[0] == "dec" and op[2] is not None:
                f, b, c = op[1], op[2], op[3]
                a, z = loc[c], loc[f]
                want = tree.h - 1 if a == z else min(tree.lca_depth(a, z), tree.h - 1)
                if b != want:
                    out.append(f"event {rec.index}: client {c} drew bucket {b} of {f}, expected {want}")
            elif op[0] == "flip" and algo in ("alg1", "naive", "alg2"):
                c, p = op[1], op[2]
                if c in last_p and not p > 2.0 * last_p[c]:
                    out.append(f"event {rec.index}: client {c} flipped at {p} after {last_p[c]}")
                last_p[c] = p
            elif op[0] == "remove":
                last_p.pop(op[1], None)
    return out


# -- probes -------------------------------------------------------------------


def martingale_probe(trace: Trace, cluster) -> float:
    """Sum of the cluster's flip probabilities up to and including its first opening."""
    cluster = set(cluster)
    total = 0.0
    for op in trace.ops():
        if op[0] == "flip" and op[1] in cluster:
            total += op[2]
            if op[3]:
                return total
        elif op[0] == "open" and op[1] in cluster:
            return total
    return total


@dataclass
class Availability:
    probed: int = 0
    violations: list = field(default_factory=list)

    @property
    def rate(self) -> float:
        return len(self.violations) / self.probed if self.probed else 0.0


def availability_probe(trace: Trace, v: int | None = None, *, keep: int = 50) -> Availability:
    """Check, at every connect request after a facility v opened, that some open
    facility v' with dist_T(u, v') <= dist_T(u, v) had room in bucket(u, v').

    With ``v`` None every facility that opens and is never deleted is probed.
    Violations are (event index, u, v, dist_T(u, v), best available dist_T).
    """
    if trace.mode != "full" or trace.tree is None:
        raise ValueError("availability probe needs a full Algorithm 2 trace")
    tree = trace.tree
    shadow = _Shadow(trace)
    deleted = {op[1] for op in trace.ops() if op[0] == "remove"}
    if v is not None:
        targets = {v} - deleted
    else:
        targets = {op[1] for op in trace.ops() if op[0] == "open"} - deleted
    level = np.array(tree.level_dist)
    watched = np.zeros(0, dtype=np.int64)
    watched_locs = np.zeros(0, dtype=np.int64)
    out = Availability()
    for rec in trace.records:
        if rec.event.kind == "ins":
            shadow.insert(rec.event.client, rec.event.location)
        for op in rec.ops:
            if op[0] == "request" and len(watched):
                u = op[1]
                lu = shadow.state.location[u]
                cand = shadow.closest(u)
                best = math.inf if cand is None else cand[1]
                d = level[tree.lca_depths(lu, watched_locs)]
                mask = watched != u
                out.probed += int(mask.sum())
                for i in np.flatnonzero(mask & (d < best)):
                    if len(out.violations) < keep:
                        out.violations.append((rec.index, u, int(watched[i]), float(d[i]), best))
                    else:
                        out.violations.append(None)
            shadow.apply(op)
            if op[0] == "open" and op[1] in targets:
                watched = np.append(watched, op[1])
                watched_locs = np.append(watched_locs, shadow.state.location[op[1]])
    return out


class _Shadow(Algorithm2):
    """Algorithm 2's bookkeeping driven by recorded ops instead of coin flips."""

    def __init__(self, trace: Trace):
        meta = trace.meta
        cfg = PolicyConfig("alg2", upsilon=meta["upsilon"])
        tree = trace.tree
        dummy = StarMetric(tree.n_points - 1, 1.0, 1.0) if tree.n_points > 1 else StarMetric(0, 1.0)
        super().__init__(dummy, cfg, None, tree=tree, q=max(meta.get("horizon", 2), 2))

    def insert(self, c, loc):
        self.state.location[c] = loc

    def apply(self, op):
        kind = op[0]
        st = self.state
        if kind == "open":
            self._open(op[1])
        elif kind == "connect":
            c, f = op[1], op[2]
            b = self.client_bucket(st.location[c], st.location[f])
            self._connect(c, f, b, op[3])
        elif kind == "remove":
            c = op[1]
            if st.assigned.get(c) == c:
                self._close(c)
            else:
                self._detach(c)
            del st.location[c]
            del st.assigned[c]
            del st.conn[c]
