"""Instance generators: the two adversarial star constructions and random streams."""

from __future__ import annotations

import random

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .harness import EventStream, Instance
from .metric import star_metric, validate
from .policies import Event


def gen_claim3(k: int) -> Instance:
    """Star with k leaves at radius 1/k.

    Clients a_1..a_{k^2} (ids 0..k^2-1) arrive at the center, then b_1..b_k
    (ids k^2..k^2+k-1) one per leaf, then a_1..a_{k^2-1} leave.  The survivors
    are a_{k^2} and the b's; the optimum opens at a_{k^2} for cost 2.  The
    construction relies on first-in-first-out reassignment.
    """
    if k < 2:
        raise ValueError("claim3 needs k >= 2")
    metric = star_metric(k, 1.0 / k)
    n_a = k * k
    events = [Event("ins", a, 0) for a in range(n_a)]
    events += [Event("ins", n_a + i, 1 + i) for i in range(k)]
    events += [Event("del", a) for a in range(n_a - 1)]
    return Instance(metric, EventStream(events), reassign="fifo", name=f"claim3:k={k}")


def gen_claim2cap(upsilon: int, rounds: int | None = None) -> Instance:
    """Star with 10*upsilon^2 leaves at radius 1/2.

    Each round inserts one client at the center followed by 10*upsilon clients
    on fresh leaves (leaves are used in order and wrap around only after all
    are used).  Finally every leaf client is deleted, leaving ``rounds``
    clients at the center.
    """
    if upsilon < 2:
        raise ValueError("claim2cap needs upsilon >= 2")
    rounds = upsilon if rounds is None else rounds
    if rounds < 1:
        raise ValueError("rounds must be positive")
    n_leaves = 10 * upsilon * upsilon
    per_round = 10 * upsilon
    metric = star_metric(n_leaves, 0.5)
    events = []
    leaf_clients = []
    cid = 0
    slot = 0
    for _ in range(rounds):
        events.append(Event("ins", cid, 0))
        cid += 1
        for _ in range(per_round):
            events.append(Event("ins", cid, 1 + slot % n_leaves))
            leaf_clients.append(cid)
            cid += 1
            slot += 1
    events += [Event("del", c) for c in leaf_clients]
    return Instance(metric, EventStream(events), name=f"claim2cap:upsilon={upsilon},rounds={rounds}")


def random_metric(n_points: int, kind: str, rng: np.random.Generator):
    if n_points < 1:
        raise ValueError("need at least one point")
    if kind == "euclidean":
        pts = rng.random((n_points, 2))
        d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
    elif kind == "graph":
        # random weights on all pairs, closed under shortest paths
        w = rng.uniform(0.1, 1.0, size=(n_points, n_points))
        w = np.triu(w, 1)
        w = w + w.T
        d = shortest_path(w, method="D", directed=False)
    else:
        raise ValueError(f"unknown metric kind {kind!r}; expected 'euclidean' or 'graph'")
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    return validate(d)


def gen_random(n_points: int, n_events: int, p_delete: float = 0.3,
               metric_kind: str = "euclidean", seed: int = 0) -> Instance:
    """Random metric plus a stream that deletes a uniformly random active client
    with probability ``p_delete`` (when one exists) and otherwise inserts at a
    uniformly random point."""
    if not 0 <= p_delete < 1:
        raise ValueError("p_delete must lie in [0, 1)")
    if n_events < 0:
        raise ValueError("n_events must be non-negative")
    rng = np.random.default_rng(seed)
    metric = random_metric(n_points, metric_kind, rng)
    pick = random.Random(int(rng.integers(2**63)))
    events = []
    active: list[int] = []
    next_id = 0
    for _ in range(n_events):
        if active and pick.random() < p_delete:
            i = pick.randrange(len(active))
            active[i], active[-1] = active[-1], active[i]
            events.append(Event("del", active.pop()))
        else:
            events.append(Event("ins", next_id, pick.randrange(n_points)))
            active.append(next_id)
            next_id += 1
    name = f"random:n={n_points},q={n_events},p={p_delete},metric={metric_kind},seed={seed}"
    return Instance(metric, EventStream(events), name=name)


GENERATORS = {"claim3": gen_claim3, "claim2cap": gen_claim2cap, "random": gen_random}

_PARAM_TYPES = {
    "k": int,
    "upsilon": int,
    "rounds": int,
    "n": int,
    "n_points": int,
    "q": int,
    "n_events": int,
    "p": float,
    "p_delete": float,
    "metric": str,
    "metric_kind": str,
    "seed": int,
}
_ALIASES = {"n": "n_points", "q": "n_events", "p": "p_delete", "metric": "metric_kind", "u": "upsilon"}


def parse_gen_spec(spec: str) -> tuple[str, dict]:
    """'claim3:k=16' -> ("claim3", {"k": 16})."""
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    if kind not in GENERATORS:
        raise ValueError(f"unknown generator {kind!r}; expected one of {sorted(GENERATORS)}")
    params = {}
    for part in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = part.partition("=")
        if not eq:
            raise ValueError(f"malformed generator parameter {part!r}")
        key = key.strip()
        conv = _PARAM_TYPES.get(key)
        if conv is None and key not in _ALIASES:
            raise ValueError(f"unknown generator parameter {key!r}")
        key = _ALIASES.get(key, key)
        params[key] = _PARAM_TYPES[key](val.strip())
    return kind, params


def generate(kind: str, params: dict) -> Instance:
    try:
        return GENERATORS[kind](**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from exc
