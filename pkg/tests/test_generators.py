from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynfl.generators import gen_claim2cap, gen_claim3, gen_random, generate, parse_gen_spec


def test_claim3_counts_and_end_state():
    inst = gen_claim3(2)
    assert inst.stream.q == 9
    assert inst.stream.n_fin == 3
    for k in (2, 3, 8):
        inst = gen_claim3(k)
        assert inst.stream.q == k * k + k + k * k - 1
        final = inst.stream.final_active()
        assert set(final) == {k * k - 1} | set(range(k * k, k * k + k))
        assert final[k * k - 1] == 0
        assert sorted(final[b] for b in range(k * k, k * k + k)) == list(range(1, k + 1))
        assert inst.metric.radius == pytest.approx(1 / k)
        assert inst.reassign == "fifo"
        inst.stream.validate(inst.metric.n)
    with pytest.raises(ValueError):
        gen_claim3(1)


def test_claim3_event_order():
    ev = gen_claim3(3).stream.events
    assert [e.kind for e in ev[:9]] == ["ins"] * 9
    assert all(e.location == 0 for e in ev[:9])
    assert [(e.client, e.location) for e in ev[9:12]] == [(9, 1), (10, 2), (11, 3)]
    assert [e.client for e in ev[12:]] == list(range(8))


def test_claim2cap_counts():
    inst = gen_claim2cap(3, 3)
    ins = sum(e.kind == "ins" for e in inst.stream.events)
    dels = sum(e.kind == "del" for e in inst.stream.events)
    assert (ins, dels) == (93, 90)
    final = inst.stream.final_active()
    assert len(final) == 3 and set(final.values()) == {0}
    assert inst.metric.n == 10 * 9 + 1
    leaves = [e.location for e in inst.stream.events if e.kind == "ins" and e.location != 0]
    assert len(set(leaves)) == len(leaves) == 90
    inst.stream.validate(inst.metric.n)


def test_claim2cap_wraps_only_after_all_leaves():
    inst = gen_claim2cap(2, 3)
    leaves = [e.location for e in inst.stream.events if e.kind == "ins" and e.location != 0]
    assert leaves[:40] == list(range(1, 41))
    assert leaves[40:] == list(range(1, 21))
    inst.stream.validate(inst.metric.n)


def test_random_insertion_only_and_determinism():
    a = gen_random(10, 50, 0.0, seed=3)
    assert all(e.kind == "ins" for e in a.stream.events) and a.stream.q == 50
    b = gen_random(10, 50, 0.0, seed=3)
    assert a.stream.events == b.stream.events and a.metric == b.metric
    c = gen_random(10, 50, 0.5, "graph", seed=3)
    assert c.stream.events == gen_random(10, 50, 0.5, "graph", seed=3).stream.events
    with pytest.raises(ValueError):
        gen_random(10, 5, 1.0)
    with pytest.raises(ValueError):
        gen_random(10, 5, 0.2, "hyperbolic")


def test_random_streams_always_valid_over_many_specs():
    import numpy as np

    rng = np.random.default_rng(0)
    for i in range(10_000):
        n = int(rng.integers(1, 6))
        q = int(rng.integers(0, 12))
        p = float(rng.uniform(0, 0.99))
        kind = "graph" if i % 2 else "euclidean"
        inst = gen_random(n, q, p, kind, seed=i)
        inst.stream.validate(inst.metric.n)
        assert inst.stream.q == q


@given(st.integers(1, 30), st.integers(0, 200), st.floats(0, 0.95), st.integers(0, 2**31))
@settings(max_examples=100, deadline=None)
def test_random_stream_property(n, q, p, seed):
    inst = gen_random(n, q, p, "euclidean", seed)
    inst.stream.validate(inst.metric.n)
    assert inst.stream.n_fin >= 0


def test_spec_parsing():
    assert parse_gen_spec("claim3:k=16") == ("claim3", {"k": 16})
    assert parse_gen_spec("claim2cap:upsilon=8,rounds=2") == ("claim2cap", {"upsilon": 8, "rounds": 2})
    kind, params = parse_gen_spec("random:n=20,q=100,p=0.3,metric=graph,seed=4")
    assert params == {"n_points": 20, "n_events": 100, "p_delete": 0.3, "metric_kind": "graph", "seed": 4}
    assert generate(kind, params).stream.q == 100
    for bad in ("nope:k=1", "claim3:k", "claim3:z=3"):
        with pytest.raises(ValueError):
            parse_gen_spec(bad)
    with pytest.raises(ValueError):
        generate("claim3", {"upsilon": 3})
