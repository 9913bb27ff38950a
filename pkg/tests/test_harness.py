from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynfl.generators import gen_claim2cap, gen_claim3, gen_random
from dynfl.harness import (
    EventStream,
    HorizonError,
    Instance,
    StreamError,
    availability_probe,
    check_trace,
    load_instance,
    martingale_probe,
    recompute_cost,
    replay,
    run,
    save_instance,
)
from dynfl.metric import star_metric, validate
from dynfl.policies import ALGORITHMS, Event, PolicyConfig, UnsupportedEvent


def cfg(name, upsilon=4, **kw):
    return PolicyConfig(name, upsilon=upsilon if name in ("capm", "naive", "alg2") else None, **kw)


def single(metric=None):
    metric = metric or star_metric(2, 0.5)
    return Instance(metric, EventStream([Event("ins", 0, 1)]))


@pytest.mark.parametrize("name", ALGORITHMS)
def test_empty_stream(name):
    inst = Instance(star_metric(2, 0.5), EventStream([]))
    report, trace = run(cfg(name), inst, 0)
    assert report.total == 0 and report.opening_cost == 0
    assert trace.records == []


@pytest.mark.parametrize("name", ALGORITHMS)
def test_single_insert_costs_one(name):
    report, _ = run(cfg(name), single(), 0)
    assert (report.opening_cost, report.connection_cost, report.total) == (1, 0.0, 1)


def test_stream_validation():
    with pytest.raises(StreamError, match="inserted twice"):
        EventStream([Event("ins", 0, 0), Event("ins", 0, 1)]).validate()
    with pytest.raises(StreamError, match="inactive"):
        EventStream([Event("del", 3)]).validate()
    with pytest.raises(StreamError, match="inactive"):
        EventStream([Event("ins", 0, 0), Event("del", 0), Event("del", 0)]).validate()
    with pytest.raises(StreamError, match="outside"):
        EventStream([Event("ins", 0, 5)]).validate(3)
    s = EventStream([Event("ins", 0, 0), Event("ins", 1, 1), Event("del", 0)]).validate(2)
    assert s.q == 3 and s.n_fin == 1


def test_instance_json_round_trip(tmp_path):
    inst = gen_claim3(3)
    path = tmp_path / "i.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert back.metric == inst.metric
    assert back.stream.events == inst.stream.events
    assert back.reassign == "fifo"
    obj = json.loads(path.read_text())
    obj["q"] = 5
    with pytest.raises(StreamError):
        Instance.from_json(obj)


def test_nonuniform_inputs_rejected():
    base = single().to_json()
    with pytest.raises(ValueError, match="opening"):
        Instance.from_json({**base, "opening_costs": [1, 2, 1]})
    with pytest.raises(ValueError, match="capacities"):
        Instance.from_json({**base, "capacities": [3, 4, 3]})
    Instance.from_json({**base, "opening_costs": [1, 1, 1], "capacities": [3, 3, 3]})


def test_capacitated_meyerson_rejects_deletions():
    with pytest.raises(UnsupportedEvent):
        run(cfg("capm"), gen_claim3(2), 0)


def test_horizon_checked_at_end():
    inst = gen_claim3(2)
    with pytest.raises(HorizonError):
        run(PolicyConfig("alg2", upsilon=4, q=inst.stream.q - 1), inst, 0)
    run(PolicyConfig("alg2", upsilon=4, q=inst.stream.q + 10), inst, 0)


POLICIES_ON_DYNAMIC = ["mstar", "alg1", "naive", "alg2"]


@given(st.integers(0, 10**6), st.sampled_from(POLICIES_ON_DYNAMIC), st.sampled_from([2, 3, 7, 16]),
       st.sampled_from(["fifo", "lifo", "random"]))
@settings(max_examples=40, deadline=None)
def test_replay_cost_and_trace_invariants(seed, name, upsilon, order):
    inst = gen_random(15, 120, 0.4, "graph" if seed % 2 else "euclidean", seed)
    report, trace = run(cfg(name, upsilon, reassign=order), inst, seed, check=True, full_every=7)
    assert replay(trace) == trace.final
    assert recompute_cost(trace.policy) == pytest.approx(report.total)
    assert check_trace(trace) == []
    assert report.n_fin == inst.stream.n_fin


@pytest.mark.parametrize("name", ALGORITHMS)
def test_determinism_and_modes_agree(name):
    inst = gen_random(12, 150, 0.0 if name in ("m", "capm") else 0.3, seed=4)
    a, ta = run(cfg(name), inst, 11)
    b, tb = run(cfg(name), inst, 11)
    c, _ = run(cfg(name), inst, 11, trace="counters")
    assert ta.dumps() == tb.dumps()
    assert a.as_dict() == b.as_dict() == c.as_dict()


def test_insertion_only_has_no_cascades():
    inst = gen_random(10, 80, 0.0, seed=2)
    for name in ("m", "mstar", "alg1", "capm", "naive", "alg2"):
        report, _ = run(cfg(name), inst, 0)
        assert report.n_fin == inst.stream.q
        assert report.counters["cascades"] == 0


def test_trace_dump_is_json_lines():
    _, trace = run(cfg("alg2"), gen_claim3(2), 0)
    lines = trace.dumps().splitlines()
    assert len(lines) == 2 + len(trace.records)
    head = json.loads(lines[0])
    assert head["meta"]["algorithm"] == "alg2" and head["meta"]["h"] == 2
    assert json.loads(lines[1])["event"] == {"op": "ins", "id": 0, "at": 0}


def test_martingale_probe_examples():
    _, trace = run(cfg("alg1"), gen_claim3(4), 0)
    # a_1 opens at probability 1 straight away
    assert martingale_probe(trace, {0}) == 1.0
    assert 0 <= martingale_probe(trace, set(range(16, 20)))
    # co-located followers only ever connect deterministically before deletions
    head = Instance(trace.policy.metric, EventStream(gen_claim3(4).stream.events[:16]))
    _, trace = run(cfg("alg1"), head, 0)
    assert martingale_probe(trace, {1, 2, 3}) == 0.0


def test_martingale_probe_stops_at_first_opening():
    inst = Instance(star_metric(2, 0.4), EventStream([Event("ins", 0, 0), Event("ins", 1, 1),
                                                      Event("ins", 2, 2)]))
    _, trace = run(cfg("mstar"), inst, 0)
    flips = [op for op in trace.ops() if op[0] == "flip" and op[1] in (1, 2)]
    want = 0.0
    for op in flips:
        want += op[2]
        if op[3]:
            break
    assert martingale_probe(trace, {1, 2}) == pytest.approx(want)


def test_availability_probe_single_facility():
    m = validate([[0, 0.5], [0.5, 0]])
    ev = [Event("ins", 0, 0)] + [Event("ins", i, i % 2) for i in range(1, 4)]
    _, trace = run(PolicyConfig("alg2", upsilon=64), Instance(m, EventStream(ev)), 0)
    got = availability_probe(trace, 0)
    assert got.violations == []
    assert got.probed == 3


def test_availability_probe_vacuous():
    _, trace = run(PolicyConfig("alg2", upsilon=8), single(), 0)
    got = availability_probe(trace)
    assert got.probed == 0 and got.violations == []


def test_availability_probe_counts_exhaustion():
    # boost 0 makes co-located clients connect deterministically; upsilon=2
    # gives facility 0 one bucket of two, so client 3 finds no room anywhere
    m = validate([[0, 1.0], [1.0, 0]])
    ev = [Event("ins", i, 0) for i in range(5)]
    config = PolicyConfig("alg2", upsilon=2, boost=0.0)
    _, trace = run(config, Instance(m, EventStream(ev)), 0)
    assert trace.final["assigned"] == {0: 0, 1: 0, 2: 0, 3: 3, 4: 3}
    got = availability_probe(trace, 0)
    assert got.probed == 4
    assert [v[:3] for v in got.violations] == [(3, 3, 0)]
    assert got.rate == 0.25


def test_claim2cap_trace_invariants():
    report, trace = run(cfg("alg2", 4), gen_claim2cap(4), 3, check=True)
    assert check_trace(trace) == []
    assert replay(trace) == trace.final
    assert report.n_fin == 4
