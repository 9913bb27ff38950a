from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import euclid
from dynfl.hst import (
    bucket,
    build_hst,
    distlog_floor,
    level_distance,
    tree_depth,
    tree_dist,
)
from dynfl.metric import normalize, star_metric, validate


def path_length(t, u, v):
    """Independent tree distance: walk both leaves up the parent array."""
    a, b = t.leaf_of(u), t.leaf_of(v)
    total = 0.0
    while a != b:
        # both leaves sit at equal depth, so step them up together
        total += 2 * 2.0 ** -int(t.depth[t.parent[a]])
        a, b = int(t.parent[a]), int(t.parent[b])
    return total


def unit_square(n, seed):
    rng = np.random.default_rng(seed)
    return validate(euclid(rng.random((n, 2))))


def test_depths():
    assert [tree_depth(u) for u in (1, 2, 3, 4, 5, 8, 9, 1000)] == [1, 1, 2, 2, 3, 3, 4, 10]


def test_single_point_tree():
    t = build_hst(normalize(validate([[0]]), 4), 0)
    assert t.h == 2 and t.n_points == 1
    assert t.n_nodes == 3
    assert tree_dist(t, 0, 0) == 0.0


def test_two_points_separate_at_root():
    t = build_hst(normalize(validate([[0, 1], [1, 0]]), 4), 0)
    assert t.h == 2
    assert bucket(t, 0, 1) == 0
    assert tree_dist(t, 0, 1) == 3.0


def test_uniform_metric_splits_at_root():
    d = np.ones((16, 16)) - np.eye(16)
    for seed in range(5):
        t = build_hst(normalize(validate(d), 16), seed)
        assert all(bucket(t, u, v) == 0 for u, v in itertools.combinations(range(16), 2))


def test_closed_form_distances():
    assert level_distance(0, 2) == 3.0
    h = 4
    assert level_distance(h - 1, h) == pytest.approx(2 * 2.0 ** -(h - 1))
    assert level_distance(h, h) == 0.0


def test_distlog_examples():
    # sibling leaves at h=4: 0.25 -> 2 = bucket - 1
    assert math.floor(-math.log2(level_distance(3, 4))) == 2
    for j in range(0, 6):
        h = j + 2 + 2
        assert math.floor(-math.log2(level_distance(j, h))) == j - 2
    t = build_hst(normalize(validate([[0, 1], [1, 0]]), 2), 0)
    assert t.h == 1
    assert tree_dist(t, 0, 1) == 2.0
    assert distlog_floor(t, 0, 1) == -1
    with pytest.raises(ValueError):
        distlog_floor(t, 0, 0)
    with pytest.raises(ValueError):
        bucket(t, 1, 1)


@pytest.mark.parametrize("seed", range(6))
def test_tree_structure_and_exhaustive_checks(seed):
    m = unit_square(40, seed)
    nm = normalize(m, 32)
    t = build_hst(nm, seed)
    d = nm.base.matrix()
    leaves = {t.leaf_of(p) for p in range(40)}
    assert len(leaves) == 40
    assert all(int(t.depth[x]) == t.h for x in leaves)
    assert set(np.flatnonzero(t.depth == t.h).tolist()) == leaves
    for u, v in itertools.combinations(range(40), 2):
        dt = tree_dist(t, u, v)
        assert dt == pytest.approx(path_length(t, u, v))
        assert dt >= d[u, v] - 1e-9
    depth = np.array([[t.lca_depth(u, v) for v in range(40)] for u in range(40)])
    for u, v, w in itertools.product(range(40), repeat=3):
        if len({u, v, w}) == 3:
            assert depth[u, w] >= min(depth[u, v], depth[v, w])


def test_bucket_determines_distance():
    t = build_hst(normalize(unit_square(30, 3), 64), 1)
    pairs = list(itertools.combinations(range(30), 2))
    by = {}
    for u, v in pairs:
        by.setdefault(bucket(t, u, v), set()).add(tree_dist(t, u, v))
    assert all(len(s) == 1 for s in by.values())
    ordered = [next(iter(by[b])) for b in sorted(by)]
    assert ordered == sorted(ordered, reverse=True)
    assert len(set(ordered)) == len(ordered)


@given(st.integers(2, 20), st.integers(2, 128), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_dominance_property(n, upsilon, seed):
    nm = normalize(unit_square(n, seed), upsilon)
    t = build_hst(nm, seed)
    d = nm.base.matrix()
    for u, v in itertools.combinations(range(n), 2):
        assert tree_dist(t, u, v) >= d[u, v] - 1e-9


def test_vectorised_lca_matches_scalar():
    t = build_hst(normalize(unit_square(25, 9), 16), 2)
    pts = np.arange(25)
    for u in range(25):
        got = t.lca_depths(u, pts)
        want = [t.lca_depth(u, v) if v != u else t.h for v in range(25)]
        assert got.tolist() == want


def test_star_tree_and_determinism():
    nm = normalize(star_metric(50, 0.5), 8)
    a = build_hst(nm, 7)
    b = build_hst(nm, 7)
    assert np.array_equal(a.anc, b.anc)
    assert all(tree_dist(a, 0, v) >= 0.5 for v in range(1, 51))
    assert all(tree_dist(a, 1, v) >= 1.0 for v in range(2, 51))


def test_dumps():
    t = build_hst(normalize(unit_square(6, 0), 4), 0)
    obj = json.loads(t.dumps())
    assert obj["h"] == 2 and obj["root"]["depth"] == 0

    def points(node):
        out = [node["point"]] if "point" in node else []
        for c in node.get("children", []):
            out += points(c)
        return out

    assert sorted(points(obj["root"])) == list(range(6))
    text = t.to_text().splitlines()
    assert sum("point" in line for line in text) == 6


def test_unknown_point():
    t = build_hst(normalize(unit_square(5, 0), 4), 0)
    with pytest.raises(KeyError):
        tree_dist(t, 0, 9)
