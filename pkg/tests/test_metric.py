from __future__ import annotations

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import euclid
from dynfl.metric import (
    MatrixMetric,
    MetricError,
    StarMetric,
    load_metric,
    metric_from_json,
    normalize,
    star_metric,
    validate,
)


def brute_axioms(d, tol=1e-9):
    """Independent triple-loop check of the metric axioms."""
    n = len(d)
    for i in range(n):
        if abs(d[i][i]) > tol:
            return False
        for j in range(n):
            if d[i][j] < 0 or abs(d[i][j] - d[j][i]) > tol:
                return False
    for a, b, c in itertools.product(range(n), repeat=3):
        if d[a][c] > d[a][b] + d[b][c] + tol:
            return False
    return True


def test_single_point_is_valid():
    m = validate([[0]])
    assert m.n == 1
    assert m.diameter() == 0.0


def test_star_k4_quarter_radius_validates():
    m = star_metric(4, 0.25)
    d = m.matrix()
    assert d[1, 2] == pytest.approx(0.5)
    assert validate(d).n == 5


def test_triangle_violation_reports_indices():
    with pytest.raises(MetricError, match=r"triangle violation at \(0,1,2\)"):
        validate([[0, 1, 3], [1, 0, 1], [3, 1, 0]])


def test_asymmetry_and_negative_reported():
    with pytest.raises(MetricError, match="asymmetry at \\(0,1\\)"):
        validate([[0, 1], [2, 0]])
    with pytest.raises(MetricError, match="negative distance at \\(0,1\\)"):
        validate([[0, -1], [-1, 0]])
    with pytest.raises(MetricError, match="square"):
        validate([[0, 1, 2], [1, 0, 1]])
    with pytest.raises(MetricError, match="self distance"):
        validate([[1.0]])


def test_star_examples():
    m = star_metric(3, 1 / 3)
    assert m.dist(1, 2) == pytest.approx(2 / 3)
    validate(m.matrix())
    two = star_metric(1, 0.5)
    assert two.n == 2 and two.dist(0, 1) == 0.5
    big = star_metric(10 * 4 * 4, 0.5)
    assert big.n == 161 and big.dist(0, 160) == 0.5 and big.dist(1, 160) == 1.0


def test_star_preconditions():
    with pytest.raises(ValueError):
        star_metric(0, 0.5)
    with pytest.raises(ValueError):
        star_metric(3, 0.0)


def test_normalize_examples():
    m = validate([[0, 0.5, 1.5], [0.5, 0, 1.0], [1.5, 1.0, 0]])
    d = normalize(m, 4).base.matrix()
    assert d[0, 1] == pytest.approx(1 / 3)
    assert d[1, 2] == pytest.approx(2 / 3)
    assert d[0, 2] == pytest.approx(1.0)
    m = validate([[0, 0.001, 1.0], [0.001, 0, 1.0], [1.0, 1.0, 0]])
    d = normalize(m, 10).base.matrix()
    assert d[0, 1] == pytest.approx(0.1)
    assert d[0, 2] == d[1, 2] == 1.0


def test_normalize_already_normalized_is_unchanged():
    m = validate([[0, 0.5, 1.0], [0.5, 0, 0.6], [1.0, 0.6, 0]])
    assert normalize(m, 2).base == m


def test_normalize_single_point():
    m = validate([[0]])
    assert normalize(m, 5).base is m


def test_normalize_star_stays_structured():
    s = normalize(star_metric(5, 0.2), 8).base
    assert isinstance(s, StarMetric)
    np.testing.assert_allclose(s.matrix(), normalize(validate(star_metric(5, 0.2).matrix()), 8).base.matrix())


metric_points = st.lists(
    st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=2, max_size=9
)


@given(metric_points, st.integers(1, 40))
@settings(max_examples=150, deadline=None)
def test_normalize_range_and_idempotence(points, upsilon):
    d = euclid(points)
    if d.max() == 0:
        return
    m = validate(d)
    nm = normalize(m, upsilon)
    nd = nm.base.matrix()
    off = ~np.eye(len(points), dtype=bool)
    assert nd.max() == pytest.approx(1.0)
    assert (nd[off] >= 1 / upsilon - 1e-12).all()
    assert brute_axioms(nd.tolist())
    again = normalize(nm.base, upsilon)
    np.testing.assert_allclose(again.base.matrix(), nd, atol=1e-12)


@given(metric_points, st.integers(0, 8), st.integers(0, 8), st.floats(-0.5, 0.5))
@settings(max_examples=250, deadline=None)
def test_validate_flags_exactly_the_broken_matrices(points, i, j, delta):
    d = euclid(points)
    n = len(d)
    i, j = i % n, j % n
    d = d.copy()
    d[i, j] += delta
    ok = brute_axioms(d.tolist())
    try:
        validate(d)
        accepted = True
    except MetricError:
        accepted = False
    assert accepted == ok


@given(st.integers(1, 12), st.floats(0.01, 2.0))
@settings(max_examples=60, deadline=None)
def test_star_closed_forms_match_matrix(k, eps):
    s = star_metric(k, eps)
    d = s.matrix()
    assert validate(d).n == k + 1
    pts = np.arange(k + 1)
    for a in range(k + 1):
        np.testing.assert_allclose(s.dists_from(a, pts), d[a])
    np.testing.assert_allclose(s.cross(pts, pts), d)
    assert s.diameter() == pytest.approx(d.max())
    assert s.cluster_diameter(pts[1:]) == pytest.approx(d[1:, 1:].max() if k > 1 else 0.0)


def brute_ball_first(d, rank, radius):
    n = len(d)
    return [min((y for y in range(n) if d[x][y] <= radius), key=lambda y: rank[y]) for x in range(n)]


@given(st.integers(1, 9), st.floats(0.05, 1.0), st.randoms(use_true_random=False), st.floats(0, 2.5))
@settings(max_examples=120, deadline=None)
def test_ball_first_matches_brute_force(k, eps, rnd, radius):
    s = star_metric(k, eps)
    rank = list(range(k + 1))
    rnd.shuffle(rank)
    rank = np.array(rank)
    want = brute_ball_first(s.matrix().tolist(), rank, radius)
    assert s.ball_first(rank, radius).tolist() == want
    assert MatrixMetric(s.matrix()).ball_first(rank, radius).tolist() == want


def test_json_round_trip(tmp_path):
    m = validate([[0, 1, 2], [1, 0, 1.5], [2, 1.5, 0]])
    p = tmp_path / "m.json"
    p.write_text(json.dumps(m.to_json()))
    assert load_metric(p) == m
    s = metric_from_json({"star": {"k": 4, "eps": 0.25}})
    assert s == star_metric(4, 0.25)
    with pytest.raises(MetricError):
        metric_from_json({"n": 3, "dist": [[0, 1], [1, 0]]})
    with pytest.raises(MetricError):
        metric_from_json({"points": []})
