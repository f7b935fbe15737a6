import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from rdlkit.frontier import (
    GridSpec,
    Objective,
    crosscheck_logloss,
    dominated_by,
    membership,
    pareto_filter,
    simplex_grid,
    trace_frontier,
)
from rdlkit.model import RdlPoint, dsbs, random_model
from rdlkit.regions_discrete import MarkovPreconditionError, one_sided_logloss_corner

LOGLOSS = Objective(d=(0.2,), distortion="logloss")


def test_simplex_grid_counts_and_order():
    for k, m in ((1, 3), (4, 2), (8, 4), (16, 3)):
        g = simplex_grid(k, m)
        assert g.shape == (math.comb(k + m - 1, m - 1), m)
        assert np.allclose(g.sum(axis=1), 1.0)
        counts = [tuple(r) for r in np.rint(g * k).astype(int)]
        assert counts == sorted(counts)


def test_constant_u_single_point():
    m = dsbs(0.1)
    curve = trace_frontier("OneSided", m, GridSpec(k=8, u_sizes=(1,)), LOGLOSS)
    assert len(curve.points) == 1
    assert curve.points[0].point.as_tuple() == pytest.approx((0.8, 0, 0, 0.2, 1 - oracle.hb(0.1)), abs=1e-12)


def test_frontier_points_round_trip():
    m = dsbs(0.1)
    curve = trace_frontier("OneSided", m, GridSpec(k=8, u_sizes=(1, 2, 3, 4)), LOGLOSS)
    for fp in curve.points:
        again = one_sided_logloss_corner(m, fp.witness["p_u_given_y"], fp.witness["d"])
        assert again.point.as_tuple() == pytest.approx(fp.point.as_tuple(), abs=1e-12)


def test_refinement_is_dominated():
    m = dsbs(0.1)
    c8 = trace_frontier("OneSided", m, GridSpec(k=8, u_sizes=(1, 2, 3)), LOGLOSS)
    c16 = trace_frontier("OneSided", m, GridSpec(k=16, u_sizes=(1, 2, 3)), LOGLOSS)
    assert dominated_by(c8.array(), c16.array()).all()


def test_no_dominated_points_remain():
    m = random_model(np.random.default_rng(3), (2, 2, 2))
    arr = trace_frontier("TriC", m, GridSpec(k=6, u_sizes=(1, 2, 3))).array()
    for i, p in enumerate(arr):
        others = np.delete(arr, i, axis=0)
        weak = np.all(others <= p, axis=1) & np.any(others < p, axis=1)
        assert not weak.any()


def test_tri_c_wyner_ziv_curve_matches_exhaustive_oracle():
    m = dsbs(0.1, z="const")
    curve = trace_frontier("TriC", m, GridSpec(k=4, u_sizes=(2,)))
    # independent exhaustive search on the same grid, pure python
    rows = [[a / 4, 1 - a / 4] for a in range(5)]
    pts = []
    ham = [[0, 1], [1, 0]]
    for r0 in rows:
        for r1 in rows:
            n, c = oracle.joint(m.probs.tolist(), (("x",), "u", [r0, r1]))
            rate = oracle.I(n, c, "x", "u", "y")
            pts.append((rate, oracle.min_distortion(n, c, "uy", ham)))
    best = {}
    for r, d in pts:
        key = round(d, 12)
        best[key] = min(best.get(key, math.inf), r)
    ours = {round(p.point.d, 12): p.point.r1 for p in curve.points}
    for d, r in ours.items():
        assert r == pytest.approx(best[d], abs=1e-12)
    # every oracle pair is matched or beaten
    for r, d in pts:
        assert any(p.point.d <= d + 1e-12 and p.point.r1 <= r + 1e-12 for p in curve.points)


def test_closed_form_settings_return_floors():
    m = dsbs(0.1)
    c = trace_frontier("TriA", m, GridSpec(), Objective(d=(0.2,), r3=(0.1,), distortion="logloss"))
    assert len(c.points) == 1
    assert c.points[0].point.r1 == pytest.approx(oracle.hb(0.1) - 0.3, abs=1e-12)


def test_markov_precondition_propagates():
    with pytest.raises(MarkovPreconditionError):
        trace_frontier("TriD", random_model(np.random.default_rng(0)), GridSpec(k=2, u_sizes=(1,)))


def test_membership_examples():
    m = dsbs(0.1)
    grid = GridSpec(k=8, u_sizes=(1, 2))
    obj = Objective(distortion="logloss")
    res = membership("OneSided", m, RdlPoint(0.9, 0.0, 0.2, 0.6), grid, obj)
    assert res.inside and res.witness.witness["p_u_given_y"].aux_size == 1
    res = membership("OneSided", m, RdlPoint(5, 5, 0.2, 0.52), grid, obj)
    assert not res.inside and "I(X;Z) floor" in res.message
    fp = trace_frontier("OneSided", m, grid, Objective(d=(0.2,), distortion="logloss")).points[1]
    on = membership("OneSided", m, fp.point, grid, obj)
    assert on.inside and abs(on.slack) <= 1e-12
    out = membership("OneSided", m, RdlPoint(0.0, 0.0, 0.2, 0.6), grid, obj)
    assert not out.inside and "resolution k=8" in out.message


def test_crosscheck_matched_erasure():
    m = dsbs(0.1, z="const")
    rep = crosscheck_logloss(m, GridSpec(k=8, u_sizes=(1, 2)), [0.0, 0.1, 0.3, 0.6, 1.5])
    assert rep.matched_gap <= 1e-9
    # the constant-U slice agrees exactly
    assert rep.single_letter[0][0] == pytest.approx(rep.inner[0][0], abs=1e-12)


def test_crosscheck_grid_gap_shrinks():
    m = dsbs(0.1, z="const")
    g2 = crosscheck_logloss(m, GridSpec(k=4, u_sizes=(1, 2)), [0.25, 0.5], gap_k=2).grid_gap
    g4 = crosscheck_logloss(m, GridSpec(k=4, u_sizes=(1, 2)), [0.25, 0.5], gap_k=4).grid_gap
    assert g4 <= g2


def test_jobs_do_not_change_output():
    m = random_model(np.random.default_rng(5), (2, 2, 2))
    grid = GridSpec(k=8, u_sizes=(1, 2, 3))
    a = trace_frontier("TriC", m, grid, jobs=1).to_csv()
    b = trace_frontier("TriC", m, grid, jobs=4).to_csv()
    assert a == b


def test_size_guard():
    with pytest.raises(ValueError):
        trace_frontier("TriC", dsbs(0.1), GridSpec(k=30, u_sizes=(3,), max_channels=1000))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(*[st.integers(0, 4)] * 5), min_size=1, max_size=40))
def test_pareto_filter_idempotent(rows):
    pts = np.array(rows, dtype=float)
    keep = pareto_filter(pts)
    again = pareto_filter(pts[keep])
    assert len(again) == len(keep)
    # every discarded point is weakly dominated by a kept one
    assert dominated_by(pts, pts[keep], 0.0).all()
