import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rllab.density import (DensityCertificate, RefutationReport, approx_minty_difference,
                           certify_density, certify_subdiff_density, density_via_hyperdense,
                           hyperdense_check, minty_dense, minty_exact, pipeline_ok,
                           truncation_residual_sq)
from rllab.funcspec import DownsideCertificate, minimize, parse_func, theorem3_bound
from rllab.geometry import DualPair, NormedSpace, rl, rl_gap
from rllab.operators import SampledGraph, build_operator, graph_sample, linear_operator
from rllab.subdiff import subdiff_operator
from rllab.varprinciples import RecoveryError

LINE = NormedSpace(1)


def parabola(coef):
    return subdiff_operator("polynomial", parse_func(f"{coef}*x1^2"), LINE)


def test_certify_closed_form_witness():
    c = certify_density(parabola(-1), ([2.0], [3.0]))
    assert isinstance(c, DensityCertificate)
    w = c.witnesses[-1]
    assert (w.pair.x[0], w.pair.xstar[0], w.gap) == (-5.0, 10.0, 0.0)


def test_certify_refutes_flat_range():
    r = certify_density(parabola(-0.5), ([0.0], [1.0]))
    assert isinstance(r, RefutationReport)
    assert r.delta == pytest.approx(0.5, abs=1e-9) and r.failed_eps == 0.01
    assert "not a proof" in r.to_json()["note"]


def test_certify_identity_at_origin():
    c = certify_density(build_operator("identity", LINE), ([0.0], [0.0]))
    w = c.witnesses[-1]
    assert w.gap == 0.0 and w.pair.x[0] == 0.0


def test_cubic_refutation_matches_closed_form():
    r = certify_density(subdiff_operator("polynomial", parse_func("x1^3"), LINE), ([0.0], [-1.0]))
    # inf over s of 0.5 (3 s^2 + s + 1)^2 is attained at s = -1/6
    assert r.delta == pytest.approx(0.5 * (11 / 12) ** 2, abs=1e-6)


@pytest.mark.parametrize("target", [([1.0], [1.0]), ([-2.0], [0.5]), ([0.0], [3.0])])
def test_certificate_witnesses_reverify(target):
    A = subdiff_operator("piecewise", parse_func("abs(x1) - 0.2*x1^2"), LINE)
    c = certify_density(A, target)
    t = DualPair(*target)
    assert c.gaps_nonincreasing and c.final_gap < 1e-6
    for w in c.witnesses:
        assert w.gap < w.eps
        assert abs(rl_gap(LINE, w.pair, t) - w.gap) <= 1e-12
        assert A.contains(w.pair.x, w.pair.xstar)


def test_certify_sampled_graph():
    G = graph_sample(build_operator("identity", LINE), 41, box=(-2.0, 2.0))
    c = certify_density(G, ([0.5], [0.5]))
    assert c.final_gap == 0.0
    r = certify_density(SampledGraph(LINE, [[0.0]], [[0.0]]), ([0.0], [1.0]))
    assert isinstance(r, RefutationReport) and r.delta == pytest.approx(0.5)


def test_pipeline_examples():
    f0 = parse_func("0*x1")
    c = certify_subdiff_density(f0, "polynomial", DownsideCertificate(0.0), ([0.0], [0.0]))
    assert c.stable_bound == pytest.approx(math.sqrt(2) + 2) and pipeline_ok(c)
    assert c.witnesses[-1].gap < 1e-6
    c = certify_subdiff_density(parse_func("abs(x1)"), "piecewise", DownsideCertificate(0.0),
                                ([0.0], [0.5]))
    w = c.witnesses[-1]
    assert (w.pair.x[0], w.pair.xstar[0], w.gap) == (0.0, 0.5, 0.0)
    q = parse_func("-0.25*x1^2")
    c = certify_subdiff_density(q, "polynomial", DownsideCertificate(0.25), ([1.0], [1.0]))
    d = certify_density(subdiff_operator("polynomial", q, LINE), ([1.0], [1.0]))
    assert pipeline_ok(c) and c.within_stable_bound() and len(c.witnesses) == 3
    assert c.final_gap < 1e-6 and d.final_gap < 1e-6


def test_pipeline_bound_equals_formula():
    f = parse_func("abs(x1) - 0.4*x1^2")
    cert = DownsideCertificate(0.4)
    y, ys = [1.0], [-2.0]
    c = certify_subdiff_density(f, "piecewise", cert, (y, ys))
    _, m = minimize(parse_func("abs(x1) - 0.4*x1^2 + 0.5*(x1 - 1)^2 + 2*x1"), c.details["box"])
    assert c.details["m"] == pytest.approx(m, abs=1e-9)
    assert c.stable_bound == pytest.approx(theorem3_bound(cert, y, ys, c.details["m"]), rel=1e-12)


def test_pipeline_rejects_bad_certificate():
    with pytest.raises(ValueError):
        certify_subdiff_density(parse_func("-1*x1^2"), "polynomial", DownsideCertificate(0.4),
                                ([0.0], [0.0]))


def test_minty_examples():
    r = minty_exact(build_operator("identity", LINE), [4.0])
    assert r.success and (r.s[0], r.sstar[0]) == (2.0, 2.0) and r.rl_gap == 0.0
    P = linear_operator(NormedSpace(2), [[2.0, 0.0], [0.0, 3.0]])
    r = minty_exact(P, [3.0, 4.0])
    assert r.success and np.allclose(r.s, [1.0, 1.0])
    r = minty_exact(build_operator("neg_identity", LINE), [1.0])
    assert not r.success and r.residual == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10_000))
def test_minty_success_iff_zero_gap(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, n))
    S = linear_operator(NormedSpace(n), B @ B.T)
    ys = rng.normal(size=n)
    r = minty_exact(S, ys)
    assert r.success
    assert r.rl_gap <= 1e-16 * (1 + float(ys @ ys)) * 1e3
    # failure direction: an operator whose S + Id misses y*
    bad = minty_exact(linear_operator(NormedSpace(n), -np.eye(n)), ys)
    assert not bad.success and bad.rl_gap > 0


def test_ladder_examples():
    rows = minty_dense((10, 100, 1000))
    assert [r.preimage_norm for r in rows] == [math.sqrt(10), 10.0, math.sqrt(1000)]
    assert all(r.residual == 0.0 for r in rows)
    want = math.fsum(1 / n ** 2 for n in range(11, 101))
    assert truncation_residual_sq(100, 10) == pytest.approx(want, abs=1e-15)
    assert want == pytest.approx(0.0852, abs=1e-4)
    L = build_operator("diag_ladder", NormedSpace(10))
    r = minty_exact(L, np.eye(10)[0])
    assert r.success and np.array_equal(r.s, np.eye(10)[0])


def test_hyperdense_examples():
    r = hyperdense_check(build_operator("identity", LINE), [5.0], 5.0)
    assert r.success and r.witnesses[-1][1][0] == 5.0
    r = hyperdense_check(build_operator("power", LINE, exponent=3), [8.0], 2.0)
    assert r.success and r.witnesses[-1][1][0] == pytest.approx(2.0, abs=1e-6)
    r = hyperdense_check(build_operator("zero", LINE), [1.0], 3.0)
    assert not r.success and r.best_distance == pytest.approx(1.0)


def test_density_via_hyperdense_examples():
    c = density_via_hyperdense(build_operator("identity", LINE), [0.0], [3.0], 1e-4)
    w = c.witnesses[-1]
    assert (w.pair.x[0], w.pair.xstar[0], w.gap) == (1.5, 1.5, 0.0)
    c = density_via_hyperdense(build_operator("power", LINE, coef=3.0, exponent=2), [0.0], [0.0], 1e-4)
    assert c.witnesses[-1].pair.x[0] == pytest.approx(0.0, abs=1e-9) and c.details["gap_below_eps"]
    rng = np.random.default_rng(9)
    for _ in range(5):
        B = rng.normal(size=(3, 3))
        S = linear_operator(NormedSpace(3), B @ B.T)
        y, ys = rng.normal(size=3), rng.normal(size=3)
        c = density_via_hyperdense(S, y, ys, 1e-6)
        d = c.details
        assert d["primal_ok"] and d["dual_ok"] and d["gap_below_eps"]
    with pytest.raises(RecoveryError):
        density_via_hyperdense(build_operator("neg_identity", LINE), [0.0], [1.0], 1e-4, max_doublings=3)


def test_approx_minty_difference_examples():
    p = approx_minty_difference(build_operator("identity", LINE), ([0.0], [0.0]), 0.0)
    assert p.distance == 0.0
    p = approx_minty_difference(SampledGraph(LINE, [[1.0]], [[1.0]]), ([0.0], [0.0]), 2.0)
    assert p.gap == 2.0 and p.distance <= math.sqrt(2 * 2.0) + 1e-12
    p = approx_minty_difference(build_operator("subdiff_abs", LINE), ([0.0], [0.5]), 0.0)
    assert p.point.x[0] == 0.0 and p.point.xstar[0] == 0.5
    with pytest.raises(ValueError):
        approx_minty_difference(build_operator("neg_identity", LINE), ([0.0], [1.0]), 0.1)


@pytest.mark.parametrize("y,ys", list(itertools.product((-1.5, 0.0, 2.0), (-1.0, 0.7))))
def test_approx_minty_difference_distance_bound(y, ys):
    A = subdiff_operator("piecewise", parse_func("abs(x1) + 0.3*x1^2"), LINE)
    for eps in (1e-2, 1e-4):
        p = approx_minty_difference(A, ([y], [ys]), eps)
        assert p.distance ** 2 <= 2 * eps + 1e-9
        assert abs(rl(LINE, p.t.x, -p.t.xstar)) <= 1e-12  # (t, t*) lies in the graph of J
