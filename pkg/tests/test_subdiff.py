import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rllab.funcspec import parse_func
from rllab.geometry import NormedSpace
from rllab.operators import graph_sample
from rllab.polar import is_monotone
from rllab.subdiff import (SubdiffError, central_difference_gradient, distance_function,
                           exact_gradient, find_kinks_1d, richardson_one_sided, subdiff_at,
                           subdiff_graph, subdiff_operator, subgradient_violation,
                           weak_axiom_test)

LINE = NormedSpace(1)
CONVEX_1D = ["abs(x1)", "0.5*x1^2", "max(x1, 0)", "abs(x1) + 0.5*x1^2", "abs(x1 - 1) + abs(x1 + 1)",
             "max(x1, -0.5*x1)", "exp(x1)", "x1^4"]


def test_subdiff_at_examples():
    S = subdiff_at("convex1d", parse_func("abs(x1)", convex=True), [0.0])
    assert S.min() == pytest.approx(-1.0, abs=1e-6) and S.max() == pytest.approx(1.0, abs=1e-6)
    assert len(S) >= 3
    P = subdiff_at("piecewise", parse_func("abs(x1)"), [0.0])
    assert P.min() == -1.0 and P.max() == 1.0
    assert subdiff_at("polynomial", parse_func("-1*x1^2"), [2.0]).tolist() == [[-4.0]]
    assert subdiff_at("smooth", parse_func("sin(x1)"), [0.0]).tolist() == [[1.0]]


def test_subdiff_at_errors():
    with pytest.raises(SubdiffError):
        subdiff_at("polynomial", parse_func("abs(x1)"), [1.0])
    with pytest.raises(SubdiffError):
        subdiff_at("convex1d", parse_func("x1^2 + x2^2"), [1.0, 1.0])
    with pytest.raises(SubdiffError):
        subdiff_at("smooth", parse_func("x1", domain_box=(0.0, 1.0)), [2.0])
    with pytest.raises(SubdiffError):
        subdiff_at("nope", parse_func("x1"), [0.0])
    with pytest.raises(SubdiffError):
        subdiff_at("piecewise", parse_func("abs(x1) + abs(x2)"), [0.0, 0.0])


@pytest.mark.parametrize("text", CONVEX_1D)
@pytest.mark.parametrize("engine", ["convex1d", "piecewise"])
def test_convex_engine_soundness(text, engine):
    f = parse_func(text, convex=True)
    for x in np.linspace(-2, 2, 17):
        S = subdiff_at(engine, f, [x])
        assert np.all(subgradient_violation(f, [x], S) <= 1e-8)


@pytest.mark.parametrize("text", CONVEX_1D[:4])
def test_convex_graphs_are_monotone(text):
    G = subdiff_graph("piecewise", parse_func(text, convex=True), (-2.0, 2.0), 81)
    assert is_monotone(G, tol=1e-9).monotone


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-2, 2), text=st.sampled_from(["x1^3 - 2*x1", "sin(x1)*x1^2", "exp(x1) + cos(3*x1)",
                                                    "x1^4 - x1^2 + 0.5"]))
def test_central_difference_matches_exact(x, text):
    f = parse_func(text)
    ex = exact_gradient(f, [x])[0, 0]
    cd = central_difference_gradient(f, [x])[0]
    assert abs(cd - ex) <= 1e-6 * max(1.0, abs(ex))


def test_richardson_one_sided_at_kink():
    left, right = richardson_one_sided(parse_func("abs(x1) + 0.5*x1^2"), [0.0])
    assert left == pytest.approx(-1.0, abs=1e-8) and right == pytest.approx(1.0, abs=1e-8)


def test_subdiff_graph_examples():
    G = subdiff_graph("smooth", parse_func("0.5*x1^2"), (-2.0, 2.0), 21)
    assert np.allclose(G.X, G.XS)
    A = subdiff_graph("piecewise", parse_func("abs(x1)"), (-1.0, 1.0), 21)
    fan = A.image([0.0])[:, 0]
    assert fan.min() == -1.0 and fan.max() == 1.0
    assert np.all(A.XS[A.X[:, 0] > 0] == 1.0) and np.all(A.XS[A.X[:, 0] < 0] == -1.0)
    C = subdiff_graph("polynomial", parse_func("x1^3"), (-2.0, 2.0), 11)
    assert np.allclose(C.XS, 3 * C.X ** 2)


def test_subdiff_operator_matches_samples():
    f = parse_func("abs(x1) - 0.4*x1^2")
    A = subdiff_operator("piecewise", f, LINE)
    G = graph_sample(A, 51, box=(-2.0, 2.0))
    for x, xs in G.pairs:
        S = subdiff_at("piecewise", f, x)
        assert S.min() - 1e-12 <= xs[0] <= S.max() + 1e-12


def test_find_kinks():
    ks = find_kinks_1d(parse_func("abs(x1 - 0.3) + max(x1, 2*x1 - 1)"), (-2.0, 2.0))
    assert any(abs(k - 0.3) < 1e-12 for k in ks) and any(abs(k - 1.0) < 1e-12 for k in ks)


def test_weak_axiom_examples():
    rep = weak_axiom_test("smooth", [parse_func("(x1 - 1)^2")], [], (-3.0, 3.0))
    assert rep.passed and rep.checks >= 1
    h = parse_func("0.5*x1^2", convex=True)
    S = subdiff_at("piecewise", parse_func("abs(x1)") + h, [0.0])
    assert S.min() == -1.0 and S.max() == 1.0
    rep = weak_axiom_test("piecewise", [parse_func("abs(x1)")], [h], (-2.0, 2.0), grid_n=21)
    assert rep.passed


def test_distance_function_subdifferential_is_ball():
    beta = 0.3
    h = distance_function(LINE, beta, [0.7])
    S = subdiff_at("piecewise", h, [0.7])
    assert S.min() == pytest.approx(-beta) and S.max() == pytest.approx(beta)
    sp = NormedSpace(2, "pinf")
    h2 = distance_function(sp, 0.5, [0.0, 0.0])
    assert h2([1.0, -2.0]) == pytest.approx(1.0)


def test_weak_axiom_corpus_passes_for_all_engines():
    fs = [parse_func(t) for t in ("abs(x1)", "x1^4 - x1^2", "max(x1, 0) - 0.3*x1^2", "sin(x1)")]
    hs = [parse_func(t, convex=True) for t in ("0.5*x1^2", "2*x1 + 1", "0.25*abs(x1 - 0.5)")]
    for engine in ("piecewise", "convex1d"):
        rep = weak_axiom_test(engine, fs, hs, (-2.0, 2.0), grid_n=21)
        assert rep.passed, rep.violations[:3]


def test_weak_axiom_rejects_nonconvex_h():
    with pytest.raises(ValueError):
        weak_axiom_test("piecewise", [parse_func("x1^2")], [parse_func("sin(x1)", convex=True)])


def test_subgradient_violation_flags_bad_candidate():
    f = parse_func("abs(x1)")
    v = subgradient_violation(f, [0.0], np.array([[0.5], [1.5]]))
    assert v[0] <= 0.0 and v[1] > 0.1
    assert math.isfinite(v[1])
