import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rllab import expr
from rllab.funcspec import (DownsideCertificate, EvaluationError, UnboundedError, check_convexity,
                            fenchel_conjugate, fenchel_gap, minimize, parse_func, theorem3_bound,
                            verify_downside)
from rllab.geometry import NormedSpace

# -- expression trees ----------------------------------------------------------

numbers = st.floats(-20, 20, allow_nan=False, allow_infinity=False).map(lambda v: expr.Num(v))
variables = st.integers(0, 2).map(expr.Var)
leaves = st.one_of(numbers, variables, st.just(expr.Norm2Sq()))


def _extend(children):
    return st.one_of(
        st.builds(expr.Neg, children),
        st.builds(expr.BinOp, st.sampled_from("+-*"), children, children),
        st.builds(expr.Pow, children, st.integers(0, 4)),
        st.builds(lambda n, a: expr.Call(n, (a,)), st.sampled_from(expr.FUNCS1), children),
        st.builds(lambda args: expr.Call("max", tuple(args)), st.lists(children, min_size=1, max_size=3)),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_parse_print_round_trip(tree):
    # generated trees may hold forms the parser normalises (a negated literal), so the
    # identity is checked on the parsed tree
    again = expr.parse(expr.to_text(tree))
    assert expr.parse(expr.to_text(again)) == again
    X = np.array([[0.3, -0.7, 1.1]])
    with np.errstate(all="ignore"):
        a, b = expr.compile_tree(tree)(X), expr.compile_tree(again)(X)
    assert np.array_equal(a, b, equal_nan=True)


def test_parse_print_round_trip_seeded_corpus():
    rng = np.random.default_rng(0)
    atoms = ["x1", "x2", "2.5", "0.25", "norm2sq()"]

    def gen(depth):
        if depth == 0 or rng.random() < 0.3:
            return str(rng.choice(atoms))
        k = int(rng.integers(0, 6))
        a = gen(depth - 1)
        if k == 0:
            return f"-{a}"
        if k == 1:
            return f"({a} {rng.choice(['+', '-', '*'])} {gen(depth - 1)})"
        if k == 2:
            return f"({a})^{int(rng.integers(0, 4))}"
        if k == 3:
            return f"{rng.choice(expr.FUNCS1)}({a})"
        if k == 4:
            return f"max({a}, {gen(depth - 1)})"
        return a

    for _ in range(100):
        tree = expr.parse(gen(4))
        assert expr.parse(expr.to_text(tree)) == tree


def test_parse_examples():
    assert expr.parse("sin(x1)") == expr.Call("sin", (expr.Var(0),))
    f = parse_func("-0.25*x1^2")
    assert f(np.array([2.0])) == -1.0
    assert parse_func("x1^3")(np.array([-2.0])) == -8.0


def test_parse_errors_report_position():
    with pytest.raises(expr.ParseError) as e:
        expr.parse("x1 + foo(2)")
    assert e.value.position == 5
    with pytest.raises(expr.ParseError):
        expr.parse("x1 +")
    with pytest.raises(expr.ParseError):
        expr.parse("x1 $ 2")


def test_eval_examples():
    assert parse_func("abs(x1)")([-2.0]) == 2.0
    assert parse_func("sin(x1)")([math.pi / 2]) == 1.0
    assert parse_func("x1^3")([-2.0]) == -8.0


def test_eval_domain_box_and_nan():
    f = parse_func("x1^2", domain_box=(-1.0, 1.0))
    assert f([0.5]) == 0.25
    assert f([2.0]) == math.inf
    with pytest.raises(EvaluationError):
        parse_func("exp(x1) - exp(x1)")([1000.0])
    with pytest.raises(ValueError):
        parse_func("x1")([1.0, 2.0])


def test_fenchel_conjugate_examples():
    assert fenchel_conjugate(parse_func("0.5*x1^2"), [1.0]) == pytest.approx(0.5, abs=1e-9)
    assert fenchel_conjugate(parse_func("abs(x1)"), [0.5]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(UnboundedError):
        fenchel_conjugate(parse_func("abs(x1)"), [2.0])


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-5, 5), xs=st.floats(-3, 3),
       text=st.sampled_from(["0.5*x1^2", "x1^4 - x1^2", "abs(x1) + x1^2", "exp(x1)", "cos(x1) + x1^2"]))
def test_fenchel_young(x, xs, text):
    f = parse_func(text)
    try:
        conj = fenchel_conjugate(f, [xs])
    except UnboundedError:
        return  # f*(xs) = +inf satisfies the inequality
    assert f([x]) + conj >= x * xs - 1e-6


def test_fenchel_gap_zero_on_subgradient_pairs():
    f = parse_func("0.5*x1^2")
    assert fenchel_gap(f, [1.0], [1.0]) == pytest.approx(0.0, abs=1e-9)
    assert fenchel_gap(f, [1.0], [0.0]) == pytest.approx(0.5, abs=1e-9)


def test_minimize_examples():
    x, v = minimize(parse_func("(x1 - 3)^2"), (-10.0, 10.0))
    assert x[0] == pytest.approx(3.0, abs=1e-6) and v <= 1e-12
    x, v = minimize(parse_func("x1^4 - x1^2"), (-2.0, 2.0))
    assert v == pytest.approx(-0.25, abs=1e-10)
    assert abs(x[0]) == pytest.approx(1 / math.sqrt(2), abs=1e-5)
    x, v = minimize(parse_func("sin(x1)"), (0.0, 2 * math.pi))
    assert x[0] == pytest.approx(1.5 * math.pi, abs=1e-5) and v == pytest.approx(-1.0, abs=1e-10)


@pytest.mark.parametrize("text", ["x1^4 - x1^2", "sin(3*x1) + 0.1*x1^2", "abs(x1 - 1) - 0.2*x1^2"])
def test_minimize_beats_every_grid_point(text):
    f = parse_func(text)
    _, v = minimize(f, (-3.0, 3.0), grid_n=2001)
    grid = np.linspace(-3, 3, 2001)[:, None]
    assert v <= np.min(f.many(grid)) + 1e-8


def test_minimize_deterministic_and_all_infinite_error():
    f = parse_func("abs(x1 - 0.3) + x1^2")
    assert minimize(f)[1] == minimize(f)[1]
    with pytest.raises(Exception):
        minimize(parse_func("x1", domain_box=(5.0, 6.0)), (-1.0, 1.0))


def test_verify_downside_examples():
    assert verify_downside(parse_func("-0.25*x1^2"), DownsideCertificate(0.25)).valid
    bad = verify_downside(parse_func("-1*x1^2"), DownsideCertificate(0.4))
    assert not bad.valid and bad.worst_violation == pytest.approx(60.0)
    assert verify_downside(parse_func("abs(x1)"), DownsideCertificate(0.0)).valid
    with pytest.raises(ValueError):
        DownsideCertificate(0.5)


def test_stability_bound_examples():
    cert = DownsideCertificate(0.0)
    assert theorem3_bound(cert, [0.0], [0.0], 0.0) == pytest.approx(math.sqrt(2) + 2)
    _, m = minimize(parse_func("0.5*x1^2 - x1"))
    assert m == pytest.approx(-0.5)
    assert theorem3_bound(cert, [0.0], [1.0], m) == pytest.approx(1 + math.sqrt(1 + 2 * (m + 1)) + 2)
    _, m = minimize(parse_func("-0.25*x1^2 + 0.5*x1^2"))
    a = 0.25
    assert theorem3_bound(DownsideCertificate(0.25), [0.0], [0.0], m) == pytest.approx(
        math.sqrt(4 * a * (m + 1)) / (2 * a) + 2)
    with pytest.raises(ValueError):
        theorem3_bound(cert, [0.0], [0.0], -5.0)


def test_convexity_check():
    assert check_convexity(parse_func("abs(x1) + x1^2"))[0]
    assert not check_convexity(parse_func("x1^4 - x1^2"))[0]


def test_stability_bound_respects_norm():
    cert = DownsideCertificate(0.0)
    sp = NormedSpace(2, "p1")
    # ||(1,1)||_1 = 2 and the dual norm of 0 is 0
    a, b, c = 0.5, 2.0, -2.0
    want = b / (2 * a) + math.sqrt(b * b + 4 * a * (c + 0.0 + 1)) / (2 * a) + 2 + 2
    assert theorem3_bound(cert, [1.0, 1.0], [0.0, 0.0], 0.0, sp) == pytest.approx(want)


def test_downside_certificate_exact_quadratic_is_valid():
    for a0 in (0.1, 0.3, 0.45):
        cert = verify_downside(parse_func(f"-{a0!r}*x1^2"), DownsideCertificate(a0))
        assert cert.valid
