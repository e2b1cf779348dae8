"""Subdifferential engines for expression functions, and an audit of the weak axioms.

Engines
-------
``smooth``      gradient by forward-mode differentiation when the expression has
                no ``abs``/``max``; central differences otherwise.
``polynomial``  exact derivative; rejects anything that is not a polynomial.
``convex1d``    one-sided derivatives from Richardson-extrapolated one-sided
                differences (steps 1e-2 .. 1e-6); a left/right gap above 1e-5
                is a kink and the whole interval is emitted.
``piecewise``   exact one-sided derivatives of the expression (nonsmooth
                forward mode); kinks give the interval between them.

No engine implements a general limiting construction.  Each one only claims
the two weak-subdifferential axioms, which ``weak_axiom_test`` audits.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr
from .funcspec import DEFAULT_BOX, ScalarFunc, check_convexity, minimize, search_box
from .geometry import NormedSpace
from .operators import AnalyticOperator, SampledGraph, graph_sample
from .search import as_box, grid_points

ENGINES = ("convex1d", "smooth", "polynomial", "piecewise")
KINK_GAP = 1e-5
INTERIOR_SAMPLES = 5
SUBGRAD_TOL = 1e-8
STEP_LADDER = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


class SubdiffError(ValueError):
    pass


def exact_gradient(f: ScalarFunc, X) -> np.ndarray:
    """Row-wise gradients by forward-mode differentiation (smooth expressions)."""
    X = np.asarray(X, dtype=float).reshape(-1, f.dim)
    G = np.empty_like(X)
    for i in range(f.dim):
        D = np.zeros_like(X)
        D[:, i] = 1.0
        G[:, i] = expr.directional(f.ast, X, D)[1]
    return G


def central_difference_gradient(f: ScalarFunc, x, h: float = 1e-6) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    step = h * max(1.0, float(np.max(np.abs(x))))
    E = np.eye(f.dim) * step
    fp = f.many(x + E)
    fm = f.many(x - E)
    return (fp - fm) / (2.0 * step)


def exact_one_sided(f: ScalarFunc, x, kink_tol: float = 1e-10) -> tuple[float, float]:
    """``(f'_-(x), f'_+(x))`` in dimension one from the expression itself."""
    X = np.array([[float(np.atleast_1d(x)[0])]] * 2)
    D = np.array([[1.0], [-1.0]])
    _, der = expr.directional(f.ast, X, D, kink_tol)
    return -float(der[1]), float(der[0])


def richardson_one_sided(f: ScalarFunc, x) -> tuple[float, float]:
    """One-sided derivatives from extrapolated one-sided difference quotients."""
    x0 = float(np.atleast_1d(x)[0])
    fx = f(np.array([x0]))
    out = []
    for side in (-1.0, 1.0):
        hs = np.array(STEP_LADDER)
        pts = (x0 + side * hs)[:, None]
        q = (f.many(pts) - fx) / (side * hs)
        # first-order error, step ratio 10
        r = (10.0 * q[1:] - q[:-1]) / 9.0
        errs = np.abs(np.diff(r))
        if not np.all(np.isfinite(errs)):
            raise SubdiffError(f"difference quotients are not finite at x = {x0}")
        i = len(errs) - 1 - int(np.argmin(errs[::-1]))  # ties go to the finer step
        out.append(float(r[i + 1]))
    return out[0], out[1]


def _interval(lo: float, hi: float, k: int) -> np.ndarray:
    return np.linspace(lo, hi, k + 2)[:, None]


def _verification_points(f: ScalarFunc, x, box, grid_n):
    b = search_box(f, box)
    G = grid_points(*b, grid_n if f.dim == 1 else max(5, int(round(4000 ** (1.0 / f.dim)))))
    near = [x + s * 10.0**-e * np.eye(f.dim)[i]
            for e in range(1, 7) for s in (-1.0, 1.0) for i in range(f.dim)]
    return np.concatenate([G, np.array(near)])


def subgradient_violation(f: ScalarFunc, x, S, box=None, grid_n: int = 401) -> np.ndarray:
    """For each row s* of S: ``max_y f(x) + <y - x, s*> - f(y)`` over a verification grid."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    Y = _verification_points(f, x, box, grid_n)
    fy = f.many(Y)
    keep = np.isfinite(fy)
    Y, fy = Y[keep], fy[keep]
    S = np.asarray(S, dtype=float).reshape(-1, f.dim)
    lin = f(x) + (Y - x) @ S.T  # (m, k)
    return np.max(lin - fy[:, None], axis=0)


def subdiff_at(engine: str, f: ScalarFunc, x, k: int = INTERIOR_SAMPLES, verify: bool | None = None,
               verify_box=None, kink_tol: float = 1e-10) -> np.ndarray:
    """Finite representative set of the subdifferential of f at x, shape ``(m, dim)``.

    For ``claimed_convex`` functions each candidate is checked against the
    subgradient inequality on a verification grid (slack 1e-8) and failures
    are discarded.
    """
    if engine not in ENGINES:
        raise SubdiffError(f"unknown engine {engine!r}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (f.dim,):
        raise SubdiffError(f"point has shape {x.shape}, function has dim {f.dim}")
    if not np.isfinite(f(x)):
        raise SubdiffError(f"x = {x.tolist()} is outside the domain of f")

    if engine == "polynomial":
        if not expr.is_polynomial(f.ast):
            raise SubdiffError("engine/function mismatch: polynomial engine needs a polynomial")
        S = exact_gradient(f, x)
    elif engine == "smooth":
        if expr.is_smooth(f.ast):
            S = exact_gradient(f, x)
        else:
            S = central_difference_gradient(f, x)[None, :]
    elif engine == "convex1d":
        if f.dim != 1:
            raise SubdiffError("engine/function mismatch: convex1d works in dimension one")
        left, right = richardson_one_sided(f, x)
        if right - left > KINK_GAP:
            S = _interval(left, right, k)
        else:
            S = np.array([[0.5 * (left + right)]])
    else:
        if f.dim == 1:
            left, right = exact_one_sided(f, x, kink_tol)
            S = _interval(left, right, k) if right > left else np.array([[right]])
        else:
            X = np.repeat(x[None, :], 2 * f.dim, axis=0)
            D = np.concatenate([np.eye(f.dim), -np.eye(f.dim)])
            _, der = expr.directional(f.ast, X, D, kink_tol)
            plus, minus = der[: f.dim], -der[f.dim:]
            if np.any(plus != minus):
                raise SubdiffError("piecewise engine handles kinks in dimension one only")
            S = plus[None, :]

    if verify is None:
        verify = f.claimed_convex
    if verify:
        viol = subgradient_violation(f, x, S, verify_box)
        ok = viol <= SUBGRAD_TOL
        if not np.any(ok):
            raise SubdiffError(f"no candidate subgradient at x = {x.tolist()} passed verification "
                               f"(smallest violation {viol.min():.3g})")
        S = S[ok]
    return S


def find_kinks_1d(f: ScalarFunc, box=None, grid_n: int = 4001) -> list[float]:
    """Zeros of ``abs`` arguments and switch points of ``max`` within the box."""
    if f.dim != 1:
        return []
    lo, hi = search_box(f, box)
    xs = np.linspace(lo[0], hi[0], grid_n)[:, None]
    funcs = []
    for node in expr.walk(f.ast):
        if isinstance(node, expr.Call) and node.name == "abs":
            funcs.append(expr.compile_tree(node.args[0]))
        elif isinstance(node, expr.Call) and node.name == "max":
            cs = [expr.compile_tree(a) for a in node.args]
            for i in range(len(cs)):
                for j in range(i + 1, len(cs)):
                    funcs.append((lambda a, b: lambda X: a(X) - b(X))(cs[i], cs[j]))
    kinks = set()
    for g in funcs:
        v = g(xs)
        zero = np.flatnonzero(v == 0.0)
        kinks.update(float(xs[i, 0]) for i in zero)
        flips = np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)
        for i in flips:
            a, b = float(xs[i, 0]), float(xs[i + 1, 0])
            ga = g(np.array([[a]]))[0]
            for _ in range(200):
                m = 0.5 * (a + b)
                if m in (a, b):
                    break
                gm = g(np.array([[m]]))[0]
                if gm == 0.0:
                    a = b = m
                    break
                if np.sign(gm) == np.sign(ga):
                    a, ga = m, gm
                else:
                    b = m
            kinks.add(a if abs(g(np.array([[a]]))[0]) <= abs(g(np.array([[b]]))[0]) else b)
    return sorted(kinks)


def subdiff_operator(engine: str, f: ScalarFunc, space: NormedSpace | None = None,
                     box=None) -> AnalyticOperator:
    """The operator ``x -> subdiff_at(engine, f, x)`` on the domain of f."""
    space = space or NormedSpace(f.dim)
    vec = None
    if engine in ("smooth", "polynomial") and expr.is_smooth(f.ast):
        if engine == "polynomial" and not expr.is_polynomial(f.ast):
            raise SubdiffError("engine/function mismatch: polynomial engine needs a polynomial")
        vec = lambda X: exact_gradient(f, X)  # noqa: E731
    special = ()
    if engine in ("piecewise", "convex1d") and f.dim == 1:
        special = tuple((k,) for k in find_kinks_1d(f, box))
    return AnalyticOperator(space, lambda x: subdiff_at(engine, f, x), f.domain_box,
                            f"subdiff[{engine}]({f.source})", {"f": f.source, "engine": engine},
                            vectorized=vec, special_points=special)


def subdiff_graph(engine: str, f: ScalarFunc, box=None, budget: int = 201,
                  space: NormedSpace | None = None) -> SampledGraph:
    """Sampled graph of the engine's subdifferential; every pair is re-verified."""
    op = subdiff_operator(engine, f, space, box)
    g = graph_sample(op, budget, box=box if box is not None else DEFAULT_BOX)
    for x, xs in zip(g.X, g.XS):
        if not op.contains(x, xs, tol=0.0):
            raise SubdiffError(f"sampled pair ({x}, {xs}) failed re-verification")
    return g


def distance_function(space: NormedSpace, beta: float, s) -> ScalarFunc:
    """``beta * ||. - s||`` as an expression (p1, pinf, or any norm in dimension one)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    diffs = [expr.sub(expr.Var(i), expr.Num(float(v))) for i, v in enumerate(s)]
    absd = [expr.Call("abs", (d,)) for d in diffs]
    if space.dim == 1:
        scale = float(np.sqrt(space.w[0]))
        body = absd[0]
    elif space.kind == "p1":
        scale, body = 1.0, expr.total(absd)
    elif space.kind == "pinf":
        scale, body = 1.0, expr.Call("max", tuple(absd))
    else:
        raise ValueError("beta*||. - s|| is expressible only for p1/pinf or in dimension one")
    return ScalarFunc(expr.mul(expr.Num(float(beta) * scale), body), space.dim, claimed_convex=True)


@dataclass
class WeakAxiomReport:
    engine: str
    checks: int = 0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def _hull_distance(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.max(np.maximum(lo - points, 0.0) + np.maximum(points - hi, 0.0), axis=-1)


def weak_axiom_test(engine: str, f_corpus, h_corpus, box=None, grid_n: int = 41,
                    tol: float = 1e-6) -> WeakAxiomReport:
    """Audit the two axioms on a corpus.

    (i)  at an engine-detected strict global minimiser x of f, 0 lies within
         ``tol`` of the emitted set (of its hull in dimension one);
    (ii) at each grid point, every element of the engine's set for f + h lies
         within ``tol`` of (set for f) + (exact subdifferential of h).

    Every h must be flagged convex and pass the midpoint convexity check.
    """
    rep = WeakAxiomReport(engine)
    for h in h_corpus:
        ok, worst = check_convexity(h, box)
        if not h.claimed_convex or not ok:
            raise ValueError(f"h = {h.source} is not convex (midpoint excess {worst:.3g})")

    for f in f_corpus:
        b = search_box(f, box)
        x0, v0 = minimize(f, b)
        G = grid_points(*b, 401 if f.dim == 1 else 21)
        fg = f.many(G)
        cell = float(np.max((b[1] - b[0]) / 400.0))
        far = np.max(np.abs(G - x0), axis=1) > cell
        # a minimiser on the box edge says nothing about a global minimum
        interior = bool(np.all(x0 > b[0] + cell) and np.all(x0 < b[1] - cell))
        if interior and np.all(fg[far] > v0):
            rep.checks += 1
            S = subdiff_at(engine, f, x0, verify=False)
            if f.dim == 1:
                dist = float(_hull_distance(np.zeros(1), S.min(axis=0), S.max(axis=0)))
            else:
                dist = float(np.min(np.linalg.norm(S, axis=1)))
            if dist > tol:
                rep.violations.append({"axiom": "i", "f": f.source, "x": x0.tolist(), "distance": dist})

        for h in h_corpus:
            fh = f + h
            for x in grid_points(*b, grid_n):
                if not np.isfinite(fh(x)):
                    continue
                rep.checks += 1
                A = subdiff_at(engine, fh, x, verify=False)
                Bf = subdiff_at(engine, f, x, verify=False)
                Bh = subdiff_at("piecewise", h, x, verify=False)
                if f.dim == 1:
                    lo = Bf.min(axis=0) + Bh.min(axis=0)
                    hi = Bf.max(axis=0) + Bh.max(axis=0)
                    dist = float(np.max(_hull_distance(A, lo, hi)))
                else:
                    sums = (Bf[:, None, :] + Bh[None, :, :]).reshape(-1, f.dim)
                    dist = float(max(np.min(np.linalg.norm(sums - a, axis=1)) for a in A))
                if dist > tol:
                    rep.violations.append({"axiom": "ii", "f": f.source, "h": h.source,
                                           "x": x.tolist(), "distance": dist})
    return rep
