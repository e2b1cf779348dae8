"""Scalar functions ``f: R^n -> ]-inf, +inf]`` given as parsed expressions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import expr
from .expr import ParseError  # noqa: F401  (re-exported)
from .geometry import NormedSpace, dual_norm, j, norm
from .search import SearchError, as_box, grid_points, intersect, maximize_box, minimize_box

DEFAULT_BOX = (-10.0, 10.0)
UNBOUNDED = 1e12


class EvaluationError(ArithmeticError):
    pass


class UnboundedError(ArithmeticError):
    """The supremum defining a conjugate exceeded the unboundedness threshold."""


@dataclass(frozen=True, eq=False)
class ScalarFunc:
    ast: object
    dim: int
    claimed_convex: bool = False
    claimed_lsc: bool = True
    domain_box: tuple | None = None  # (lo, hi); f = +inf outside
    text: str | None = None

    def __post_init__(self):
        if self.dim < max(1, expr.max_var(self.ast)):
            raise ValueError(f"expression uses x{expr.max_var(self.ast)} but dim is {self.dim}")
        if self.domain_box is not None:
            object.__setattr__(self, "domain_box", as_box(self.domain_box, self.dim))

    @cached_property
    def _compiled(self):
        return expr.compile_tree(self.ast)

    @property
    def source(self) -> str:
        return self.text if self.text is not None else expr.to_text(self.ast)

    def many(self, X) -> np.ndarray:
        """Evaluate at each row of an ``(N, dim)`` array."""
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        with np.errstate(over="ignore", invalid="ignore"):
            v = np.asarray(self._compiled(X), dtype=float)
        if np.any(np.isnan(v)):
            raise EvaluationError(f"{self.source} is undefined (NaN) at some point")
        if np.any(v == -np.inf):
            raise EvaluationError(f"{self.source} evaluates to -inf")
        if self.domain_box is not None:
            lo, hi = self.domain_box
            inside = np.all((X >= lo) & (X <= hi), axis=1)
            v = np.where(inside, v, np.inf)
        return v

    def __call__(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}, got shape {x.shape}")
        return float(self.many(x[None, :])[0])

    def with_ast(self, ast, **changes) -> "ScalarFunc":
        return replace(self, ast=ast, text=None, **changes)

    def __add__(self, other: "ScalarFunc") -> "ScalarFunc":
        box = self.domain_box
        if other.domain_box is not None:
            box = other.domain_box if box is None else intersect(box, other.domain_box)
        return ScalarFunc(expr.add(self.ast, other.ast), max(self.dim, other.dim),
                          self.claimed_convex and other.claimed_convex,
                          self.claimed_lsc and other.claimed_lsc, box)

    def minus_linear(self, ustar) -> "ScalarFunc":
        """``f - <., u*>``."""
        ustar = np.atleast_1d(np.asarray(ustar, dtype=float))
        return self.with_ast(expr.sub(self.ast, expr.linear_form(ustar)))


def parse_func(text: str, dim: int | None = None, convex: bool = False,
               lsc: bool = True, domain_box=None) -> ScalarFunc:
    ast = expr.parse(text)
    if dim is None:
        dim = max(1, expr.max_var(ast))
    return ScalarFunc(ast, dim, convex, lsc, domain_box, text)


def evaluate(f: ScalarFunc, x) -> float:
    return f(x)


def search_box(f: ScalarFunc, box=None):
    b = as_box(box if box is not None else DEFAULT_BOX, f.dim)
    if f.domain_box is not None:
        b = intersect(b, f.domain_box)
        if np.any(b[1] < b[0]):
            raise SearchError("search box does not meet the domain of f")
    return b


def minimize(f: ScalarFunc, box=None, grid_n: int = 2001, refine_iters: int = 200,
             return_trajectory: bool = False):
    """Grid-plus-refinement minimum of f over a box.

    Returns ``(x_min, value)``; with ``return_trajectory`` the best point after
    each refinement stage is appended as a third item.
    """
    b = search_box(f, box)
    res = minimize_box(f.many, b, grid_n=grid_n, refine_iters=refine_iters)
    if return_trajectory:
        return res.x, res.value, res.trajectory
    return res.x, res.value


def _conjugate_search(f: ScalarFunc, xs, box, grid_n, grow: float, max_growth: int):
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    lo, hi = as_box(box if box is not None else DEFAULT_BOX, f.dim)

    def obj(X):
        return X @ xs - f.many(X)

    prev = None
    for _ in range(max_growth + 1):
        b = (lo, hi)
        if f.domain_box is not None:
            b = intersect(b, f.domain_box)
        res = maximize_box(obj, b, grid_n=grid_n)
        if res.value > UNBOUNDED:
            raise UnboundedError(f"sup <x, x*> - f(x) exceeds {UNBOUNDED:g} for x* = {xs.tolist()}")
        cell = (b[1] - b[0]) / max(grid_n - 1, 1)
        # only edges of the search box can move; domain edges are final
        near_lo = (res.x - b[0] <= cell) & (b[0] == lo)
        near_hi = (b[1] - res.x <= cell) & (b[1] == hi)
        if prev is not None and abs(res.value - prev.value) < 1e-8:
            return res if res.value >= prev.value else prev
        if not np.any(near_lo | near_hi):
            return res
        prev = res
        center = 0.5 * (lo + hi)
        lo, hi = center - grow * (center - lo), center + grow * (hi - center)
    raise UnboundedError(f"conjugate search did not settle after {max_growth} box enlargements")


def fenchel_conjugate(f: ScalarFunc, xs, search_box=None, grid_n: int = 2001,
                      grow: float = 10.0, max_growth: int = 16) -> float:
    """Lower bound on ``f*(x*) = sup_x <x, x*> - f(x)`` from a refined grid search.

    When the maximiser sits on the edge of the box the box is enlarged by
    ``grow`` and the search repeated until two successive values differ by
    less than 1e-8.  Raises ``UnboundedError`` once the value exceeds 1e12.
    """
    return _conjugate_search(f, xs, search_box, grid_n, grow, max_growth).value


def fenchel_gap(f: ScalarFunc, u, ustar, search_box=None, grid_n: int = 2001) -> float:
    """``f(u) + f*(u*) - <u, u*>`` (with the grid lower bound for f*)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    ustar = np.atleast_1d(np.asarray(ustar, dtype=float))
    return f(u) + fenchel_conjugate(f, ustar, search_box, grid_n) - float(u @ ustar)


def check_convexity(f: ScalarFunc, box=None, samples: int = 1000, seed: int = 0,
                    tol: float = 1e-9) -> tuple[bool, float]:
    """Random midpoint test of the ``claimed_convex`` flag.

    Returns ``(passed, worst)`` where ``worst`` is the largest value of
    ``f(mid) - (f(a) + f(b)) / 2`` seen.
    """
    lo, hi = search_box(f, box)
    rng = np.random.default_rng(seed)
    A = rng.uniform(lo, hi, size=(samples, f.dim))
    B = rng.uniform(lo, hi, size=(samples, f.dim))
    fa, fb, fm = f.many(A), f.many(B), f.many(0.5 * (A + B))
    with np.errstate(invalid="ignore"):
        excess = fm - 0.5 * (fa + fb)
    excess = np.where(np.isnan(excess), -np.inf, excess)
    worst = float(np.max(excess))
    return worst <= tol, worst


@dataclass(frozen=True)
class DownsideCertificate:
    """Claim ``f(x) >= -a0 ||x||^2 - b0 ||x|| - c0`` with ``a0 < 1/2``."""

    a0: float
    b0: float = 0.0
    c0: float = 0.0
    validity_box: tuple | None = None
    worst_violation: float | None = None

    def __post_init__(self):
        if not self.a0 < 0.5:
            raise ValueError(f"a0 must be < 1/2, got {self.a0}")

    @property
    def valid(self) -> bool:
        return self.worst_violation is not None and self.worst_violation <= 0.0

    def lower_bound(self, r):
        return -self.a0 * r * r - self.b0 * r - self.c0


def verify_downside(f: ScalarFunc, cert: DownsideCertificate, box=None,
                    grid_n: int = 2001, space: NormedSpace | None = None) -> DownsideCertificate:
    """Fill ``worst_violation = max_grid(lower_bound(||x||) - f(x))``.

    Each grid violation is reduced by a few ulps of its operands, so an exact
    match such as ``f = -a0 x^2`` does not fail on rounding alone.
    """
    space = space or NormedSpace(f.dim)
    b = as_box(box if box is not None else DEFAULT_BOX, f.dim)
    X = grid_points(*b, grid_n)
    r = norm(space, X)
    fx = f.many(X)
    lb = cert.lower_bound(r)
    viol = lb - fx - 8 * np.finfo(float).eps * (np.abs(lb) + np.abs(fx))
    worst = float(np.max(viol))
    return replace(cert, validity_box=(b[0].tolist(), b[1].tolist()), worst_violation=worst)


def theorem3_bound(cert: DownsideCertificate, y, ystar, m: float,
                   space: NormedSpace | None = None) -> float:
    """Stability radius ``M`` for the target ``(y, y*)``.

    With ``a = 1/2 - a0``, ``b = ||y|| + ||y*||_* + b0`` and
    ``c = c0 - j(y)``, and ``m`` the infimum of ``f + j(. - y) - <., y*>``::

        M = b/(2a) + sqrt(b^2 + 4a(c + m + 1))/(2a) + ||y|| + 2
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ystar = np.atleast_1d(np.asarray(ystar, dtype=float))
    space = space or NormedSpace(len(y))
    a = 0.5 - cert.a0
    ny = norm(space, y)
    b = ny + dual_norm(space, ystar) + cert.b0
    c = cert.c0 - j(space, y)
    disc = b * b + 4.0 * a * (c + m + 1.0)
    if disc < 0:
        raise ValueError(f"negative discriminant {disc:g}: m = {m:g} is not the infimum of f + k")
    return b / (2 * a) + math.sqrt(disc) / (2 * a) + ny + 2.0


def near_minimizer_radius(cert: DownsideCertificate, y, ystar, m: float,
                          space: NormedSpace | None = None) -> float:
    """``M - ||y|| - 2``: every u with ``(f+k)(u) <= m + 1`` has ``||u||`` at most this."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    space = space or NormedSpace(len(y))
    return theorem3_bound(cert, y, ystar, m, space) - norm(space, y) - 2.0
