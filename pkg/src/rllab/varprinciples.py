"""Constructive Ekeland and Brondsted-Rockafellar procedures.

``ekeland_point`` runs the usual descent: starting from u, repeatedly jump to
the global grid-refined minimiser of ``g + beta * ||. - s_k||`` while that
lowers the envelope by more than 1e-10.  The decrease conclusion is then
checked exactly; the strict-minimum conclusion only on a grid, and the
result records the margin rather than claiming it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .funcspec import ScalarFunc, fenchel_gap, search_box
from .geometry import NormedSpace, duality_map, dual_norm, norm, rl
from .search import grid_points, minimize_box
from .subdiff import exact_one_sided, find_kinks_1d, subdiff_at, subgradient_violation

DECREASE_STEP = 1e-10
MAX_DESCENTS = 10_000
DUAL_TOL = 1e-6


class PreconditionError(ValueError):
    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap


class RecoveryError(RuntimeError):
    """No engine subgradient at the Ekeland point lies within the dual radius."""

    def __init__(self, message: str, nearest: float):
        super().__init__(message)
        self.nearest = nearest


@dataclass
class EkelandResult:
    s: np.ndarray
    decrease_ok: bool
    strictmin_margin: float
    distance: float
    value: float
    iterations: int
    path: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"s": self.s.tolist(), "decrease_ok": self.decrease_ok,
                "strictmin_margin": self.strictmin_margin, "distance": self.distance,
                "value": self.value, "iterations": self.iterations}


@dataclass
class BRResult:
    s: np.ndarray
    sstar: np.ndarray
    dist_primal: float
    dist_dual: float
    descent_ok: bool
    fenchel_gap: float
    subgradient_violation: float | None = None
    ekeland: EkelandResult | None = None

    def to_json(self) -> dict:
        return {"s": self.s.tolist(), "sstar": self.sstar.tolist(),
                "dist_primal": self.dist_primal, "dist_dual": self.dist_dual,
                "descent_ok": self.descent_ok, "fenchel_gap": self.fenchel_gap,
                "subgradient_violation": self.subgradient_violation}


def _candidate_points(g: ScalarFunc, box, extra) -> np.ndarray:
    pts = [np.atleast_2d(np.asarray(e, dtype=float)) for e in extra]
    if g.dim == 1:
        ks = find_kinks_1d(g, box)
        if ks:
            pts.append(np.array(ks)[:, None])
    return np.concatenate(pts) if pts else np.zeros((0, g.dim))


def _polish_1d(g: ScalarFunc, s, gs, u, gu, beta, ball, space):
    """Move s onto a nearby stationary point of g found by bisection on exact one-sided derivatives.

    Value comparisons stop resolving s once ``g`` is flat to rounding, which
    leaves ``|g'(s)|`` well above a tiny beta.  The move is kept only if g does
    not rise beyond rounding and the descent inequality still holds.
    """
    lo_b, hi_b = float(ball[0][0]), float(ball[1][0])
    x0 = float(s[0])
    dm, dp = exact_one_sided(g, s)
    if dm <= 0.0 <= dp:
        return s, gs
    side = 1.0 if dp < 0.0 else -1.0
    w = max(abs(x0), 1.0) * 1e-9
    far = None
    while x0 + side * w <= hi_b and x0 + side * w >= lo_b:
        z = x0 + side * w
        zm, zp = exact_one_sided(g, [z])
        if (zm > 0.0) if side > 0 else (zp < 0.0):
            far = z
            break
        if zm <= 0.0 <= zp:
            far = z
            break
        w *= 2.0
    if far is None:
        return s, gs
    a, b = (x0, far) if side > 0 else (far, x0)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        mm, mp = exact_one_sided(g, [mid])
        if mp < 0.0:
            a = mid
        elif mm > 0.0:
            b = mid
        else:
            a = b = mid
            break
    x = np.array([0.5 * (a + b)])
    gx = g(x)
    noise = 8.0 * np.finfo(float).eps * max(1.0, abs(gs))
    if gx <= gs + noise and gx + beta * norm(space, x - u) <= gu:
        return x, gx
    return s, gs


def ekeland_point(g: ScalarFunc, u, alpha: float, beta: float, box=None, grid_n: int = 2001,
                  space: NormedSpace | None = None, slack: float = 1e-9) -> EkelandResult:
    """Point s with ``g(s) + beta ||s - u|| <= g(u)`` that minimises ``g + beta ||. - s||``.

    Precondition ``g(u) <= inf g + alpha * beta + slack`` where the infimum is
    the grid-refined minimum over the box.  Descent candidates are confined
    to the closed ball of radius alpha around u.
    """
    space = space or NormedSpace(g.dim)
    u = space.check(u).astype(float)
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    b = search_box(g, box)
    hw = space.sup_halfwidth(alpha)
    b = (np.minimum(b[0], u - hw), np.maximum(b[1], u + hw))
    kinks = _candidate_points(g, b, [u])
    m = minimize_box(g.many, b, grid_n=grid_n, extra_points=kinks).value
    gu = g(u)
    if not gu <= m + alpha * beta + slack:
        raise PreconditionError(
            f"g(u) - inf g = {gu - m:.6g} exceeds alpha*beta = {alpha * beta:.6g}", gu - m)

    ball = (np.maximum(b[0], u - hw), np.minimum(b[1], u + hw))

    def envelope(center):
        def fun(X):
            out = g.many(X) + beta * norm(space, X - center)
            return np.where(norm(space, X - u) <= alpha, out, np.inf)
        return fun

    s = u.copy()
    gs = gu
    path = [s.copy()]
    for it in range(MAX_DESCENTS):
        extra = np.concatenate([kinks, s[None, :]])
        res = minimize_box(envelope(s), ball, grid_n=grid_n, extra_points=extra)
        if res.value < gs - DECREASE_STEP:
            s = res.x.copy()
            gs = g(s)
            path.append(s.copy())
        else:
            break
    else:
        raise RuntimeError(f"Ekeland descent did not settle after {MAX_DESCENTS} steps")

    if g.dim == 1:
        s, gs = _polish_1d(g, s, gs, u, gu, beta, ball, space)

    decrease_ok = bool(gs + beta * norm(space, s - u) <= gu)
    G = grid_points(*b, grid_n)
    G = np.concatenate([G, kinks])
    G = G[np.any(G != s, axis=1)]
    margin = float(np.min(g.many(G) + beta * norm(space, G - s)) - gs)
    return EkelandResult(s, decrease_ok, margin, float(norm(space, s - u)), gs, it, path)


def nearest_member(S: np.ndarray, target: np.ndarray, space: NormedSpace) -> np.ndarray:
    """Closest point of the representative set (of its hull in dimension one)."""
    if space.dim == 1:
        return np.clip(target, S.min(axis=0), S.max(axis=0))
    return S[int(np.argmin(dual_norm(space, S - target)))]


def br_project(f: ScalarFunc, engine: str, u, ustar, alpha: float, beta: float, box=None,
               grid_n: int = 2001, space: NormedSpace | None = None,
               tol: float = DUAL_TOL) -> BRResult:
    """Exact subgradient pair near an approximate one.

    Requires ``f(u) + f*(u*) <= <u, u*> + alpha * beta`` (checked with slack
    1e-6).  Runs Ekeland on ``f - u*`` and picks the engine subgradient at the
    resulting point closest to u*.
    """
    space = space or NormedSpace(f.dim)
    u = space.check(u).astype(float)
    ustar = space.check(ustar, "dual vector").astype(float)
    gap = fenchel_gap(f, u, ustar, box, grid_n)
    if gap > alpha * beta + tol:
        raise PreconditionError(
            f"Fenchel gap {gap:.6g} exceeds alpha*beta = {alpha * beta:.6g}", gap)
    g = f.minus_linear(ustar)
    ek = ekeland_point(g, u, alpha, beta, box, grid_n, space, slack=tol)
    s = ek.s
    S = subdiff_at(engine, f, s)
    sstar = nearest_member(S, ustar, space)
    dd = float(dual_norm(space, sstar - ustar))
    if dd > beta + tol:
        raise RecoveryError(f"nearest subgradient at s = {s.tolist()} is {dd:.6g} from u*, "
                            f"beyond beta = {beta:.6g}; engine or grid too coarse", dd)
    descent_ok = bool(f(s) - s @ ustar <= f(u) - u @ ustar + tol)
    viol = float(subgradient_violation(f, s, sstar[None, :], box)[0]) if f.claimed_convex else None
    return BRResult(s, sstar, ek.distance, dd, descent_ok, float(gap), viol, ek)


def br_project_convex_j(space: NormedSpace, u, ustar, eps: float, tol: float = 1e-9,
                        grid_n: int = 2001):
    """Pair ``(t, t*)`` in the graph of J within ``sqrt(eps)`` of ``(u, u*)`` in each factor.

    Requires ``j(u) + j*(u*) <= <u, u*> + eps``.  Hilbert norms use the closed
    form ``t = (u + W^-1 u*) / 2``; p1 and pinf minimise the convex function
    ``j - <., u*> + sqrt(eps) ||. - u||`` and take the member of J(t)
    nearest to u*.
    """
    u = space.check(u).astype(float)
    ustar = space.check(ustar, "dual vector").astype(float)
    excess = rl(space, u, -ustar)
    if excess > eps + tol:
        raise PreconditionError(f"j(u) + j*(u*) - <u, u*> = {excess:.6g} exceeds eps = {eps:.6g}",
                                excess)
    if space.hilbert:
        w = space.w
        t = 0.5 * (u + ustar / w)
        return t, w * t
    r = float(np.sqrt(max(eps, 0.0)))
    if r == 0.0:
        t = u
    else:
        hw = space.sup_halfwidth(r)

        def obj(X):
            return 0.5 * norm(space, X) ** 2 - X @ ustar + r * norm(space, X - u)

        t = minimize_box(obj, (u - hw, u + hw), grid_n=grid_n, extra_points=u[None, :]).x
    tstar = duality_map(space, t).nearest(ustar)
    bound = r + 1e-6
    if norm(space, t - u) > bound or dual_norm(space, tstar - ustar) > bound:
        raise RecoveryError("graph-of-J projection missed the sqrt(eps) bounds",
                            float(dual_norm(space, tstar - ustar)))
    return t, tstar
