"""Seeded case generators shared by the property and acceptance tests."""
from functools import lru_cache

import numpy as np

from rllab.funcspec import UnboundedError, fenchel_gap, minimize, parse_func
from rllab.subdiff import subdiff_at

CONVEX_1D = [
    "abs(x1)", "0.5*x1^2", "x1^2", "max(x1, 0)", "abs(x1) + 0.5*x1^2", "exp(x1)", "x1^4",
    "abs(x1 - 1)", "max(x1, -0.5*x1)", "2*abs(x1) + x1", "x1^2 + x1", "exp(-x1)",
    "exp(x1) + exp(-x1)", "max(x1^2 - 1, 2*x1, -2*x1)", "max(x1^2, 1)", "abs(x1) + abs(x1 - 1)",
    "0.1*x1^6", "0.5*exp(x1) + x1^2", "max(0, x1 - 1) + max(0, -x1 - 1)", "3*x1^2 - 2*x1 + 1",
]

EKELAND_G = [
    "x1^4 - x1^2", "sin(3*x1) + 0.1*x1^2", "abs(x1) - 0.4*x1^2 + 0.1*x1^4",
    "max(x1, 0) + cos(x1) + 0.3*x1^2", "abs(x1 - 1) + abs(x1 + 1) - 0.3*x1^2", "x1^2",
    "exp(x1) - 2*x1", "abs(sin(x1)) + 0.05*x1^2", "x1^2 + x2^2 + abs(x1 - x2)",
    "(x1 - 1)^2 + 0.5*abs(x2)",
]


@lru_cache(maxsize=None)
def br_cases(n=100, seed=0):
    """(f, u, u*, alpha, beta) with f(u) + f*(u*) - <u, u*> <= alpha * beta."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        f = parse_func(CONVEX_1D[i % len(CONVEX_1D)], convex=True)
        u = rng.uniform(-2, 2)
        S = subdiff_at("convex1d", f, [u])
        base = float(rng.choice(S[:, 0]))
        d = rng.uniform(-0.2, 0.2)
        while True:
            ustar = base + d
            try:
                gap = fenchel_gap(f, [u], [ustar])
                break
            except UnboundedError:  # u* left dom f*; move it back toward the subgradient
                d = 0.0 if abs(d) < 1e-3 else d / 2
        r = rng.uniform(0.5, 2.0)
        root = np.sqrt(max(gap, 1e-4) * 1.05)
        out.append((f, np.array([u]), np.array([ustar]), root * r, root / r))
    return out


@lru_cache(maxsize=None)
def ekeland_cases(n=50, seed=1, box=(-4.0, 4.0)):
    """(g, u, alpha, beta, grid_n) with g(u) <= inf g + alpha * beta."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        g = parse_func(EKELAND_G[i % len(EKELAND_G)])
        grid_n = 2001 if g.dim == 1 else 201
        xm, m = minimize(g, box, grid_n=grid_n)
        alpha, beta = rng.uniform(0.05, 1.0), rng.uniform(0.05, 1.0)
        scale = 1.0
        while True:
            u = xm + scale * rng.normal(size=g.dim)
            if g(u) <= m + alpha * beta:
                break
            scale /= 2
        out.append((g, u, alpha, beta, grid_n))
    return out
