"""Deterministic global search on boxes: coarse grid, multi-start, pattern refinement.

Every search here is a pure function of its arguments.  Ties between equal
values are broken towards the lexicographically smallest coordinate vector.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

GRID_CAP = 200_000
STENCIL_CAP_DIM = 8


class SearchError(RuntimeError):
    pass


@dataclass
class SearchResult:
    x: np.ndarray
    value: float
    trajectory: list = field(default_factory=list)  # (x, value) after each stage
    evaluations: int = 0


def as_box(box, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalise ``box`` to a pair of ``(dim,)`` arrays.

    Accepts ``(lo, hi)`` with scalars or per-coordinate sequences.
    """
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,)).copy()
    if np.any(hi < lo):
        raise ValueError(f"empty box {lo} .. {hi}")
    return lo, hi


def intersect(a, b):
    lo = np.maximum(a[0], b[0])
    hi = np.minimum(a[1], b[1])
    return lo, hi


def grid_points(lo, hi, grid_n: int, cap: int = GRID_CAP) -> np.ndarray:
    """Product grid with an odd number of points per axis (so centres are hit)."""
    d = len(lo)
    per_axis = grid_n if d == 1 else max(3, int(np.floor(min(grid_n**d, cap) ** (1.0 / d))))
    if per_axis % 2 == 0:
        per_axis += 1
    axes = [np.linspace(l, h, per_axis) if h > l else np.array([l]) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def lex_argmin(values: np.ndarray, X: np.ndarray) -> int:
    best = np.min(values)
    idx = np.flatnonzero(values == best)
    if len(idx) == 1:
        return int(idx[0])
    keys = X[idx]
    order = np.lexsort(keys.T[::-1])
    return int(idx[order[0]])


def _stencil(d: int) -> np.ndarray:
    if d <= STENCIL_CAP_DIM:
        offs = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=d)))
    else:
        eye = np.eye(d)
        offs = np.concatenate([np.zeros((1, d)), eye, -eye])
    return offs


def _local_minima_1d(values: np.ndarray) -> np.ndarray:
    v = values
    left = np.concatenate([[np.inf], v[:-1]])
    right = np.concatenate([v[1:], [np.inf]])
    return np.flatnonzero((v <= left) & (v <= right) & np.isfinite(v))


def minimize_box(fun, box, grid_n: int = 2001, refine_iters: int = 200,
                 n_starts: int = 4, xtol: float = 1e-13, extra_points=None) -> SearchResult:
    """Minimise a vectorised ``fun: (N, d) -> (N,)`` over a box.

    The coarse grid always contributes, so the returned value never exceeds
    the minimum over grid points.  Each start is then refined by a 3^d pattern
    search whose step halves whenever the centre is not beaten.
    """
    lo, hi = box
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = len(lo)
    X = grid_points(lo, hi, grid_n)
    n_axis = len(np.unique(X[:, 0]))
    if extra_points is not None and len(extra_points):
        ep = np.clip(np.asarray(extra_points, dtype=float).reshape(-1, d), lo, hi)
        X = np.concatenate([X, ep])
    with np.errstate(all="ignore"):
        V = np.asarray(fun(X), dtype=float)
    if np.any(np.isnan(V)):
        raise SearchError("objective returned NaN")
    if not np.any(np.isfinite(V)):
        raise SearchError("objective is +inf on the whole box")
    evals = len(X)

    i0 = lex_argmin(V, X)
    traj = [(X[i0].copy(), float(V[i0]))]

    if d == 1:
        order = np.argsort(X[:, 0], kind="stable")
        mins = order[_local_minima_1d(V[order])]
        mins = mins[np.lexsort((X[mins, 0], V[mins]))][:n_starts]
    else:
        cand = np.lexsort(tuple(X.T[::-1]) + (V,))
        mins = cand[:n_starts]
    starts = [X[i].copy() for i in mins if np.isfinite(V[i])]
    if not any(np.array_equal(X[i0], s) for s in starts):
        starts.insert(0, X[i0].copy())

    cell = np.where(hi > lo, (hi - lo) / max(n_axis - 1, 1), 0.0)
    scale = max(1.0, float(np.max(np.abs(np.concatenate([lo, hi])))))
    offs = _stencil(d)

    cur = np.array(starts)
    cur_v = np.asarray(fun(cur), dtype=float)
    h = np.tile(cell, (len(cur), 1))
    best_x, best_v = X[i0].copy(), float(V[i0])

    for _ in range(refine_iters):
        active = np.max(h, axis=1) > xtol * scale
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        P = cur[idx, None, :] + offs[None, :, :] * h[idx, None, :]
        P = np.clip(P, lo, hi)
        flat = P.reshape(-1, d)
        with np.errstate(all="ignore"):
            pv = np.asarray(fun(flat), dtype=float).reshape(len(idx), len(offs))
        pv = np.where(np.isnan(pv), np.inf, pv)
        evals += flat.size // d
        for row, k in enumerate(idx):
            vals = pv[row]
            j = lex_argmin(vals, P[row])
            if vals[j] < cur_v[k]:
                cur[k] = P[row, j]
                cur_v[k] = vals[j]
            else:
                h[k] *= 0.5
        k = lex_argmin(cur_v, cur)
        if cur_v[k] < best_v or (cur_v[k] == best_v and tuple(cur[k]) < tuple(best_x)):
            best_x, best_v = cur[k].copy(), float(cur_v[k])
        if traj[-1][1] != best_v:
            traj.append((best_x.copy(), best_v))
    return SearchResult(best_x, best_v, traj, evals)


def maximize_box(fun, box, **kw) -> SearchResult:
    res = minimize_box(lambda X: -np.asarray(fun(X)), box, **kw)
    return SearchResult(res.x, -res.value, [(x, -v) for x, v in res.trajectory], res.evaluations)
