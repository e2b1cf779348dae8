"""Primal/dual geometry on finite-dimensional normed spaces.

Vectors are plain numpy arrays whose last axis has length ``space.dim``;
every function here broadcasts over leading axes, so a batch of points is
an array of shape ``(..., dim)``.  Dual vectors live in the same coordinate
system and are paired with primal ones by the ordinary dot product.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any

import numpy as np

NORM_KINDS = ("p1", "p2", "pinf", "w2")
ZERO_TOL = 1e-9


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class NormedSpace:
    """``R^dim`` with one of the norms p1, p2, pinf or weighted-2.

    The dual norm is the conjugate one: p1 <-> pinf, p2 <-> p2 and
    ``w2(w) <-> w2(1/w)``.
    """

    dim: int
    kind: str = "p2"
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        if self.kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind == "w2":
            if self.weights is None or len(self.weights) != self.dim:
                raise ValueError("w2 needs one weight per coordinate")
            w = np.asarray(self.weights, dtype=float)
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("weights must be finite and strictly positive")
            object.__setattr__(self, "weights", tuple(float(v) for v in w))
        elif self.weights is not None:
            raise ValueError(f"{self.kind} takes no weights")

    @property
    def hilbert(self) -> bool:
        return self.kind in ("p2", "w2")

    @property
    def w(self) -> np.ndarray:
        if self.kind == "w2":
            return np.asarray(self.weights)
        return np.ones(self.dim)

    def check(self, v, what="vector") -> np.ndarray:
        a = np.asarray(v, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1)
        if a.shape[-1] != self.dim:
            raise DimensionError(f"{what} has length {a.shape[-1]}, space has dim {self.dim}")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{what} has non-finite coordinates")
        return a

    def to_json(self) -> dict[str, Any]:
        if self.kind == "w2":
            return {"dim": self.dim, "norm": {"w2": list(self.weights)}}
        return {"dim": self.dim, "norm": self.kind}

    @classmethod
    def from_json(cls, spec: dict[str, Any]) -> "NormedSpace":
        norm = spec.get("norm", "p2")
        if isinstance(norm, dict):
            return cls(int(spec["dim"]), "w2", tuple(norm["w2"]))
        return cls(int(spec["dim"]), norm)

    def sup_halfwidth(self, r: float) -> float:
        """Half-width of the coordinate box that contains the closed ball of radius r."""
        if self.kind == "w2":
            return r / np.sqrt(min(self.weights))
        # ||x||_inf <= ||x|| for p1, p2 and pinf
        return r


@dataclass(frozen=True)
class DualPair:
    x: np.ndarray
    xstar: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        xs = np.atleast_1d(np.asarray(self.xstar, dtype=float))
        if x.shape != xs.shape:
            raise DimensionError(f"primal {x.shape} and dual {xs.shape} shapes differ")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xstar", xs)

    def to_json(self):
        return [self.x.tolist(), self.xstar.tolist()]


def norm(space: NormedSpace, x) -> np.ndarray | float:
    x = space.check(x)
    if space.kind == "p1":
        out = np.sum(np.abs(x), axis=-1)
    elif space.kind == "p2":
        out = np.sqrt(np.sum(x * x, axis=-1))
    elif space.kind == "pinf":
        out = np.max(np.abs(x), axis=-1)
    else:
        out = np.sqrt(np.sum(space.w * x * x, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def dual_norm(space: NormedSpace, xs) -> np.ndarray | float:
    xs = space.check(xs, "dual vector")
    if space.kind == "p1":
        out = np.max(np.abs(xs), axis=-1)
    elif space.kind == "p2":
        out = np.sqrt(np.sum(xs * xs, axis=-1))
    elif space.kind == "pinf":
        out = np.sum(np.abs(xs), axis=-1)
    else:
        out = np.sqrt(np.sum(xs * xs / space.w, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def pairing(x, xs) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if np.ndim(x) == 0:
        x = x.reshape(1)
    if np.ndim(xs) == 0:
        xs = xs.reshape(1)
    if x.shape[-1] != xs.shape[-1]:
        raise DimensionError(f"cannot pair length {x.shape[-1]} with {xs.shape[-1]}")
    out = np.sum(x * xs, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def j(space: NormedSpace, x):
    return 0.5 * norm(space, x) ** 2


def j_star(space: NormedSpace, xs):
    return 0.5 * dual_norm(space, xs) ** 2


def riesz(space: NormedSpace, xs) -> np.ndarray:
    """Primal representative of a dual vector in Hilbert mode (inverse of J)."""
    if not space.hilbert:
        raise ValueError("riesz map needs a Hilbert norm")
    return np.asarray(xs, dtype=float) / space.w


def rl(space: NormedSpace, x, xs):
    """``j(x) + j*(xs) + <x, xs>``; nonnegative, zero exactly on the graph of -J.

    In Hilbert mode this is evaluated as ``0.5 * ||x + W^-1 xs||_W^2`` which is
    algebraically identical and keeps the value nonnegative in floating point.
    """
    x = space.check(x)
    xs = space.check(xs, "dual vector")
    if space.hilbert:
        w = space.w
        v = x + xs / w
        out = 0.5 * np.sum(w * v * v, axis=-1)
    else:
        out = j(space, x) + j_star(space, xs) + pairing(x, xs)
        # the true value is >= 0; only cancellation error can push it below
        out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def rl_gap(space: NormedSpace, candidate: DualPair, target: DualPair) -> float:
    return rl(space, candidate.x - target.x, candidate.xstar - target.xstar)


def product_distance(space: NormedSpace, a: DualPair, b: DualPair) -> float:
    """``sqrt(||a.x - b.x||^2 + ||a.x* - b.x*||_*^2)`` on E x E*."""
    return float(np.hypot(norm(space, a.x - b.x), dual_norm(space, a.xstar - b.xstar)))


@dataclass(frozen=True)
class JFace:
    """The set J(x) as a finite vertex list plus an exact membership test.

    For Hilbert norms the face is the single point ``W x``.  For p1 and pinf it
    is a polytope; ``vertices`` lists its extreme points and ``contains`` checks
    the two defining identities <x, z> = ||x||^2 and ||z||_* = ||x||.
    """

    space: NormedSpace
    x: np.ndarray
    vertices: np.ndarray
    free: tuple[int, ...] = field(default=())

    @property
    def single(self) -> bool:
        return len(self.vertices) == 1

    def contains(self, zs, tol: float = ZERO_TOL) -> bool:
        zs = self.space.check(zs, "dual vector")
        nx = norm(self.space, self.x)
        scale = 1.0 + nx * nx
        ok_pair = abs(pairing(self.x, zs) - nx * nx) <= tol * scale
        ok_norm = abs(dual_norm(self.space, zs) - nx) <= tol * (1.0 + nx)
        return bool(ok_pair and ok_norm)

    def center(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def sample(self, k: int = 5) -> np.ndarray:
        """Vertices plus 2k+1 points along every edge through the center."""
        if self.single:
            return self.vertices.copy()
        c = self.center()
        pts = [self.vertices, c[None, :]]
        ts = np.linspace(0.0, 1.0, k + 2)[1:-1]
        for v in self.vertices:
            pts.append(c[None, :] + ts[:, None] * (v - c)[None, :])
        out = np.unique(np.concatenate(pts), axis=0)
        return out

    def nearest(self, target) -> np.ndarray:
        """Member of J(x) closest to ``target`` in the dual norm (exact)."""
        target = self.space.check(target, "dual vector")
        if self.single:
            return self.vertices[0].copy()
        r = norm(self.space, self.x)
        if self.space.kind == "p1":
            # free coordinates range over [-r, r]; the dual norm is pinf, so clamp
            z = self.vertices[0].copy()
            for i in self.free:
                z[i] = np.clip(target[i], -r, r)
            return z
        # pinf primal: z = sum_i lam_i sign(x_i) e_i over the active set,
        # lam >= 0, sum lam = r; minimise the l1 distance to target
        act = list(self.free)
        sig = np.sign(self.x[act])
        c = sig * target[act]
        p = np.maximum(c, 0.0)
        tot = p.sum()
        if tot >= r:
            lam = p * (r / tot)
        else:
            lam = p + (r - tot) / len(act)
        z = np.zeros(self.space.dim)
        z[act] = lam * sig
        return z


def duality_map(space: NormedSpace, x, tol: float = 1e-12) -> JFace:
    """J(x), the subdifferential of ``0.5 * ||.||^2`` at x.

    ``tol`` (relative to ||x||) decides which coordinates count as zero (p1)
    or as attaining the maximum (pinf).
    """
    x = space.check(x).astype(float)
    r = norm(space, x)
    if space.hilbert:
        return JFace(space, x, (space.w * x)[None, :])
    if r == 0.0:
        return JFace(space, x, np.zeros((1, space.dim)))
    if space.kind == "p1":
        zero = np.abs(x) <= tol * r
        base = np.where(zero, 0.0, np.sign(x) * r)
        free = tuple(int(i) for i in np.flatnonzero(zero))
        if not free:
            return JFace(space, x, base[None, :])
        verts = []
        for signs in itertools.product((-1.0, 1.0), repeat=len(free)):
            v = base.copy()
            v[list(free)] = np.asarray(signs) * r
            verts.append(v)
        return JFace(space, x, np.asarray(verts), free)
    # pinf
    active = np.abs(x) >= r * (1.0 - tol)
    idx = tuple(int(i) for i in np.flatnonzero(active))
    verts = np.zeros((len(idx), space.dim))
    for row, i in enumerate(idx):
        verts[row, i] = np.sign(x[i]) * r
    return JFace(space, x, verts, idx if len(idx) > 1 else ())
