"""Set-valued operators ``S: E => E*`` and the graph algebra built on them.

Two representations:

* ``SampledGraph`` -- a finite list of pairs ``(x, x*)``.
* ``AnalyticOperator`` -- a rule ``x -> finite representative set of S(x)``
  on a domain box.  In dimension one a multi-valued image is read as the
  interval spanned by its representatives (subdifferentials and the duality
  map are intervals there), so membership and nearest-point queries use the
  hull while enumeration uses the stored samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import NormedSpace, dual_norm, duality_map
from .search import as_box, minimize_box

DEFAULT_BOX = (-10.0, 10.0)
FACE_SAMPLES = 5


@dataclass(frozen=True, eq=False)
class SampledGraph:
    space: NormedSpace
    X: np.ndarray
    XS: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(-1, self.space.dim)
        XS = np.asarray(self.XS, dtype=float).reshape(-1, self.space.dim)
        if X.shape != XS.shape:
            raise ValueError("primal and dual sample arrays differ in shape")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(XS))):
            raise ValueError("sampled pairs must have finite coordinates")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "XS", XS)

    def __len__(self):
        return len(self.X)

    @property
    def pairs(self):
        return list(zip(self.X, self.XS))

    def image(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.XS[np.all(self.X == x, axis=1)]

    def contains(self, x, xs, tol: float = 0.0) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        hit = np.all(np.abs(self.X - x) <= tol, axis=1) & np.all(np.abs(self.XS - xs) <= tol, axis=1)
        return bool(np.any(hit))

    def to_json(self) -> dict:
        return {"space": self.space.to_json(),
                "pairs": [[x.tolist(), xs.tolist()] for x, xs in zip(self.X, self.XS)]}

    @classmethod
    def from_json(cls, data: dict) -> "SampledGraph":
        space = NormedSpace.from_json(data["space"])
        pairs = data["pairs"]
        if not pairs:
            return cls(space, np.zeros((0, space.dim)), np.zeros((0, space.dim)))
        X = np.array([p[0] for p in pairs], dtype=float)
        XS = np.array([p[1] for p in pairs], dtype=float)
        return cls(space, X, XS)


@dataclass(frozen=True, eq=False)
class AnalyticOperator:
    space: NormedSpace
    image_fn: Callable[[np.ndarray], np.ndarray]
    domain: tuple | None = None
    name: str = "operator"
    params: dict = field(default_factory=dict)
    vectorized: Callable[[np.ndarray], np.ndarray] | None = None  # single-valued fast path
    matrix: np.ndarray | None = None  # affine: x -> matrix @ x + offset
    offset: np.ndarray | None = None
    special_points: tuple = ()
    base: object = None  # for S + J(. - y): the operator S
    shift: np.ndarray | None = None  # ... and the point y

    def __post_init__(self):
        if self.domain is not None:
            object.__setattr__(self, "domain", as_box(self.domain, self.space.dim))

    @property
    def single_valued(self) -> bool:
        return self.vectorized is not None

    def in_domain(self, x) -> bool:
        if self.domain is None:
            return True
        x = np.atleast_1d(x)
        return bool(np.all(x >= self.domain[0]) and np.all(x <= self.domain[1]))

    def image(self, x) -> np.ndarray:
        x = self.space.check(x)
        if not self.in_domain(x):
            return np.zeros((0, self.space.dim))
        out = np.asarray(self.image_fn(x), dtype=float).reshape(-1, self.space.dim)
        return out

    def hull(self, x):
        """1-D only: ``(lo, hi)`` of the image interval, or None off the domain."""
        img = self.image(x)
        if len(img) == 0:
            return None
        return float(img[:, 0].min()), float(img[:, 0].max())

    def nearest(self, x, target) -> np.ndarray | None:
        """Element of S(x) closest to ``target`` in the dual norm."""
        target = np.atleast_1d(np.asarray(target, dtype=float))
        img = self.image(x)
        if len(img) == 0:
            return None
        if self.space.dim == 1:
            return np.clip(target, img.min(), img.max())
        d = dual_norm(self.space, img - target)
        return img[int(np.argmin(d))]

    def contains(self, x, xs, tol: float = 1e-9) -> bool:
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        img = self.image(x)
        if len(img) == 0:
            return False
        if self.space.dim == 1:
            return bool(img.min() - tol <= xs[0] <= img.max() + tol)
        return bool(np.min(dual_norm(self.space, img - xs)) <= tol)

    def image_many(self, X) -> np.ndarray:
        """Single-valued operators only: images of each row of ``X``."""
        if self.vectorized is None:
            raise TypeError(f"{self.name} is not single-valued")
        X = np.asarray(X, dtype=float).reshape(-1, self.space.dim)
        return np.asarray(self.vectorized(X), dtype=float).reshape(X.shape)


OperatorGraph = SampledGraph | AnalyticOperator


# -- constructors ---------------------------------------------------------------

def linear_operator(space: NormedSpace, matrix, offset=None, name="linear", domain=None):
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    b = np.zeros(space.dim) if offset is None else np.asarray(offset, dtype=float)
    if A.shape != (space.dim, space.dim):
        raise ValueError(f"matrix must be {space.dim}x{space.dim}")
    return AnalyticOperator(
        space, lambda x: (A @ x + b)[None, :], domain, name,
        {"matrix": A.tolist(), "offset": b.tolist()},
        vectorized=lambda X: X @ A.T + b, matrix=A, offset=b,
    )


def pointwise_operator(space: NormedSpace, fn, name, params=None, domain=None):
    """Single-valued ``x -> {fn(x)}`` with ``fn`` acting row-wise on arrays."""
    return AnalyticOperator(space, lambda x: np.asarray(fn(x[None, :]))[0][None, :], domain,
                            name, params or {}, vectorized=fn)


def diagonal_ladder(n: int) -> AnalyticOperator:
    """``S x = -x + (x_k / k)_k`` on the n-dimensional truncation of l^2."""
    space = NormedSpace(n, "p2")
    d = 1.0 / np.arange(1, n + 1)
    op = linear_operator(space, np.diag(-1.0 + d), name="diag_ladder")
    # S + Id = diag(1/k) exactly; (-1 + 1/k) + 1 would round
    op.params.update(n=n, plus_identity_diag=d.tolist())
    return op


def _plus_w_matrix(S: "AnalyticOperator", w: np.ndarray) -> np.ndarray:
    """Matrix of ``S + W`` for an affine S."""
    if "plus_identity_diag" in S.params and np.all(w == 1.0):
        return np.diag(np.asarray(S.params["plus_identity_diag"]))
    return S.matrix + np.diag(w)


def _power(space, coef=1.0, exponent=1):
    return pointwise_operator(space, lambda X: coef * X**exponent, "power",
                              {"coef": coef, "exponent": exponent})


def _cos(space):
    return pointwise_operator(space, np.cos, "cos")


def _abs_subdiff(space, k: int = FACE_SAMPLES):
    def img(x):
        if x[0] > 0:
            return np.array([[1.0]])
        if x[0] < 0:
            return np.array([[-1.0]])
        return np.linspace(-1.0, 1.0, k + 2)[:, None]
    return AnalyticOperator(space, img, None, "subdiff_abs", special_points=((0.0,),))


REGISTRY: dict[str, Callable[..., AnalyticOperator]] = {
    "identity": lambda space: linear_operator(space, np.eye(space.dim), name="identity"),
    "zero": lambda space: linear_operator(space, np.zeros((space.dim, space.dim)), name="zero"),
    "neg_identity": lambda space: linear_operator(space, -np.eye(space.dim), name="neg_identity"),
    "linear": lambda space, matrix, offset=None: linear_operator(space, matrix, offset),
    "restricted_identity": lambda space, lower=0.0, upper=10.0: linear_operator(
        space, np.eye(space.dim), name="restricted_identity", domain=(lower, upper)),
    "power": _power,
    "cos": _cos,
    "subdiff_abs": _abs_subdiff,
}


def build_operator(name: str, space: NormedSpace, **params) -> AnalyticOperator:
    if name == "diag_ladder":
        return diagonal_ladder(int(params.get("n", space.dim)))
    if name == "subdiff":
        from .subdiff import subdiff_operator
        from .funcspec import parse_func

        f = parse_func(params["f"], dim=space.dim, convex=bool(params.get("convex", False)))
        return subdiff_operator(params.get("engine", "piecewise"), f, space)
    if name not in REGISTRY:
        raise KeyError(f"unknown operator {name!r}; known: {sorted(REGISTRY) + ['diag_ladder', 'subdiff']}")
    return REGISTRY[name](space, **params)


# -- sampling -----------------------------------------------------------------

def sample_points(lo, hi, budget: int, seed: int = 0) -> np.ndarray:
    """``budget`` primal points: a product grid plus seeded uniform fill-in."""
    d = len(lo)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if d == 1:
        if budget == 1:
            return np.array([[0.5 * (lo[0] + hi[0])]])
        return np.linspace(lo[0], hi[0], budget)[:, None]
    k = max(1, int(np.floor(budget ** (1.0 / d) + 1e-9)))
    axes = [np.linspace(l, h, k) if k > 1 else np.array([0.5 * (l + h)]) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    G = np.stack([m.ravel() for m in mesh], axis=1)
    rest = budget - len(G)
    if rest > 0:
        rng = np.random.default_rng(seed)
        G = np.concatenate([G, rng.uniform(lo, hi, size=(rest, d))])
    return G


def graph_sample(S: OperatorGraph, budget: int, seed: int = 0, box=None) -> SampledGraph:
    """Sample ``budget`` primal points of the domain and attach every image element.

    Operators may advertise ``special_points`` (kinks); those inside the box are
    added on top of the budget.
    """
    if isinstance(S, SampledGraph):
        if len(S) <= budget:
            return S
        idx = np.sort(np.random.default_rng(seed).choice(len(S), budget, replace=False))
        return SampledGraph(S.space, S.X[idx], S.XS[idx])
    space = S.space
    lo, hi = as_box(box if box is not None else DEFAULT_BOX, space.dim)
    if S.domain is not None:
        lo, hi = np.maximum(lo, S.domain[0]), np.minimum(hi, S.domain[1])
    if np.any(hi < lo):
        raise ValueError("operator domain does not meet the sampling box")
    P = sample_points(lo, hi, budget, seed)
    extra = [np.asarray(p, dtype=float) for p in S.special_points]
    extra = [p for p in extra if np.all(p >= lo) and np.all(p <= hi)]
    if extra:
        P = np.unique(np.concatenate([P, np.array(extra)]), axis=0)
    xs, xss = [], []
    for x in P:
        img = S.image(x)
        for z in img:
            xs.append(x)
            xss.append(z)
    if not xs:
        raise ValueError("operator has empty domain on the sampling box")
    return SampledGraph(space, np.array(xs), np.array(xss))


# -- operator algebra -----------------------------------------------------------

def shift_plus_J(S: OperatorGraph, y=None, k: int = FACE_SAMPLES) -> AnalyticOperator:
    """``x -> S(x) + J(x - y)``.

    With a Hilbert norm J is single-valued; otherwise each face of J is
    represented by ``JFace.sample(k)`` (an inner approximation).
    """
    space = S.space
    y = np.zeros(space.dim) if y is None else space.check(y)

    def img(x):
        sx = S.image(x)
        if len(sx) == 0:
            return sx
        zs = duality_map(space, x - y).sample(k)
        return (sx[:, None, :] + zs[None, :, :]).reshape(-1, space.dim)

    vec = mat = off = None
    if space.hilbert:
        w = space.w
        if isinstance(S, AnalyticOperator) and S.matrix is not None:
            mat = _plus_w_matrix(S, w)
            off = S.offset - w * y
            vec = (lambda A, b: (lambda X: X @ A.T + b))(mat, off)
        elif isinstance(S, AnalyticOperator) and S.vectorized is not None:
            vec = lambda X: S.vectorized(X) + w * (X - y)  # noqa: E731
    domain = S.domain if isinstance(S, AnalyticOperator) else None
    special = S.special_points if isinstance(S, AnalyticOperator) else ()
    return AnalyticOperator(space, img, domain, f"{getattr(S, 'name', 'sampled')}+J(.-y)",
                            {"y": y.tolist()}, vectorized=vec, matrix=mat, offset=off,
                            special_points=special, base=S, shift=y)


def decompose_shifted(T: AnalyticOperator, x, tstar):
    """Split ``t* in S(x) + J(x - y)`` into ``(s*, z*)`` for ``T = shift_plus_J(S, y)``.

    Returns the split minimising ``||s* + z* - t*||_*`` over the representatives
    (exact in dimension one and for single-valued J).
    """
    S, y = T.base, T.shift
    space = T.space
    x = space.check(x)
    tstar = np.atleast_1d(np.asarray(tstar, dtype=float))
    face = duality_map(space, x - y)
    if face.single:
        z = face.vertices[0]
        if isinstance(S, AnalyticOperator):
            s = S.nearest(x, tstar - z)
        else:
            img = S.image(x)
            s = img[int(np.argmin(dual_norm(space, img + z - tstar)))]
        return s, z
    best = None
    for s in S.image(x):
        z = face.nearest(tstar - s)
        err = dual_norm(space, s + z - tstar)
        if best is None or err < best[0]:
            best = (err, s, z)
    return best[1], best[2]


def graph_minus_negJ(A: SampledGraph, budget: int = 21, box=None, seed: int = 0,
                     t_points=None, k: int = FACE_SAMPLES) -> SampledGraph:
    """Sample ``gra A - gra(-J) = {(s - t, s* + t*) : (s, s*) in A, t* in J(t)}``.

    ``meta`` carries the decomposition: row i came from ``A`` row
    ``meta['a_index'][i]`` and the J pair ``(meta['t'][i], meta['tstar'][i])``.
    """
    space = A.space
    if t_points is None:
        lo, hi = as_box(box if box is not None else DEFAULT_BOX, space.dim)
        t_points = sample_points(lo, hi, budget, seed)
    t_points = np.asarray(t_points, dtype=float).reshape(-1, space.dim)
    T, TS = [], []
    for t in t_points:
        for ts in duality_map(space, t).sample(k):
            T.append(t)
            TS.append(ts)
    T, TS = np.array(T), np.array(TS)
    ai = np.repeat(np.arange(len(A)), len(T))
    ti = np.tile(np.arange(len(T)), len(A))
    U = A.X[ai] - T[ti]
    US = A.XS[ai] + TS[ti]
    return SampledGraph(space, U, US, {"a_index": ai, "t": T[ti], "tstar": TS[ti]})


def solve_affine(space: NormedSpace, matrix, offset, rhs):
    """Least-squares solution of ``matrix @ x + offset = rhs``; diagonal systems exactly."""
    A = np.asarray(matrix, dtype=float)
    r = np.asarray(rhs, dtype=float) - np.asarray(offset, dtype=float)
    if np.count_nonzero(A - np.diag(np.diagonal(A))) == 0:
        d = np.diagonal(A)
        return np.where(d != 0, r / np.where(d != 0, d, 1.0), 0.0)
    return np.linalg.lstsq(A, r, rcond=None)[0]


def range_residual(S: OperatorGraph, ystar, box=None, grid_n: int = 2001):
    """Closest approach of ``ran(S + J)`` to ``y*`` in Hilbert mode.

    Returns ``(s, s*, ||J s + s* - y*||_*)`` minimised over the graph (sampled
    pairs, an affine solve, or a grid-refined search for analytic operators).
    """
    space = S.space
    if not space.hilbert:
        raise ValueError("range_residual needs a Hilbert norm")
    ystar = space.check(ystar, "dual vector")
    w = space.w

    def resid(x, xs):
        return dual_norm(space, w * x + xs - ystar)

    if isinstance(S, SampledGraph):
        if len(S) == 0:
            raise ValueError("empty graph")
        r = resid(S.X, S.XS)
        i = int(np.argmin(r))
        return S.X[i].copy(), S.XS[i].copy(), float(r[i])
    if S.matrix is not None:
        P = _plus_w_matrix(S, w)
        x = solve_affine(space, P, S.offset, ystar)
        if S.in_domain(x):
            xs = S.matrix @ x + S.offset
            return x, xs, float(dual_norm(space, P @ x + S.offset - ystar))
    lo, hi = as_box(box if box is not None else DEFAULT_BOX, space.dim)
    if S.domain is not None:
        lo, hi = np.maximum(lo, S.domain[0]), np.minimum(hi, S.domain[1])

    def best(x):
        s = S.nearest(x, ystar - w * x)
        return s

    def obj(X):
        if S.vectorized is not None:
            return resid(X, S.image_many(X))
        out = np.empty(len(X))
        for i, x in enumerate(X):
            s = best(x)
            out[i] = np.inf if s is None else resid(x, s)
        return out

    res = minimize_box(obj, (lo, hi), grid_n=grid_n,
                       extra_points=np.array(S.special_points) if S.special_points else None)
    x = res.x
    s = best(x)
    return x, s, float(resid(x, s))

