import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rllab.geometry import (DimensionError, DualPair, NormedSpace, dual_norm, duality_map, j,
                            j_star, norm, pairing, rl, rl_gap)

LINE = NormedSpace(1)
PLANE = NormedSpace(2)
SPACES = [NormedSpace(3, "p1"), NormedSpace(3, "p2"), NormedSpace(3, "pinf"),
          NormedSpace(3, "w2", (1.0, 4.0, 0.5))]

coord = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
vec3 = st.lists(coord, min_size=3, max_size=3).map(np.array)


def test_norm_examples():
    assert norm(PLANE, [3, 4]) == 5.0
    assert norm(NormedSpace(2, "p1"), [1, -2]) == 3.0
    assert dual_norm(NormedSpace(2, "p1"), [1, -2]) == 2.0
    assert math.isclose(norm(NormedSpace(2, "w2", (1.0, 4.0)), [1, 1]), math.sqrt(5))


def test_j_examples():
    assert j(PLANE, [1, 1]) == pytest.approx(1.0)
    assert j_star(NormedSpace(2, "p1"), [1, 1]) == 0.5
    assert j(PLANE, [3, 4]) == 12.5


def test_rl_examples():
    assert rl(LINE, [1.0], [-1.0]) == 0.0
    assert rl(LINE, [1.0], [1.0]) == 2.0
    assert rl(PLANE, [3, 4], [0, 0]) == 12.5


def test_rl_gap_examples():
    t = DualPair([2.0], [3.0])
    assert rl_gap(LINE, DualPair([2.0], [3.0]), t) == 0.0
    assert rl_gap(LINE, DualPair([-5.0], [10.0]), t) == 0.0
    assert rl_gap(LINE, DualPair([0.0], [0.0]), DualPair([0.0], [1.0])) == 0.5


def test_duality_map_examples():
    assert duality_map(LINE, [1.0]).vertices.tolist() == [[1.0]]
    assert duality_map(PLANE, [3.0, 4.0]).vertices.tolist() == [[3.0, 4.0]]


def test_duality_map_p1_face_matches_enumeration():
    sp = NormedSpace(2, "p1")
    face = duality_map(sp, [1.0, 0.0])
    grid = np.linspace(-2, 2, 81)
    members = [(a, b) for a in grid for b in grid
               if abs(a * 1.0 - 1.0) <= 1e-12 and abs(max(abs(a), abs(b)) - 1.0) <= 1e-12]
    assert members == [(1.0, b) for b in grid if -1.0 <= b <= 1.0]
    for a, b in members:
        assert face.contains([a, b])
    assert not face.contains([1.0, 1.5])
    assert sorted(face.vertices[:, 1].tolist()) == [-1.0, 1.0]


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        norm(PLANE, [1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        pairing([1.0, 2.0], [1.0])


def test_space_validation_and_json():
    with pytest.raises(ValueError):
        NormedSpace(2, "p3")
    with pytest.raises(ValueError):
        NormedSpace(2, "w2", (1.0, -1.0))
    for sp in SPACES:
        assert NormedSpace.from_json(sp.to_json()) == sp


@pytest.mark.parametrize("space", SPACES, ids=lambda s: s.kind)
@settings(max_examples=200, deadline=None)
@given(x=vec3, xs=vec3)
def test_rl_lower_bounds(space, x, xs):
    v = rl(space, x, xs)
    gap = 0.5 * (norm(space, x) - dual_norm(space, xs)) ** 2
    scale = 1.0 + norm(space, x) ** 2 + dual_norm(space, xs) ** 2
    assert v >= 0.0
    assert v >= gap - 1e-12 * scale
    assert abs(pairing(x, xs)) <= norm(space, x) * dual_norm(space, xs) * (1 + 1e-12) + 1e-12


@pytest.mark.parametrize("space", SPACES, ids=lambda s: s.kind)
@settings(max_examples=200, deadline=None)
@given(x=vec3)
def test_face_members_satisfy_identities(space, x):
    face = duality_map(space, x)
    for z in face.sample():
        assert face.contains(z)
        # Fenchel-Young equality on the face
        scale = 1.0 + norm(space, x) ** 2
        assert abs(j(space, x) + j_star(space, z) - pairing(x, z)) <= 1e-9 * scale
        # and rl vanishes at (x, -z)
        assert rl(space, x, -z) <= 1e-9 * scale


@pytest.mark.parametrize("space", SPACES, ids=lambda s: s.kind)
@settings(max_examples=200, deadline=None)
@given(x=vec3, xs=vec3)
def test_rl_zero_iff_negative_duality_member(space, x, xs):
    face = duality_map(space, x)
    scale = 1.0 + norm(space, x) ** 2 + dual_norm(space, xs) ** 2
    zero = rl(space, x, xs) <= 1e-20 * scale
    if zero:
        assert face.contains(-xs)
    if not face.contains(-xs, tol=1e-6):
        assert not zero


@settings(max_examples=300, deadline=None)
@given(x=vec3, xs=vec3)
def test_hilbert_identity(x, xs):
    sp = NormedSpace(3)
    scale = 1.0 + norm(sp, x) ** 2 + dual_norm(sp, xs) ** 2
    assert abs(rl(sp, x, xs) - 0.5 * float(np.sum((x + xs) ** 2))) <= 1e-12 * scale
    assert rl(sp, x, -x) == 0.0


@pytest.mark.parametrize("space", SPACES, ids=lambda s: s.kind)
def test_nearest_face_member_is_in_face(space):
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.integers(-2, 3, 3).astype(float)
        face = duality_map(space, x)
        z = face.nearest(rng.normal(size=3))
        assert face.contains(z)


def test_broadcasting_over_batches():
    X = np.arange(12.0).reshape(4, 3)
    sp = NormedSpace(3)
    assert np.allclose(norm(sp, X), np.linalg.norm(X, axis=1))
    assert np.allclose(rl(sp, X, -X), 0.0)
