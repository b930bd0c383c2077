import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equistein.groups import (
    SO2,
    SO3,
    FiniteGroupRep,
    PairDistanceMap,
    RadialMap,
    c4_fold,
    c4_fold_batch,
    cyclic_group,
    orbit,
    radial_factorization,
    random_rotation,
    stabilizer_sizes,
    trivial_group,
)
from equistein.numerics import Rng, sample_normal_matrix


def test_cyclic_group_sizes():
    assert cyclic_group(1).order == 1
    assert cyclic_group(4).order == 4


def test_cyclic_group_rejects_bad_order():
    with pytest.raises(ValueError):
        cyclic_group(0)


def test_c4_contains_quarter_turns():
    g = cyclic_group(4)
    angles = sorted(np.arctan2(m[1, 0], m[0, 0]) % (2 * np.pi) for m in g.elements)
    assert np.allclose(angles, [0.0, np.pi / 2, np.pi, 3 * np.pi / 2])


def test_c4_quarter_turn_action():
    g = cyclic_group(4)
    quarter = g.elements[1]
    assert np.allclose(quarter @ np.array([1.0, 0.0]), [0.0, 1.0])


@given(st.integers(1, 8))
@settings(max_examples=8, deadline=None)
def test_group_closure(n):
    g = cyclic_group(n)
    for a in g.elements:
        for b in g.elements:
            prod = a @ b
            assert min(np.abs(prod - m).max() for m in g.elements) < 1e-8


def test_group_rejects_non_closed():
    mats = np.stack([np.eye(2), np.array([[np.cos(1.0), -np.sin(1.0)], [np.sin(1.0), np.cos(1.0)]])])
    with pytest.raises(ValueError):
        FiniteGroupRep(mats)


def test_group_requires_identity():
    theta = np.pi / 2
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    with pytest.raises(ValueError):
        FiniteGroupRep(rot[None])


def test_orbit_trivial_group():
    o = orbit(trivial_group(2), [1.5, -0.5])
    assert o.points.shape == (1, 2)


def test_orbit_c4_axis_point():
    o = orbit(cyclic_group(4), [1.0, 0.0])
    expected = {(1, 0), (0, 1), (-1, 0), (0, -1)}
    got = {tuple(np.round(p, 9)) for p in o.points}
    assert got == {(float(a), float(b)) for a, b in expected}


def test_orbit_origin_deduplicates():
    o = orbit(cyclic_group(4), [0.0, 0.0])
    assert o.points.shape == (1, 2)


def test_orbit_invariant_under_group_action():
    g = cyclic_group(4)
    x = np.array([0.3, 1.7])
    base = {tuple(np.round(p, 9)) for p in orbit(g, x).points}
    for r in g.elements:
        moved = {tuple(np.round(p, 9)) for p in orbit(g, r @ x).points}
        assert moved == base


def test_stabilizer_sizes():
    g = cyclic_group(4)
    pts = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert stabilizer_sizes(g, pts).tolist() == [1, 4]


def test_random_rotation_orthogonal():
    for spec in (SO2, SO3):
        rng = Rng(3)
        for _ in range(20):
            m = random_rotation(spec, rng)
            assert np.abs(m.T @ m - np.eye(spec.dim)).max() < 1e-10
            assert abs(np.linalg.det(m) - 1.0) < 1e-10


def test_random_rotation_reproducible():
    assert np.array_equal(random_rotation(SO3, Rng(9)), random_rotation(SO3, Rng(9)))


def test_so2_angles_uniform():
    # KS statistic of 1e5 angles vs Uniform[0, 2pi) below 0.01
    rng = Rng(17)
    n = 100_000
    angles = np.empty(n)
    for i in range(n):
        m = random_rotation(SO2, rng)
        angles[i] = np.arctan2(m[1, 0], m[0, 0]) % (2 * np.pi)
    s = np.sort(angles) / (2 * np.pi)
    grid = (np.arange(1, n + 1)) / n
    ks = max(np.abs(grid - s).max(), np.abs(s - (np.arange(n) / n)).max())
    assert ks < 0.01


def test_radial_factorization_values():
    assert radial_factorization([3.0, 4.0]) == pytest.approx(5.0)
    assert radial_factorization([0.0, 0.0, 0.0]) == 0.0


def test_radial_factorization_rotation_invariant():
    rng = Rng(5)
    for _ in range(25):
        m = random_rotation(SO3, rng)
        v = sample_normal_matrix(rng, 1, 3)[0]
        assert abs(radial_factorization(m @ v) - radial_factorization(v)) < 1e-10


def test_c4_fold_examples():
    r = 1.8
    theta = np.radians(100.0)
    folded = c4_fold([r * np.cos(theta), r * np.sin(theta)])
    assert np.degrees(np.arctan2(folded[1], folded[0])) == pytest.approx(10.0)
    assert np.linalg.norm(folded) == pytest.approx(r)

    p45 = np.array([1.0, 1.0])
    assert np.allclose(c4_fold(p45), p45)

    assert np.allclose(c4_fold([0.0, -2.0]), [2.0, 0.0])


@given(st.floats(-10, 10), st.floats(-10, 10))
@settings(max_examples=50, deadline=None)
def test_c4_fold_collapses_orbits(x, y):
    p = np.array([x, y])
    base = c4_fold(p)
    for r in cyclic_group(4).elements:
        assert np.abs(c4_fold(r @ p) - base).max() < 1e-10


def test_c4_fold_batch_matches_scalar():
    pts = sample_normal_matrix(Rng(1), 40, 2) * 3
    batch = c4_fold_batch(pts)
    for row, p in zip(batch, pts):
        assert np.allclose(row, c4_fold(p))


def test_radial_map_jacobian():
    fm = RadialMap(3)
    pts = sample_normal_matrix(Rng(2), 5, 3)
    jac = fm.jacobian(pts)
    eps = 1e-6
    for b in range(5):
        num = np.zeros(3)
        for c in range(3):
            e = np.zeros(3)
            e[c] = eps
            num[c] = (fm.values((pts[b] + e)[None])[0, 0] - fm.values((pts[b] - e)[None])[0, 0]) / (2 * eps)
        assert np.abs(jac[b, 0] - num).max() < 1e-7


def test_pair_distance_map_invariances():
    fm = PairDistanceMap(4, 2)
    rng = Rng(4)
    x = sample_normal_matrix(rng, 1, 8) * 2
    base = fm.values(x)[0]
    # permutation of particles
    conf = x.reshape(4, 2)
    perm = conf[[2, 0, 3, 1]].reshape(1, 8)
    assert np.abs(fm.values(perm)[0] - base).max() < 1e-12
    # global rotation and translation
    theta = 0.83
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    moved = (conf @ rot.T + np.array([1.5, -2.0])).reshape(1, 8)
    assert np.abs(fm.values(moved)[0] - base).max() < 1e-10


def test_pair_distance_map_jacobian():
    fm = PairDistanceMap(4, 2)
    x = sample_normal_matrix(Rng(6), 1, 8) * 2
    jac = fm.jacobian(x)[0]
    eps = 1e-6
    for c in range(8):
        e = np.zeros(8)
        e[c] = eps
        num = (fm.values(x + e)[0] - fm.values(x - e)[0]) / (2 * eps)
        assert np.abs(jac[:, c] - num).max() < 1e-7
