"""Finite group representations, orbits, and factorization maps.

A finite symmetry group is carried around as the closed set of its orthogonal
representation matrices. Continuous rotation groups are handled through Haar
sampling and through maps onto a fundamental domain (the radius for SO(2) and
SO(3), angle folding for the cyclic groups, sorted pairwise distances for
interacting-particle systems).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import Array, Rng, sample_standard_normal

_ORTHO_TOL = 1e-10
_CLOSURE_TOL = 1e-10
_DEDUP_TOL = 1e-10


@dataclass(frozen=True)
class FiniteGroupRep:
    """A finite group given by (m, d, d) orthogonal representation matrices."""

    elements: Array
    dim: int = field(init=False)

    def __post_init__(self):
        mats = np.asarray(self.elements, dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError(f"elements must be (m, d, d), got {mats.shape}")
        object.__setattr__(self, "elements", mats)
        object.__setattr__(self, "dim", mats.shape[1])
        self._validate()

    def _validate(self):
        d = self.dim
        eye = np.eye(d)
        if min(np.abs(m - eye).max() for m in self.elements) > _DEDUP_TOL:
            raise ValueError("group must contain the identity")
        for m in self.elements:
            if np.abs(m.T @ m - eye).max() > _ORTHO_TOL:
                raise ValueError("group elements must be orthogonal")
        for a in self.elements:
            for b in self.elements:
                prod = a @ b
                if min(np.abs(prod - m).max() for m in self.elements) > _CLOSURE_TOL:
                    raise ValueError("group is not closed under multiplication")

    @property
    def order(self) -> int:
        return self.elements.shape[0]

    def apply_all(self, x: Array) -> Array:
        """(m, d) stack of R_g x over all elements, for x of shape (d,)."""
        return np.einsum("gij,j->gi", self.elements, x)

    def apply_all_batch(self, points: Array) -> Array:
        """(m, n, d) stack of R_g applied to each row of an (n, d) batch."""
        return np.einsum("gij,nj->gni", self.elements, points)


@dataclass(frozen=True)
class Orbit:
    points: Array  # (k, d), duplicates removed


@dataclass(frozen=True)
class ContinuousGroupSpec:
    kind: str  # "SO2" | "SO3"
    dim: int

    def __post_init__(self):
        expected = {"SO2": 2, "SO3": 3}
        if self.kind not in expected:
            raise ValueError(f"unknown continuous group {self.kind!r}")
        if self.dim != expected[self.kind]:
            raise ValueError(f"{self.kind} acts on R^{expected[self.kind]}")


SO2 = ContinuousGroupSpec("SO2", 2)
SO3 = ContinuousGroupSpec("SO3", 3)


def rotation2d(angle: float) -> Array:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def cyclic_group(n: int) -> FiniteGroupRep:
    """C_n acting on R^2 by rotations through multiples of 2*pi/n."""
    if n < 1:
        raise ValueError("cyclic group order must be >= 1")
    mats = np.stack([rotation2d(2.0 * np.pi * k / n) for k in range(n)])
    return FiniteGroupRep(mats)


def trivial_group(dim: int) -> FiniteGroupRep:
    return FiniteGroupRep(np.eye(dim)[None])


def orbit(g: FiniteGroupRep, x) -> Orbit:
    """The set {R_h x : h in g} with duplicates (within 1e-10) removed."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.dim,):
        raise ValueError(f"point of dim {x.shape} does not match group dim {g.dim}")
    images = g.apply_all(x)
    kept: list[Array] = []
    for p in images:
        if all(np.abs(p - q).max() > _DEDUP_TOL for q in kept):
            kept.append(p)
    return Orbit(np.stack(kept))


def stabilizer_sizes(g: FiniteGroupRep, points: Array, tol: float = _DEDUP_TOL) -> Array:
    """Per-point count of group elements fixing the point.

    By orbit-stabilizer, each distinct orbit point appears exactly this many
    times in the full group sum, which is what orbit deduplication divides out.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    images = g.apply_all_batch(points)  # (m, n, d)
    fixed = np.abs(images - points[None]).max(axis=2) <= tol
    return fixed.sum(axis=0)


def random_rotation(spec: ContinuousGroupSpec, rng: Rng) -> Array:
    """Haar-uniform rotation: uniform angle for SO(2), uniform quaternion for SO(3)."""
    if spec.kind == "SO2":
        theta = 2.0 * np.pi * rng.uniform(1)[0]
        return rotation2d(theta)
    q = sample_standard_normal(rng, 4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def radial_factorization(x) -> float:
    """Euclidean norm: the fundamental-domain coordinate for SO(2)/SO(3)."""
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64)))


_FOLD_SNAP = 1e-12  # radians; keeps orbit mates of boundary points in one wedge


def c4_fold(x) -> Array:
    """Rotate a 2-D point by the multiple of 90 degrees putting its polar
    angle into [0, 90). Radius is preserved; C4-related points coincide."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2,):
        raise ValueError("c4_fold acts on R^2")
    return c4_fold_batch(x[None])[0]


def c4_fold_batch(points: Array) -> Array:
    points = np.asarray(points, dtype=np.float64)
    theta = np.arctan2(points[:, 1], points[:, 0]) % (2.0 * np.pi)
    k = ((theta + _FOLD_SNAP) // (np.pi / 2.0)).astype(int) % 4
    out = np.empty_like(points)
    for kk in range(4):
        mask = k == kk
        if mask.any():
            out[mask] = points[mask] @ rotation2d(-kk * np.pi / 2.0).T
    return out


class RadialMap:
    """Factorization map x -> ||x|| with its Jacobian, for SO(2)/SO(3) kernels."""

    def __init__(self, dim: int):
        self.dim_in = dim
        self.dim_out = 1

    def values(self, points: Array) -> Array:
        points = np.atleast_2d(points)
        return np.linalg.norm(points, axis=1, keepdims=True)

    def jacobian(self, points: Array) -> Array:
        points = np.atleast_2d(points)
        r = np.linalg.norm(points, axis=1, keepdims=True)
        safe = np.where(r > 0.0, r, 1.0)
        unit = np.where(r > 0.0, points / safe, 0.0)
        return unit[:, None, :]  # (n, 1, d)


class PairDistanceMap:
    """Sorted pairwise distances of an interacting-particle configuration.

    Invariant to global rotation, translation, and particle permutation;
    serves both as the invariant featurization of particle-system energies and
    as the factorization map of the matching kernel.
    """

    def __init__(self, n_particles: int, space_dim: int):
        self.n_particles = n_particles
        self.space_dim = space_dim
        self.dim_in = n_particles * space_dim
        idx_i, idx_j = np.triu_indices(n_particles, k=1)
        self._pairs = (idx_i, idx_j)
        self.dim_out = len(idx_i)

    def _distances(self, points: Array) -> tuple[Array, Array]:
        n = points.shape[0]
        conf = points.reshape(n, self.n_particles, self.space_dim)
        i, j = self._pairs
        diff = conf[:, i, :] - conf[:, j, :]  # (n, p, s)
        dist = np.linalg.norm(diff, axis=2)
        return dist, diff

    def values(self, points: Array) -> Array:
        points = np.atleast_2d(points)
        dist, _ = self._distances(points)
        return np.sort(dist, axis=1)

    def jacobian(self, points: Array) -> Array:
        points = np.atleast_2d(points)
        n = points.shape[0]
        dist, diff = self._distances(points)
        order = np.argsort(dist, axis=1, kind="stable")
        safe = np.where(dist > 0.0, dist, 1.0)
        unit = diff / safe[:, :, None]  # d d_ij / d x_i, negated for x_j
        i, j = self._pairs
        p = self.dim_out
        unit_sorted = np.take_along_axis(unit, order[:, :, None], axis=1)
        pair_i = i[order]  # (n, p) particle indices per sorted slot
        pair_j = j[order]
        jac = np.zeros((n, p, self.n_particles, self.space_dim))
        b_idx = np.arange(n)[:, None]
        s_idx = np.arange(p)[None, :]
        jac[b_idx, s_idx, pair_i] = unit_sorted
        jac[b_idx, s_idx, pair_j] = -unit_sorted
        return jac.reshape(n, p, self.dim_in)
