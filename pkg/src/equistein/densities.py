"""Analytic unnormalized target densities with exact energies and scores.

Each target exposes a batched energy (n, d) -> (n,) and its exact score
-grad E as (n, d) -> (n, d), a tag naming the invariance group, and -- when
known -- the log partition function so average log-likelihoods are absolute.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .groups import SO2, SO3, ContinuousGroupSpec, FiniteGroupRep, cyclic_group, rotation2d
from .numerics import Array, Rng, sample_normal_matrix


@dataclass(frozen=True)
class TargetDensity:
    dim: int
    energy: Callable[[Array], Array]
    score: Callable[[Array], Array]
    log_norm: float | None = None
    group_tag: str = "none"
    group: FiniteGroupRep | None = None
    cont_group: ContinuousGroupSpec | None = None
    radial_profile: Callable[[Array], Array] | None = None
    radial_support: float | None = None  # radius beyond which the profile is negligible
    sampler: Callable[[Rng, int], Array] | None = None

    def energy_at(self, x) -> float:
        return float(self.energy(np.asarray(x, dtype=np.float64)[None])[0])

    def score_at(self, x) -> Array:
        return self.score(np.asarray(x, dtype=np.float64)[None])[0]

    def sample(self, rng: Rng, n: int) -> Array:
        if self.sampler is None:
            raise ValueError("target has no exact sampler")
        return self.sampler(rng, n)


@dataclass(frozen=True)
class LabeledDataset:
    points: Array
    labels: Array
    num_classes: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        lab = np.asarray(self.labels, dtype=np.int64)
        if pts.shape[0] != lab.shape[0]:
            raise ValueError("points and labels must have equal length")
        if lab.size and (lab.min() < 0 or lab.max() >= self.num_classes):
            raise ValueError("labels out of range")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)


def _logsumexp(a: Array, axis: int) -> Array:
    m = a.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def gaussian(mean, cov) -> TargetDensity:
    """Multivariate normal with energy (x-m)^T C^-1 (x-m) / 2 and exact log Z."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    d = mean.shape[0]
    prec = np.linalg.inv(cov)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise ValueError("covariance must be positive definite")
    log_norm = 0.5 * d * np.log(2.0 * np.pi) + 0.5 * logdet
    chol = np.linalg.cholesky(cov)

    def energy(x: Array) -> Array:
        delta = x - mean
        return 0.5 * np.einsum("ni,ij,nj->n", delta, prec, delta)

    def score(x: Array) -> Array:
        return -(x - mean) @ prec.T

    def sampler(rng: Rng, n: int) -> Array:
        z = sample_normal_matrix(rng, n, d)
        return mean + z @ chol.T

    return TargetDensity(d, energy, score, float(log_norm), sampler=sampler)


def c4_gaussian_mixture(radius: float, cov_diag) -> TargetDensity:
    """Uniform four-mode Gaussian mixture, exactly C4-invariant.

    Mode k sits at radius * (cos 90k, sin 90k); its covariance is the base
    diagonal rotated by the same angle, so rotating by 90 degrees permutes the
    modes without changing the density.
    """
    cov_diag = np.asarray(cov_diag, dtype=np.float64)
    if radius <= 0 or np.any(cov_diag <= 0):
        raise ValueError("radius and covariance entries must be positive")
    rots = [rotation2d(k * np.pi / 2.0) for k in range(4)]
    means = np.stack([r @ np.array([radius, 0.0]) for r in rots])
    precs = np.stack([r @ np.diag(1.0 / cov_diag) @ r.T for r in rots])
    chols = np.stack([r @ np.diag(np.sqrt(cov_diag)) for r in rots])
    logdet = float(np.log(cov_diag).sum())  # same for every rotated mode
    log_comp_norm = np.log(2.0 * np.pi) + 0.5 * logdet

    def log_density(x: Array) -> Array:
        delta = x[:, None, :] - means[None, :, :]  # (n, 4, 2)
        q = 0.5 * np.einsum("nki,kij,nkj->nk", delta, precs, delta)
        return _logsumexp(-q, axis=1) - np.log(4.0) - log_comp_norm

    def energy(x: Array) -> Array:
        return -log_density(x)

    def score(x: Array) -> Array:
        delta = x[:, None, :] - means[None, :, :]
        q = 0.5 * np.einsum("nki,kij,nkj->nk", delta, precs, delta)
        resp = np.exp(-q - _logsumexp(-q, axis=1)[:, None])
        pulls = -np.einsum("kij,nkj->nki", precs, delta)
        return np.einsum("nk,nki->ni", resp, pulls)

    def sampler(rng: Rng, n: int) -> Array:
        comp = (rng.uniform(n) * 4).astype(int)
        z = sample_normal_matrix(rng, n, 2)
        out = np.empty((n, 2))
        for k in range(4):
            m = comp == k
            out[m] = means[k] + z[m] @ chols[k].T
        return out

    return TargetDensity(
        2, energy, score, log_norm=0.0, group_tag="c4", group=cyclic_group(4), sampler=sampler
    )


def concentric_rings(radii, width_var: float, dim: int) -> TargetDensity:
    """Rotation-invariant mixture of radial Gaussian shells.

    energy(x) = -log sum_r exp(-(||x|| - r)^2 / (2 v)); the density is defined
    on the radius with no Jacobian correction, and its normalizer comes from
    1-D quadrature over the radius at construction.
    """
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(radii <= 0) or len(set(radii.tolist())) != len(radii):
        raise ValueError("radii must be positive and distinct")
    if width_var <= 0:
        raise ValueError("width variance must be positive")
    if dim not in (2, 3):
        raise ValueError("rings are 2-D, shells are 3-D")
    sigma = np.sqrt(width_var)

    def shell_profile(s: Array) -> Array:
        s = np.asarray(s, dtype=np.float64)
        e = -((s[..., None] - radii) ** 2) / (2.0 * width_var)
        m = e.max(axis=-1)
        return np.exp(m) * np.exp(e - m[..., None]).sum(axis=-1)

    def radial_energy_deriv(s: Array) -> Array:
        e = -((s[..., None] - radii) ** 2) / (2.0 * width_var)
        w = np.exp(e - _logsumexp(e, axis=-1)[..., None])
        return (w * (s[..., None] - radii)).sum(axis=-1) / width_var

    def energy(x: Array) -> Array:
        s = np.linalg.norm(x, axis=1)
        e = -((s[:, None] - radii) ** 2) / (2.0 * width_var)
        return -_logsumexp(e, axis=1)

    def score(x: Array) -> Array:
        s = np.linalg.norm(x, axis=1)
        deriv = radial_energy_deriv(s)
        safe = np.where(s > 0.0, s, 1.0)
        unit = np.where(s[:, None] > 0.0, x / safe[:, None], 0.0)
        return -deriv[:, None] * unit

    surface = 2.0 * np.pi if dim == 2 else 4.0 * np.pi
    s_max = float(radii.max() + 12.0 * sigma)
    nodes, weights = np.polynomial.legendre.leggauss(512)
    s_nodes = 0.5 * s_max * (nodes + 1.0)
    s_weights = 0.5 * s_max * weights
    z = surface * float((shell_profile(s_nodes) * s_nodes ** (dim - 1) * s_weights).sum())
    log_norm = float(np.log(z))

    # inverse-CDF radius sampler on a fine grid, direction uniform on the sphere
    grid = np.linspace(0.0, s_max, 20001)
    pdf = shell_profile(grid) * grid ** (dim - 1)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]

    def sampler(rng: Rng, n: int) -> Array:
        u = rng.uniform(n)
        s = np.interp(u, cdf, grid)
        direction = sample_normal_matrix(rng, n, dim)
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return s[:, None] * direction

    return TargetDensity(
        dim,
        energy,
        score,
        log_norm=log_norm,
        group_tag="so2" if dim == 2 else "so3",
        cont_group=SO2 if dim == 2 else SO3,
        radial_profile=shell_profile,
        radial_support=s_max,
        sampler=sampler,
    )


# ---------------------------------------------------------------------------
# two-class C4 mixture for joint energy models


@dataclass(frozen=True)
class TwoClassProblem:
    class_densities: tuple[TargetDensity, TargetDensity]
    joint: TargetDensity
    class_radii: tuple[float, float]

    def sample_dataset(self, rng: Rng, n: int) -> LabeledDataset:
        """n labeled points, exactly n/2 per class, interleaved 0,1,0,1,..."""
        if n % 2 != 0:
            raise ValueError("dataset size must split evenly between the two classes")
        half = n // 2
        draws = [d.sample(rng.split("class", i), half) for i, d in enumerate(self.class_densities)]
        points = np.empty((n, 2))
        labels = np.empty(n, dtype=np.int64)
        points[0::2], points[1::2] = draws[0], draws[1]
        labels[0::2], labels[1::2] = 0, 1
        return LabeledDataset(points, labels, num_classes=2)


def jem_two_class_c4(inner_radius: float, outer_radius: float) -> TwoClassProblem:
    if not 0 < inner_radius < outer_radius:
        raise ValueError("need 0 < inner_radius < outer_radius")
    inner = c4_gaussian_mixture(inner_radius, (1.0, 1.0))
    outer = c4_gaussian_mixture(outer_radius, (1.0, 1.0))

    def energy(x: Array) -> Array:
        li = -inner.energy(x)
        lo = -outer.energy(x)
        return -(_logsumexp(np.stack([li, lo], axis=1), axis=1) - np.log(2.0))

    def score(x: Array) -> Array:
        li = -inner.energy(x)
        lo = -outer.energy(x)
        w = np.exp(np.stack([li, lo], axis=1) - _logsumexp(np.stack([li, lo], axis=1), axis=1)[:, None])
        return w[:, :1] * inner.score(x) + w[:, 1:] * outer.score(x)

    joint = TargetDensity(2, energy, score, log_norm=0.0, group_tag="c4", group=cyclic_group(4))
    return TwoClassProblem((inner, outer), joint, (inner_radius, outer_radius))


def jem_two_class_rings(inner_radius: float, outer_radius: float, width_var: float) -> TwoClassProblem:
    """Two-class rotation-invariant toy: one radial shell per class."""
    if not 0 < inner_radius < outer_radius:
        raise ValueError("need 0 < inner_radius < outer_radius")
    inner = concentric_rings([inner_radius], width_var, 2)
    outer = concentric_rings([outer_radius], width_var, 2)
    both = concentric_rings([inner_radius, outer_radius], width_var, 2)
    return TwoClassProblem((inner, outer), both, (inner_radius, outer_radius))


# ---------------------------------------------------------------------------
# four-particle pairwise double-well system


@dataclass(frozen=True)
class DoubleWellParams:
    """Pair potential (a u + b u^2 + c u^4) / (2 tau) with u = d - d0.

    The parameter set is configuration, not a constant: the defaults follow
    the convention common to interacting-particle benchmarks.
    """

    a: float = 0.0
    b: float = -4.0
    c: float = 0.9
    d0: float = 4.0
    tau: float = 1.0


DW4_PARTICLES = 4
DW4_SPACE_DIM = 2
DW4_DIM = DW4_PARTICLES * DW4_SPACE_DIM
_DW4_PAIRS = np.triu_indices(DW4_PARTICLES, k=1)


def pairwise_double_well_energy(positions: Array, params: DoubleWellParams = DoubleWellParams()) -> float:
    """Energy of one (n_particles, space_dim) configuration; dimension-generic."""
    pos = np.asarray(positions, dtype=np.float64)
    i, j = np.triu_indices(pos.shape[0], k=1)
    d = np.linalg.norm(pos[i] - pos[j], axis=1)
    u = d - params.d0
    return float((params.a * u + params.b * u**2 + params.c * u**4).sum() / (2.0 * params.tau))


def dw4_energy_batch(x: Array, params: DoubleWellParams = DoubleWellParams()) -> Array:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != DW4_DIM:
        raise ValueError(f"expected {DW4_DIM}-dimensional configurations")
    conf = x.reshape(-1, DW4_PARTICLES, DW4_SPACE_DIM)
    i, j = _DW4_PAIRS
    d = np.linalg.norm(conf[:, i, :] - conf[:, j, :], axis=2)
    u = d - params.d0
    return (params.a * u + params.b * u**2 + params.c * u**4).sum(axis=1) / (2.0 * params.tau)


def dw4_score_batch(x: Array, params: DoubleWellParams = DoubleWellParams()) -> Array:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != DW4_DIM:
        raise ValueError(f"expected {DW4_DIM}-dimensional configurations")
    conf = x.reshape(-1, DW4_PARTICLES, DW4_SPACE_DIM)
    i, j = _DW4_PAIRS
    diff = conf[:, i, :] - conf[:, j, :]
    d = np.linalg.norm(diff, axis=2)
    u = d - params.d0
    dud = (params.a + 2.0 * params.b * u + 4.0 * params.c * u**3) / (2.0 * params.tau)
    safe = np.where(d > 0.0, d, 1.0)
    pair_force = (dud / safe)[:, :, None] * diff  # dE/dx_i contribution per pair
    grad = np.zeros_like(conf)
    np.add.at(grad, (slice(None), i), pair_force)
    np.add.at(grad, (slice(None), j), -pair_force)
    return -grad.reshape(x.shape)


def dw4_energy(x, params: DoubleWellParams = DoubleWellParams()) -> float:
    return float(dw4_energy_batch(np.asarray(x, dtype=np.float64)[None], params)[0])


def dw4_score(x, params: DoubleWellParams = DoubleWellParams()) -> Array:
    return dw4_score_batch(np.asarray(x, dtype=np.float64)[None], params)[0]


def dw4_target(params: DoubleWellParams = DoubleWellParams()) -> TargetDensity:
    return TargetDensity(
        DW4_DIM,
        lambda x: dw4_energy_batch(x, params),
        lambda x: dw4_score_batch(x, params),
        log_norm=None,
        group_tag="e2perm",
    )


# Hand-shaped seeds, one per distinct local minimum (pair distances want to
# sit near d0 - 1.49 or d0 + 1.49); gradient descent refines them at call
# time. A 400-start random survey finds exactly these five basins.
_DW4_SEEDS = np.array(
    [
        # bent three-chain with a far satellite (deepest minimum)
        [1.9, 2.1, 1.6, -3.4, -0.7, 1.5, -2.8, -0.2],
        # triangle with a tail
        [0.0, 0.0, 2.5, 0.0, 1.25, 2.17, 1.25, 4.67],
        # rectangle, short edge ~2.4, long edge ~5.2
        [1.2, 2.6, 1.2, -2.6, -1.2, 2.6, -1.2, -2.6],
        # rhombus: two equilateral triangles sharing an edge
        [0.0, 0.0, 2.5, 0.0, 1.25, 2.17, 1.25, -2.17],
        # equilateral triangle with a center particle
        [0.0, 0.0, 0.0, 2.5, 2.17, -1.25, -2.17, -1.25],
    ]
)


def _descend(x0: Array, params: DoubleWellParams, max_iter: int = 200000, tol: float = 1e-12) -> Array:
    """Plain gradient descent with step backtracking down to a stationary point."""
    x = np.asarray(x0, dtype=np.float64).copy()
    e = dw4_energy(x, params)
    lr = 1e-2
    for _ in range(max_iter):
        g = -dw4_score(x, params)
        if np.abs(g).max() < tol:
            break
        while lr > 1e-14:
            cand = x - lr * g
            e_cand = dw4_energy(cand, params)
            if e_cand < e:
                break
            lr *= 0.5
        else:
            break
        x, e = cand, e_cand
        lr *= 1.5
    return x


def dw4_metastable_states(params: DoubleWellParams = DoubleWellParams()) -> Array:
    """The five distinct local minima, refined from the seeds and centered."""
    states = []
    for seed in _DW4_SEEDS:
        x = _descend(seed, params)
        conf = x.reshape(DW4_PARTICLES, DW4_SPACE_DIM)
        conf = conf - conf.mean(axis=0)
        states.append(conf.reshape(-1))
    return np.stack(states)


def dw4_metastable_dataset(
    rng: Rng,
    copies_per_state: int,
    noise_std: float,
    params: DoubleWellParams = DoubleWellParams(),
) -> Array:
    """Each metastable state duplicated with i.i.d. Gaussian coordinate noise."""
    if copies_per_state < 1:
        raise ValueError("copies_per_state must be >= 1")
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    states = dw4_metastable_states(params)
    reps = np.repeat(states, copies_per_state, axis=0)
    noise = sample_normal_matrix(rng.split("dw4-noise"), reps.shape[0], reps.shape[1])
    return reps + noise_std * noise
