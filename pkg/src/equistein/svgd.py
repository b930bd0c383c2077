"""Particle updates for Stein variational gradient descent.

One step moves every particle simultaneously from the pre-step state:

    x_i <- x_i + (eps / N) * sum_j [ grad_{x_j} k(x_j, x_i)
                                     - k(x_j, x_i) * grad_{x_j} E(x_j) ]

with the matrix-kernel variant replacing k by the d x d kernel and the first
term by its row-wise divergence. Fixed repulsor points (dataset positives
during training) enter only the gradient term; by default they are counted in
the prefactor N.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fastpath
from .kernels import (
    KernelKind,
    MatrixKernel,
    ScalarKernel,
    make_repulsion_op,
    pairwise,
    repulsion,
    svgd_terms,
)
from .numerics import Array, Rng


class DivergenceError(RuntimeError):
    """A particle update produced a non-finite coordinate."""

    def __init__(self, step_index: int):
        super().__init__(f"non-finite particle update at step {step_index}")
        self.step_index = step_index


@dataclass
class ParticleEnsemble:
    particles: Array  # (n, d)
    step_index: int = 0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.particles, dtype=np.float64))
        self.particles = pts


@dataclass
class SvgdConfig:
    step_size: float
    max_steps: int
    kernel: ScalarKernel | MatrixKernel
    convergence_tol: float = 0.0
    extra_repulsors: Array | None = None
    count_repulsors: bool = True

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be >= 0")
        if self.extra_repulsors is not None:
            self.extra_repulsors = np.atleast_2d(np.asarray(self.extra_repulsors, dtype=np.float64))


def _prefactor(n: int, cfg: SvgdConfig) -> float:
    if cfg.extra_repulsors is not None and cfg.count_repulsors:
        return float(n + cfg.extra_repulsors.shape[0])
    return float(n)


def update_field(points: Array, sources: Array, target, cfg: SvgdConfig, repulsor_op=None) -> Array:
    """The Monte-Carlo update direction evaluated at arbitrary points, with the
    kernel sums running over ``sources`` (plus any configured repulsors).

    ``repulsor_op`` is an optional precomputed closure for the fixed-repulsor
    term (see kernels.make_repulsion_op); loops pass it in so the repulsor
    features are not rebuilt every step.
    """
    kern = cfg.kernel
    same = points is sources
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    sources = points if same else np.atleast_2d(np.asarray(sources, dtype=np.float64))
    grads_e = -target.score(sources)
    if kern.kind is KernelKind.RBF:
        phi = fastpath.rbf_direction(
            points, sources if not same else points, grads_e, kern.bandwidth, cfg.extra_repulsors
        )
        return phi / _prefactor(sources.shape[0], cfg)
    k, repulse = svgd_terms(kern, sources, points)
    attract = k.T @ grads_e
    if cfg.extra_repulsors is not None:
        if repulsor_op is None:
            repulse = repulse + repulsion(kern, cfg.extra_repulsors, points)
        else:
            repulse = repulse + repulsor_op(points)
    return (repulse - attract) / _prefactor(sources.shape[0], cfg)


def _scalar_direction(x: Array, target, cfg: SvgdConfig, repulsor_op=None) -> Array:
    return update_field(x, x, target, cfg, repulsor_op=repulsor_op)


def _matrix_direction(x: Array, target, cfg: SvgdConfig) -> Array:
    mk = cfg.kernel
    base, group = mk.base, mk.group
    grads_e = -target.score(x)
    out = np.zeros_like(x)
    for r in group.elements:
        targets_r = x @ r.T
        rep = repulsion(base, x, targets_r)
        if cfg.extra_repulsors is not None:
            rep = rep + repulsion(base, cfg.extra_repulsors, targets_r)
        att = pairwise(base, x, targets_r).T @ grads_e
        out += (rep - att) @ r.T  # row form of R_g @ (...)
    return out / (group.order * _prefactor(x.shape[0], cfg))


def _advance(ens: ParticleEnsemble, direction: Array, cfg: SvgdConfig) -> ParticleEnsemble:
    new = ens.particles + cfg.step_size * direction
    if not np.all(np.isfinite(new)):
        raise DivergenceError(ens.step_index)
    return ParticleEnsemble(new, ens.step_index + 1)


def svgd_step(ens: ParticleEnsemble, target, cfg: SvgdConfig, repulsor_op=None) -> ParticleEnsemble:
    """One simultaneous update with a scalar kernel."""
    if not isinstance(cfg.kernel, ScalarKernel):
        raise TypeError("svgd_step needs a scalar kernel")
    return _advance(ens, _scalar_direction(ens.particles, target, cfg, repulsor_op), cfg)


def svgd_step_matrix(ens: ParticleEnsemble, target, cfg: SvgdConfig) -> ParticleEnsemble:
    """One simultaneous update with a matrix-valued kernel."""
    if not isinstance(cfg.kernel, MatrixKernel):
        raise TypeError("svgd_step_matrix needs a matrix kernel")
    return _advance(ens, _matrix_direction(ens.particles, target, cfg), cfg)


def step_once(ens: ParticleEnsemble, target, cfg: SvgdConfig, repulsor_op=None) -> ParticleEnsemble:
    if isinstance(cfg.kernel, MatrixKernel):
        return svgd_step_matrix(ens, target, cfg)
    return svgd_step(ens, target, cfg, repulsor_op)


@dataclass
class RunTrace:
    update_norms: list[float] = field(default_factory=list)
    avg_logliks: list[float | None] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.update_norms)


def run(ens: ParticleEnsemble, target, cfg: SvgdConfig, rng: Rng | None = None) -> tuple[ParticleEnsemble, RunTrace]:
    """Iterate until max_steps or until the Frobenius norm of the ensemble
    update drops below convergence_tol. Logs average log-likelihood whenever
    the target's normalizer is known."""
    trace = RunTrace()
    log_norm = getattr(target, "log_norm", None)
    repulsor_op = None
    if cfg.extra_repulsors is not None and isinstance(cfg.kernel, ScalarKernel):
        repulsor_op = make_repulsion_op(cfg.kernel, cfg.extra_repulsors)
    for _ in range(cfg.max_steps):
        new = step_once(ens, target, cfg, repulsor_op)
        update = float(np.linalg.norm(new.particles - ens.particles))
        ens = new
        trace.update_norms.append(update)
        if log_norm is not None:
            ll = float(np.mean(-target.energy(ens.particles)) - log_norm)
            trace.avg_logliks.append(ll)
        else:
            trace.avg_logliks.append(None)
        if update < cfg.convergence_tol:
            break
    return ens, trace


# ---------------------------------------------------------------------------
# persistent sample buffer for contrastive-divergence negatives


@dataclass
class PersistentBuffer:
    samples: Array
    reset_prob: float
    reset_source: Callable[[Rng, int], Array]
    _cursor: int = 0
    _last_slots: Array | None = None

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if not 0.0 <= self.reset_prob <= 1.0:
            raise ValueError("reset_prob must lie in [0, 1]")


def buffer_draw(buf: PersistentBuffer, rng: Rng, batch: int) -> Array:
    """Next ``batch`` persisted samples (cyclic slots); each slot independently
    resets to a fresh reset_source draw with probability reset_prob."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    n = buf.samples.shape[0]
    if n == 0:
        if buf.reset_prob < 1.0:
            raise ValueError("empty buffer can only be drawn with reset_prob = 1")
        buf._last_slots = np.zeros(0, dtype=int)  # nothing to persist into
        return buf.reset_source(rng, batch)
    slots = (buf._cursor + np.arange(batch)) % n
    buf._cursor = int((buf._cursor + batch) % n)
    resets = rng.uniform(batch) < buf.reset_prob
    if resets.any():
        fresh = buf.reset_source(rng, int(resets.sum()))
        buf.samples[slots[resets]] = fresh
    buf._last_slots = slots
    return buf.samples[slots].copy()


def buffer_store(buf: PersistentBuffer, samples: Array) -> None:
    """Write evolved samples back into the slots of the most recent draw."""
    if buf._last_slots is None:
        raise ValueError("no outstanding draw to store into")
    if buf._last_slots.size:
        buf.samples[buf._last_slots] = samples
    buf._last_slots = None
