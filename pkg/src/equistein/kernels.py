"""Scalar and matrix-valued positive-definite kernels with analytic gradients.

Four scalar families share one RBF base exp(-||x - y||^2 / h):

* RBF          -- the base kernel itself,
* ORBIT_SUM    -- double sum of the base over both (deduplicated) finite-group
                  orbits, exactly invariant,
* MC_INVARIANT -- double sum over a rotation set drawn once at construction,
                  approximately invariant for continuous groups,
* FACTORIZED   -- base kernel evaluated on an invariant factorization map
                  (radius for SO(2)/SO(3), sorted pair distances for particle
                  systems), exactly invariant.

The matrix-valued kernel averages base values against the representation
matrices, K(x, y) = (1/|G|) sum_g k(x, R_g y) R_g, which is equivariant when
the base is invariant. All gradients are with respect to the first argument;
``repulsion`` sums them over a source set, which is the quantity the sampler
consumes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .groups import (
    ContinuousGroupSpec,
    FiniteGroupRep,
    RadialMap,
    random_rotation,
    stabilizer_sizes,
)
from .numerics import Array, Rng


class KernelKind(enum.Enum):
    RBF = "rbf"
    ORBIT_SUM = "orbit_sum"
    MC_INVARIANT = "mc_invariant"
    FACTORIZED = "factorized"


# ---------------------------------------------------------------------------
# base RBF


def rbf_eval(x, x2, h: float) -> float:
    """exp(-||x - x2||^2 / h)."""
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    if h <= 0.0:
        raise ValueError("bandwidth must be positive")
    d = x - x2
    return float(np.exp(-(d @ d) / h))


def rbf_grad_x(x, x2, h: float) -> Array:
    """Gradient of rbf_eval in its first argument: -(2/h)(x - x2) k(x, x2)."""
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    k = rbf_eval(x, x2, h)
    return -(2.0 / h) * (x - x2) * k


def _rbf_pairwise(a: Array, b: Array, h: float) -> Array:
    """(nA, nB) matrix of base-kernel values."""
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-d2 / h)


def _rbf_repulsion(a: Array, b: Array, h: float, w: Array | None = None) -> Array:
    """out[j] = sum_i w_i * grad_{a_i} k(a_i, b_j), for the base RBF."""
    k = _rbf_pairwise(a, b, h)
    if w is not None:
        k = k * w[:, None]
    colsum = k.sum(axis=0)
    return -(2.0 / h) * (k.T @ a - colsum[:, None] * b)


# ---------------------------------------------------------------------------
# kernel objects


@dataclass(frozen=True)
class ScalarKernel:
    kind: KernelKind
    bandwidth: float
    group: FiniteGroupRep | None = None
    cont_group: ContinuousGroupSpec | None = None
    mc_samples: int | None = None
    mc_seed: int | None = None
    normalize: bool = False
    feature_map: object | None = None
    rotations: Array | None = None  # frozen at construction for MC_INVARIANT

    def __post_init__(self):
        if self.bandwidth <= 0.0:
            raise ValueError("bandwidth must be positive")
        if self.kind is KernelKind.ORBIT_SUM and self.group is None:
            raise ValueError("orbit-sum kernel needs a finite group")
        if self.kind is KernelKind.MC_INVARIANT:
            if self.rotations is None:
                raise ValueError("MC kernel needs its frozen rotation set")
        if self.kind is KernelKind.FACTORIZED and self.feature_map is None:
            raise ValueError("factorized kernel needs a factorization map")


def rbf_kernel(bandwidth: float) -> ScalarKernel:
    return ScalarKernel(KernelKind.RBF, bandwidth)


def orbit_sum_kernel(group: FiniteGroupRep, bandwidth: float, normalize: bool = False) -> ScalarKernel:
    return ScalarKernel(KernelKind.ORBIT_SUM, bandwidth, group=group, normalize=normalize)


def mc_invariant_kernel(
    cont_group: ContinuousGroupSpec,
    bandwidth: float,
    mc_samples: int,
    mc_seed: int,
    rotations: Array | None = None,
) -> ScalarKernel:
    """Rotation set is drawn here once and reused for every evaluation.

    ``rotations`` overrides the draw for diagnostics (e.g. pinning the single
    sample to the identity).
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    if rotations is None:
        rng = Rng(mc_seed).split("mc-kernel-rotations")
        rotations = np.stack([random_rotation(cont_group, rng) for _ in range(mc_samples)])
    rotations = np.asarray(rotations, dtype=np.float64)
    if rotations.shape != (mc_samples, cont_group.dim, cont_group.dim):
        raise ValueError("rotation set shape does not match mc_samples/group dim")
    return ScalarKernel(
        KernelKind.MC_INVARIANT,
        bandwidth,
        cont_group=cont_group,
        mc_samples=mc_samples,
        mc_seed=mc_seed,
        rotations=rotations,
    )


def factorized_kernel(cont_group: ContinuousGroupSpec, bandwidth: float) -> ScalarKernel:
    return ScalarKernel(
        KernelKind.FACTORIZED,
        bandwidth,
        cont_group=cont_group,
        feature_map=RadialMap(cont_group.dim),
    )


def feature_kernel(feature_map, bandwidth: float) -> ScalarKernel:
    """Factorized kernel over an arbitrary invariant feature map."""
    return ScalarKernel(KernelKind.FACTORIZED, bandwidth, feature_map=feature_map)


# ---------------------------------------------------------------------------
# pointwise evaluation / gradients


def _orbit_weights(group: FiniteGroupRep, points: Array) -> Array:
    # Dividing the full group double sum by the stabilizer sizes counts each
    # distinct orbit point exactly once.
    return 1.0 / stabilizer_sizes(group, points)


def orbit_sum_eval(kern: ScalarKernel, x, x2) -> float:
    if kern.kind is not KernelKind.ORBIT_SUM:
        raise ValueError("kernel is not an orbit-sum kernel")
    g = kern.group
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x.shape != (g.dim,) or x2.shape != (g.dim,):
        raise ValueError("point dimension does not match the kernel group")
    gx = g.apply_all(x)
    gy = g.apply_all(x2)
    k = _rbf_pairwise(gx, gy, kern.bandwidth)
    if kern.normalize:
        # dividing the raw deduplicated sum by |O(x)||O(x2)| cancels the
        # stabilizer weights: raw * w_x w_y / (|G| w_x |G| w_y) = sum / |G|^2
        return float(k.sum()) / g.order**2
    wx = _orbit_weights(g, x[None])[0]
    wy = _orbit_weights(g, x2[None])[0]
    return float(k.sum()) * wx * wy


def _orbit_sum_grad(kern: ScalarKernel, x, x2) -> Array:
    g = kern.group
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    gx = g.apply_all(x)
    gy = g.apply_all(x2)
    k = _rbf_pairwise(gx, gy, kern.bandwidth)
    # sum_{g,h} R_g^T grad_1 k(R_g x, R_h x2)
    diff = gx[:, None, :] - gy[None, :, :]
    contrib = -(2.0 / kern.bandwidth) * np.einsum("ab,abj->aj", k, diff)
    grad = np.einsum("aij,ai->j", g.elements, contrib)
    if kern.normalize:
        return grad / g.order**2
    wx = _orbit_weights(g, x[None])[0]
    wy = _orbit_weights(g, x2[None])[0]
    return grad * wx * wy


def mc_invariant_eval(kern: ScalarKernel, x, x2) -> float:
    if kern.kind is not KernelKind.MC_INVARIANT:
        raise ValueError("kernel is not an MC-invariant kernel")
    rot = kern.rotations
    gx = np.einsum("gij,j->gi", rot, np.asarray(x, dtype=np.float64))
    gy = np.einsum("gij,j->gi", rot, np.asarray(x2, dtype=np.float64))
    return float(_rbf_pairwise(gx, gy, kern.bandwidth).sum())


def _mc_invariant_grad(kern: ScalarKernel, x, x2) -> Array:
    rot = kern.rotations
    gx = np.einsum("gij,j->gi", rot, np.asarray(x, dtype=np.float64))
    gy = np.einsum("gij,j->gi", rot, np.asarray(x2, dtype=np.float64))
    k = _rbf_pairwise(gx, gy, kern.bandwidth)
    diff = gx[:, None, :] - gy[None, :, :]
    contrib = -(2.0 / kern.bandwidth) * np.einsum("ab,abj->aj", k, diff)
    return np.einsum("aij,ai->j", rot, contrib)


def factorized_eval(kern: ScalarKernel, x, x2) -> float:
    if kern.kind is not KernelKind.FACTORIZED:
        raise ValueError("kernel is not a factorized kernel")
    fm = kern.feature_map
    u = fm.values(np.asarray(x, dtype=np.float64)[None])[0]
    v = fm.values(np.asarray(x2, dtype=np.float64)[None])[0]
    d = u - v
    return float(np.exp(-(d @ d) / kern.bandwidth))


def _factorized_grad(kern: ScalarKernel, x, x2) -> Array:
    fm = kern.feature_map
    x = np.asarray(x, dtype=np.float64)
    u = fm.values(x[None])[0]
    v = fm.values(np.asarray(x2, dtype=np.float64)[None])[0]
    d = u - v
    val = np.exp(-(d @ d) / kern.bandwidth)
    jac = fm.jacobian(x[None])[0]  # (p, din)
    return -(2.0 / kern.bandwidth) * val * (d @ jac)


def kernel_eval(kern: ScalarKernel, x, x2) -> float:
    if kern.kind is KernelKind.RBF:
        return rbf_eval(x, x2, kern.bandwidth)
    if kern.kind is KernelKind.ORBIT_SUM:
        return orbit_sum_eval(kern, x, x2)
    if kern.kind is KernelKind.MC_INVARIANT:
        return mc_invariant_eval(kern, x, x2)
    return factorized_eval(kern, x, x2)


def kernel_grad_x(kern: ScalarKernel, x, x2) -> Array:
    """Analytic gradient of kernel_eval in the first argument."""
    if kern.kind is KernelKind.RBF:
        return rbf_grad_x(x, x2, kern.bandwidth)
    if kern.kind is KernelKind.ORBIT_SUM:
        return _orbit_sum_grad(kern, x, x2)
    if kern.kind is KernelKind.MC_INVARIANT:
        return _mc_invariant_grad(kern, x, x2)
    return _factorized_grad(kern, x, x2)


# ---------------------------------------------------------------------------
# vectorized ensemble paths (cross-checked against the pointwise forms)


def pairwise(kern: ScalarKernel, a: Array, b: Array) -> Array:
    """K[i, j] = k(a_i, b_j) for row stacks a (nA, d) and b (nB, d)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    h = kern.bandwidth
    if kern.kind is KernelKind.RBF:
        return _rbf_pairwise(a, b, h)
    if kern.kind is KernelKind.ORBIT_SUM:
        g = kern.group
        if a.shape[1] != g.dim:
            raise ValueError("point dimension does not match the kernel group")
        # sum_{g,h} k(R_g a, R_h b) = |G| sum_u k(a, R_u b) by orthogonality
        k = np.zeros((a.shape[0], b.shape[0]))
        for r in g.elements:
            k += _rbf_pairwise(a, b @ r.T, h)
        if kern.normalize:
            return k / g.order
        wa = _orbit_weights(g, a)
        wb = _orbit_weights(g, b)
        return k * (g.order * wa[:, None] * wb[None, :])
    if kern.kind is KernelKind.MC_INVARIANT:
        rot = kern.rotations
        k = np.zeros((a.shape[0], b.shape[0]))
        for rj in rot:
            for ri in rot:
                k += _rbf_pairwise(a, b @ (rj.T @ ri).T, h)
        return k
    fm = kern.feature_map
    return _rbf_pairwise(fm.values(a), fm.values(b), h)


def repulsion(kern: ScalarKernel, a: Array, b: Array) -> Array:
    """out[j] = sum_i grad_{a_i} k(a_i, b_j); the repulsive sum of the sampler."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    h = kern.bandwidth
    if kern.kind is KernelKind.RBF:
        return _rbf_repulsion(a, b, h)
    if kern.kind is KernelKind.ORBIT_SUM:
        g = kern.group
        # grad_a k(R_g a, R_h b) = grad_1 k(a, R_g^T R_h b): rewriting in
        # a-coordinates needs no rotation factor on the gradient
        out = np.zeros_like(b)
        if kern.normalize:
            for r in g.elements:
                out += _rbf_repulsion(a, b @ r.T, h)
            return out / g.order
        wa = _orbit_weights(g, a)
        wb = _orbit_weights(g, b)
        for r in g.elements:
            out += _rbf_repulsion(a, b @ r.T, h, w=wa)
        return out * (g.order * wb[:, None])
    if kern.kind is KernelKind.MC_INVARIANT:
        rot = kern.rotations
        out = np.zeros_like(b)
        for rj in rot:
            for ri in rot:
                out += _rbf_repulsion(a, b @ (rj.T @ ri).T, h)
        return out
    fm = kern.feature_map
    return _factorized_repulsion(fm.values(a), fm.jacobian(a), fm.values(b), h)


def _factorized_repulsion(ua: Array, jac_a: Array, ub: Array, h: float, k: Array | None = None) -> Array:
    """sum_a grad_a k(Phi(a), Phi(b)) with the source blocks precomputed.

    Uses sum_a k_ab J_a^T (u_a - u_b) = sum_a k_ab P_a - (sum_a k_ab J_a)^T u_b
    with P_a = J_a^T u_a, turning the pair sum into two matrix products.
    """
    if k is None:
        k = _rbf_pairwise(ua, ub, h)
    p_vec = np.einsum("apd,ap->ad", jac_a, ua)
    lhs = k.T @ p_vec  # (nB, d)
    t = (k.T @ jac_a.reshape(jac_a.shape[0], -1)).reshape(ub.shape[0], ua.shape[1], -1)
    rhs = np.einsum("bpd,bp->bd", t, ub)
    return -(2.0 / h) * (lhs - rhs)


def make_repulsion_op(kern: ScalarKernel, sources: Array):
    """Closure computing points -> sum over the fixed sources of grad_a k(a, .),
    with everything source-side precomputed (used for dataset repulsors)."""
    sources = np.atleast_2d(np.asarray(sources, dtype=np.float64))
    h = kern.bandwidth
    if kern.kind is KernelKind.FACTORIZED:
        fm = kern.feature_map
        ua = fm.values(sources)
        jac_a = fm.jacobian(sources)

        def op(points: Array) -> Array:
            return _factorized_repulsion(ua, jac_a, fm.values(points), h)

        return op

    def op(points: Array) -> Array:
        return repulsion(kern, sources, points)

    return op


def svgd_terms(kern: ScalarKernel, a: Array, b: Array) -> tuple[Array, Array]:
    """Fused (pairwise, repulsion) for the sampler: one kernel evaluation pass.

    Returns (K, R) with K[i, j] = k(a_i, b_j) and R[j] = sum_i grad_{a_i}
    k(a_i, b_j); identical to calling pairwise() and repulsion() separately.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    h = kern.bandwidth
    if kern.kind is KernelKind.RBF:
        k = _rbf_pairwise(a, b, h)
        rep = -(2.0 / h) * (k.T @ a - k.sum(axis=0)[:, None] * b)
        return k, rep
    if kern.kind is KernelKind.ORBIT_SUM:
        g = kern.group
        if a.shape[1] != g.dim:
            raise ValueError("point dimension does not match the kernel group")
        ksum = np.zeros((a.shape[0], b.shape[0]))
        rep = np.zeros_like(b)
        wa = None if kern.normalize else _orbit_weights(g, a)
        for r in g.elements:
            br = b @ r.T
            ku = _rbf_pairwise(a, br, h)
            ksum += ku
            kw = ku if wa is None else ku * wa[:, None]
            rep += -(2.0 / h) * (kw.T @ a - kw.sum(axis=0)[:, None] * br)
        if kern.normalize:
            return ksum / g.order, rep / g.order
        wb = _orbit_weights(g, b)
        k = ksum * (g.order * wa[:, None] * wb[None, :])
        return k, rep * (g.order * wb[:, None])
    if kern.kind is KernelKind.MC_INVARIANT:
        rot = kern.rotations
        k = np.zeros((a.shape[0], b.shape[0]))
        rep = np.zeros_like(b)
        for rj in rot:
            for ri in rot:
                br = b @ (rj.T @ ri).T
                ku = _rbf_pairwise(a, br, h)
                k += ku
                rep += -(2.0 / h) * (ku.T @ a - ku.sum(axis=0)[:, None] * br)
        return k, rep
    fm = kern.feature_map
    ua = fm.values(a)
    ub = fm.values(b)
    k = _rbf_pairwise(ua, ub, h)
    return k, _factorized_repulsion(ua, fm.jacobian(a), ub, h, k=k)


def gram_matrix(kern: ScalarKernel, points) -> Array:
    """Symmetric matrix of pairwise kernel values."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < 1:
        raise ValueError("need at least one point")
    k = pairwise(kern, pts, pts)
    return 0.5 * (k + k.T)


# ---------------------------------------------------------------------------
# matrix-valued equivariant kernels


@dataclass(frozen=True)
class MatrixKernel:
    """K(x, y) = (1/|G|) sum_g base(x, R_g y) R_g.

    The base must be invariant under the diagonal action, base(R x, R y) =
    base(x, y); radial kernels qualify for orthogonal groups. (A base that is
    invariant in each argument separately collapses K to k * mean(R_g), the
    zero matrix for any nontrivial cyclic rotation group.)
    """

    base: ScalarKernel
    group: FiniteGroupRep

    def __post_init__(self):
        if not isinstance(self.group, FiniteGroupRep):
            raise TypeError("matrix kernels require a finite group")
        self._check_diagonal_invariance()

    def _check_diagonal_invariance(self, tol: float = 1e-8):
        d = self.group.dim
        probes = [
            (np.linspace(0.3, 1.1, d), np.linspace(-0.9, 0.4, d)),
            (np.linspace(-1.2, 0.8, d), np.linspace(0.2, 1.5, d)),
        ]
        for x, y in probes:
            ref = kernel_eval(self.base, x, y)
            for r in self.group.elements:
                if abs(kernel_eval(self.base, r @ x, r @ y) - ref) > tol:
                    raise ValueError("matrix-kernel base is not invariant under the diagonal group action")


def matrix_kernel_eval(mk: MatrixKernel, x, x2) -> Array:
    g = mk.group
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    out = np.zeros((g.dim, g.dim))
    for r in g.elements:
        out += kernel_eval(mk.base, x, r @ x2) * r
    return out / g.order


def matrix_kernel_div_x(mk: MatrixKernel, x, x2) -> Array:
    """Row-wise divergence over the first argument:
    (div K)_i = sum_j dK_ij/dx_j = (1/|G|) sum_g [R_g grad_1 k(x, R_g x2)]_i."""
    g = mk.group
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    out = np.zeros(g.dim)
    for r in g.elements:
        out += r @ kernel_grad_x(mk.base, x, r @ x2)
    return out / g.order
