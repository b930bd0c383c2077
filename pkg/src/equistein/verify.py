"""Numerical audit of the core invariants: update equivariance, kernel
positive-definiteness, analytic-gradient correctness, and the Stein identity.

Each check returns its worst observed deviation against a fixed threshold;
`run_all` aggregates them into a machine-readable summary. The step used by
the equivariance checks can be overridden, which the test suite uses to prove
the audit catches injected kernel bugs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import EnergyMLP, FeaturizedEnergy, SymmetrizedEnergy
from .densities import c4_gaussian_mixture, concentric_rings, dw4_target, gaussian
from .groups import SO2, SO3, PairDistanceMap, cyclic_group
from .kernels import (
    MatrixKernel,
    factorized_kernel,
    feature_kernel,
    gram_matrix,
    kernel_eval,
    kernel_grad_x,
    matrix_kernel_div_x,
    matrix_kernel_eval,
    mc_invariant_kernel,
    orbit_sum_kernel,
    rbf_kernel,
)
from .metrics import equivariance_report, orbit_field_report, stein_identity_residual
from .numerics import Rng, sample_normal_matrix
from .svgd import ParticleEnsemble, SvgdConfig, svgd_step, svgd_step_matrix


@dataclass
class PropertyResult:
    name: str
    passed: bool
    max_deviation: float
    threshold: float
    comparison: str = "<="  # thresholds are upper bounds unless ">="


def _result(name, dev, threshold, comparison="<=") -> PropertyResult:
    ok = dev <= threshold if comparison == "<=" else dev >= threshold
    return PropertyResult(name, bool(ok), float(dev), float(threshold), comparison)


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(analytic - numeric)) / scale


def _central_diff(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        out[i] = (f(x + e) - f(x - e)) / (2.0 * eps)
    return out


def check_proposition1(step_fn=None, matrix_step_fn=None, trials: int = 50, seed: int = 0):
    group = cyclic_group(4)
    target = c4_gaussian_mixture(3.0, (1.0, 0.2))
    kern = orbit_sum_kernel(group, 0.2)
    cfg = SvgdConfig(step_size=0.02, max_steps=1, kernel=kern)
    if step_fn is None:
        step_fn = lambda x: svgd_step(ParticleEnsemble(x), target, cfg).particles
    dev = equivariance_report(step_fn, group, trials, n_particles=20, rng=Rng(seed))
    results = [_result("prop1_equivariance_scalar", dev, 1e-10)]

    mk = MatrixKernel(rbf_kernel(0.2), group)
    mcfg = SvgdConfig(step_size=0.02, max_steps=1, kernel=mk)
    if matrix_step_fn is None:
        matrix_step_fn = lambda x: svgd_step_matrix(ParticleEnsemble(x), target, mcfg).particles
    mdev = equivariance_report(matrix_step_fn, group, trials, n_particles=20, rng=Rng(seed))
    results.append(_result("prop1_equivariance_matrix", mdev, 1e-10))

    # finite-ensemble contrast: an invariant kernel exerts identical forces on
    # a whole orbit, a plain RBF does not
    inv_dev = orbit_field_report(target, cfg, group, trials, rng=Rng(seed))
    results.append(_result("orbit_field_invariant_kernel", inv_dev, 1e-10))
    vcfg = SvgdConfig(step_size=0.02, max_steps=1, kernel=rbf_kernel(0.2))
    van_dev = orbit_field_report(target, vcfg, group, trials, rng=Rng(seed))
    results.append(_result("orbit_field_plain_rbf_counterexample", van_dev, 1e-3, comparison=">="))
    return results


def check_identity_reduction(seeds: int = 10, steps: int = 100):
    target = c4_gaussian_mixture(3.0, (1.0, 0.2))
    kern_vanilla = rbf_kernel(0.2)
    kern_trivial = orbit_sum_kernel(cyclic_group(1), 0.2)
    worst = 0.0
    for s in range(seeds):
        x = 3.0 * sample_normal_matrix(Rng(100 + s), 20, 2)
        a = ParticleEnsemble(x.copy())
        b = ParticleEnsemble(x.copy())
        cfg_a = SvgdConfig(step_size=0.02, max_steps=1, kernel=kern_vanilla)
        cfg_b = SvgdConfig(step_size=0.02, max_steps=1, kernel=kern_trivial)
        for _ in range(steps):
            a = svgd_step(a, target, cfg_a)
            b = svgd_step(b, target, cfg_b)
        worst = max(worst, float(np.abs(a.particles - b.particles).max()))
    return [_result("identity_group_reduction", worst, 1e-12)]


def _kernel_zoo():
    # bandwidths sized to the point scale below so kernel values stay O(1)
    # and finite differences are well conditioned
    return {
        "rbf": (rbf_kernel(2.0), 2),
        "orbit_c4": (orbit_sum_kernel(cyclic_group(4), 2.0), 2),
        "orbit_c8": (orbit_sum_kernel(cyclic_group(8), 2.0), 2),
        "fact_so2": (factorized_kernel(SO2, 2.0), 2),
        "fact_so3": (factorized_kernel(SO3, 2.0), 3),
        "fact_dw4": (feature_kernel(PairDistanceMap(4, 2), 8.0), 8),
        "mc_so2": (mc_invariant_kernel(SO2, 2.0, 16, 7), 2),
    }


def check_gram_psd(n_points: int = 50, seed: int = 1):
    results = []
    for name, (kern, dim) in _kernel_zoo().items():
        pts = 5.0 * (2.0 * Rng(seed).split("gram", name).uniform(n_points * dim).reshape(n_points, dim) - 1.0)
        eigs = np.linalg.eigvalsh(gram_matrix(kern, pts))
        results.append(_result(f"gram_psd_{name}", -float(eigs.min()), 1e-8))
    return results


def check_kernel_gradients(pairs: int = 100, seed: int = 2):
    results = []
    for name, (kern, dim) in _kernel_zoo().items():
        rng = Rng(seed).split("kgrad", name)
        worst = 0.0
        for _ in range(pairs):
            x = 1.2 * sample_normal_matrix(rng, 1, dim)[0]
            y = 1.2 * sample_normal_matrix(rng, 1, dim)[0]
            analytic = kernel_grad_x(kern, x, y)
            numeric = _central_diff(lambda v: kernel_eval(kern, v, y), x)
            worst = max(worst, _rel_err(analytic, numeric))
        results.append(_result(f"kernel_grad_{name}", worst, 1e-5))
    group = cyclic_group(4)
    mk = MatrixKernel(rbf_kernel(2.0), group)
    rng = Rng(seed).split("mdiv")
    worst = 0.0
    for _ in range(pairs):
        x = 1.2 * sample_normal_matrix(rng, 1, 2)[0]
        y = 1.2 * sample_normal_matrix(rng, 1, 2)[0]
        analytic = matrix_kernel_div_x(mk, x, y)
        numeric = np.zeros(2)
        eps = 1e-6
        for i in range(2):
            for j in range(2):
                e = np.zeros(2)
                e[j] = eps
                numeric[i] += (
                    matrix_kernel_eval(mk, x + e, y)[i, j] - matrix_kernel_eval(mk, x - e, y)[i, j]
                ) / (2 * eps)
        worst = max(worst, _rel_err(analytic, numeric))
    results.append(_result("matrix_kernel_divergence", worst, 1e-5))
    return results


def check_autodiff(configs: int = 20, param_samples: int = 20, seed: int = 3):
    """Finite-difference audit of the two architectures used by the training
    experiments: input gradients in full, parameter gradients on sampled
    coordinates."""
    results = []
    cases = {
        "dw4_mlp": (EnergyMLP.initialize((8, 64, 64, 1), head="log1psq", seed=11), 8),
        "jem_mlp": (EnergyMLP.initialize((2, 32, 64, 64, 64, 32, 2), seed=12), 2),
        "dw4_featurized": (
            FeaturizedEnergy(EnergyMLP.initialize((6, 64, 64, 1), head="log1psq", seed=13), PairDistanceMap(4, 2)),
            8,
        ),
        "jem_symmetrized": (
            SymmetrizedEnergy(EnergyMLP.initialize((2, 32, 64, 64, 64, 32, 2), seed=14), cyclic_group(4)),
            2,
        ),
    }
    for name, (model, dim) in cases.items():
        rng = Rng(seed).split("ad", name)
        out_dim = model.out_dim
        worst = 0.0
        for c in range(configs):
            x = sample_normal_matrix(rng, 1, dim) * 2.0
            seed_vec = sample_normal_matrix(rng, 1, out_dim)
            runp = model.run(x)
            dx, dparams = runp.backward(seed_vec)

            def scalar(v):
                return float((model.run(v[None]).out * seed_vec).sum())

            numeric = _central_diff(scalar, x[0])
            worst = max(worst, _rel_err(dx[0], numeric))
            params = model.get_params()
            flat_sizes = np.array([p.size for p in params])
            total = int(flat_sizes.sum())
            picks = (rng.uniform(param_samples) * total).astype(int)
            for flat_idx in picks:
                arr_idx = int(np.searchsorted(np.cumsum(flat_sizes), flat_idx, side="right"))
                local = flat_idx - int(np.concatenate([[0], np.cumsum(flat_sizes)])[arr_idx])
                eps = 1e-6
                orig = params[arr_idx].ravel()[local]
                for sign in (+1, -1):
                    params[arr_idx].ravel()[local] = orig + sign * eps
                    model.set_params(params)
                    if sign > 0:
                        fp = float((model.run(x).out * seed_vec).sum())
                    else:
                        fm = float((model.run(x).out * seed_vec).sum())
                params[arr_idx].ravel()[local] = orig
                model.set_params(params)
                fd = (fp - fm) / (2 * eps)
                ad = float(dparams[arr_idx].ravel()[local])
                denom = max(abs(fd), 1e-6)
                worst = max(worst, abs(ad - fd) / denom)
        results.append(_result(f"autodiff_{name}", worst, 1e-5))
    return results


def check_stein_identity(n_samples: int = 10**6, seed: int = 4):
    anchors = [(0.0, 0.0), (1.0, -0.5), (-2.0, 1.5), (0.5, 2.0), (-1.0, -1.0)]
    worst = 0.0
    for i, x0 in enumerate(anchors):
        worst = max(worst, stein_identity_residual(np.array(x0), n_samples, Rng(seed).split("stein", i)))
    return [_result("stein_identity_4se", worst, 4.0)]


def check_density_scores(points: int = 100, seed: int = 5):
    targets = {
        "gaussian": gaussian([0.5, -1.0], [[1.0, 0.3], [0.3, 0.7]]),
        "c4_mixture": c4_gaussian_mixture(3.0, (1.0, 0.2)),
        "two_rings": concentric_rings([4.0, 8.0], 0.5, 2),
        "dw4": dw4_target(),
    }
    results = []
    for name, target in targets.items():
        rng = Rng(seed).split("score", name)
        worst = 0.0
        for _ in range(points):
            x = 3.0 * sample_normal_matrix(rng, 1, target.dim)[0]
            analytic = target.score_at(x)
            numeric = -_central_diff(lambda v: target.energy_at(v), x)
            worst = max(worst, _rel_err(analytic, numeric))
        results.append(_result(f"density_score_{name}", worst, 1e-5))
    return results


def run_all(step_fn=None, matrix_step_fn=None, quick: bool = False) -> list[PropertyResult]:
    trials = 10 if quick else 50
    stein_n = 10**5 if quick else 10**6
    results = []
    results += check_proposition1(step_fn=step_fn, matrix_step_fn=matrix_step_fn, trials=trials)
    results += check_identity_reduction(seeds=3 if quick else 10)
    results += check_gram_psd()
    results += check_kernel_gradients(pairs=25 if quick else 100)
    results += check_autodiff(configs=5 if quick else 20)
    results += check_stein_identity(n_samples=stein_n)
    results += check_density_scores(points=25 if quick else 100)
    return results


def summary_json(results: list[PropertyResult]) -> str:
    payload = {
        "all_passed": all(r.passed for r in results),
        "properties": {
            r.name: {
                "passed": r.passed,
                "max_deviation": r.max_deviation,
                "threshold": r.threshold,
                "comparison": r.comparison,
            }
            for r in results
        },
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
