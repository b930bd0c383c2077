"""Wiring from validated configs to runnable experiments and artifacts.

Everything here is deterministic for a fixed seed: randomness flows through
labeled Rng splits, CSV floats use shortest-round-trip formatting, and SVG
output is plain generated text, so reruns are byte-identical.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import presets, svgplot
from .autodiff import EnergyMLP, FeaturizedEnergy, SymmetrizedEnergy, save_checkpoint
from .configio import REQUIRED, ConfigError, validate
from .densities import (
    LabeledDataset,
    TargetDensity,
    c4_gaussian_mixture,
    concentric_rings,
    dw4_metastable_dataset,
    dw4_target,
    jem_two_class_c4,
    jem_two_class_rings,
)
from .ebm import (
    CdConfig,
    JemConditionalEnergy,
    JemMarginalEnergy,
    JemModel,
    LearnedEnergy,
    train_ebm,
    train_jem,
)
from .groups import SO2, SO3, PairDistanceMap, RadialMap, cyclic_group, trivial_group
from .kernels import (
    MatrixKernel,
    ScalarKernel,
    factorized_kernel,
    feature_kernel,
    mc_invariant_kernel,
    orbit_sum_kernel,
    rbf_kernel,
)
from .metrics import avg_loglik, ground_truth_avg_loglik, project_factorized
from .numerics import Rng, sample_normal_matrix, sample_uniform_box
from .svgd import ParticleEnsemble, PersistentBuffer, SvgdConfig, run

# ---------------------------------------------------------------------------
# schemas


_TARGET_SCHEMA = {
    "kind": ("str", REQUIRED),
    "radius": ("float", 3.0),
    "cov": ("list[float]", [1.0, 1.0]),
    "radii": ("list[float]", [4.0, 8.0]),
    "width_var": ("float", 0.5),
    "dim": ("int", 2),
}

_INIT_SCHEMA = {
    "kind": ("str", REQUIRED),
    "particles": ("int", REQUIRED),
    "mean": ("list[float]", [0.0, 0.0]),
    "cov": ("list[float]", [1.0, 1.0]),
    "lo": ("float", -8.0),
    "hi": ("float", 8.0),
}

_KERNEL_SCHEMA = {
    "kind": ("str", REQUIRED),
    "bandwidth": ("float", REQUIRED),
    "group": ("str", ""),
    "mc_samples": ("int", 64),
    "mc_seed": ("int", 0),
    "matrix": ("bool", False),
    "n_particles": ("int", 4),
    "space_dim": ("int", 2),
}

_SVGD_SCHEMA = {
    "step_size": ("float", REQUIRED),
    "max_steps": ("int", REQUIRED),
    "convergence_tol": ("float", 0.0),
}

SAMPLE_SCHEMA = {
    "experiment": {"kind": ("str", "sample"), "seed": ("int", 0)},
    "target": _TARGET_SCHEMA,
    "init": _INIT_SCHEMA,
    "kernel": _KERNEL_SCHEMA,
    "svgd": _SVGD_SCHEMA,
}

BENCH_SCHEMA = {
    "experiment": {"kind": ("str", "bench"), "seed": ("int", 0)},
    "target": _TARGET_SCHEMA,
    "init": _INIT_SCHEMA,
    "svgd": _SVGD_SCHEMA,
    "bench": {
        "names": ("list[str]", REQUIRED),
        "kernels": ("list[str]", REQUIRED),
        "groups": ("list[str]", REQUIRED),
        "bandwidths": ("list[float]", REQUIRED),
        "multipliers": ("list[int]", REQUIRED),
    },
}

TRAIN_SCHEMA = {
    "experiment": {"kind": ("str", "train"), "seed": ("int", 0)},
    "dataset": {
        "kind": ("str", REQUIRED),
        "copies_per_state": ("int", 200),
        "noise_std": ("float", 0.05),
        "inner_radius": ("float", 7.0),
        "outer_radius": ("float", 15.0),
        "width_var": ("float", 0.5),
        "size": ("int", 128),
    },
    "model": {
        "kind": ("str", REQUIRED),
        "layer_dims": ("list[int]", REQUIRED),
        "head": ("str", "identity"),
        "group": ("str", ""),
        "init_seed": ("int", 0),
    },
    "kernel": _KERNEL_SCHEMA,
    "svgd": _SVGD_SCHEMA,
    "train": {
        "epochs": ("int", REQUIRED),
        "batch_size": ("int", REQUIRED),
        "lr": ("schedule", REQUIRED),
        "step_size_schedule": ("schedule", []),
        "sl_kind": ("str", "none"),
        "sl_weight": ("float", 0.0),
        "reset_prob": ("float", 0.1),
        "reset_source": ("str", "dataset"),
        "reset_lo": ("float", -5.0),
        "reset_hi": ("float", 5.0),
        "dataset_repulsors": ("bool", False),
    },
}

_SCHEMAS = {"sample": SAMPLE_SCHEMA, "bench": BENCH_SCHEMA, "train": TRAIN_SCHEMA}


def validate_config(config: dict, kind: str | None = None) -> dict:
    declared = config.get("experiment", {}).get("kind")
    kind = kind or declared
    if kind not in _SCHEMAS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    if declared is not None and declared != kind:
        raise ConfigError(f"config declares kind {declared!r}, command expects {kind!r}")
    return validate(config, _SCHEMAS[kind], name=kind)


# ---------------------------------------------------------------------------
# builders


def build_target(section: dict) -> TargetDensity:
    kind = section["kind"]
    if kind == "c4_gaussians":
        return c4_gaussian_mixture(section["radius"], tuple(section["cov"]))
    if kind == "rings":
        return concentric_rings(section["radii"], section["width_var"], section["dim"])
    raise ConfigError(f"unknown target kind {kind!r}")


def _group_from_name(name: str):
    name = name.lower()
    if name.startswith("c") and name[1:].isdigit():
        return cyclic_group(int(name[1:]))
    if name == "trivial":
        return trivial_group(2)
    raise ConfigError(f"unknown finite group {name!r}")


def build_kernel(section: dict) -> ScalarKernel | MatrixKernel:
    kind = section["kind"]
    h = section["bandwidth"]
    if kind == "rbf":
        kern = rbf_kernel(h)
    elif kind == "orbit_sum":
        kern = orbit_sum_kernel(_group_from_name(section["group"]), h)
    elif kind == "factorized":
        cont = {"so2": SO2, "so3": SO3}.get(section["group"].lower())
        if cont is None:
            raise ConfigError("factorized kernel needs group so2 or so3")
        kern = factorized_kernel(cont, h)
    elif kind == "pair_distances":
        kern = feature_kernel(PairDistanceMap(section["n_particles"], section["space_dim"]), h)
    elif kind == "mc_invariant":
        cont = {"so2": SO2, "so3": SO3}.get(section["group"].lower())
        if cont is None:
            raise ConfigError("mc kernel needs group so2 or so3")
        kern = mc_invariant_kernel(cont, h, section["mc_samples"], section["mc_seed"])
    else:
        raise ConfigError(f"unknown kernel kind {kind!r}")
    if section["matrix"]:
        return MatrixKernel(kern, _group_from_name(section["group"]))
    return kern


def build_init(section: dict, rng: Rng, dim: int, particles: int | None = None) -> np.ndarray:
    n = particles if particles is not None else section["particles"]
    kind = section["kind"]
    if kind == "normal":
        cov = np.asarray(section["cov"], dtype=np.float64)
        mean = np.asarray(section["mean"], dtype=np.float64)
        if cov.shape[0] != dim:
            cov = np.full(dim, cov[0])
        if mean.shape[0] != dim:
            mean = np.full(dim, mean[0] if mean.size else 0.0)
        z = sample_normal_matrix(rng, n, dim)
        return mean + z * np.sqrt(cov)
    if kind == "uniform_box":
        rows = [sample_uniform_box(rng, dim, section["lo"], section["hi"]) for _ in range(n)]
        return np.stack(rows)
    raise ConfigError(f"unknown init kind {kind!r}")


# ---------------------------------------------------------------------------
# deterministic artifact helpers


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_trace_csv(path: Path, trace) -> None:
    rows = [
        (step + 1, norm, ll)
        for step, (norm, ll) in enumerate(zip(trace.update_norms, trace.avg_logliks))
    ]
    write_csv(path, ["step", "avg_update_norm", "avg_loglik"], rows)


# ---------------------------------------------------------------------------
# sample command


@dataclass
class SampleResult:
    particles: np.ndarray
    trace: object
    target: TargetDensity


def run_sample(config: dict, out_dir: Path) -> SampleResult:
    cfg = validate_config(config, "sample")
    seed = cfg["experiment"]["seed"]
    rng = Rng(seed)
    target = build_target(cfg["target"])
    kernel = build_kernel(cfg["kernel"])
    x0 = build_init(cfg["init"], rng.split("init"), target.dim)
    svgd_cfg = SvgdConfig(
        step_size=cfg["svgd"]["step_size"],
        max_steps=cfg["svgd"]["max_steps"],
        kernel=kernel,
        convergence_tol=cfg["svgd"]["convergence_tol"],
    )
    ens, trace = run(ParticleEnsemble(x0), target, svgd_cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pts = ens.particles
    write_csv(out_dir / "particles.csv", [f"x{i}" for i in range(target.dim)], pts)
    proj = project_factorized(pts, target.group_tag)
    write_csv(out_dir / "projected.csv", [f"p{i}" for i in range(proj.shape[1])], proj)
    _write_trace_csv(out_dir / "trace.csv", trace)
    _sample_svgs(out_dir, pts, proj, target)
    return SampleResult(pts, trace, target)


def _sample_svgs(out_dir: Path, pts: np.ndarray, proj: np.ndarray, target: TargetDensity) -> None:
    plane = pts[:, :2]
    (out_dir / "scatter_original.svg").write_text(
        svgplot.scatter_svg([("samples", plane)], title="samples", xlabel="x0", ylabel="x1")
    )
    if proj.shape[1] == 1:
        fact_pts = np.column_stack([proj[:, 0], np.zeros(len(proj))])
        fact_ylabel = ""
    else:
        fact_pts = proj
        fact_ylabel = "p1"
    (out_dir / "scatter_factorized.svg").write_text(
        svgplot.scatter_svg([("projected", fact_pts)], title="factorized space", xlabel="p0", ylabel=fact_ylabel)
    )
    if target.group is not None:
        series = []
        for k, r in enumerate(target.group.elements):
            series.append((f"rot {k}", plane @ r.T))
        (out_dir / "scatter_group_expanded.svg").write_text(
            svgplot.scatter_svg(series, title="group expanded", xlabel="x0", ylabel="x1")
        )


# ---------------------------------------------------------------------------
# bench command


def run_bench(config: dict, out_dir: Path) -> dict[str, list[float]]:
    cfg = validate_config(config, "bench")
    seed = cfg["experiment"]["seed"]
    target = build_target(cfg["target"])
    bench = cfg["bench"]
    n_variants = len(bench["names"])
    for key in ("kernels", "groups", "bandwidths", "multipliers"):
        if len(bench[key]) != n_variants:
            raise ConfigError(f"[bench] {key} must list one entry per variant")
    base_particles = cfg["init"]["particles"]
    gt = ground_truth_avg_loglik(target)
    traces: dict[str, list[float]] = {}
    for i, name in enumerate(bench["names"]):
        kern_cfg = {
            "kind": bench["kernels"][i],
            "bandwidth": bench["bandwidths"][i],
            "group": bench["groups"][i],
            "matrix": False,
            "mc_samples": 64,
            "mc_seed": 0,
            "n_particles": 4,
            "space_dim": 2,
        }
        kernel = build_kernel(kern_cfg)
        n = base_particles * bench["multipliers"][i]
        rng = Rng(seed)
        x0 = build_init(cfg["init"], rng.split("init", name), target.dim, particles=n)
        svgd_cfg = SvgdConfig(
            step_size=cfg["svgd"]["step_size"],
            max_steps=cfg["svgd"]["max_steps"],
            kernel=kernel,
            convergence_tol=cfg["svgd"]["convergence_tol"],
        )
        _, trace = run(ParticleEnsemble(x0), target, svgd_cfg)
        traces[name] = [ll for ll in trace.avg_logliks]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    depth = max(len(t) for t in traces.values())
    rows = []
    for step in range(depth):
        row = [step + 1] + [traces[n][step] if step < len(traces[n]) else None for n in bench["names"]]
        rows.append(row + [gt])
    write_csv(out_dir / "comparison.csv", ["step"] + list(bench["names"]) + ["ground_truth"], rows)
    series = [
        (name, np.arange(1, len(traces[name]) + 1), np.asarray(traces[name], dtype=np.float64))
        for name in bench["names"]
    ]
    series.append(("ground truth", np.array([1, depth]), np.array([gt, gt])))
    (out_dir / "bench.svg").write_text(
        svgplot.line_svg(series, title="average log-likelihood", xlabel="iteration", ylabel="avg loglik")
    )
    return traces


# ---------------------------------------------------------------------------
# train command


def build_training(config: dict, epochs_override: int | None = None):
    """Construct (model, data, cd_config, jem_problem_or_None, rng) from a
    validated train config."""
    cfg = validate_config(config, "train")
    seed = cfg["experiment"]["seed"]
    rng = Rng(seed)
    ds = cfg["dataset"]
    problem = None
    labels = None
    if ds["kind"] == "dw4_metastable":
        data = dw4_metastable_dataset(rng.split("dataset"), ds["copies_per_state"], ds["noise_std"])
    elif ds["kind"] == "two_class_c4":
        problem = jem_two_class_c4(ds["inner_radius"], ds["outer_radius"])
        labeled = problem.sample_dataset(rng.split("dataset"), ds["size"])
        data, labels = labeled.points, labeled.labels
    elif ds["kind"] == "two_class_rings":
        problem = jem_two_class_rings(ds["inner_radius"], ds["outer_radius"], ds["width_var"])
        labeled = problem.sample_dataset(rng.split("dataset"), ds["size"])
        data, labels = labeled.points, labeled.labels
    else:
        raise ConfigError(f"unknown dataset kind {ds['kind']!r}")

    m = cfg["model"]
    base = EnergyMLP.initialize(tuple(m["layer_dims"]), head=m["head"], seed=m["init_seed"])
    if m["kind"] == "mlp":
        model = base
    elif m["kind"] == "symmetrized_mlp":
        model = SymmetrizedEnergy(base, _group_from_name(m["group"]))
    elif m["kind"] == "featurized_mlp":
        fm = PairDistanceMap(cfg["kernel"]["n_particles"], cfg["kernel"]["space_dim"])
        model = FeaturizedEnergy(base, fm)
    elif m["kind"] == "radial_mlp":
        model = FeaturizedEnergy(base, RadialMap(data.shape[1]))
    else:
        raise ConfigError(f"unknown model kind {m['kind']!r}")

    tr = cfg["train"]
    if tr["reset_source"] == "dataset":
        pool = data.copy()

        def reset(rng_: Rng, k: int) -> np.ndarray:
            idx = rng_.integers(0, pool.shape[0], k)
            return pool[idx]

    elif tr["reset_source"] == "uniform_box":
        lo, hi, d = tr["reset_lo"], tr["reset_hi"], data.shape[1]

        def reset(rng_: Rng, k: int) -> np.ndarray:
            return np.stack([sample_uniform_box(rng_, d, lo, hi) for _ in range(k)])

    else:
        raise ConfigError(f"unknown reset source {tr['reset_source']!r}")

    buffer_init = reset(rng.split("buffer-init"), data.shape[0])
    buffer = PersistentBuffer(buffer_init, tr["reset_prob"], reset)
    svgd_cfg = SvgdConfig(
        step_size=cfg["svgd"]["step_size"],
        max_steps=cfg["svgd"]["max_steps"],
        kernel=build_kernel(cfg["kernel"]),
        convergence_tol=cfg["svgd"]["convergence_tol"],
    )
    epochs = tr["epochs"] if epochs_override is None else epochs_override
    cd_cfg = CdConfig(
        epochs=epochs,
        batch_size=tr["batch_size"],
        lr_schedule=tuple((e, v) for e, v in tr["lr"]),
        svgd=svgd_cfg,
        buffer=buffer,
        sl_weight=tr["sl_weight"],
        sl_kind=tr["sl_kind"],
        svgd_step_schedule=tuple((e, v) for e, v in tr["step_size_schedule"]),
        dataset_repulsors=tr["dataset_repulsors"],
    )
    return model, data, labels, cd_cfg, problem, rng


def run_train(config: dict, out_dir: Path, epochs_override: int | None = None):
    cfg = validate_config(config, "train")
    model, data, labels, cd_cfg, problem, rng = build_training(config, epochs_override)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    is_jem = labels is not None
    if is_jem:
        jem = JemModel(model, num_classes=int(labels.max()) + 1)
        trace = train_jem(jem, LabeledDataset(data, labels, jem.num_classes), cd_cfg, rng.split("train"))
    else:
        jem = None
        trace = train_ebm(model, data, cd_cfg, rng.split("train"))
    save_checkpoint(model, out_dir / "checkpoint.bin")
    write_csv(
        out_dir / "trace.csv",
        ["epoch", "ml_surrogate", "sl_loss", "accuracy"],
        zip(trace.epochs, trace.ml_surrogate, trace.sl_loss, trace.accuracy),
    )
    _post_training_samples(out_dir, model, jem, data, cd_cfg, rng)
    return model, trace


def _post_training_samples(out_dir: Path, model, jem, data, cd_cfg, rng: Rng) -> None:
    n = min(64, data.shape[0])
    idx = rng.split("sample-init").integers(0, data.shape[0], n)
    init = data[idx]
    if jem is None:
        energy = LearnedEnergy(model)
        samples = _generate(energy, init, cd_cfg)
        write_csv(out_dir / "samples.csv", [f"x{i}" for i in range(samples.shape[1])], samples)
        if samples.shape[1] == 2:
            (out_dir / "samples.svg").write_text(
                svgplot.scatter_svg([("model samples", samples)], title="model samples")
            )
        return
    samples = _generate(JemMarginalEnergy(jem), init, cd_cfg)
    write_csv(out_dir / "samples.csv", [f"x{i}" for i in range(samples.shape[1])], samples)
    series = [("joint", samples)]
    for label in range(jem.num_classes):
        cond = _generate(JemConditionalEnergy(jem, label), init, cd_cfg)
        write_csv(out_dir / f"samples_class{label}.csv", [f"x{i}" for i in range(cond.shape[1])], cond)
        series.append((f"class {label}", cond))
    if samples.shape[1] == 2:
        (out_dir / "samples.svg").write_text(
            svgplot.scatter_svg(series, title="joint and class-conditional samples")
        )


def _generate(energy, init: np.ndarray, cd_cfg: CdConfig) -> np.ndarray:
    ens, _ = run(ParticleEnsemble(init.copy()), energy, cd_cfg.svgd)
    return ens.particles
