"""Bundled experiment configurations.

Each preset is a plain sectioned config (see configio) so it can be dumped,
diffed, edited, and fed back through --config.
"""
from __future__ import annotations

SAMPLE_PRESETS = {
    # four rotated Gaussians at radius 3, orbit-sum kernel sampler
    "c4-gaussians": {
        "experiment": {"kind": "sample", "seed": 0},
        "target": {"kind": "c4_gaussians", "radius": 3.0, "cov": [1.0, 0.2]},
        "init": {"kind": "normal", "cov": [2.0, 2.0], "particles": 50},
        "kernel": {"kind": "orbit_sum", "bandwidth": 0.2, "group": "c4"},
        "svgd": {"step_size": 0.02, "max_steps": 25000, "convergence_tol": 0.0},
    },
    # two concentric circles, radius-factorized kernel sampler
    "two-circles": {
        "experiment": {"kind": "sample", "seed": 0},
        "target": {"kind": "rings", "radii": [4.0, 8.0], "width_var": 0.5, "dim": 2},
        "init": {"kind": "uniform_box", "lo": -8.0, "hi": 8.0, "particles": 50},
        "kernel": {"kind": "factorized", "bandwidth": 0.005, "group": "so2"},
        "svgd": {"step_size": 0.02, "max_steps": 25000, "convergence_tol": 0.0},
    },
    # two concentric spheres, 100 samples
    "two-spheres": {
        "experiment": {"kind": "sample", "seed": 0},
        "target": {"kind": "rings", "radii": [4.0, 9.0], "width_var": 0.3, "dim": 3},
        "init": {"kind": "uniform_box", "lo": -8.0, "hi": 8.0, "particles": 100},
        "kernel": {"kind": "factorized", "bandwidth": 0.001, "group": "so3"},
        "svgd": {"step_size": 0.02, "max_steps": 25000, "convergence_tol": 0.0},
    },
}

BENCH_PRESETS = {
    # sample-efficiency sweep on the two circles: equivariant sampler vs the
    # plain kernel at 1x/4x/32x particles
    "bench-circles": {
        "experiment": {"kind": "bench", "seed": 0},
        "target": {"kind": "rings", "radii": [4.0, 8.0], "width_var": 0.5, "dim": 2},
        "init": {"kind": "uniform_box", "lo": -8.0, "hi": 8.0, "particles": 100},
        "svgd": {"step_size": 0.02, "max_steps": 5000, "convergence_tol": 0.0},
        "bench": {
            "names": ["esvgd-1x", "vanilla-1x", "vanilla-4x", "vanilla-32x"],
            "kernels": ["factorized", "rbf", "rbf", "rbf"],
            "groups": ["so2", "", "", ""],
            "bandwidths": [0.005, 0.005, 0.005, 0.005],
            "multipliers": [1, 1, 4, 32],
        },
    },
}

TRAIN_PRESETS = {
    # four-particle double-well: invariant-featurized energy net trained with
    # the pair-distance-factorized sampler
    "dw4": {
        "experiment": {"kind": "train", "seed": 0},
        "dataset": {"kind": "dw4_metastable", "copies_per_state": 200, "noise_std": 0.05},
        "model": {
            "kind": "featurized_mlp",
            "layer_dims": [6, 64, 64, 1],
            "head": "log1psq",
            "init_seed": 0,
        },
        "kernel": {"kind": "pair_distances", "bandwidth": 0.001},
        "svgd": {"step_size": 0.1, "max_steps": 5000, "convergence_tol": 0.0001},
        "train": {
            "epochs": 50,
            "batch_size": 64,
            "lr": [[0, 0.01]],
            "sl_kind": "none",
            "sl_weight": 0.0,
            "reset_prob": 0.1,
            "reset_source": "uniform_box",
            "reset_lo": -5.0,
            "reset_hi": 5.0,
            "dataset_repulsors": True,
        },
    },
    # two-class mixture of rotated Gaussians at radii 7 and 15; group-averaged
    # six-layer classifier trained as a joint energy model
    "jem-c4": {
        "experiment": {"kind": "train", "seed": 0},
        "dataset": {"kind": "two_class_c4", "inner_radius": 7.0, "outer_radius": 15.0, "size": 128},
        "model": {
            "kind": "symmetrized_mlp",
            "layer_dims": [2, 32, 64, 64, 64, 32, 2],
            "head": "identity",
            "group": "c4",
            "init_seed": 0,
        },
        "kernel": {"kind": "orbit_sum", "bandwidth": 0.1, "group": "c4"},
        "svgd": {"step_size": 0.9, "max_steps": 10000, "convergence_tol": 0.0001},
        "train": {
            "epochs": 500,
            "batch_size": 32,
            "lr": [[0, 0.001]],
            "sl_kind": "cross_entropy",
            "sl_weight": 1.0,
            "reset_prob": 0.05,
            "reset_source": "dataset",
            "dataset_repulsors": True,
        },
    },
    # two-class concentric circles with an MSE supervision term and stepwise
    # learning-rate / sampler step-size schedules
    "jem-circles": {
        "experiment": {"kind": "train", "seed": 0},
        "dataset": {
            "kind": "two_class_rings",
            "inner_radius": 3.0,
            "outer_radius": 10.0,
            "width_var": 0.5,
            "size": 128,
        },
        "model": {
            "kind": "radial_mlp",
            "layer_dims": [1, 32, 64, 64, 64, 32, 2],
            "head": "identity",
            "init_seed": 0,
        },
        "kernel": {"kind": "factorized", "bandwidth": 0.05, "group": "so2"},
        "svgd": {"step_size": 0.9, "max_steps": 10000, "convergence_tol": 0.0001},
        "train": {
            "epochs": 500,
            "batch_size": 32,
            "lr": [[0, 0.001], [150, 0.0005], [400, 0.0001]],
            "step_size_schedule": [[250, 0.5], [400, 0.1]],
            "sl_kind": "mse",
            "sl_weight": 0.5,
            "reset_prob": 0.05,
            "reset_source": "dataset",
            "dataset_repulsors": True,
        },
    },
}

ALL_PRESETS = {**SAMPLE_PRESETS, **BENCH_PRESETS, **TRAIN_PRESETS}


def get_preset(name: str) -> dict:
    if name not in ALL_PRESETS:
        known = ", ".join(sorted(ALL_PRESETS))
        raise KeyError(f"unknown preset {name!r} (have: {known})")
    # deep-copy so callers can mutate
    import copy

    return copy.deepcopy(ALL_PRESETS[name])
