"""Command-line harness.

Subcommands: sample, bench, train, bonds, verify. Exit codes: 0 success,
2 config error, 3 numerical divergence, 4 construction error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import configio, experiments, molgraph, presets
from . import verify as verify_mod
from .ebm import TrainingError
from .svgd import DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_CONSTRUCTION = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="experiment config file")
    parser.add_argument("--preset", help="bundled preset name")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker cap (results are thread-count independent)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--dump-preset", metavar="NAME", help="print a preset config and exit")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equistein", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("sample", "run a sampling experiment"),
        ("bench", "run a sample-efficiency sweep"),
        ("train", "train an energy or joint-energy model"),
        ("verify", "run the numerical property suite"),
    ):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        if name == "train":
            p.add_argument("--epochs", type=int, help="override the configured epoch count")
        if name == "verify":
            p.add_argument("--quick", action="store_true", help="reduced trial counts")
    bonds = sub.add_parser("bonds", help="estimate bonds from XYZ coordinates")
    bonds.add_argument("input", type=Path, help="XYZ file")
    bonds.add_argument("--out", type=Path, default=Path("out"))
    bonds.add_argument("--threads", type=int, default=1)
    bonds.add_argument("--pair", action="append", default=[], help="element pair for the distance histogram, e.g. C,O")
    bonds.add_argument("--triplet", action="append", default=[], help="element triplet for the angle histogram, e.g. H,C,H")
    bonds.add_argument("--dist-bins", default="40,0.8,2.0", help="nbins,lo,hi for distances")
    bonds.add_argument("--angle-bins", default="36,0.0,180.0", help="nbins,lo,hi for angles (degrees)")
    return parser


def _load_config(args, expected_kind: str) -> dict:
    if args.dump_preset:
        try:
            print(configio.dump(presets.get_preset(args.dump_preset)), end="")
        except KeyError as err:
            raise configio.ConfigError(str(err)) from None
        raise SystemExit(EXIT_OK)
    if args.config and args.preset:
        raise configio.ConfigError("pass either --config or --preset, not both")
    if args.config:
        config = configio.parse(Path(args.config).read_text())
    elif args.preset:
        try:
            config = presets.get_preset(args.preset)
        except KeyError as err:
            raise configio.ConfigError(str(err)) from None
    else:
        raise configio.ConfigError("one of --config or --preset is required")
    if args.seed is not None:
        config.setdefault("experiment", {})["seed"] = args.seed
    declared = config.get("experiment", {}).get("kind")
    if declared != expected_kind:
        raise configio.ConfigError(f"config kind {declared!r} does not match the {expected_kind!r} command")
    return config


def _validate_threads(args) -> None:
    if getattr(args, "threads", 1) < 1:
        raise configio.ConfigError("--threads must be >= 1")


def _cmd_sample(args) -> int:
    config = _load_config(args, "sample")
    experiments.run_sample(config, args.out)
    print(f"sample: wrote particles.csv, projected.csv, trace.csv and SVGs to {args.out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    config = _load_config(args, "bench")
    traces = experiments.run_bench(config, args.out)
    print(f"bench: wrote comparison.csv and bench.svg to {args.out} ({len(traces)} variants)")
    return EXIT_OK


def _cmd_train(args) -> int:
    config = _load_config(args, "train")
    experiments.run_train(config, args.out, epochs_override=args.epochs)
    print(f"train: wrote checkpoint.bin, trace.csv and sample artifacts to {args.out}")
    return EXIT_OK


def _parse_bins(spec: str) -> np.ndarray:
    try:
        n, lo, hi = spec.split(",")
        return np.linspace(float(lo), float(hi), int(n) + 1)
    except ValueError:
        raise configio.ConfigError(f"bad bins spec {spec!r}; expected nbins,lo,hi") from None


def _auto_pairs(graphs, top: int = 2) -> list[tuple[str, str]]:
    counts: dict[frozenset, int] = {}
    for g in graphs:
        for i, j, _ in g.bonds():
            si, sj = g.frame.symbols[i], g.frame.symbols[j]
            if si == "H" or sj == "H":
                continue
            counts[frozenset([si, sj])] = counts.get(frozenset([si, sj]), 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], sorted(kv[0])))
    out = []
    for key, _ in ranked[:top]:
        syms = sorted(key)
        out.append((syms[0], syms[-1]))
    return out


def _cmd_bonds(args) -> int:
    _validate_threads(args)
    try:
        frames = molgraph.read_xyz(args.input)
    except (OSError, ValueError) as err:
        print(f"bonds: cannot read {args.input}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graphs = []
    for idx, frame in enumerate(frames):
        try:
            graph = molgraph.perceive_bonds(frame)
        except molgraph.ConstructionError as err:
            print(f"bonds: frame {idx}: {err}", file=sys.stderr)
            return EXIT_CONSTRUCTION
        graphs.append(graph)
        (out / f"bonds_{idx:04d}.txt").write_text(molgraph.format_bonds(graph))
    pairs = [tuple(p.split(",")) for p in args.pair] or _auto_pairs(graphs)
    dist_edges = _parse_bins(args.dist_bins)
    for pair in pairs:
        if len(pair) != 2:
            print(f"bonds: bad pair {pair}", file=sys.stderr)
            return EXIT_CONFIG
        counts = molgraph.pair_distance_histogram(graphs, pair, dist_edges)
        name = f"hist_dist_{pair[0]}{pair[1]}.csv"
        experiments.write_csv(
            out / name,
            ["bin_lo", "bin_hi", "count"],
            zip(dist_edges[:-1], dist_edges[1:], counts),
        )
    angle_edges = _parse_bins(args.angle_bins)
    for trip in [tuple(t.split(",")) for t in args.triplet]:
        if len(trip) != 3:
            print(f"bonds: bad triplet {trip}", file=sys.stderr)
            return EXIT_CONFIG
        counts = molgraph.triplet_angle_histogram(graphs, trip, angle_edges)
        name = f"hist_angle_{''.join(trip)}.csv"
        experiments.write_csv(
            out / name,
            ["bin_lo", "bin_hi", "count"],
            zip(angle_edges[:-1], angle_edges[1:], counts),
        )
    print(f"bonds: processed {len(frames)} frame(s) into {out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    _validate_threads(args)
    results = verify_mod.run_all(quick=args.quick)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(verify_mod.summary_json(results))
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: deviation {r.max_deviation:.3e} (threshold {r.comparison} {r.threshold:g})")
    if all(r.passed for r in results):
        print("verify: all properties hold")
        return EXIT_OK
    print("verify: FAILURES detected", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "sample": _cmd_sample,
        "bench": _cmd_bench,
        "train": _cmd_train,
        "bonds": _cmd_bonds,
        "verify": _cmd_verify,
    }
    try:
        _validate_threads(args)
        return handlers[args.command](args)
    except SystemExit as ex:
        return int(ex.code or 0)
    except configio.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, TrainingError) as err:
        print(f"numerical divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except molgraph.ConstructionError as err:
        print(f"construction error: {err}", file=sys.stderr)
        return EXIT_CONSTRUCTION


if __name__ == "__main__":
    sys.exit(main())
