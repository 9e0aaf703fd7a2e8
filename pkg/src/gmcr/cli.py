"""Command-line interface: register, bench, and generate subcommands.

Exit codes: 0 on success, 1 on usage/config/parse errors, 2 when a
registration cannot produce an estimate.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DegenerateGeometryError,
    GmcrError,
    InconsistentCliqueError,
    InsufficientInputError,
    PlyError,
    RegistrationFailureError,
)
from .files import (
    RunConfig,
    dump_json,
    read_correspondences,
    read_run_config,
    read_suite,
    result_record,
    similarity_record,
    write_correspondences,
)
from .pipeline import GmcrConfig, gmcr_register
from .ply import write_ply
from .solvers import RansacConfig, ransac_register
from .synthbench import SyntheticConfig, generate_synthetic, run_benchmark

_REGISTRATION_ERRORS = (
    RegistrationFailureError,
    InsufficientInputError,
    DegenerateGeometryError,
    InconsistentCliqueError,
)


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _thread_count(value: str | None) -> int:
    if value is None:
        value = os.environ.get("GMCR_THREADS")
    if value is None:
        return os.cpu_count() or 1
    n = int(value)
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    return n


def _load_run_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig(gmcr=GmcrConfig(), ransac=RansacConfig(), synthetic=SyntheticConfig())
    return read_run_config(path)


def cmd_register(args) -> int:
    cfg = _load_run_config(args.config)
    gmcr_cfg = cfg.gmcr
    ransac_cfg = cfg.ransac
    if args.fixed_scale is not None:
        gmcr_cfg = replace(gmcr_cfg, scale_mode="fixed", fixed_scale=args.fixed_scale)
    if args.seed is not None:
        gmcr_cfg = replace(gmcr_cfg, seed=args.seed)
        ransac_cfg = replace(ransac_cfg, seed=args.seed)
    corrs = read_correspondences(args.correspondences, gmcr_cfg.beta_default)

    if args.method == "gmcr":
        result = gmcr_register(corrs, gmcr_cfg)
        record = result_record("gmcr", result, result.inlier_correspondences)
        if args.zero_timings:
            record["timings_ms"] = {k: 0.0 for k in record["timings_ms"]}
            for stage in record["stages"].values():
                stage["graph_ms"] = 0.0
                stage["clique_ms"] = 0.0
    else:
        model, inliers, rounds = ransac_register(corrs, ransac_cfg, gmcr_cfg.c)
        record = result_record("ransac", model, inliers, iterations=rounds)

    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            dump_json(record, fh)
    else:
        dump_json(record, sys.stdout)
    return 0


def cmd_bench(args) -> int:
    suite = read_suite(args.suite)
    runs = args.runs if args.runs is not None else suite.runs
    seed = args.seed if args.seed is not None else suite.seed
    run_benchmark(
        suite.cells,
        suite.methods,
        runs_per_cell=runs,
        out=args.out,
        base_seed=seed,
        success_threshold_m=suite.success_threshold_m,
        measure_time=not args.zero_timings,
    )
    return 0


def cmd_generate(args) -> int:
    cfg = _load_run_config(args.config)
    synth = cfg.synthetic
    if args.seed is not None:
        synth = replace(synth, seed=args.seed)
    instance = generate_synthetic(synth)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_ply(out_dir / "source.ply", instance.source)
    write_ply(out_dir / "target.ply", instance.target)
    write_correspondences(out_dir / "correspondences.jsonl", instance.correspondences)
    with open(out_dir / "truth.json", "w", encoding="ascii", newline="\n") as fh:
        dump_json(similarity_record(instance.truth), fh)
    with open(out_dir / "inlier_mask.json", "w", encoding="ascii", newline="\n") as fh:
        dump_json({"inlier_mask": [bool(v) for v in instance.inlier_mask]}, fh)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gmcr", description="Graph-based maximum consensus registration")
    sub = parser.add_subparsers(dest="command")

    p_reg = sub.add_parser("register", help="register a correspondence file")
    p_reg.add_argument("--correspondences", required=True, help="correspondence file (JSON Lines)")
    p_reg.add_argument("--config", default=None, help="run config JSON")
    p_reg.add_argument("--method", choices=("gmcr", "ransac"), default="gmcr")
    p_reg.add_argument("--fixed-scale", type=float, default=None, dest="fixed_scale",
                       help="skip scale estimation and use this scale")
    p_reg.add_argument("--out", default=None, help="result JSON path (default: stdout)")
    p_reg.add_argument("--seed", type=int, default=None)
    p_reg.add_argument("--threads", default=None)
    p_reg.add_argument("--zero-timings", action="store_true", dest="zero_timings",
                       help="report timings as 0 for byte-reproducible output")
    p_reg.set_defaults(func=cmd_register)

    p_bench = sub.add_parser("bench", help="run a benchmark suite")
    p_bench.add_argument("--suite", required=True, help="suite JSON (methods + cells)")
    p_bench.add_argument("--out", required=True, help="output CSV path")
    p_bench.add_argument("--runs", type=int, default=None)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--threads", default=None)
    p_bench.add_argument("--zero-timings", action="store_true", dest="zero_timings",
                         help="write runtime_ms as 0 for byte-reproducible CSV")
    p_bench.set_defaults(func=cmd_bench)

    p_gen = sub.add_parser("generate", help="generate a synthetic instance")
    p_gen.add_argument("--config", default=None, help="run config JSON (synthetic section)")
    p_gen.add_argument("--out-dir", required=True, dest="out_dir")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--threads", default=None)
    p_gen.set_defaults(func=cmd_generate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        _thread_count(getattr(args, "threads", None))  # validated; execution is single-threaded
        return args.func(args)
    except _REGISTRATION_ERRORS as e:
        print(f"gmcr: registration failure: {e}", file=sys.stderr)
        return 2
    except (ConfigError, PlyError, json.JSONDecodeError, ValueError) as e:
        print(f"gmcr: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"gmcr: i/o error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
