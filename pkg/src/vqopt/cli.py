"""Command-line interface for the benchmark harness.

Subcommands: run, sweep, surface, plot, list. Exit codes: 0 success,
2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import ContractViolation
from .harness import (
    ConfigError,
    HarnessError,
    RunConfig,
    emit_plot,
    problem_ids,
    rows_to_csv,
    run_single,
    run_sweep,
    scan_surface,
    summary_to_csv,
)
from .registry import optimizer_ids

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vqopt",
        description="Noise-robust optimizer benchmarks on simulated "
                    "variational quantum circuits.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")

    p_run = sub.add_parser("run", help="one optimization run")
    common(p_run)

    p_sweep = sub.add_parser("sweep", help="noise sweep with repeats")
    common(p_sweep)
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="worker threads for sweep cells")

    p_surface = sub.add_parser("surface", help="1D/2D objective surface scan")
    common(p_surface)
    p_surface.add_argument("--scan", required=True,
                           help="JSON list of {index, min, max} entries")
    p_surface.add_argument("--resolution", type=int, default=41)

    p_plot = sub.add_parser("plot", help="render harness CSVs as SVG")
    p_plot.add_argument("csv", nargs="+", help="input CSV files")
    p_plot.add_argument("--kind", choices=("sweep", "surface"),
                        default="sweep")
    p_plot.add_argument("--out", default=".", help="output directory")

    sub.add_parser("list", help="list registered problems and optimizers")
    return parser


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config)
    if args.seed is not None:
        raw = json.loads(Path(args.config).read_text())
        raw["seed"] = args.seed
        config = RunConfig.from_dict(raw)
    return config


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_run(args) -> int:
    config = _load_config(args)
    _, row = run_single(config)
    path = _out_dir(args) / "run.csv"
    path.write_text(rows_to_csv([row]))
    print(f"best_f={row.best_f:.10g} true_energy={row.true_energy:.10g} "
          f"evals_used={row.evals_used} termination={row.termination}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    result = run_sweep(config, jobs=args.jobs)
    out = _out_dir(args)
    sweep_path = out / "sweep.csv"
    sweep_path.write_text(rows_to_csv(result.rows))
    summary_path = out / "sweep_summary.csv"
    summary_path.write_text(summary_to_csv(result))
    print(f"wrote {sweep_path}")
    print(f"wrote {summary_path}")
    return EXIT_OK


def _cmd_surface(args) -> int:
    config = _load_config(args)
    try:
        scan = json.loads(args.scan)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad --scan value: {exc}") from exc
    csv_text = scan_surface(config, scan, args.resolution)
    path = _out_dir(args) / "surface.csv"
    path.write_text(csv_text)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    path = _out_dir(args) / "plot.svg"
    emit_plot(args.csv, path, kind=args.kind)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_list(_args) -> int:
    print("problems:")
    for name in problem_ids():
        print(f"  {name}")
    print("optimizers:")
    for name in optimizer_ids():
        print(f"  {name}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "surface": _cmd_surface,
    "plot": _cmd_plot,
    "list": _cmd_list,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ContractViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HarnessError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
