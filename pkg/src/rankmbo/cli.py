"""Command-line entry point.

Subcommands mirror the pipeline stages (gen-data, train, search, diagnose),
plus run (all stages), sweep (grid of runs), and compare (join manifests).
Exit codes: 0 ok, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ValidationError, apply_profile, load_config, reseed
from .harness import compare, run, save_compare_rows, sweep
from .objectives import save_loss_trace
from .search import save_search_result
from .surrogate import load_model, save_model
from .tasks import load_dataset, save_dataset

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankmbo",
        description="Offline model-based optimization with ranking surrogates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the base seed")
        p.add_argument(
            "--profile", choices=("desk", "paper"), default=None, help="scale profile"
        )
        p.add_argument("--threads", type=int, default=1, help="sweep worker count")

    for name in ("gen-data", "train", "search", "diagnose", "run"):
        add_common(sub.add_parser(name))
    p = sub.add_parser("sweep")
    add_common(p)
    p.add_argument(
        "--set",
        dest="grid",
        action="append",
        default=[],
        metavar="PATH=V1,V2",
        help="grid axis, e.g. train.intra_ratio=0.0,0.1 (repeatable)",
    )
    p.add_argument("--seeds", default="0", help="comma-separated base seeds")
    p = sub.add_parser("compare")
    p.add_argument("run_dirs", nargs="+", help="run directories with manifests")
    p.add_argument("--out", required=True, help="comparison CSV path")
    return parser


def _load(args):
    cfg = load_config(args.config)
    apply_profile(cfg, args.profile)
    if args.seed is not None:
        reseed(cfg, args.seed)
    return cfg


def _error_json(exc: Exception, stage: str) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc), "stage": stage}
    if isinstance(exc, ValidationError):
        payload["field"] = exc.field
    return json.dumps(payload)


def _cmd_gen_data(args) -> int:
    from .harness import build_dataset

    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _, dataset = build_dataset(cfg)
    save_dataset(dataset, out / "dataset.csv", out / "dataset.json")
    print(f"wrote {out / 'dataset.csv'} ({len(dataset)} points)")
    return EXIT_OK


def _cmd_train(args) -> int:
    from .harness import train_model

    cfg = _load(args)
    out = Path(args.out)
    dataset = load_dataset(out / "dataset.csv", out / "dataset.json")
    model, trace = train_model(cfg, dataset)
    save_model(model, out / "model.json")
    save_loss_trace(trace, out / "loss_trace.csv")
    print(f"trained {cfg.train.objective} surrogate; final loss {trace[-1]:.6g}")
    return EXIT_OK


def _cmd_search(args) -> int:
    from .harness import run_search

    cfg = _load(args)
    out = Path(args.out)
    dataset = load_dataset(out / "dataset.csv", out / "dataset.json")
    model = load_model(out / "model.json")
    result = run_search(cfg, model, dataset)
    save_search_result(result, out / "search.csv", out / "search.json")
    print(f"best true {result.best_true:.6g}, normalized {result.best_normalized:.4f}")
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    from .diagnostics import save_bound_reports, save_radius_rows, save_report_summary
    from .harness import run_diagnostics

    cfg = _load(args)
    out = Path(args.out)
    dataset = load_dataset(out / "dataset.csv", out / "dataset.json")
    model = load_model(out / "model.json")
    report, audits = run_diagnostics(cfg, model, dataset)
    save_radius_rows(report.rows, out / "diagnostics.csv")
    save_report_summary(report, out / "diagnostics.json")
    for name, reports in audits.items():
        save_bound_reports(reports, out / f"audit_{name}.csv")
    print(f"overall ranking error {report.overall_error:.4f}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load(args)
    manifest = run(cfg, args.out, profile=args.profile, threads=args.threads)
    print(
        f"run complete: best_normalized={manifest['search']['best_normalized']:.4f} "
        f"overall_rank_error={manifest['diagnostics']['overall_error']:.4f}"
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    grid = {}
    for axis in args.grid:
        if "=" not in axis:
            raise ValidationError(axis, "expected PATH=V1,V2,...")
        path, values = axis.split("=", 1)
        grid[path.strip()] = [v.strip() for v in values.split(",") if v.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    rows = sweep(cfg, grid, seeds, args.out, threads=args.threads)
    print(f"sweep complete: {len(rows)} cells x {len(seeds)} seeds")
    return EXIT_OK


def _cmd_compare(args) -> int:
    rows = compare(args.run_dirs)
    save_compare_rows(rows, args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "search": _cmd_search,
    "diagnose": _cmd_diagnose,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    command = _COMMANDS[args.command]
    try:
        return command(args)
    except ValidationError as exc:
        print(_error_json(exc, args.command), file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(_error_json(exc, args.command), file=sys.stderr)
        out = getattr(args, "out", None)
        if out is not None and Path(out).is_dir():
            with open(Path(out) / "error.json", "w") as fh:
                fh.write(_error_json(exc, args.command) + "\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
