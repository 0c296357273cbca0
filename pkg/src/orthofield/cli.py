"""Command-line entry point: ``orthofield run|ledger|oracle|regress|report``.

Exit status: 0 when every row is PASS or CENSORED, 1 on a FAIL verdict or a
runtime error, 2 on a configuration or argument error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .bounds import BoundParams, ConstantLedger, build_ledger, corollary_constant, f_constant
from .config import SCHEMA, ConfigError, ExperimentConfig, load, loads
from .experiments import Check, finite_or_none, row_dicts, run_experiment, slug
from .parallel import THREADS_ENV, default_threads

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _overrides(args) -> dict[str, str]:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    for flag, key in (("seed", "experiment.seed"), ("trials", "budget.trials"), ("out", "experiment.output")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = str(value)
    return out


def _threads(args) -> int:
    return args.threads if getattr(args, "threads", None) else default_threads()


# ---------------------------------------------------------------------------
# artifacts


def write_artifacts(out_dir: Path, config: ExperimentConfig, checks: list[Check], ledger: ConstantLedger,
                    wall_clock: float, threads: int) -> dict:
    """Write report.json, one CSV per check and one SVG per charted check.

    Only this function writes files, after all workers have finished.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = []
    used = set()
    for check in checks:
        base = slug(check.name)
        stem, k = base, 1
        while stem in used:
            k += 1
            stem = f"{base}-{k}"
        used.add(stem)
        (out_dir / f"{stem}.csv").write_text(check.csv_text)
        entry = {"check": check.name, "csv": f"{stem}.csv"}
        if check.svg_text is not None:
            (out_dir / f"{stem}.svg").write_text(check.svg_text)
            entry["svg"] = f"{stem}.svg"
        artifacts.append(entry)
    (out_dir / "config.ini").write_text(config.dumps())
    rows = row_dicts(checks)
    for r in rows:
        for k in ("lhs", "rhs", "band"):
            r[k] = finite_or_none(r[k])
    counts = {v: sum(r["verdict"] == v for r in rows) for v in ("PASS", "FAIL", "CENSORED")}
    report = {
        "version": __version__,
        "config": config.to_dict(),
        "config_text": config.dumps(),
        "ledger": json.loads(ledger.to_json()),
        "rows": rows,
        "summary": counts,
        "artifacts": artifacts,
        "wall_clock_seconds": wall_clock,
        "threads": threads,
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def _print_summary(report: dict, stream=None) -> None:
    stream = stream or sys.stdout
    fails = [r for r in report["rows"] if r["verdict"] == "FAIL"]
    s = report["summary"]
    print(f"{report['config']['experiment']['kind']}: {s['PASS']} PASS, {s['FAIL']} FAIL, {s['CENSORED']} CENSORED", file=stream)
    for r in fails[:20]:
        print(f"  FAIL {r['name']}: lhs={r['lhs']!r} rhs={r['rhs']!r} band={r['band']!r}", file=stream)
    if len(fails) > 20:
        print(f"  ... {len(fails) - 20} more", file=stream)


def execute(config: ExperimentConfig, threads: int) -> int:
    start = time.perf_counter()
    checks, ledger = run_experiment(config, threads)
    wall = time.perf_counter() - start
    report = write_artifacts(Path(config["experiment.output"]), config, checks, ledger, wall, threads)
    _print_summary(report)
    print(f"artifacts in {config['experiment.output']} ({wall:.1f} s)")
    return EXIT_FAIL if report["summary"]["FAIL"] else EXIT_OK


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    config = load(args.config, _overrides(args))
    return execute(config, _threads(args))


def cmd_oracle(args) -> int:
    overrides = _overrides(args)
    overrides.setdefault("experiment.output", "oracle-results")
    config = loads("[experiment]\nkind = oracle\n", overrides)
    return execute(config, _threads(args))


def cmd_ledger(args) -> int:
    try:
        dims = [int(v) for v in args.dims.split(",")]
        params = [BoundParams(args.p, args.q, d, args.C) for d in dims]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ledger = build_ledger(params)
    for prm in params:
        corollary_constant(prm, ledger)
    if args.json:
        print(ledger.to_json())
        return EXIT_OK
    entries = json.loads(ledger.to_json())
    width = max(len(e["name"]) for e in entries)
    print(f"{'name':<{width}}  {'value':>14}  derivation")
    for e in entries:
        inputs = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in e["inputs"].items())
        print(f"{e['name']:<{width}}  {e['value']:>14.6g}  {e['formula']}" + (f"  [{inputs}]" if inputs else ""))
    for prm in params:
        print(f"f[p={prm.p:g},q={prm.q:g},d={prm.d}] = {f_constant(prm, ledger)!r}")
    return EXIT_OK


def cmd_regress(args) -> int:
    from .kernel_regression import KernelSpec, RegressionConfig, estimate, read_observations, write_estimates

    try:
        n, data = read_observations(args.data)
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"cannot read observations from {args.data}: {exc}") from None
    d = data.ndim
    kernel = KernelSpec.box() if args.kernel == "box" else KernelSpec.plateau(args.slope)
    try:
        if args.bandwidth is not None:
            config = RegressionConfig(n, d, args.bandwidth, kernel=kernel)
        else:
            config = RegressionConfig.power_law(n, d, args.bandwidth_exponent, kernel=kernel)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    values = estimate(config, data)
    out = args.out or "-"
    if out == "-":
        write_estimates(sys.stdout, config, values)
    else:
        write_estimates(out, config, values)
        print(f"wrote {values.size} estimates to {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.dir) / "report.json"
    try:
        report = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    print(f"orthofield {report['version']}, {report['wall_clock_seconds']:.1f} s, {report['threads']} thread(s)")
    _print_summary(report)
    if args.verbose:
        for r in report["rows"]:
            print(f"{r['verdict']:<8} {r['name']}: lhs={r['lhs']!r} rhs={r['rhs']!r} band={r['band']!r}")
    return EXIT_FAIL if report["summary"]["FAIL"] else EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override any configuration key")
    p.add_argument("--seed", type=int, help="shorthand for experiment.seed")
    p.add_argument("--trials", type=int, help="shorthand for budget.trials")
    p.add_argument("--out", help="shorthand for experiment.output")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {s}.{k}: {key.help}" for s, ks in SCHEMA.items() for k, key in ks.items())
    parser = _Parser(prog="orthofield", description=__doc__, epilog="configuration keys:\n" + keys,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"orthofield {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("config")
    _add_common(run)
    run.set_defaults(func=cmd_run)

    oracle = sub.add_parser("oracle", help="run the exact finite-space suites")
    _add_common(oracle)
    oracle.set_defaults(func=cmd_oracle)

    ledger = sub.add_parser("ledger", help="print the constant ledger")
    ledger.add_argument("--p", type=float, default=2.0)
    ledger.add_argument("--q", type=float, default=3.0)
    ledger.add_argument("--C", type=float, default=1.0, help="smoothness constant of the value space")
    ledger.add_argument("--dims", default="1,2,3")
    ledger.add_argument("--json", action="store_true")
    ledger.set_defaults(func=cmd_ledger)

    regress = sub.add_parser("regress", help="kernel regression estimates from a CSV of observations")
    regress.add_argument("--data", required=True)
    regress.add_argument("--bandwidth", type=float)
    regress.add_argument("--bandwidth-exponent", type=float, default=0.5)
    regress.add_argument("--kernel", choices=("box", "plateau"), default="box")
    regress.add_argument("--slope", type=float, default=0.0)
    regress.add_argument("--out", help="output CSV (default stdout)")
    regress.set_defaults(func=cmd_regress)

    report = sub.add_parser("report", help="summarize a finished run")
    report.add_argument("--dir", required=True)
    report.add_argument("--verbose", action="store_true")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"orthofield: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("orthofield: error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"orthofield: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure of a check
        print(f"orthofield: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
