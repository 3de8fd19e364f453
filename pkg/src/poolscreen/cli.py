"""Command-line front end.

Subcommands: ``run`` (one config), ``sweep`` (prevalence sweep),
``validate-table`` (bundled benchmark validation), ``decode`` (double-pool
decode from an exported log), ``profile`` (profile file round-trip check).

Exit codes: 0 success, 1 validation failure, 2 config/usage error.  Output
for a fixed (config, seed) is byte-identical across runs: reports carry no
timestamps or environment state.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from . import harness
from .errors import ConfigError, ProfileError
from .oracle import load_profile, save_profile
from .strategies import decode_double_pool

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poolscreen",
        description="Simulate pooled screening schedules and price them in MACs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("--config", required=True, help="bundled config name or JSON path")
    run.add_argument("--seed", required=True, type=int, help="base seed (no hidden entropy)")
    run.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override a config key")
    run.add_argument("--jobs", type=int, default=1, help="parallel trials")
    run.add_argument("--out", help="write the report to this path")
    run.add_argument("--format", choices=("json", "csv"), default="json")

    sweep = sub.add_parser("sweep", help="run a config across prevalences")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--seed", required=True, type=int)
    sweep.add_argument("--prevalences", required=True,
                       help="comma-separated prevalence list, e.g. 0.0005,0.001,0.01")
    sweep.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--out")
    sweep.add_argument("--format", choices=("json", "csv"), default="json")

    table = sub.add_parser("validate-table", help="validate the bundled reference benchmark")
    table.add_argument("--seed", type=int, default=0)
    table.add_argument("--trials", type=int, default=20)
    table.add_argument("--jobs", type=int, default=1)
    table.add_argument("--no-simulation", action="store_true",
                       help="identity checks only (fast, fully deterministic)")
    table.add_argument("--out")
    table.add_argument("--format", choices=("json", "csv"), default="json")

    decode = sub.add_parser("decode", help="decode a double-pool run from an exported log")
    decode.add_argument("--log", required=True, help="JSONL test log")
    decode.add_argument("--out")

    profile = sub.add_parser("profile", help="validate and round-trip a profile file")
    profile.add_argument("--check", required=True, help="oracle profile JSON path")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _cmd_run(args) -> int:
    config = harness.load_config_with_overrides(args.config, args.overrides)
    report = harness.run_experiment(config, args.seed, args.jobs)
    text = (harness.run_report_csv(report) if args.format == "csv"
            else _json(harness.run_report_dict(report)))
    _emit(text, args.out)
    tests, tests_err = report.aggregate["tests_total"]
    rel, _ = report.aggregate["relative_computation"]
    print(
        f"run {config.name or args.config} seed={args.seed} trials={config.trials}: "
        f"tests_total={tests:.1f}±{tests_err:.1f} relative={rel * 100:.2f}%",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = harness.load_config_with_overrides(args.config, args.overrides)
    try:
        prevalences = [float(p) for p in args.prevalences.split(",") if p]
    except ValueError as exc:
        raise ConfigError(f"--prevalences: {exc}") from exc
    if not prevalences:
        raise ConfigError("--prevalences: empty list")
    report = harness.sweep_prevalence(config, prevalences, args.seed, args.jobs)
    text = (harness.sweep_report_csv(report) if args.format == "csv"
            else _json(harness.sweep_report_dict(report)))
    _emit(text, args.out)
    worst = max(pt.aggregate["relative_computation"][0] for pt in report.points)
    print(
        f"sweep {config.name or args.config} seed={args.seed} points={len(prevalences)}: "
        f"max relative={worst * 100:.2f}%",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_validate_table(args) -> int:
    validation = harness.validate_table(
        trials=args.trials, base_seed=args.seed, jobs=args.jobs,
        include_simulation=not args.no_simulation,
    )
    text = (harness.table_report_csv(validation) if args.format == "csv"
            else _json(harness.table_report_dict(validation)))
    _emit(text, args.out)
    failed = [c for c in validation.checks if not c.passed]
    print(
        f"validate-table: {len(validation.checks) - len(failed)}/{len(validation.checks)} "
        f"checks passed", file=sys.stderr,
    )
    for check in failed:
        print(f"  FAIL {check.row}.{check.metric}: computed {check.computed} "
              f"vs expected {check.expected}", file=sys.stderr)
    return EXIT_OK if validation.passed else EXIT_VALIDATION


def _cmd_decode(args) -> int:
    path = Path(args.log)
    if not path.exists():
        raise ConfigError(f"--log: no such file {path}")
    groups, outcomes = [], []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            event = json.loads(line)
            groups.append(tuple(event["members"]))
            outcomes.append(bool(event["positive"]))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad log record ({exc})") from exc
    try:
        flagged = decode_double_pool(groups, outcomes)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    _emit(_json({"schema": "poolscreen-decode-v1", "flagged": sorted(flagged)}), args.out)
    print(f"decode: {len(groups)} tests, {len(flagged)} samples flagged", file=sys.stderr)
    return EXIT_OK


def _cmd_profile(args) -> int:
    profile = load_profile(args.check)
    with tempfile.TemporaryDirectory() as tmp:
        copy_path = Path(tmp) / "roundtrip.json"
        save_profile(profile, copy_path)
        if load_profile(copy_path) != profile:
            print(f"profile: {args.check} does not round-trip", file=sys.stderr)
            return EXIT_VALIDATION
    sizes = ",".join(str(s) for s in profile.sizes)
    print(f"profile: {args.check} ok (design={profile.design or '-'} sizes={sizes})",
          file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "validate-table": _cmd_validate_table,
    "decode": _cmd_decode,
    "profile": _cmd_profile,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, matching our config-error code
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ProfileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
