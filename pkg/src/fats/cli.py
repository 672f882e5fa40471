"""Command-line front end: ``run``, ``compare`` and ``report``.

Exit status: 0 on success, 1 for usage, config or input errors, 2 for
failures while running.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

from fats.bandit import Variant
from fats.casebase import dumps_casebase
from fats.config import MAX_SEED, Config, ConfigError, load_config
from fats.simulator import ExperimentResult, MetricsRow, run_experiment

log = logging.getLogger("fats")

METRICS_HEADER = ("arm", "day", "avg_precision", "avg_time_spent")
SUMMARY_HEADER = ("algorithm", "AP", "ATSD")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return value


def _variant(text: str) -> Variant:
    try:
        return Variant.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fats", description="Freshness-aware Thompson sampling experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--seed", type=_seed, help="override the config seed")
        p.add_argument("--out", type=Path, help="output directory")

    run = sub.add_parser("run", help="run one arm and snapshot its case bases")
    common(run)
    run.add_argument("--variant", type=_variant, required=True, help="ts | fats0 | fats05 | fats1 | fats")

    compare = sub.add_parser("compare", help="run every arm of the plan")
    common(compare)

    report = sub.add_parser("report", help="turn a metrics CSV into per-arm series and a summary")
    report.add_argument("metrics", type=Path, help="metrics CSV written by run or compare")
    report.add_argument("--out", type=Path, help="output directory (default: next to the input)")
    return parser


def metrics_csv(rows: Iterable[MetricsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for r in rows:
        writer.writerow([r.arm, r.day, f"{r.average_precision:.6f}", f"{r.average_time_spent:.6f}"])
    return buf.getvalue()


def _label(arm: str) -> str:
    try:
        return Variant.parse(arm).label
    except ValueError:
        return arm


def summarize(rows: Sequence[MetricsRow]) -> list[tuple[str, float, float]]:
    """Mean AP and ATSD per arm over all days, in first-appearance order."""
    by_arm: dict[str, list[MetricsRow]] = defaultdict(list)
    for r in rows:
        by_arm[r.arm].append(r)
    return [
        (
            _label(arm),
            math.fsum(r.average_precision for r in rs) / len(rs),
            math.fsum(r.average_time_spent for r in rs) / len(rs),
        )
        for arm, rs in by_arm.items()
    ]


def summary_csv(summary: Sequence[tuple[str, float, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for name, ap, atsd in summary:
        writer.writerow([name, f"{ap:.4f}", f"{atsd:.4f}"])
    return buf.getvalue()


def summary_table(summary: Sequence[tuple[str, float, float]]) -> str:
    width = max([len(SUMMARY_HEADER[0])] + [len(name) for name, _, _ in summary])
    lines = [f"{SUMMARY_HEADER[0]:<{width}}  {SUMMARY_HEADER[1]:>6}  {SUMMARY_HEADER[2]:>6}"]
    lines += [f"{name:<{width}}  {ap:6.4f}  {atsd:6.4f}" for name, ap, atsd in summary]
    return "\n".join(lines) + "\n"


def sessions_jsonl(result: ExperimentResult) -> str:
    return "".join(json.dumps(s.to_record(), separators=(",", ":")) + "\n" for s in result.sessions)


def _write(out: Path, files: dict[str, str]) -> None:
    for name, text in files.items():
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def cmd_run(cfg: Config, variant: Variant) -> ExperimentResult:
    cfg = cfg.with_arms((variant,))
    result = run_experiment(cfg.plan, cfg.model(), cfg.ontologies, cfg.risk_model, keep_casebases=True)
    files = {"metrics.csv": metrics_csv(result.rows), "sessions.jsonl": sessions_jsonl(result)}
    for (_, user), cb in sorted(result.casebases.items()):
        files[f"casebases/user_{user:03d}.json"] = dumps_casebase(cb)
    _write(cfg.out, files)
    return result


def cmd_compare(cfg: Config) -> tuple[ExperimentResult, list[tuple[str, float, float]]]:
    result = run_experiment(cfg.plan, cfg.model(), cfg.ontologies, cfg.risk_model)
    summary = summarize(result.rows)
    _write(
        cfg.out,
        {
            "metrics.csv": metrics_csv(result.rows),
            "sessions.jsonl": sessions_jsonl(result),
            "summary.csv": summary_csv(summary),
        },
    )
    return result, summary


def read_metrics(path: Path) -> list[MetricsRow]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read metrics file {path}: {exc.strerror}") from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != METRICS_HEADER:
        raise InputError(f"{path}: expected header {','.join(METRICS_HEADER)}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(METRICS_HEADER):
            raise InputError(f"{path}:{lineno}: expected {len(METRICS_HEADER)} fields, got {len(rec)}")
        try:
            row = MetricsRow(rec[0], int(rec[1]), float(rec[2]), float(rec[3]))
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        if not rec[0] or row.day < 1:
            raise InputError(f"{path}:{lineno}: arm must be nonempty and day >= 1")
        if not 0.0 <= row.average_precision <= 1.0 or not row.average_time_spent >= 0.0:
            raise InputError(f"{path}:{lineno}: metric values out of range")
        rows.append(row)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return rows


def series_csv(rows: Sequence[MetricsRow]) -> str:
    """Wide table: one ``day`` column plus one AP column per arm."""
    arms = list(dict.fromkeys(r.arm for r in rows))
    table: dict[int, dict[str, float]] = defaultdict(dict)
    for r in rows:
        if r.arm in table[r.day]:
            raise InputError(f"duplicate row for arm {r.arm!r} on day {r.day}")
        table[r.day][r.arm] = r.average_precision
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["day", *arms])
    for day in sorted(table):
        writer.writerow([day, *(f"{table[day][a]:.6f}" if a in table[day] else "" for a in arms)])
    return buf.getvalue()


def cmd_report(metrics: Path, out: Path | None = None) -> tuple[str, list[tuple[str, float, float]]]:
    rows = read_metrics(metrics)
    series = series_csv(rows)
    summary = summarize(rows)
    _write(out if out is not None else metrics.parent, {"series.csv": series, "report_summary.csv": summary_csv(summary)})
    return series, summary


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 1

    try:
        if args.command == "report":
            _, summary = cmd_report(args.metrics, args.out)
            sys.stdout.write(summary_table(summary))
            return 0

        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out"] = str(args.out)
        cfg = load_config(args.config, overrides)
        if args.command == "run":
            cmd_run(cfg, args.variant)
        else:
            _, summary = cmd_compare(cfg)
            sys.stdout.write(summary_table(summary))
        return 0
    except (ConfigError, InputError) as exc:
        print(f"fats: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"fats: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
