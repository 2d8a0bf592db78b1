"""Command line interface.

Subcommands::

    nucheck check-weights <file>                 normality report per weight spec
    nucheck run <scenario> [--out-dir DIR]       run a scenario, write CSV + JSON
    nucheck report <json> [--format csv|md]      re-render a JSON report

Exit status: 0 success, 2 parse or configuration error, 3 numerical
evaluation error.  ``NUCHECK_THREADS`` caps the worker threads.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import NucheckError, ParseError
from .scenario import (
    EXIT_CONFIG,
    EXIT_NUMERIC,
    EXIT_OK,
    load_scenario,
    rows_to_csv,
    rows_to_markdown,
    run_scenario,
)
from .weights import check_normality, parse_weight

__all__ = ["main", "build_parser"]


def _fmt(x):
    return "-" if x is None else f"{x:.6g}"


def cmd_check_weights(args, out):
    try:
        with open(args.file, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {args.file}: {exc}") from exc
    specs = []
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            specs.append(parse_weight(line))
        except ParseError as exc:
            raise ParseError(str(exc), "weight", n) from exc
    out.write("spec\tverdict\tinf_ratio_I\tbeta\tk_II\tlimsup_II\tgamma\tcertified\n")
    for w in specs:
        r = check_normality(w)
        out.write("\t".join([
            w.spec(), r.verdict, _fmt(r.conditionI_inf), _fmt(r.beta_estimate),
            "-" if r.conditionII_k is None else str(r.conditionII_k),
            _fmt(r.conditionII_limsup), _fmt(r.gamma_estimate), str(r.certified),
        ]) + "\n")
    return EXIT_OK


def cmd_run(args, out):
    config = load_scenario(args.scenario)
    status, report = run_scenario(config, args.out_dir)
    if status == EXIT_OK:
        out.write(f"{config.id}: {len(report['results'])} task(s) completed\n")
    else:
        sys.stderr.write(f"error: {report['error']}\n")
    return status


def cmd_report(args, out):
    try:
        with open(args.json, encoding="utf-8") as fh:
            report = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read report {args.json}: {exc}") from exc
    if report.get("schema_version") != 1:
        raise ParseError(f"unsupported schema_version {report.get('schema_version')!r}")
    rows = [r for res in report.get("results", []) for r in res.get("rows", [])]
    out.write(rows_to_csv(rows) if args.format == "csv" else rows_to_markdown(rows))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="nucheck", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    cw = sub.add_parser("check-weights", help="classify weight specifications")
    cw.add_argument("file")
    cw.set_defaults(func=cmd_check_weights)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario")
    run.add_argument("--out-dir", default=".", help="directory for the CSV and JSON reports")
    run.set_defaults(func=cmd_run)
    rep = sub.add_parser("report", help="render a JSON report")
    rep.add_argument("json")
    rep.add_argument("--format", choices=("csv", "md"), default="csv")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args, out)
    except ParseError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except NucheckError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
