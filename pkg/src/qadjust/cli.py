"""qadjust command line.

    qadjust compare --labels pairs.txt --q 0.5,2 --format json
    qadjust compare --table t.txt --skip-smi
    qadjust moments --table t.txt --q 2 --method asymptotic
    qadjust oracle --table t.txt --q 2 --seed 7 --samples 20000
    qadjust experiment baseline-vary-r --config cfg.json --out rows.csv

Exit codes: 0 ok, 2 input error, 3 undefined measure, 4 bad configuration.
QADJUST_THREADS sets the default number of worker processes for experiments.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Optional, Sequence

from ._version import __version__
from .entropy import mutual_information_q
from .exceptions import ConfigError, InvalidTableError, UndefinedMeasureError, UnsupportedQError
from .experiments import EXPERIMENT_IDS, ExperimentConfig, run_experiment
from .moments import moment_report
from .oracle import ENUMERATION_CAP, enumerate_moments, monte_carlo_moments
from .partition import ParseError, from_counts, read_label_file, read_table_file
from .qparam import as_qparam
from .report import SMI_SIZE_LIMIT, compare

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_UNDEFINED = 3
EXIT_CONFIG = 4

THREADS_ENV = "QADJUST_THREADS"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _thread_default() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise CliError(EXIT_CONFIG, f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise CliError(EXIT_CONFIG, f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _parse_q_list(text: str) -> list:
    try:
        qs = [as_qparam(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"invalid --q: {exc}") from None
    if not qs:
        raise CliError(EXIT_CONFIG, "--q needs at least one order")
    return qs


def _parse_inline(text: str):
    rows = []
    for k, chunk in enumerate(text.split(";"), start=1):
        try:
            rows.append([int(tok) for tok in chunk.replace(",", " ").split()])
        except ValueError:
            raise ParseError(k, "non-integer entry in inline table") from None
    if len({len(r) for r in rows}) != 1:
        raise ParseError(0, "inline table rows differ in length")
    return from_counts(rows)


def _load_table(args):
    try:
        if args.labels is not None:
            return read_label_file(args.labels)
        if args.table is not None:
            return read_table_file(args.table)
        return _parse_inline(args.inline)
    except ParseError as exc:
        raise CliError(EXIT_INPUT, f"parse error: {exc}") from None
    except InvalidTableError as exc:
        raise CliError(EXIT_INPUT, f"invalid input: {exc}") from None
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read input: {exc}") from None


def _add_input(parser):
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--labels", metavar="PATH", help="label-pair file, one 'u v' per line")
    src.add_argument("--table", metavar="PATH", help="contingency table file, one row per line")
    src.add_argument("--inline", metavar="ROWS", help="table given inline, rows split by ';', e.g. '5,0;0,5'")


def _add_output(parser, formats=("json", "csv", "human"), default="json"):
    parser.add_argument("--format", choices=formats, default=default)
    parser.add_argument("--out", metavar="PATH", help="output file (default: standard output)")


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _rows_csv(rows: list, columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _rows_human(rows: list, columns: Sequence[str]) -> str:
    def fmt(v):
        if v is None:
            return "n/a"
        return format(v, ".6g") if isinstance(v, float) else str(v)

    text = [[str(c) for c in columns]] + [[fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(line[k]) for line in text) for k in range(len(columns))]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(line, widths)) for line in text) + "\n"


# subcommands ---------------------------------------------------------------

def cmd_compare(args) -> int:
    t = _load_table(args)
    qs = _parse_q_list(args.q)
    smi = not args.skip_smi
    if smi and t.total > SMI_SIZE_LIMIT and not args.force_smi:
        print(f"warning: N = {t.total} > {SMI_SIZE_LIMIT}; skipping SMI (its cost grows like N^3 "
              f"in the worst case). Pass --force-smi to compute it.", file=sys.stderr)
        smi = False
    measures = [m.strip() for m in args.measures.split(",")] if args.measures else None
    try:
        rep = compare(t, qs, smi=smi, measures=measures)
    except KeyError as exc:
        raise CliError(EXIT_CONFIG, str(exc.args[0])) from None
    text = {"json": lambda: rep.to_json() + "\n", "csv": rep.to_csv, "human": rep.to_human}[args.format]()
    _emit(text, args.out)
    return EXIT_OK


MOMENT_COLUMNS = ("q", "method", "e_sum_phi", "e2_sum_phi", "e_joint_entropy", "e_mi", "e_vi",
                  "var_joint_entropy", "var_mi", "var_vi")


def cmd_moments(args) -> int:
    t = _load_table(args)
    qs = _parse_q_list(args.q)
    if args.method == "mc" and args.seed is None:
        raise CliError(EXIT_CONFIG, "--method mc needs --seed")
    rows = []
    for qp in qs:
        try:
            rep = moment_report(t, qp, args.method, n_samples=args.samples, seed=args.seed,
                                second_moment=not args.skip_variance)
        except UnsupportedQError as exc:
            raise CliError(EXIT_CONFIG, f"{exc} (q = {qp.label})") from None
        rows.append(rep.to_dict())
    doc = {"table": t.tolist(), "method": args.method, "moments": rows}
    if args.format == "json":
        text = _dump_json(doc)
    else:
        extra = sorted({k for r in rows for k in r} - set(MOMENT_COLUMNS))
        columns = list(MOMENT_COLUMNS) + extra
        text = (_rows_csv if args.format == "csv" else _rows_human)(rows, columns)
    _emit(text, args.out)
    return EXIT_OK


ORACLE_COLUMNS = ("q", "method", "mean_mi", "var_mi", "n_outcomes_or_samples", "ci99_halfwidth", "seed")


def cmd_oracle(args) -> int:
    t = _load_table(args)
    qs = _parse_q_list(args.q)
    method = args.method
    if method == "auto":
        method = "enumeration" if t.total <= ENUMERATION_CAP else "mc"
    rows = []
    for qp in qs:
        stat = lambda tab, qp=qp: mutual_information_q(tab, qp)  # noqa: E731
        if method == "enumeration":
            try:
                om = enumerate_moments(t.row_marginals, t.col_marginals, stat)
            except ValueError as exc:
                raise CliError(EXIT_CONFIG, str(exc)) from None
        else:
            om = monte_carlo_moments(t.row_marginals, t.col_marginals, stat, args.samples, args.seed)
        rows.append({
            "q": qp.label,
            "method": om.method,
            "mean_mi": om.mean,
            "var_mi": om.variance,
            "n_outcomes_or_samples": om.n_outcomes_or_samples,
            "ci99_halfwidth": om.ci99_halfwidth,
            "seed": args.seed,
        })
    if args.format == "json":
        text = _dump_json({"table": t.tolist(), "statistic": "MI_q", "results": rows})
    else:
        text = (_rows_csv if args.format == "csv" else _rows_human)(rows, ORACLE_COLUMNS)
    _emit(text, args.out)
    return EXIT_OK


def _load_config(args) -> ExperimentConfig:
    data = {}
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise CliError(EXIT_CONFIG, f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_CONFIG, f"config is not valid JSON (line {exc.lineno}): {exc.msg}") from None
        if not isinstance(data, dict):
            raise CliError(EXIT_CONFIG, "config must be a JSON object")
    eid = data.get("experiment_id", args.experiment_id)
    if eid != args.experiment_id:
        raise CliError(EXIT_CONFIG, f"config is for {eid!r}, not {args.experiment_id!r}")
    data["experiment_id"] = eid
    for key, value in (("seed", args.seed), ("n_trials", args.trials)):
        if value is not None:
            data[key] = value
    data.setdefault("n_jobs", args.jobs if args.jobs is not None else _thread_default())
    try:
        return ExperimentConfig.from_dict(data)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"bad config: {exc}") from None


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    res = run_experiment(cfg)
    if args.format == "json":
        doc = res.sidecar()
        doc["rows"] = [r.__dict__ for r in res.rows]
        _emit(_dump_json(doc), args.out)
    else:
        _emit(res.to_csv(), args.out)
    if args.sidecar is not None:
        with open(args.sidecar, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(res.to_json() + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qadjust", description="Adjusted and standardized "
                                     "clustering comparison measures with Tsallis q-entropy.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="comparison indices for two labelings or a table")
    _add_input(p)
    p.add_argument("--q", default="2", help="comma-separated entropy orders; 1 or 'shannon' for Shannon")
    p.add_argument("--measures", help="comma-separated subset of output names, e.g. ARI,AMI_2")
    smi = p.add_mutually_exclusive_group()
    smi.add_argument("--skip-smi", action="store_true", help="skip standardized measures")
    smi.add_argument("--force-smi", action="store_true", help=f"compute SMI even when N > {SMI_SIZE_LIMIT}")
    _add_output(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("moments", help="null-model moments of H_q(U,V), MI_q and VI_q")
    _add_input(p)
    p.add_argument("--q", default="2")
    p.add_argument("--method", choices=("exact", "asymptotic", "mc"), default="exact")
    p.add_argument("--samples", type=int, default=10_000, help="Monte-Carlo sample count")
    p.add_argument("--seed", type=int, help="required for --method mc")
    p.add_argument("--skip-variance", action="store_true", help="exact method: expectation only")
    _add_output(p)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("oracle", help="ground-truth mean and variance of MI_q over permutations")
    _add_input(p)
    p.add_argument("--q", default="2")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--method", choices=("auto", "enumeration", "mc"), default="auto",
                   help=f"auto enumerates when N <= {ENUMERATION_CAP}, else samples")
    p.add_argument("--samples", type=int, default=20_000)
    _add_output(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("experiment", help="run a simulation experiment and print its rows")
    p.add_argument("experiment_id", choices=EXPERIMENT_IDS)
    p.add_argument("--config", metavar="PATH", help="JSON config; missing keys take defaults")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, help="override n_trials")
    p.add_argument("--jobs", type=int, help=f"worker processes (default: ${THREADS_ENV} or 1)")
    p.add_argument("--sidecar", metavar="PATH", help="also write the JSON metadata sidecar here")
    _add_output(p, formats=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"qadjust: {exc}", file=sys.stderr)
        return exc.code
    except UndefinedMeasureError as exc:
        print(f"qadjust: undefined measure: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except ConfigError as exc:
        print(f"qadjust: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
