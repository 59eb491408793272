"""Command-line interface.

Subcommands:

* ``verify``    -- run the full check suite over the parameter grid;
                   exit code 0 iff the aggregate passes, with failing
                   (scenario, check) pairs enumerated on stderr and
                   skipped pairs listed separately.
* ``converge``  -- run a single named check across the grid and print
                   its sweep table.
* ``gram``      -- dump level Gram matrices for one parameter point.
* ``coeffs``    -- dump the crossing-weight coefficient tables in exact
                   rational arithmetic.
* ``report``    -- re-render a serialized JSON suite result to the CSV
                   schema.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

from . import harness, qcomb
from .fock import FockSpace, gram_csv
from .oneparticle import make_space


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def _check_list(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(","))


def _seed(text: str) -> int:
    value = int(text)
    if not (0 <= value < 2**64):
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit int")
    return value


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="flat key=value config file")
    parser.add_argument(
        "--q", type=_float_list, metavar="LIST", help="comma-separated q values"
    )
    parser.add_argument(
        "--lambda",
        type=_float_list,
        dest="lam",
        metavar="LIST",
        help="comma-separated lambda values",
    )
    parser.add_argument("--cutoff", type=int, metavar="N", help="level cutoff")
    parser.add_argument("--seed", type=_seed, metavar="U64", help="suite seed")
    parser.add_argument("--out", metavar="DIR", help="output directory for tables")
    parser.add_argument(
        "--checks", type=_check_list, metavar="LIST", help="checks to run"
    )
    parser.add_argument(
        "--format", choices=("csv", "json"), help="table format (default: both)"
    )


def _config_from_args(args: argparse.Namespace, **extra) -> harness.ScenarioConfig:
    overrides = {
        "q_values": getattr(args, "q", None),
        "lam_values": getattr(args, "lam", None),
        "cutoff": getattr(args, "cutoff", None),
        "seed": getattr(args, "seed", None),
        "out_dir": getattr(args, "out", None),
        "checks": getattr(args, "checks", None),
    }
    overrides.update(extra)
    return harness.load_config(getattr(args, "config", None), overrides)


def _emit(result: harness.SuiteResult, out_dir: str, fmt: Optional[str]) -> List[str]:
    formats = [fmt] if fmt else ["csv", "json"]
    paths: List[str] = []
    for f in formats:
        paths.extend(harness.emit_tables(result, f, out_dir))
    return paths


def _print_outcome(result: harness.SuiteResult) -> None:
    for s in result.scenarios:
        n_skip = len(s.skipped_checks())
        state = "pass" if s.passed else "FAIL"
        print(
            f"{s.scenario_id}: {state} "
            f"({len(s.reports)} reports, {n_skip} skipped, {s.wall_time:.1f}s)"
        )
    for sid, name in result.skipped_pairs():
        print(f"skipped: {sid} {name}")
    print(f"aggregate: {'PASS' if result.aggregate_pass else 'FAIL'}")
    for sid, name in result.failing_pairs():
        print(f"FAIL: {sid} {name}", file=sys.stderr)


def _cmd_verify(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = harness.run_suite(config)
    if config.out_dir:
        for path in _emit(result, config.out_dir, args.format):
            print(f"wrote {path}")
    _print_outcome(result)
    return 0 if result.aggregate_pass else 1


def _cmd_converge(args: argparse.Namespace) -> int:
    if args.check not in harness.DEFAULT_CHECKS:
        print(f"unknown check {args.check!r}", file=sys.stderr)
        print("choices: " + ", ".join(harness.DEFAULT_CHECKS), file=sys.stderr)
        return 2
    config = _config_from_args(args, checks=(args.check,))
    result = harness.run_suite(config)
    if config.out_dir:
        for path in _emit(result, config.out_dir, args.format):
            print(f"wrote {path}")
    elif args.format == "json":
        print(result.to_json())
    else:
        sys.stdout.write(harness.result_csv(result))
    _print_outcome(result)
    return 0 if result.aggregate_pass else 1


def _cmd_gram(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    q = config.q_values[0]
    lam = config.lam_values[0]
    top = min(config.cutoff, args.max_level)
    space = FockSpace(q, make_space((lam,), 0), config.cutoff)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for n in range(top + 1):
            path = out / f"gram_level{n}.csv"
            path.write_text(gram_csv(space, [n]), encoding="utf-8", newline="")
            print(f"wrote {path}")
    else:
        sys.stdout.write(gram_csv(space, range(top + 1)))
    return 0


def _cmd_coeffs(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    top = min(config.cutoff, qcomb.Q_COEFF_MAX_N, args.max_degree)
    lines = ["q,n,k,l,numerator,denominator"]
    for q in config.q_values:
        # decimal input parsed as an exact rational keeps the table exact
        q_exact = Fraction(str(q))
        for n in range(top + 1):
            for k in range(n + 1):
                for l in range(n + 1):
                    val = Fraction(qcomb.q_coeff(n, k, l, q_exact))
                    lines.append(
                        f"{q_exact},{n},{k},{l},{val.numerator},{val.denominator}"
                    )
    text = "\n".join(lines) + "\n"
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "coeffs.csv"
        path.write_text(text, encoding="utf-8", newline="")
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    doc = json.loads(Path(args.json_path).read_text(encoding="utf-8"))
    text = harness.report_rows_from_json(doc)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "reports.csv"
        path.write_text(text, encoding="utf-8", newline="")
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfock",
        description="Numerical checks for deformed ladder calculus on truncated Fock spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the full suite over the grid")
    _add_common(p_verify)
    p_verify.set_defaults(func=_cmd_verify)

    p_conv = sub.add_parser("converge", help="run one check across the grid")
    p_conv.add_argument("check", help="check name")
    _add_common(p_conv)
    p_conv.set_defaults(func=_cmd_converge)

    p_gram = sub.add_parser("gram", help="dump level Gram matrices")
    _add_common(p_gram)
    p_gram.add_argument(
        "--max-level", type=int, default=6, help="highest level to dump"
    )
    p_gram.set_defaults(func=_cmd_gram)

    p_coef = sub.add_parser("coeffs", help="dump exact coefficient tables")
    _add_common(p_coef)
    p_coef.add_argument(
        "--max-degree", type=int, default=6, help="highest degree n to tabulate"
    )
    p_coef.set_defaults(func=_cmd_coeffs)

    p_rep = sub.add_parser("report", help="re-render a JSON suite result to CSV")
    p_rep.add_argument("json_path", help="path to a serialized suite result")
    p_rep.add_argument("--out", metavar="DIR", help="output directory")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
