"""Command line: ``hqbenders solve|oracle|qubo-dump``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import driver
from .encoding import choose_default_encoding
from .errors import ConfigError, NumericalError, ParseError, TooLarge
from .model import Cut, CutKind, MasterState, Status, brute_force_milp, check_feasible, load_instance
from .qubo import PenaltyConfig, build_master_qubo, fmt_number, format_legend, format_qubo
from .samplers import SamplerParams

EXIT_CODES = {
    Status.OPTIMAL: 0,
    Status.INFEASIBLE: 1,
    Status.UNBOUNDED: 2,
    Status.ITERATION_LIMIT: 3,
    Status.MASTER_STUCK: 3,
}
EXIT_USAGE = 4
EXIT_NUMERICAL = 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _num(v) -> str:
    v = float(v)
    if abs(v - round(v)) < 1e-9:
        v = float(round(v))
    return fmt_number(v)


def _vec(values) -> str:
    return "[" + ",".join(_num(v) for v in values) + "]"


def result_line(status: Status, x=None, objective=None, y=None, **extra) -> str:
    parts = [f"status={status.value}"]
    if x is not None:
        parts.append(f"x={_vec(x)}")
    if objective is not None:
        parts.append(f"objective={_num(objective)}")
    if y is not None:
        parts.append(f"y={_vec(y)}")
    parts += [f"{k}={v}" for k, v in extra.items()]
    return " ".join(parts)


def _penalty(text: str) -> PenaltyConfig:
    if text == "auto":
        return PenaltyConfig()
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("penalty must be positive")
    return PenaltyConfig(mode="fixed", fixed_value=value)


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _encoding(args, inst):
    if args.bits_int is None and args.bits_frac is None and args.bits_neg is None:
        return None
    enc = choose_default_encoding(inst)
    changes = {}
    if args.bits_int is not None:
        changes["m_plus"] = args.bits_int
    if args.bits_frac is not None:
        changes["m_frac"] = args.bits_frac
    if args.bits_neg is not None:
        changes["m_minus"] = args.bits_neg
    return replace(enc, **changes)


def _load(path):
    try:
        return load_instance(path)
    except OSError as exc:
        raise UsageError(f"cannot read instance: {exc}") from exc


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    cfg = driver.SolveConfig(
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        encoding=_encoding(args, inst),
        penalties=args.penalty,
        sampler=SamplerParams(backend=args.backend, seed=args.seed, num_reads=args.reads, sweeps=args.sweeps),
        inject_x_rows=args.inject_x_rows,
    )
    report = driver.run(inst, cfg)
    if args.trace:
        driver.write_trace(report, args.trace)
    if report.status is Status.OPTIMAL:
        check = check_feasible(inst, report.x_star, report.y_star, 1e-6)
        if not check:
            print(f"error: reported point violates constraints: {check.violations}", file=sys.stderr)
            return EXIT_NUMERICAL
        line = result_line(report.status, report.x_star, report.objective, report.y_star,
                           iterations=report.iterations, certified=str(report.certified).lower())
    elif report.status is Status.UNBOUNDED:
        line = result_line(report.status, report.x_star, iterations=report.iterations)
    else:
        line = result_line(report.status, report.x_star, report.objective, report.y_star, iterations=report.iterations)
    print(line)
    return EXIT_CODES[report.status]


def cmd_oracle(args) -> int:
    inst = _load(args.instance)
    res = brute_force_milp(inst)
    if res.status is Status.OPTIMAL:
        print(result_line(res.status, res.x, res.objective, res.y))
    else:
        print(result_line(res.status, res.x))
    return EXIT_CODES[res.status]


def _load_cuts(path, m: int) -> MasterState:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read cut file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"cut file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) - {"optimality", "feasibility"}:
        raise ParseError('cut file must be an object with keys "optimality" and/or "feasibility"')
    state = MasterState()
    for key, kind in (("optimality", CutKind.OPTIMALITY), ("feasibility", CutKind.FEASIBILITY)):
        for vec in doc.get(key, []):
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (m,):
                raise ParseError(f"{key} cut has length {vec.size}, instance has {m} rows")
            state.add(Cut(kind, vec))
    return state


def cmd_qubo_dump(args) -> int:
    inst = _load(args.instance)
    state = _load_cuts(args.cuts, inst.m) if args.cuts else MasterState()
    enc = _encoding(args, inst) or choose_default_encoding(inst)
    qubo, layout = build_master_qubo(inst, state, enc, args.penalty)
    text, legend = format_qubo(qubo), format_legend(layout, enc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        with open(args.out + ".legend", "w", encoding="utf-8") as fh:
            fh.write(legend)
    else:
        sys.stdout.write(text)
        sys.stderr.write(legend)
    return 0


def _add_encoding_flags(p):
    p.add_argument("--bits-int", type=_nonneg, help="highest positive exponent of the t register")
    p.add_argument("--bits-frac", type=_nonneg, help="fractional bits of the t register")
    p.add_argument("--bits-neg", type=_nonneg, help="highest exponent of the negative block")
    p.add_argument("--penalty", type=_penalty, default=PenaltyConfig(), help="penalty weight or 'auto' (default)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hqbenders", description="Benders decomposition with a QUBO master problem.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run the decomposition loop")
    p.add_argument("--instance", required=True)
    p.add_argument("--backend", choices=["exhaustive", "sa"], default="exhaustive")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=50)
    _add_encoding_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reads", type=int, default=100)
    p.add_argument("--sweeps", type=int, default=2000)
    p.add_argument("--trace", help="write one JSON line per iteration here")
    p.add_argument("--inject-x-rows", action="store_true", help="add rows without y directly to the master")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="enumerate every x and solve the LP over y")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("qubo-dump", help="write the master QUBO for a given cut set")
    p.add_argument("--instance", required=True)
    p.add_argument("--cuts", help='JSON file {"optimality": [[...]], "feasibility": [[...]]}')
    _add_encoding_flags(p)
    p.add_argument("--out", help="output file; the legend goes to OUT.legend")
    p.set_defaults(func=cmd_qubo_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ParseError, ConfigError, TooLarge, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
