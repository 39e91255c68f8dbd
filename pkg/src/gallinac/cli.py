"""``gallinac`` command line.

Exit codes: 0 done / success, 1 failed or counterexample, 2 bottom,
3 unreadable or ill-formed input, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys

from . import ast as A
from .cminor import dump_cminor, lower_to_cminor
from .denote import denote_program
from .fuzz import Budgets, validate, write_report
from .ir import dump_ir, lower_to_ir
from .opsem import run_steps
from .seplog import check_triple, gen_states
from .sexpr import ParseError, parse, parse_spec, serialize
from .state import BOTTOM, Failed, State

EXIT_DONE, EXIT_FAILED, EXIT_BOTTOM, EXIT_INPUT, EXIT_USAGE = 0, 1, 2, 3, 64
SHOW_COUNTEREXAMPLES = 3


class _InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise _InputError(f"{path}: {exc.strerror}") from None


def _load_program(path: str) -> A.Program:
    try:
        p = parse(_read(path))
    except ParseError as exc:
        raise _InputError(f"{path}:{exc}") from None
    diags = A.well_formed(p)
    if diags:
        raise _InputError("\n".join(f"{path}: {d}" for d in diags))
    return p


def _default_seed() -> int:
    try:
        return int(os.environ.get("GALLINAC_SEED", "0"))
    except ValueError:
        return 0


def cmd_run(args) -> int:
    p = _load_program(args.file)
    if args.trace:
        run_steps(p.main, p, State(), args.steps, trace=lambda line: print(line, file=sys.stderr))
    r = denote_program(p, State(), args.fuel)
    if r is BOTTOM:
        print(f"bottom (fuel {args.fuel})")
        return EXIT_BOTTOM
    if isinstance(r, Failed):
        print(f"failed {r.reason}")
        return EXIT_FAILED
    print(f"done {r.value}")
    return EXIT_DONE


def cmd_compile(args) -> int:
    q = lower_to_ir(_load_program(args.file))
    if args.emit == "ir":
        sys.stdout.write(dump_ir(q))
    else:
        sys.stdout.write(dump_cminor(lower_to_cminor(q), q.main))
    return EXIT_DONE


def cmd_validate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    b = Budgets(args.budget, 100 * args.budget, 400 * args.budget)
    report = validate(args.count, seed, b)
    t = report["tally"]
    print(f"cases {args.count} seed {seed}: agree {t['agree']}, all-bottom {t['all-bottom']}, "
          f"disagree {t['disagree']}; failure preserved: {str(report['failure_preserved']).lower()}")
    for c in report["cases"]:
        if c["verdict"] == "disagree":
            print(f"  case {c['index']} (seed {c['seed']}): " + "; ".join(c["details"]))
            print(f"    {c.get('shrunk', c['program'])}")
    if args.json:
        write_report(report, args.json)
    return EXIT_DONE if report["ok"] else EXIT_FAILED


def cmd_check_triple(args) -> int:
    try:
        functions, triples = parse_spec(_read(args.spec))
    except ParseError as exc:
        raise _InputError(f"{args.spec}:{exc}") from None
    prog = A.Program(functions)
    diags = A.well_formed(prog)
    if diags:
        raise _InputError("\n".join(f"{args.spec}: {d}" for d in diags))
    seed = args.seed if args.seed is not None else _default_seed()
    rng = random.Random(seed)
    results = []
    bad = False
    for n, t in enumerate(triples, 1):
        states = gen_states(t.pre, rng, args.samples)
        rep = check_triple(t.pre, t.cmd, t.post, states, args.fuel, result=t.result, prog=prog)
        d = rep.as_dict()
        d["index"] = n
        results.append(d)
        cxs = rep.crash_counterexamples + rep.post_counterexamples
        status = "ok" if rep.ok else "COUNTEREXAMPLE"
        print(f"triple {n}: {status} (states {rep.states_checked}, passed {rep.passes}, "
              f"bottom {rep.inconclusive_bottoms})")
        if not states:
            print("  warning: no states satisfying the precondition were found")
        shown = d["crash_counterexamples"] + d["post_counterexamples"]
        for c in shown[:SHOW_COUNTEREXAMPLES]:
            print(f"  from {c['state']}")
            print(f"    got {c['outcome']}: {c['note']}")
        if len(shown) > SHOW_COUNTEREXAMPLES:
            print(f"  ... {len(shown) - SHOW_COUNTEREXAMPLES} more")
        bad = bad or bool(cxs)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"spec": args.spec, "seed": seed, "samples": args.samples,
                       "fuel": args.fuel, "triples": results}, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return EXIT_FAILED if bad else EXIT_DONE


def cmd_roundtrip(args) -> int:
    p = _load_program(args.file)
    text = serialize(p)
    again = parse(text)
    print(text)
    if again != p or serialize(again) != text:
        print("round trip changed the program", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_DONE


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gallinac", description="Run, compile and check GallinaC programs.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="evaluate a program with the denotational semantics")
    r.add_argument("file")
    r.add_argument("--fuel", type=int, default=1000)
    r.add_argument("--trace", action="store_true", help="print machine steps to stderr")
    r.add_argument("--steps", type=int, default=100_000, help="step limit for --trace")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compile", help="dump the IR or Cminor-lite translation")
    c.add_argument("file")
    c.add_argument("--emit", choices=("ir", "cminor"), default="ir")
    c.set_defaults(func=cmd_compile)

    v = sub.add_parser("validate", help="differential testing over generated programs")
    v.add_argument("--count", type=int, default=100)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--budget", type=int, default=500, help="fuel; step limits scale with it")
    v.add_argument("--json", metavar="PATH")
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("check-triple", help="test Hoare triples from a spec file")
    t.add_argument("spec")
    t.add_argument("--samples", type=int, default=50)
    t.add_argument("--fuel", type=int, default=1000)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--json", metavar="PATH")
    t.set_defaults(func=cmd_check_triple)

    rt = sub.add_parser("roundtrip", help="parse, print and re-parse a program")
    rt.add_argument("file")
    rt.set_defaults(func=cmd_roundtrip)
    return ap


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _InputError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
