"""Command-line entry point: ``tempinv <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

from . import oracle, statevars, synthesis
from .canon import CanonError, CanonicalDomain, canonicalize, format_canonical
from .pddl import ParseError, RawDomain, parse_domain, parse_problem
from .templates import parse_template_key

log = logging.getLogger("tempinv")

FORMAT_HEADER = "tempinv-format 1"
EXIT_OK, EXIT_DIAGNOSTIC, EXIT_VIOLATED = 0, 1, 2


class Diagnostic(Exception):
    def __init__(self, path: str, err: Exception):
        line, col = getattr(err, "line", 0), getattr(err, "col", 0)
        msg = getattr(err, "message", str(err))
        where = f"{path}:{line}:{col}" if line else path
        super().__init__(f"{where}: {msg}")


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise Diagnostic(path, Exception(e.strerror or str(e))) from None


def _load_domain(path: str) -> tuple[RawDomain, CanonicalDomain]:
    text = _read(path)
    try:
        raw = parse_domain(text)
        return raw, canonicalize(raw)
    except (ParseError, CanonError) as e:
        raise Diagnostic(path, e) from None


def _load_problem(path: str, raw: RawDomain):
    try:
        return parse_problem(_read(path), raw)
    except ParseError as e:
        raise Diagnostic(path, e) from None


def _positive(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tempinv",
                                description="Mutual-exclusion invariants for temporal PDDL domains.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("canon", help="print the canonical domain")
    c.add_argument("domain")

    i = sub.add_parser("invariants", help="synthesize invariant templates")
    i.add_argument("domain")
    _synthesis_flags(i)
    i.add_argument("--format", choices=("text", "json"), default="text")
    i.add_argument("--timing", action="store_true", help="include timings in JSON output")

    s = sub.add_parser("statevars", help="build state variables for a problem")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("--mode", choices=statevars.MODES, default="tis")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--repair-cap", type=_positive, default=synthesis.DEFAULT_REPAIR_CAP)

    v = sub.add_parser("verify", help="check one template with the ground oracle")
    v.add_argument("domain")
    v.add_argument("problem")
    v.add_argument("--template", required=True, help='template key, e.g. "{robot-at 0 [1]}"')
    v.add_argument("--max-depth", type=_positive, default=oracle.DEFAULT_MAX_HAPPENINGS)
    v.add_argument("--max-sim", type=_positive, default=oracle.DEFAULT_MAX_SIMULTANEOUS)
    v.add_argument("--state-cap", type=_positive, default=oracle.DEFAULT_STATE_CAP)
    v.add_argument("--allow-repeats", action="store_true",
                   help="allow non-injective groundings (outside the usual model)")

    d = sub.add_parser("debug", help="diff expected invariants against synthesized ones")
    d.add_argument("domain")
    d.add_argument("--expect", required=True, help="file with one template key per line")
    _synthesis_flags(d)
    return p


def _synthesis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("tis", "sis"), default="tis")
    p.add_argument("--repair-cap", type=_positive, default=synthesis.DEFAULT_REPAIR_CAP)
    p.add_argument("--repair-exhaustive", action="store_true")
    p.add_argument("--jobs", type=_positive, default=1)


def _synthesize(args, domain: CanonicalDomain) -> synthesis.SynthesisReport:
    return synthesis.synthesize(domain, args.mode, repair_cap=args.repair_cap,
                                exhaustive=getattr(args, "repair_exhaustive", False),
                                jobs=getattr(args, "jobs", 1))


def cmd_canon(args, out) -> int:
    _, domain = _load_domain(args.domain)
    out.write(format_canonical(domain))
    return EXIT_OK


def cmd_invariants(args, out) -> int:
    _, domain = _load_domain(args.domain)
    report = _synthesize(args, domain)
    if args.format == "json":
        out.write(json.dumps(report.as_dict(args.timing), indent=2) + "\n")
        return EXIT_OK
    out.write(FORMAT_HEADER + "\n")
    for a in report.accepted:
        out.write(a.template.key + (" [fix]" if a.via_fix else "") + "\n")
    return EXIT_OK


def cmd_statevars(args, out) -> int:
    raw, domain = _load_domain(args.domain)
    problem = _load_problem(args.problem, raw)
    invariants = []
    if args.mode != "bis":
        report = synthesis.synthesize(domain, args.mode, repair_cap=args.repair_cap)
        invariants = [a.template for a in report.accepted]
    variables, stats = statevars.build_state_variables(invariants, domain, problem, args.mode)
    out.write(statevars.emit(variables, stats, args.format))
    return EXIT_OK


def cmd_verify(args, out) -> int:
    raw, domain = _load_domain(args.domain)
    problem = _load_problem(args.problem, raw)
    try:
        t = parse_template_key(args.template, domain.relations)
    except ValueError as e:
        raise Diagnostic("--template", e) from None
    task = oracle.build_task(domain, problem, allow_repeats=args.allow_repeats)
    try:
        verdict = oracle.verify_template(t, task, args.max_depth, args.max_sim, args.state_cap)
    except oracle.InitViolation as e:
        raise Diagnostic(args.problem, e) from None
    out.write(str(verdict) + "\n")
    return EXIT_VIOLATED if isinstance(verdict, oracle.Violated) else EXIT_OK


def _expected_keys(path: str, domain: CanonicalDomain) -> list[str]:
    keys = []
    for n, line in enumerate(_read(path).splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or line == FORMAT_HEADER:
            continue
        line = line.removesuffix("[fix]").strip()
        try:
            keys.append(parse_template_key(line, domain.relations).key)
        except ValueError as e:
            raise Diagnostic(path, ParseError(str(e), n, 1)) from None
    return keys


def cmd_debug(args, out) -> int:
    _, domain = _load_domain(args.domain)
    expected = _expected_keys(args.expect, domain)
    report = _synthesize(args, domain)
    found = report.keys()
    for key in found:
        if key not in expected:
            out.write(f"+ {key}\n")
    for key in expected:
        if key in found:
            continue
        if report.find(key) is not None:
            out.write(f"- {key} (accepted as trivial)\n")
            continue
        out.write(f"- {key}\n")
        verdict = synthesis.check(parse_template_key(key, domain.relations), domain, args.mode)
        for f in verdict.failures:
            out.write(f"    {f.schema}: {f.tclass} is {f.classification}\n")
    return EXIT_OK


COMMANDS = {"canon": cmd_canon, "invariants": cmd_invariants, "statevars": cmd_statevars,
            "verify": cmd_verify, "debug": cmd_debug}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    level = os.environ.get("TEMPINV_LOG") or ("DEBUG" if args.verbose > 1 else
                                             "INFO" if args.verbose else "WARNING")
    logging.basicConfig(level=level.upper(), format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        return COMMANDS[args.command](args, out)
    except Diagnostic as e:
        print(str(e), file=sys.stderr)
        return EXIT_DIAGNOSTIC


if __name__ == "__main__":
    sys.exit(main())
