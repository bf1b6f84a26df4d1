"""Command line entry point: ``qbclab {audit,attack,oracle,demo-bb84}``.

Exit codes: 0 success, 2 configuration error, 3 resource cap exceeded,
1 any other simulation failure.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import core
from .core import Owner, ResourceCapError
from .harness import (
    DEFAULT_N_SWEEP,
    DEFAULT_TRIALS,
    FORMATS,
    MODES,
    ConfigError,
    ExperimentConfig,
    emit_report,
    report_csv,
    report_json,
    run_experiment,
)

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3

_ALPHA = re.compile(r"^\s*(?P<num>[0-9.eE+-]*)\s*\*?\s*(?P<pi>pi)?\s*(?:/\s*(?P<den>[0-9.eE+-]+))?\s*$")


def parse_n(text: str) -> tuple[int, ...]:
    """``"1-8"``, ``"1,2,4"`` or a mix such as ``"1-3,6"``."""
    out: list[int] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                a, b = int(lo), int(hi)
                if b < a:
                    raise ValueError
                out.extend(range(a, b + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad n list element {part!r}") from None
    return tuple(out)


def parse_alpha(text: str) -> tuple[float, ...]:
    """Comma list of angles; each is a number, optionally times ``pi`` and over a divisor (``3pi/8``)."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        m = _ALPHA.match(part)
        try:
            if not m or not (m["num"] or m["pi"]):
                raise ValueError
            v = float(m["num"]) if m["num"] not in ("", "+", "-") else float(m["num"] + "1")
            if m["pi"]:
                v *= math.pi
            if m["den"]:
                v /= float(m["den"])
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"bad angle {part!r}") from None
        out.append(v)
    return tuple(out)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qbclab", description="Quantum bit commitment audits and attacks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "audit": "concealment audit and honest unveil statistics",
        "attack": "cheating strategies against honest Bob",
        "oracle": "exact enumeration cross-checked against closed forms and Monte Carlo",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--fixture", default="bb84", help="bb84 or toy (default bb84)")
        p.add_argument("--n", type=parse_n, default=None, help="bb84 positions, e.g. 1-8 or 1,2,4 (default 1-8)")
        p.add_argument("--alpha", type=parse_alpha, default=None, help="toy angles, e.g. 0,pi/8,pi/4 (default 0)")
        p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=MODES, default="enumerate" if name != "attack" else "both")
        p.add_argument("--out", default=None, help="directory for report.json / report.csv (default: stdout)")
        p.add_argument("--format", choices=FORMATS, default="both")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--sigmas", type=float, default=4.0, help="Monte Carlo tolerance in standard errors")
    demo = sub.add_parser("demo-bb84", help="print the per-position BB84 states and the EPR equivalence")
    demo.add_argument("--n", type=parse_n, default=(1,))
    demo.add_argument("--fixture", default="bb84")
    demo.add_argument("--out", default=None, help="optional file for the walkthrough text")
    return parser


def _config(args) -> ExperimentConfig:
    if args.fixture == "bb84":
        if args.alpha is not None:
            raise ConfigError("--alpha applies to the toy fixture only")
        sweep = args.n if args.n is not None else DEFAULT_N_SWEEP
    elif args.fixture == "toy":
        if args.n is not None:
            raise ConfigError("--n applies to the bb84 fixture only")
        sweep = args.alpha if args.alpha is not None else (0.0,)
    else:
        raise ConfigError(f"unknown fixture {args.fixture!r}; choose from ('bb84', 'toy')")
    return ExperimentConfig(task=args.command, fixture=args.fixture, sweep=sweep, trials=args.trials,
                            seed=args.seed, mode=args.mode, out=args.out, format=args.format,
                            sigmas=args.sigmas, workers=args.workers)


def _ket(vec: np.ndarray, names: tuple[str, ...], tol: float = 1e-12) -> str:
    terms = []
    for idx in np.flatnonzero(np.abs(vec) > tol):
        amp = vec[idx]
        bits = format(idx, f"0{len(names)}b")
        coef = f"{amp.real:+.4f}" if abs(amp.imag) < tol else f"({amp.real:+.4f}{amp.imag:+.4f}j)"
        terms.append(f"{coef}|{bits}>")
    return " ".join(terms) + f"   [{' '.join(names)}]"


def demo_bb84(n: int) -> str:
    """Walkthrough of one commitment: honest branches, the withheld state and its independence of b."""
    from .attack import withheld_states
    from .protocol import Idle, Simulation
    from .protocols import BB84Alice, bb84_protocol

    spec = bb84_protocol(n)
    lines = [f"BB84 commitment with n = {n}", ""]
    for b in (0, 1):
        basis = "+" if b == 0 else "x"
        lines.append(f"Honest commit to b = {b}: Alice measures each pair half in basis {basis}")
        for ex in Simulation(spec, BB84Alice(n), Idle()).commit_branches(b):
            w = "".join(str(ex.bits[core.Party.ALICE][f"w{i}"]) for i in range(n))
            lines.append(f"  w = {w}  p = {ex.probability:.4f}  Bob holds "
                         + _ket(ex.state.amplitudes, ex.state.registers))
        lines.append("")
    states = [withheld_states(spec, b, Idle()) for b in (0, 1)]
    psi0, psi1 = states[0][()].state, states[1][()].state
    lines.append("Withheld commit (Alice keeps the pair halves, Bob has not measured):")
    lines.append("  b = 0: " + _ket(psi0.amplitudes, psi0.registers))
    lines.append("  b = 1: " + _ket(psi1.amplitudes, psi1.registers))
    same = np.allclose(psi0.amplitudes, core.reorder(psi1, psi0.registers).amplitudes, atol=1e-12)
    lines.append(f"  identical states: {same}; only the basis Alice will measure in differs")
    lines.append(f"  Alice's registers: {', '.join(psi0.registers_of(Owner.A))}; "
                 f"Bob's: {', '.join(psi0.registers_of(Owner.B))}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "demo-bb84":
            if args.fixture != "bb84":
                raise ConfigError("demo-bb84 only runs the bb84 fixture")
            text = "\n".join(demo_bb84(n) for n in args.n)
            if args.out:
                Path(args.out).write_text(text, encoding="utf-8")
            else:
                sys.stdout.write(text)
            return EXIT_OK
        cfg = _config(args)
        started = time.perf_counter()
        report = run_experiment(cfg)
        elapsed = time.perf_counter() - started
        if cfg.out:
            paths = emit_report(report, cfg.out, cfg.format)
            # wall-clock lives outside the report so reports stay byte-identical across reruns
            timing = Path(cfg.out) / "timing.json"
            timing.write_text(json.dumps({"wall_clock_seconds": elapsed}) + "\n", encoding="utf-8")
            for p in paths:
                print(p)
        else:
            if cfg.format in ("json", "both"):
                sys.stdout.write(report_json(report))
            if cfg.format in ("csv", "both"):
                sys.stdout.write(report_csv(report))
        print(f"wall clock {elapsed:.2f} s", file=sys.stderr)
        return EXIT_OK if report.all_checks_passed else EXIT_FAILURE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (core.QBCError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
