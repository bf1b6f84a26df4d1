"""Batch experiments over fixture sweeps with exact and Monte Carlo estimates.

Random streams: trial chunk ``c`` of stream ``s`` at sweep point ``p`` draws from
``np.random.SeedSequence(seed, spawn_key=(p, s, c))``. Chunks have a fixed
size, so results do not depend on how many workers run them, and partial
counts are merged in chunk order.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import attack as atk
from .core import QBCError
from .protocol import Idle, Simulation, UnveilResult, concealment_report
from .protocols import BB84Bob, ClassicalGuess, EPRAttack, FIXTURES, classical_guess_success

SCHEMA_VERSION = 1
MODES = ("enumerate", "montecarlo", "both")
TASKS = ("audit", "attack", "oracle")
FORMATS = ("json", "csv", "both")
SIG_DIGITS = 12
DEFAULT_TRIALS = 10_000
DEFAULT_N_SWEEP = tuple(range(1, 9))
CHUNK_SIZE = 500

# stream ids inside the counter-based seed
STREAM_HONEST = (0, 1)
STREAM_CLASSICAL = 2
STREAM_EPR = (3, 4)
STREAM_ATTACK = 5

# Column order of the CSV report (schema version 1). Each quantity expands to
# ``<name>.exact``, ``<name>.mc``, ``<name>.stderr``, ``<name>.trials``.
QUANTITIES = (
    "concealment_fidelity",
    "trace_distance",
    "fidelity_audit",
    "honest_bottom_rate",
    "honest_wrong_rate",
    "honest_correct_given_decided",
    "classical_cheat_success",
    "epr_decoded_given_decided",
    "attack_success",
    "attack_success_given_decided",
    "attack_bottom_rate",
    "attack_bound",
    "attack_partner_overlap",
    "steering_identity_deviation",
)
ORACLES = (
    "oracle_concealment_fidelity",
    "oracle_trace_distance",
    "oracle_fidelity_audit",
    "oracle_honest_bottom_rate",
    "oracle_classical_cheat_success",
    "oracle_attack_success",
)
SLOTS = ("exact", "mc", "stderr", "trials")
ID_COLUMNS = ("schema_version", "task", "fixture", "point", "param", "value")
TAIL_COLUMNS = ("bound_satisfied", "checks_passed", "checks_failed")
CSV_HEADER = ID_COLUMNS + tuple(f"{q}.{s}" for q in QUANTITIES for s in SLOTS) + ORACLES + TAIL_COLUMNS

_PARAM = {"bb84": "n", "toy": "alpha"}


class ConfigError(QBCError):
    """Experiment configuration is invalid."""


def round_sig(x, digits: int = SIG_DIGITS):
    """Round floats to ``digits`` significant digits; NaN and infinities become None."""
    if x is None or isinstance(x, bool):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{digits}g}")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "oracle"
    fixture: str = "bb84"
    sweep: tuple = DEFAULT_N_SWEEP
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    mode: str = "both"
    out: str | None = None
    format: str = "both"
    sigmas: float = 4.0
    exact_tol: float = 1e-9
    workers: int = 1
    chunk_size: int = CHUNK_SIZE

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {TASKS}")
        if self.fixture not in FIXTURES:
            raise ConfigError(f"unknown fixture {self.fixture!r}; choose from {tuple(FIXTURES)}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; choose from {FORMATS}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.workers < 1 or self.chunk_size < 1:
            raise ConfigError("workers and chunk_size must be at least 1")
        if self.sigmas <= 0 or self.exact_tol <= 0:
            raise ConfigError("tolerances must be positive")
        sweep = tuple(self.sweep)
        for v in sweep:
            try:
                FIXTURES[self.fixture](v)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad {self.param} value {v!r}: {exc}") from None
        object.__setattr__(self, "sweep", sweep)

    @property
    def param(self) -> str:
        return _PARAM[self.fixture]

    def echo(self) -> dict:
        """Config as written into reports; output location and worker count do not affect results."""
        d = asdict(self)
        for k in ("out", "format", "workers"):
            d.pop(k)
        d["sweep"] = [round_sig(v) for v in self.sweep]
        d["sigmas"] = round_sig(self.sigmas)
        d["exact_tol"] = round_sig(self.exact_tol)
        return d


@dataclass
class Estimate:
    exact: float | None = None
    mc: float | None = None
    stderr: float | None = None
    trials: int | None = None

    def to_dict(self) -> dict:
        return {"exact": round_sig(self.exact), "mc": round_sig(self.mc),
                "stderr": round_sig(self.stderr), "trials": self.trials}


@dataclass
class PointRecord:
    task: str
    fixture: str
    point: int
    param: str
    value: float
    quantities: dict = field(default_factory=dict)
    oracles: dict = field(default_factory=dict)
    bound_satisfied: bool | None = None
    checks_passed: list = field(default_factory=list)
    checks_failed: list = field(default_factory=list)

    def q(self, name: str) -> Estimate:
        if name not in QUANTITIES:
            raise KeyError(name)
        return self.quantities.setdefault(name, Estimate())

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "fixture": self.fixture,
            "point": self.point,
            "param": self.param,
            "value": round_sig(self.value),
            "quantities": {k: self.quantities[k].to_dict() for k in QUANTITIES if k in self.quantities},
            "oracles": {k: round_sig(self.oracles[k]) for k in ORACLES if k in self.oracles},
            "bound_satisfied": self.bound_satisfied,
            "checks_passed": sorted(self.checks_passed),
            "checks_failed": sorted(self.checks_failed),
        }


@dataclass
class Report:
    config: dict
    records: list

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "config": self.config,
                "records": [r if isinstance(r, dict) else r.to_dict() for r in self.records]}

    @property
    def all_checks_passed(self) -> bool:
        return all(not r["checks_failed"] for r in self.to_dict()["records"])


# ------------------------------------------------------------ Monte Carlo


def _rng(seed: int, point: int, stream: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(point, stream, chunk)))


_ATTACK_CACHE: dict = {}


def _attack_for(fixture: str, value):
    key = (fixture, value)
    if key not in _ATTACK_CACHE:
        _ATTACK_CACHE[key] = atk.PurificationAttack(FIXTURES[fixture](value))
    return _ATTACK_CACHE[key]


def _run_chunk(job: tuple) -> Any:
    """One chunk of trials; pure function of its arguments so any worker may run it."""
    fixture, value, seed, point, stream, chunk, trials = job
    spec = FIXTURES[fixture](value)
    rng = _rng(seed, point, stream, chunk)
    if stream in STREAM_HONEST:
        b = STREAM_HONEST.index(stream)
        runs = Simulation(spec, spec.honest_alice(), spec.honest_bob()).sample_runs(b, rng, trials, b)
        correct = runs.count(UnveilResult.of(b))
        bottom = runs.count(UnveilResult.BOTTOM)
        return [trials, correct, trials - correct - bottom, bottom]  # runs, correct, wrong, bottom
    if stream == STREAM_CLASSICAL:
        runs = Simulation(spec, ClassicalGuess(spec.n), BB84Bob(spec.n)).sample_runs(0, rng, trials, 1)
        return [trials, runs.count(UnveilResult.ONE)]
    if stream in STREAM_EPR:
        target = STREAM_EPR.index(stream)
        runs = Simulation(spec, EPRAttack(spec.n), BB84Bob(spec.n)).sample_runs(0, rng, trials, target)
        return [trials, runs.count(UnveilResult.of(target)), runs.count(UnveilResult.BOTTOM)]
    if stream == STREAM_ATTACK:
        return atk.sample_attack(spec, rng, trials, attack=_attack_for(fixture, value))
    raise ValueError(f"unknown stream {stream}")


def _merge(parts: list):
    if isinstance(parts[0], atk.AttackTally):
        out = atk.AttackTally()
        for p in parts:
            out.merge(p)
        return out
    return [sum(col) for col in zip(*parts)]


class _Runner:
    """Fans chunk jobs out to a process pool and reduces them in submission order."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None

    def run(self, value, point: int, streams: Sequence[int]) -> dict:
        cfg = self.config
        jobs, owners = [], []
        for s in streams:
            done, chunk = 0, 0
            while done < cfg.trials:
                k = min(cfg.chunk_size, cfg.trials - done)
                jobs.append((cfg.fixture, value, cfg.seed, point, s, chunk, k))
                owners.append(s)
                done += k
                chunk += 1
        results = list(self.pool.map(_run_chunk, jobs)) if self.pool else [_run_chunk(j) for j in jobs]
        grouped: dict = {}
        for s, r in zip(owners, results):
            grouped.setdefault(s, []).append(r)
        return {s: _merge(parts) for s, parts in grouped.items()}

    def close(self):
        if self.pool:
            self.pool.shutdown()


def _rate(k, n):
    if not n:
        return None, None
    r = k / n
    return r, math.sqrt(r * (1 - r) / n)


# ------------------------------------------------------------ exact parts


def _honest_exact(spec):
    correct = wrong = bottom = 0.0
    for b in (0, 1):
        dist = Simulation(spec, spec.honest_alice(), spec.honest_bob()).outcome_distribution(b, b)
        for r, p in dist.items():
            if r is UnveilResult.BOTTOM:
                bottom += p / 2
            elif r.bit == b:
                correct += p / 2
            else:
                wrong += p / 2
    return correct, wrong, bottom


def _oracles(fixture: str, value) -> dict:
    if fixture == "bb84":
        n = int(value)
        return {
            "oracle_concealment_fidelity": 1.0,
            "oracle_trace_distance": 0.0,
            "oracle_fidelity_audit": 1.0,
            "oracle_honest_bottom_rate": 0.75**n,
            "oracle_classical_cheat_success": classical_guess_success(n),
            "oracle_attack_success": 1 - 0.75**n,
        }
    a = float(value)
    return {
        "oracle_concealment_fidelity": math.cos(a),
        "oracle_trace_distance": math.sin(a),
        "oracle_fidelity_audit": math.cos(a),
        "oracle_honest_bottom_rate": 0.0,
        "oracle_attack_success": math.cos(a) ** 2,
    }


# oracle name -> quantity it pins down
_ORACLE_TARGET = {
    "oracle_concealment_fidelity": "concealment_fidelity",
    "oracle_trace_distance": "trace_distance",
    "oracle_fidelity_audit": "fidelity_audit",
    "oracle_honest_bottom_rate": "honest_bottom_rate",
    "oracle_classical_cheat_success": "classical_cheat_success",
    "oracle_attack_success": "attack_success",
}


def _evaluate(cfg: ExperimentConfig, runner: _Runner, point: int, value) -> PointRecord:
    spec = FIXTURES[cfg.fixture](value)
    rec = PointRecord(cfg.task, cfg.fixture, point, cfg.param, value)
    is_bb84 = cfg.fixture == "bb84"
    do_audit = cfg.task in ("audit", "oracle")
    do_attack = cfg.task in ("attack", "oracle")
    exact = cfg.mode in ("enumerate", "both")
    mc = cfg.mode in ("montecarlo", "both")

    if do_attack:
        # exact plan data: needed by both modes and computed first since it
        # holds the largest states and fails fast on the qubit cap
        summary = atk.plan_summary(_attack_for(cfg.fixture, value))
        rec.q("fidelity_audit").exact = summary.expected_fidelity
        rec.q("attack_partner_overlap").exact = summary.expected_partner_overlap
        rec.q("steering_identity_deviation").exact = summary.identity_deviation

    if exact:
        if do_audit:
            conc = concealment_report(spec, spec.honest_alice(), Idle())
            rec.q("concealment_fidelity").exact = conc.expected_fidelity
            rec.q("trace_distance").exact = conc.trace_distance
            correct, wrong, bottom = _honest_exact(spec)
            rec.q("honest_bottom_rate").exact = bottom
            rec.q("honest_wrong_rate").exact = wrong
            rec.q("honest_correct_given_decided").exact = correct / (correct + wrong) if correct + wrong else None
        if do_audit:
            rec.q("fidelity_audit").exact = atk.fidelity_audit(spec)
        if do_attack:
            rep = atk.exact_attack_report(spec, attack=_attack_for(cfg.fixture, value))
            rec.q("attack_success").exact = rep.expected_success
            rec.q("attack_success_given_decided").exact = rep.conditional_success
            rec.q("attack_bottom_rate").exact = rep.bottom_rate
            rec.q("attack_bound").exact = rep.expected_bound
            rec.bound_satisfied = rep.bound_satisfied
            if is_bb84:
                cheat = Simulation(spec, ClassicalGuess(spec.n), BB84Bob(spec.n)).outcome_distribution(0, 1)
                rec.q("classical_cheat_success").exact = cheat[UnveilResult.ONE]
                worst = 1.0
                for target in (0, 1):
                    d = Simulation(spec, EPRAttack(spec.n), BB84Bob(spec.n)).outcome_distribution(0, target)
                    decided = 1 - d[UnveilResult.BOTTOM]
                    worst = min(worst, d[UnveilResult.of(target)] / decided)
                rec.q("epr_decoded_given_decided").exact = worst

    if mc:
        streams = []
        if do_audit:
            streams += list(STREAM_HONEST)
        if do_attack:
            streams.append(STREAM_ATTACK)
            if is_bb84:
                streams += [STREAM_CLASSICAL, *STREAM_EPR]
        res = runner.run(value, point, streams)
        n = cfg.trials
        if do_audit:
            h0, h1 = res[STREAM_HONEST[0]], res[STREAM_HONEST[1]]
            runs = h0[0] + h1[0]
            for name, idx in (("honest_bottom_rate", 3), ("honest_wrong_rate", 2)):
                e = rec.q(name)
                e.mc, e.stderr = _rate(h0[idx] + h1[idx], runs)
                e.trials = runs
            e = rec.q("honest_correct_given_decided")
            decided = runs - h0[3] - h1[3]
            e.mc, e.stderr = _rate(h0[1] + h1[1], decided)
            e.trials = decided
        if do_attack:
            rep = atk.mc_attack_report(spec, res[STREAM_ATTACK], cfg.sigmas, attack=_attack_for(cfg.fixture, value))
            for name, val, se, t in (
                ("attack_success", rep.expected_success, rep.success_stderr, n),
                ("attack_success_given_decided", rep.conditional_success, rep.conditional_stderr,
                 round(n * (1 - rep.bottom_rate))),
                ("attack_bottom_rate", rep.bottom_rate, math.sqrt(rep.bottom_rate * (1 - rep.bottom_rate) / n), n),
            ):
                e = rec.q(name)
                e.mc, e.stderr, e.trials = val, se, t
            e = rec.q("attack_bound")
            e.mc = rep.expected_bound
            e.stderr = math.sqrt(sum((g.probability * g.bound_stderr) ** 2 for g in rep.per_gamma))
            e.trials = n
            rec.bound_satisfied = rep.bound_satisfied and (rec.bound_satisfied is not False)
            if is_bb84:
                e = rec.q("classical_cheat_success")
                e.mc, e.stderr = _rate(res[STREAM_CLASSICAL][1], n)
                e.trials = n
                worst, worst_se, dec = 1.0, 0.0, n
                for s in STREAM_EPR:
                    runs, hits, bottoms = res[s]
                    r, se = _rate(hits, runs - bottoms)
                    if r is not None and r <= worst:
                        worst, worst_se, dec = r, se, runs - bottoms
                e = rec.q("epr_decoded_given_decided")
                e.mc, e.stderr, e.trials = worst, worst_se, dec

    if cfg.task == "oracle":
        rec.oracles = _oracles(cfg.fixture, value)
        _check(cfg, rec)
    return rec


def _defined(x) -> bool:
    return x is not None and math.isfinite(x)


def _check(cfg: ExperimentConfig, rec: PointRecord) -> None:
    """Exact values must match closed forms; Monte Carlo must sit within ``sigmas`` of exact."""
    for oname, qname in _ORACLE_TARGET.items():
        if oname not in rec.oracles or qname not in rec.quantities:
            continue
        e = rec.quantities[qname]
        if e.exact is not None:
            ok = abs(e.exact - rec.oracles[oname]) <= cfg.exact_tol
            (rec.checks_passed if ok else rec.checks_failed).append(f"{qname}:exact=oracle")
    for qname, e in rec.quantities.items():
        # undefined rates (e.g. conditioned on an event that never happens) are NaN; nothing to compare
        if _defined(e.exact) and _defined(e.mc):
            band = cfg.sigmas * max(e.stderr or 0.0, 1.0 / (e.trials or 1))
            ok = abs(e.mc - e.exact) <= band
            (rec.checks_passed if ok else rec.checks_failed).append(f"{qname}:mc~exact")
    if rec.bound_satisfied is not None:
        (rec.checks_passed if rec.bound_satisfied else rec.checks_failed).append("attack_bound")


def run_experiment(config: ExperimentConfig) -> Report:
    runner = _Runner(config)
    try:
        records = [_evaluate(config, runner, i, v) for i, v in enumerate(config.sweep)]
    finally:
        runner.close()
    return Report(config.echo(), [r.to_dict() for r in records])


# ------------------------------------------------------------ output


def report_json(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    return str(v)


def report_rows(report: Report) -> list[list[str]]:
    rows = []
    for r in report.to_dict()["records"]:
        row = [SCHEMA_VERSION, r["task"], r["fixture"], r["point"], r["param"], r["value"]]
        for q in QUANTITIES:
            e = r["quantities"].get(q, {})
            row += [e.get(s) for s in SLOTS]
        row += [r["oracles"].get(o) for o in ORACLES]
        row += [r["bound_satisfied"], ";".join(r["checks_passed"]), ";".join(r["checks_failed"])]
        rows.append([_cell(c) for c in row])
    return rows


def report_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(report_rows(report))
    return buf.getvalue()


def load_report(text: str) -> Report:
    d = json.loads(text)
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {d.get('schema_version')!r}")
    return Report(d["config"], d["records"])


def emit_report(report: Report, out_dir: str | os.PathLike, fmt: str = "both") -> list[Path]:
    """Write ``report.json`` and/or ``report.csv`` into ``out_dir``; returns the paths written."""
    if fmt not in FORMATS:
        raise ConfigError(f"unknown format {fmt!r}; choose from {FORMATS}")
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt in ("json", "both"):
            p = out / "report.json"
            p.write_text(report_json(report), encoding="utf-8")
            written.append(p)
        if fmt in ("csv", "both"):
            p = out / "report.csv"
            p.write_text(report_csv(report), encoding="utf-8")
            written.append(p)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc.strerror or exc}") from exc
    return written
