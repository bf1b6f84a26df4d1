"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line with its wall time; the lines are printed
at the end of a pytest session (see conftest.py) or when this file is run
directly with ``python3 tests/test_acceptance.py``.
"""
import functools
import math
import sys
import time
import traceback

import numpy as np

from oracles import best_purification_overlap, dense_reduction, random_bipartite, random_unitary
from qbclab import core, spectral
from qbclab.attack import PurificationAttack, exact_attack_report, fidelity_audit, mc_attack_report, sample_attack
from qbclab.core import Owner
from qbclab.harness import ExperimentConfig, report_csv, report_json, run_experiment
from qbclab.protocol import Idle, Simulation, UnveilResult, concealment_report
from qbclab.protocols import BB84Bob, ClassicalGuess, EPRAttack, bb84_protocol, classical_guess_success, toy_protocol

TRIALS = 10_000
SIGMAS = 4.0
ALPHAS = [0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8, math.pi / 2]

RESULTS: list[str] = []


def criterion(number: int, title: str, limit: float):
    """Time the check, fail it when over ``limit`` seconds, and log one summary line."""

    def wrap(fn):
        @functools.wraps(fn)
        def run():
            start = time.perf_counter()
            error = None
            try:
                fn()
            except BaseException as exc:
                error = exc
            took = time.perf_counter() - start
            if error is None and took > limit:
                error = AssertionError(f"took {took:.1f}s, limit {limit:g}s")
            verdict = "PASS" if error is None else "FAIL"
            line = f"[{verdict}] criterion {number}: {title} ({took:.2f}s / {limit:g}s)"
            if error is not None:
                line += f" -- {type(error).__name__}: {error}"
            RESULTS.append(line)
            if error is not None:
                raise error

        return run

    return wrap


def band(p: float, trials: int) -> float:
    # a rate of exactly 0 or 1 has no binomial spread; fall back to one count
    return max(math.sqrt(p * (1 - p) / trials), 1.0 / trials)


@criterion(1, "BB84 concealment for n=1..6", 10)
def test_bb84_concealment():
    for n in range(1, 7):
        spec = bb84_protocol(n)
        rep = concealment_report(spec, spec.honest_alice(), Idle())
        assert rep.trace_distance <= 1e-12, (n, rep.trace_distance)
        f = fidelity_audit(spec)
        assert abs(f - 1) <= 1e-9, (n, f)


@criterion(2, "honest BB84 never decodes the wrong bit; Pr[bottom] = (3/4)^n", 10)
def test_honest_correctness():
    for n in range(1, 5):
        spec = bb84_protocol(n)
        for b in (0, 1):
            sim = Simulation(spec, spec.honest_alice(), spec.honest_bob())
            bottom = 0.0
            for leaf in sim.outcome_branches(b, b):
                assert leaf.result is not UnveilResult.of(1 - b), (n, b, leaf.gamma)
                bottom += leaf.probability * (leaf.result is UnveilResult.BOTTOM)
            assert abs(bottom - 0.75**n) <= 1e-12, (n, b, bottom)


@criterion(3, "classical cheat succeeds with (1/2)(3/4)^(n-1)", 60)
def test_classical_cheat():
    for n in range(1, 9):
        closed = 0.5 * 0.75 ** (n - 1)
        assert abs(classical_guess_success(n) - closed) <= 1e-15
        sim = Simulation(bb84_protocol(n), ClassicalGuess(n), BB84Bob(n))
        if n <= 4:
            got = sim.outcome_distribution(0, 1)[UnveilResult.ONE]
            assert abs(got - closed) <= 1e-12, (n, got)
        runs = sim.sample_runs(0, np.random.default_rng([3, n]), TRIALS, 1)
        rate = runs.count(UnveilResult.ONE) / TRIALS
        assert abs(rate - closed) <= SIGMAS * band(closed, TRIALS), (n, rate, closed)


@criterion(4, "EPR attack decodes as chosen whenever Bob decides", 60)
def test_epr_attack():
    for n in range(1, 5):
        sim = Simulation(bb84_protocol(n), EPRAttack(n), BB84Bob(n))
        for target in (0, 1):
            dist = sim.outcome_distribution(0, target)
            assert dist[UnveilResult.of(1 - target)] == 0.0, (n, target)
            assert dist[UnveilResult.of(target)] > 0
    n = 6
    sim = Simulation(bb84_protocol(n), EPRAttack(n), BB84Bob(n))
    for target in (0, 1):
        runs = sim.sample_runs(0, np.random.default_rng([4, target]), TRIALS, target)
        decided = TRIALS - runs.count(UnveilResult.BOTTOM)
        assert decided > 0
        assert runs.count(UnveilResult.of(target)) == decided, (target, runs.count(UnveilResult.of(1 - target)))


@criterion(5, "generic attack on BB84: F'=1, identity steering, certain decoding", 60)
def test_generic_attack_bb84():
    for n in range(1, 5):
        spec = bb84_protocol(n)
        attack = PurificationAttack(spec)
        for gamma in attack.states(0):
            plan = attack.plan(gamma)
            assert abs(plan.fidelity - 1) <= 1e-9, (n, plan.fidelity)
            assert plan.identity_deviation <= 1e-8, (n, plan.identity_deviation)
        rep = exact_attack_report(spec, attack=attack)
        assert abs(rep.conditional_success - 1) <= 1e-12, (n, rep.conditional_success)
        assert rep.bound_satisfied


@criterion(6, "toy fixture: audit, partner overlap and success track cos(alpha)", 60)
def test_toy_fixture():
    for i, alpha in enumerate(ALPHAS):
        spec = toy_protocol(alpha)
        attack = PurificationAttack(spec)
        c = math.cos(alpha)
        f = fidelity_audit(spec)
        assert abs(f - c) <= 1e-9, (alpha, f)
        plan = attack.plan(())
        assert abs(plan.partner_overlap - c) <= 1e-9, (alpha, plan.partner_overlap)
        tally = sample_attack(spec, np.random.default_rng([6, i]), TRIALS, attack=attack)
        rep = mc_attack_report(spec, tally, SIGMAS, attack=attack)
        tol = SIGMAS * band(c * c, TRIALS)
        assert abs(rep.expected_success - c * c) <= tol, (alpha, rep.expected_success)
        assert rep.expected_success >= plan.fidelity**2 - tol, (alpha, rep.expected_success)


@criterion(7, "spectral routines on 100 random bipartite states", 60)
def test_spectral_properties():
    rng = np.random.default_rng(2024)
    for i in range(100):
        ka, kb = (int(k) for k in rng.integers(1, 4, size=2))
        psi = random_bipartite(rng, ka, kb)
        side = psi.registers_of(Owner.A)

        d = spectral.schmidt(psi, side)
        assert np.max(np.abs(d.reconstruct() - psi.amplitudes)) <= 1e-10, i
        for regs in (d.left_registers, d.right_registers):
            ev = np.sort(np.linalg.eigvalsh(dense_reduction(psi, regs)))[::-1]
            padded = np.zeros(len(ev))
            padded[: len(d.eigenvalues)] = d.eigenvalues
            assert np.max(np.abs(ev - padded)) <= 1e-9, i

        other = random_bipartite(rng, ka, kb)
        both = [Owner.A, Owner.B]
        f = spectral.fidelity(core.partial_trace(psi, both), core.partial_trace(other, both))
        assert abs(f - abs(core.overlap(psi, other))) <= 1e-9, i

        partner, _ = spectral.closest_purification(psi, other, side)
        brute = best_purification_overlap(psi, other, side, restarts=1)
        assert abs(abs(core.overlap(partner, other)) - brute) <= 1e-6, (i, brute)

        moved = core.apply_unitary(psi, core.Unitary(random_unitary(rng, 2**ka), side))
        u = spectral.steering_unitary(psi, moved, side)
        assert np.max(np.abs(core.apply_unitary(psi, u).amplitudes - moved.amplitudes)) <= 1e-8, i


@criterion(8, "same seed gives byte-identical reports, serial or parallel", 60)
def test_determinism():
    cfg = dict(task="attack", fixture="bb84", sweep=(6,), trials=TRIALS, seed=7, mode="montecarlo")
    first = run_experiment(ExperimentConfig(**cfg))
    second = run_experiment(ExperimentConfig(**cfg))
    parallel = run_experiment(ExperimentConfig(**cfg, workers=2))
    assert report_json(first) == report_json(second) == report_json(parallel)
    assert report_csv(first) == report_csv(second) == report_csv(parallel)


CRITERIA = [
    test_bb84_concealment,
    test_honest_correctness,
    test_classical_cheat,
    test_epr_attack,
    test_generic_attack_bb84,
    test_toy_fixture,
    test_spectral_properties,
    test_determinism,
]


def main() -> int:
    failed = 0
    for check in CRITERIA:
        try:
            check()
        except BaseException:
            failed += 1
            traceback.print_exc(limit=3)
    print("\n".join(RESULTS))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
