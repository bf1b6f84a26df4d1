import math
from collections import Counter

import numpy as np
import pytest

from qbclab import core
from qbclab.attack import PurificationAttack, commit_prime
from qbclab.core import Party, ResourceCapError
from qbclab.protocol import (
    Alloc,
    Gate,
    Idle,
    Measure,
    Program,
    ProtocolSpec,
    ProtocolViolation,
    SendBit,
    SendQubit,
    Sent,
    Simulation,
    Strategy,
    UnveilResult,
    Withheld,
)
from qbclab.protocols import BB84Alice, BB84Bob, ClassicalGuess, EPRAttack, bb84_protocol, toy_protocol

RUNS = 4000


def joint_exact(sim, b, target):
    dist = Counter()
    for leaf in sim.outcome_branches(b, target):
        dist[(leaf.gamma, leaf.result)] += leaf.probability
    return dist


def assert_matches(sim, b, target, seed=0):
    exact = joint_exact(sim, b, target)
    runs = sim.sample_runs(b, np.random.default_rng(seed), RUNS, target)
    seen = Counter(zip(runs.gamma, runs.result))
    assert set(seen) <= {k for k, p in exact.items() if p > 0}
    for key, p in exact.items():
        sigma = math.sqrt(p * (1 - p) / RUNS)
        assert abs(seen[key] / RUNS - p) <= 4 * sigma + 1e-12, key


CASES = {
    "honest-bb84": lambda: (bb84_protocol(3), BB84Alice(3), BB84Bob(3), 1, 1),
    "classical-cheat": lambda: (bb84_protocol(3), ClassicalGuess(3), BB84Bob(3), 0, 1),
    "epr": lambda: (bb84_protocol(2), EPRAttack(2), BB84Bob(2), 0, 0),
    "purification-bb84": lambda: (bb84_protocol(2), PurificationAttack(bb84_protocol(2)), BB84Bob(2), 0, 1),
    "purification-toy": lambda: (toy_protocol(1.0), PurificationAttack(toy_protocol(1.0)),
                                 toy_protocol(1.0).honest_bob(), 0, 1),
    "withheld-honest": lambda: (bb84_protocol(2), commit_prime(bb84_protocol(2), 1), BB84Bob(2), 1, 1),
    "withheld-bob": lambda: (bb84_protocol(2), BB84Alice(2), Withheld(BB84Bob(2)), 0, 0),
}


@pytest.mark.parametrize("case", sorted(CASES))
def test_distribution_matches_enumeration(case):
    spec, alice, bob, b, target = CASES[case]()
    assert_matches(Simulation(spec, alice, bob), b, target)


def _first_bit(announced, bob):
    return UnveilResult.of(announced[0]) if announced else UnveilResult.BOTTOM


class Coin(Strategy):
    """Sends a coin, then flips a second register only when the public coin is 1."""

    party = Party.ALICE

    def commit(self, b):
        return Program([[Alloc("c"), Gate(core.H, ("c",)), Measure("c", "k"), SendBit("k"), Alloc("d"),
                         Gate(core.X, ("d",), controls=(Sent(0),)), Measure("d", "e"), SendBit("e", flip=True)]])

    def unveil(self, view, target):
        # the action list depends on the run, so runs split into groups
        return [SendBit(value=view.bits["k"])]


def test_classical_controls_and_grouping():
    spec = ProtocolSpec("coin", 1, Coin, Idle, _first_bit)
    sim = Simulation(spec, Coin(), Idle())
    runs = sim.sample_runs(0, np.random.default_rng(1), 500)
    for gamma, result in zip(runs.gamma, runs.result):
        k, e_flipped = gamma[0][1], gamma[1][1]
        assert e_flipped == 1 - k
        assert result is UnveilResult.of(k)
    np.testing.assert_allclose(runs.probability, 0.5)
    assert_matches(sim, 0, None)


def test_same_seed_same_runs():
    spec = bb84_protocol(3)
    sim = Simulation(spec, BB84Alice(3), BB84Bob(3))
    a = sim.sample_runs(1, np.random.default_rng(9), 300, 1)
    b = sim.sample_runs(1, np.random.default_rng(9), 300, 1)
    assert a.gamma == b.gamma and a.result == b.result
    assert len(a) == 300


def test_zero_runs():
    sim = Simulation(bb84_protocol(1), BB84Alice(1), BB84Bob(1))
    assert len(sim.sample_runs(0, np.random.default_rng(0), 0)) == 0
    with pytest.raises(ValueError):
        sim.sample_runs(0, np.random.default_rng(0), -1)


class Rogue(Strategy):
    party = Party.ALICE

    def __init__(self, segments):
        self.segments = segments

    def commit(self, b):
        return Program(self.segments)


@pytest.mark.parametrize("segments,error", [
    ([[Alloc("a"), SendQubit("a"), Gate(core.X, ("a",))]], ProtocolViolation),
    ([[Alloc("a"), Alloc("a")]], ProtocolViolation),
    ([[Alloc("a"), Measure("a", "k"), Gate(core.X, ("a",))]], ProtocolViolation),
    ([[Alloc("a"), Gate(core.X, ("a",), controls=(Sent(3),))]], ProtocolViolation),
    ([[Alloc(f"r{i}") for i in range(17)]], ResourceCapError),
])
def test_errors_match_scalar_interpreter(segments, error):
    spec = ProtocolSpec("rogue", 1, Idle, Idle, _first_bit)
    sim = Simulation(spec, Rogue(segments), Idle())
    with pytest.raises(error):
        sim.sample(0, np.random.default_rng(0))
    with pytest.raises(error):
        sim.sample_runs(0, np.random.default_rng(0), 5)
