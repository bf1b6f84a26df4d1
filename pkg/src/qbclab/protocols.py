"""Concrete commitment protocols and cheating strategies.

Register naming: ``r{i}`` is Alice's randomness register for position ``i``,
``q{i}`` the qubit sent to Bob and ``t{i}`` Bob's basis-choice register.
Bases are encoded as bits: 0 for rectilinear (``+``), 1 for diagonal (``x``).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import core
from .core import Party
from .protocol import (
    Alloc,
    Execution,
    Gate,
    Measure,
    PartyView,
    Program,
    ProtocolSpec,
    SendBit,
    SendQubit,
    Sent,
    Strategy,
    UnveilResult,
)

MAX_POSITIONS = 16
BASIS_NAME = {0: "+", 1: "x"}


def _basis(bit: int) -> str:
    return BASIS_NAME[int(bit)]


# ------------------------------------------------------------------ BB84
#
# Programs use one segment per position, so Bob handles qubit i right after
# Alice prepares it. Actions on different positions commute, so the final
# state equals sending all qubits first, while the live vector stays small.


@dataclass(frozen=True)
class BB84Commitment:
    """Classical record of one BB84 commitment run."""

    n: int
    w: tuple[int, ...]
    theta: int | None
    theta_hat: tuple[int, ...]
    w_hat: tuple[int, ...]

    @classmethod
    def from_execution(cls, ex: Execution) -> "BB84Commitment":
        n = ex.spec.n
        a, b = ex.bits[Party.ALICE], ex.bits[Party.BOB]

        def grab(d, prefix):
            return tuple(d[f"{prefix}{i}"] for i in range(n) if isinstance(d.get(f"{prefix}{i}"), int))

        return cls(n, grab(a, "w"), ex.memory[Party.ALICE].get("b"), grab(b, "theta_hat"), grab(b, "w_hat"))


def bb84_decode(w: Sequence[int], w_hat: Sequence[int], theta_hat: Sequence[int]) -> UnveilResult:
    """Bob's rule: every position with ``w_i != w_hat_i`` reveals ``theta != theta_hat_i``."""
    if not len(w) == len(w_hat) == len(theta_hat):
        raise ValueError(f"length mismatch: {len(w)}, {len(w_hat)}, {len(theta_hat)}")
    inferred = {1 - th for wi, wh, th in zip(w, w_hat, theta_hat) if wi != wh}
    if len(inferred) != 1:
        return UnveilResult.BOTTOM
    return UnveilResult.of(inferred.pop())


class BB84Alice(Strategy):
    """Honest Alice. Each ``w_i`` comes from half of a Bell pair measured in basis ``theta(b)``."""

    party = Party.ALICE

    def __init__(self, n: int):
        self.n = n

    def commit(self, b: int) -> Program:
        theta = _basis(b)
        segments = []
        for i in range(self.n):
            r, q = f"r{i}", f"q{i}"
            segments.append([
                Alloc(r),
                Alloc(q),
                Gate(core.H, (r,), label="H"),
                Gate(core.CNOT, (r, q), label="CNOT"),
                Measure(r, f"w{i}", basis=theta),
                SendQubit(q),
            ])
        return Program(segments, {"b": b, "n": self.n})

    def unveil(self, view: PartyView, target: int | None) -> list:
        return [SendBit(f"w{i}") for i in range(self.n)]

    def __repr__(self):
        return f"BB84Alice(n={self.n})"


class BB84Bob(Strategy):
    """Honest Bob: random basis bit per position, then measures the received qubit in it."""

    party = Party.BOB

    def __init__(self, n: int):
        self.n = n

    def commit(self, b: int) -> Program:
        segments = []
        for i in range(self.n):
            t, q = f"t{i}", f"q{i}"
            segments.append([
                Alloc(t),
                Gate(core.H, (t,), label="H"),
                Measure(t, f"theta_hat{i}"),
                Gate(core.H, (q,), controls=(f"theta_hat{i}",), label="H"),
                Measure(q, f"w_hat{i}"),
            ])
        return Program(segments)

    def __repr__(self):
        return f"BB84Bob(n={self.n})"


def _bb84_rule(n: int):
    def decode(announced: tuple[int, ...], bob: Mapping[str, int]) -> UnveilResult:
        if len(announced) != n:
            return UnveilResult.BOTTOM
        w_hat = [bob[f"w_hat{i}"] for i in range(n)]
        theta_hat = [bob[f"theta_hat{i}"] for i in range(n)]
        return bb84_decode(announced, w_hat, theta_hat)

    return decode


def bb84_protocol(n: int) -> ProtocolSpec:
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_POSITIONS:
        raise ValueError(f"n must be an integer in [1, {MAX_POSITIONS}], got {n!r}")
    n = int(n)
    return ProtocolSpec(
        name="bb84",
        n=n,
        honest_alice=lambda: BB84Alice(n),
        honest_bob=lambda: BB84Bob(n),
        decode=_bb84_rule(n),
        # fully withheld runs keep three registers per position
        max_qubits=max(core.DEFAULT_MAX_QUBITS, min(3 * n, 20)),
        params={"n": n},
    )


class EPRAttack(Strategy):
    """Keeps the left half of each Bell pair; the basis is chosen only at unveil time."""

    party = Party.ALICE

    def __init__(self, n: int):
        self.n = n

    def commit(self, b: int) -> Program:
        segments = []
        for i in range(self.n):
            r, q = f"r{i}", f"q{i}"
            segments.append([Alloc(r), Alloc(q), Gate(core.H, (r,), label="H"),
                             Gate(core.CNOT, (r, q), label="CNOT"), SendQubit(q)])
        return Program(segments, {"n": self.n})

    def unveil(self, view: PartyView, target: int | None) -> list:
        theta = _basis(target or 0)
        acts = []
        for i in range(self.n):
            acts += [Measure(f"r{i}", f"w{i}", basis=theta), SendBit(f"w{i}")]
        return acts

    def __repr__(self):
        return f"EPRAttack(n={self.n})"


def epr_attack_strategy(n: int) -> EPRAttack:
    return EPRAttack(n)


class ClassicalGuess(BB84Alice):
    """Commits honestly to 0; to unveil 1 announces ``w`` with its first bit flipped."""

    def commit(self, b: int) -> Program:
        return super().commit(0)

    def unveil(self, view: PartyView, target: int | None) -> list:
        if not target:
            return super().unveil(view, target)
        return [SendBit("w0", flip=True)] + [SendBit(f"w{i}") for i in range(1, self.n)]

    def __repr__(self):
        return f"ClassicalGuess(n={self.n})"


def classical_guess_strategy(n: int) -> ClassicalGuess:
    return ClassicalGuess(n)


def classical_guess_success(n: int) -> float:
    """Closed form for :class:`ClassicalGuess`: position 1 needs ``theta_hat_1 = +``,
    every other position must show no disagreement."""
    return 0.5 * 0.75 ** (n - 1)


def optimal_announcement_success(n: int) -> float:
    """Best success of announcing a fixed string ``w'`` after an honest commit to 0.

    Exhaustive over Bob's ``(theta_hat, w_hat)`` and all ``2**n`` announcements;
    by symmetry it suffices to take ``w = 0...0``.
    """
    if n > 10:
        raise ValueError("exhaustive search is limited to n <= 10")
    w = (0,) * n
    # Bob's view for theta = +: w_hat_i = w_i when theta_hat_i = +, else uniform
    views = []
    for theta_hat in itertools.product((0, 1), repeat=n):
        free = [i for i in range(n) if theta_hat[i]]
        for bits in itertools.product((0, 1), repeat=len(free)):
            w_hat = list(w)
            for i, v in zip(free, bits):
                w_hat[i] = v
            views.append((theta_hat, tuple(w_hat), 0.5**n * 0.5 ** len(free)))
    best = 0.0
    for announced in itertools.product((0, 1), repeat=n):
        s = sum(p for th, wh, p in views if bb84_decode(announced, wh, th) is UnveilResult.ONE)
        best = max(best, s)
    return best


# ------------------------------------------------------------------ toy


@dataclass(frozen=True)
class ToyCommitment:
    """``b=0 -> |0>_A |0>_B``, ``b=1 -> |0>_A (cos a|0> + sin a|1>)_B``."""

    alpha: float

    def encoding(self, b: int) -> np.ndarray:
        return core.ry_rotation(self.alpha)[:, 0] if b else np.array([1.0, 0.0], dtype=complex)

    @property
    def fidelity(self) -> float:
        return abs(np.vdot(self.encoding(0), self.encoding(1)))


class ToyAlice(Strategy):
    party = Party.ALICE

    def __init__(self, alpha: float):
        self.alpha = alpha

    def commit(self, b: int) -> Program:
        seg = [Alloc("a"), Alloc("q")]
        if b:
            seg.append(Gate(core.ry_rotation(self.alpha), ("q",), label="R"))
        seg.append(SendQubit("q"))
        return Program([seg], {"b": b})

    def unveil(self, view: PartyView, target: int | None) -> list:
        return [SendBit(value=view.memory["b"])]

    def __repr__(self):
        return f"ToyAlice(alpha={self.alpha!r})"


class ToyBob(Strategy):
    """Checks the announced encoding with a projective measurement."""

    party = Party.BOB

    def __init__(self, alpha: float):
        self.alpha = alpha
        self._check = [Gate(core.ry_rotation(alpha).conj().T, ("q",), controls=(Sent(-1),), label="R^dag"),
                       Measure("q", "check")]

    def unveil(self, view: PartyView, target: int | None) -> list:
        return list(self._check)

    def __repr__(self):
        return f"ToyBob(alpha={self.alpha!r})"


def _toy_decode(announced: tuple[int, ...], bob: Mapping[str, int]) -> UnveilResult:
    if len(announced) != 1 or bob.get("check") != 0:
        return UnveilResult.BOTTOM
    return UnveilResult.of(announced[0])


def toy_protocol(alpha: float) -> ProtocolSpec:
    alpha = float(alpha)
    if not 0.0 <= alpha <= math.pi / 2 + 1e-15:
        raise ValueError(f"alpha must lie in [0, pi/2], got {alpha!r}")
    return ProtocolSpec(
        name="toy",
        n=1,
        honest_alice=lambda: ToyAlice(alpha),
        honest_bob=lambda: ToyBob(alpha),
        decode=_toy_decode,
        params={"alpha": alpha},
    )


FIXTURES = {"bb84": bb84_protocol, "toy": toy_protocol}
