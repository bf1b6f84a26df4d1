"""Two-party protocol execution over a shared global pure state.

A party strategy emits *programs*: static lists of actions on its own
registers. Classical dependence is expressed through controls on bit keys
(the party's own measurement results) or :class:`Sent` references to
public bits, so that the same program can be run either honestly, where
measurements collapse the state, or in *withholding* mode, where
measurements are deferred: the register stays with the party, carrying a
pending basis, and classical controls on it become coherent controls.

The interpreter forks at every measurement, so one routine both samples
runs (driven by a random stream) and enumerates every branch with its
exact probability.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

from . import core
from .core import (
    ClassicalTranscript,
    Owner,
    Party,
    PureState,
    QBCError,
    ResourceCapError,
    Unitary,
    transmit_classical,
)
from .spectral import fidelity, trace_distance

DEFAULT_MAX_BRANCHES = 2**20
ZERO_PROBABILITY = 1e-14

BASES = {"+": core.I2, "x": core.H}
_ADJOINT = {k: v.conj().T.copy() for k, v in BASES.items()}


class ProtocolViolation(QBCError):
    """A strategy acted outside its own registers or bits."""

    def __init__(self, party: Party, message: str):
        super().__init__(f"{party.name}: {message}")
        self.party = party


class PhaseError(QBCError):
    """Operation used in the wrong protocol phase."""


class UnveilResult(enum.Enum):
    ZERO = "0"
    ONE = "1"
    BOTTOM = "⊥"

    @classmethod
    def of(cls, bit: int) -> "UnveilResult":
        return cls.ONE if bit else cls.ZERO

    @property
    def bit(self) -> int | None:
        return None if self is UnveilResult.BOTTOM else int(self.value)


# ---------------------------------------------------------------- actions


@dataclass(frozen=True)
class Sent:
    """Reference to public bit ``xi_S[index]`` (negative indices allowed)."""

    index: int


@dataclass(frozen=True)
class Alloc:
    register: str

    def signature(self):
        return ("alloc", self.register)


@dataclass(frozen=True, eq=False)
class Gate:
    matrix: np.ndarray
    targets: tuple[str, ...]
    controls: tuple = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "controls", tuple(self.controls))
        # validates unitarity once, at program construction
        u = Unitary(self.matrix, self.targets)
        object.__setattr__(self, "matrix", u.matrix)

    def signature(self):
        digest = np.round(self.matrix, 12).tobytes()
        return ("gate", self.label, self.targets, self.controls, digest)


@dataclass(frozen=True)
class Measure:
    register: str
    key: str
    basis: str = "+"

    def signature(self):
        return ("measure", self.register, self.key, self.basis)


@dataclass(frozen=True)
class SendBit:
    """Transmit an own bit (``key``, optionally flipped) or a constant ``value``."""

    key: str | None = None
    value: int | None = None
    flip: bool = False

    def signature(self):
        return ("send-bit", self.key, self.value, self.flip)


@dataclass(frozen=True)
class SendQubit:
    register: str

    def signature(self):
        return ("send-qubit", self.register)


@dataclass(frozen=True)
class Resolve:
    """Force the measurement of a withheld bit."""

    key: str

    def signature(self):
        return ("resolve", self.key)


@dataclass(frozen=True)
class Rebind:
    """Re-label withheld bits with new pending bases and replace private memory.

    Pure bookkeeping: no quantum operation happens.
    """

    bases: tuple[tuple[str, str], ...] = ()
    memory: tuple[tuple[str, object], ...] = ()

    def signature(self):
        return ("rebind", self.bases, tuple(k for k, _ in self.memory))


Action = Alloc | Gate | Measure | SendBit | SendQubit | Resolve | Rebind


@dataclass
class Program:
    """Commit program of one party: alternating segments plus private memory."""

    segments: list[list[Action]] = field(default_factory=list)
    memory: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Pending:
    register: str
    basis: str


@dataclass(frozen=True)
class PartyView:
    """What a party can see when it plans its unveil actions."""

    party: Party
    xi_S: tuple[int, ...]
    senders: tuple[Party, ...]
    commit_length: int
    bits: Mapping[str, int]
    pending: Mapping[str, Pending]
    memory: Mapping
    registers: tuple[str, ...]

    @property
    def gamma(self) -> tuple:
        return tuple(zip((s.value for s in self.senders[:self.commit_length]), self.xi_S[:self.commit_length]))


class Strategy:
    """Base strategy: does nothing. Subclasses override :meth:`commit` and :meth:`unveil`."""

    party: Party = Party.ALICE
    withhold: bool = False

    def commit(self, b: int) -> Program:
        return Program()

    def unveil(self, view: PartyView, target: int | None) -> list[Action]:
        return []

    def __repr__(self):
        return f"{type(self).__name__}()"


class Idle(Strategy):
    """Party that only receives; no actions in either phase."""

    def __init__(self, party: Party = Party.BOB):
        self.party = party


class Withheld(Strategy):
    """The same programs as ``base``, but measurements are kept in the party's system.

    Honest measurement results that must be transmitted are still measured at
    the moment of transmission. ``bit`` pins the committed value.
    """

    withhold = True

    def __init__(self, base: Strategy, bit: int | None = None):
        self.base = base
        self.party = base.party
        self.bit = bit

    def commit(self, b: int) -> Program:
        return self.base.commit(self.bit if self.bit is not None else b)

    def unveil(self, view: PartyView, target: int | None) -> list[Action]:
        return self.base.unveil(view, target)

    def __repr__(self):
        return f"Withheld({self.base!r}, bit={self.bit})"


@dataclass(frozen=True)
class ProtocolSpec:
    """A commitment protocol: honest strategy factories and Bob's decode rule.

    ``decode(announced, bob_bits)`` maps Alice's unveil messages and Bob's
    measurement results to an :class:`UnveilResult`.
    """

    name: str
    n: int
    honest_alice: Callable[[], Strategy]
    honest_bob: Callable[[], Strategy]
    decode: Callable[[tuple[int, ...], Mapping[str, int]], UnveilResult]
    max_qubits: int = core.DEFAULT_MAX_QUBITS
    max_branches: int = DEFAULT_MAX_BRANCHES
    params: Mapping = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Execution:
    """Immutable snapshot of one branch after the commit or unveil phase."""

    spec: ProtocolSpec
    state: PureState
    transcript: ClassicalTranscript
    bits: Mapping[Party, Mapping]
    memory: Mapping[Party, Mapping]
    phase: str
    commit_length: int
    log: tuple = ()
    result: UnveilResult | None = None
    # measured register -> (outcome, basis), for every measurement in this branch
    outcomes: Mapping[str, tuple[int, str]] = MappingProxyType({})

    @property
    def probability(self) -> float:
        return self.transcript.branch_probability

    @property
    def gamma(self) -> tuple:
        t = self.transcript
        n = self.commit_length
        return tuple(zip((s.value for s in t.senders[:n]), t.xi_S[:n]))

    def retained(self, party: Party) -> tuple[str, ...]:
        return self.state.registers_of(party.owner)

    def view(self, party: Party) -> PartyView:
        own = self.bits[party]
        return PartyView(
            party=party,
            xi_S=self.transcript.xi_S,
            senders=self.transcript.senders,
            commit_length=self.commit_length,
            bits=MappingProxyType({k: v for k, v in own.items() if isinstance(v, int)}),
            pending=MappingProxyType({k: v for k, v in own.items() if isinstance(v, Pending)}),
            memory=MappingProxyType(dict(self.memory[party])),
            registers=self.retained(party),
        )


# ------------------------------------------------------------ interpreter


class _Branch:
    __slots__ = ("state", "transcript", "bits", "memory", "locked", "log", "outcomes")

    def __init__(self, state, transcript, bits, memory, locked, log, outcomes):
        self.state = state
        self.outcomes = outcomes
        self.transcript = transcript
        self.bits = bits
        self.memory = memory
        self.locked = locked
        self.log = log

    def fork(self) -> "_Branch":
        return _Branch(self.state, self.transcript,
                       {p: dict(d) for p, d in self.bits.items()},
                       {p: dict(d) for p, d in self.memory.items()},
                       set(self.locked),
                       None if self.log is None else list(self.log), dict(self.outcomes))


def _check_own(br: _Branch, party: Party, register: str, action) -> None:
    state = br.state
    try:
        owner = state.owners[state.registers.index(register)]
    except ValueError:
        try:
            state.index(register)
        except core.RegisterError as exc:
            raise ProtocolViolation(party, f"{type(action).__name__} on {register!r}: {exc}") from None
    if owner is not _OWNER[party]:
        raise ProtocolViolation(party, f"{type(action).__name__} touches {register!r} owned by {owner.value}")
    if register in br.locked:
        raise ProtocolViolation(party, f"{register!r} holds a withheld measurement result and is read-only")


_OWNER = {Party.ALICE: Owner.A, Party.BOB: Owner.B}
_OTHER_OWNER = {Party.ALICE: Owner.B, Party.BOB: Owner.A}


def _project(br: _Branch, register: str, basis: str, rng):
    """Measure ``register`` in ``basis``; returns [(outcome, p, post_state)] for realized outcomes."""
    state = br.state
    if basis != "+":
        state = core.apply_matrix(state, (register,), _ADJOINT[basis])
    if rng is not None:
        return [core.collapse(state, register, rng.random())]
    p0, p1 = core.outcome_probabilities(state, register)
    out = []
    for outcome, p in ((0, p0), (1, p1)):
        if p > ZERO_PROBABILITY:
            p_exact, post = core.project(state, register, outcome)
            out.append((outcome, p_exact, post))
    return out


def _fork_all(br: _Branch, outcomes: list) -> list:
    if len(outcomes) == 1:
        return [(outcomes[0], br)]
    # copies are taken before ``br`` itself is reused for the last outcome
    copies = [br.fork() for _ in outcomes[1:]] + [br]
    return list(zip(outcomes, copies))


def _control_value(br: _Branch, party: Party, ref):
    if type(ref) is Sent:
        try:
            return br.transcript.xi_S[ref.index]
        except IndexError:
            raise ProtocolViolation(party, f"no public bit at {ref}") from None
    try:
        return br.bits[party][ref]
    except KeyError:
        raise ProtocolViolation(party, f"unknown bit key {ref!r}") from None


def _do_gate(br, party, act, withhold, spec, rng):
    for t in act.targets:
        _check_own(br, party, t, act)
    quantum: list[Pending] = []
    for ref in act.controls:
        v = _control_value(br, party, ref)
        if type(v) is Pending:
            quantum.append(v)
        elif v == 0:
            return None
    if not quantum:
        br.state = core.apply_matrix(br.state, act.targets, act.matrix)
        return None
    ctrl_regs = tuple(p.register for p in quantum)
    if set(ctrl_regs) & set(act.targets):
        raise ProtocolViolation(party, "a gate cannot target its own control")
    state = br.state
    for p in quantum:
        if p.basis != "+":
            state = core.apply_matrix(state, (p.register,), _ADJOINT[p.basis])
    u = core.controlled(act.matrix, len(quantum))
    state = core.apply_matrix(state, ctrl_regs + act.targets, u)
    for p in quantum:
        if p.basis != "+":
            state = core.apply_matrix(state, (p.register,), BASES[p.basis])
    br.state = state
    return None


def _do_alloc(br, party, act, withhold, spec, rng):
    try:
        br.state = core.allocate(br.state, act.register, _OWNER[party], max_qubits=spec.max_qubits)
    except core.RegisterError as exc:
        raise ProtocolViolation(party, str(exc)) from None
    return None


def _do_measure(br, party, act, withhold, spec, rng):
    _check_own(br, party, act.register, act)
    own = br.bits[party]
    if act.key in own:
        raise ProtocolViolation(party, f"bit key {act.key!r} already used")
    if withhold:
        own[act.key] = Pending(act.register, act.basis)
        br.locked.add(act.register)
        return None
    forks = []
    for (outcome, p, post), nb in _fork_all(br, _project(br, act.register, act.basis, rng)):
        nb.state = post
        nb.transcript = nb.transcript.record(party, outcome, p)
        nb.bits[party][act.key] = outcome
        nb.outcomes[act.register] = (outcome, act.basis)
        forks.append((p, nb))
    return forks


def _do_send_qubit(br, party, act, withhold, spec, rng):
    _check_own(br, party, act.register, act)
    br.state = br.state.with_owner(act.register, _OTHER_OWNER[party])
    return None


def _do_send_bit(br, party, act, withhold, spec, rng):
    if act.key is None:
        if act.value not in (0, 1):
            raise ProtocolViolation(party, "SendBit needs a key or a constant bit")
        br.transcript = transmit_classical(br.transcript, party, act.value)
        return None
    v = _control_value(br, party, act.key)
    if type(v) is not Pending:
        br.transcript = transmit_classical(br.transcript, party, v ^ int(act.flip))
        return None
    # withheld result that must be transmitted: measured straight into H_S
    forks = []
    for (outcome, p, post), nb in _fork_all(br, _project(br, v.register, v.basis, rng)):
        nb.state = post
        nb.locked.discard(v.register)
        nb.bits[party][act.key] = outcome
        nb.outcomes[v.register] = (outcome, v.basis)
        nb.transcript = transmit_classical(nb.transcript.with_probability(p), party, outcome ^ int(act.flip))
        forks.append((p, nb))
    return forks


def _do_resolve(br, party, act, withhold, spec, rng):
    v = _control_value(br, party, act.key)
    if type(v) is not Pending:
        return None
    forks = []
    for (outcome, p, post), nb in _fork_all(br, _project(br, v.register, v.basis, rng)):
        nb.state = post
        nb.locked.discard(v.register)
        nb.bits[party][act.key] = outcome
        nb.outcomes[v.register] = (outcome, v.basis)
        nb.transcript = nb.transcript.record(party, outcome, p)
        forks.append((p, nb))
    return forks


def _do_rebind(br, party, act, withhold, spec, rng):
    own = br.bits[party]
    for key, basis in act.bases:
        v = own.get(key)
        if type(v) is not Pending:
            raise ProtocolViolation(party, f"can only rebind withheld bits, {key!r} is {v!r}")
        if br.state.owner_of(v.register) is not _OWNER[party]:
            raise ProtocolViolation(party, f"{v.register!r} is not held by {party.name}")
        if basis not in BASES:
            raise ProtocolViolation(party, f"unknown basis {basis!r}")
        own[key] = Pending(v.register, basis)
    br.memory[party].update(dict(act.memory))
    return None


_HANDLERS = {
    Gate: _do_gate,
    Alloc: _do_alloc,
    Measure: _do_measure,
    SendQubit: _do_send_qubit,
    SendBit: _do_send_bit,
    Resolve: _do_resolve,
    Rebind: _do_rebind,
}


def _step(br: _Branch, party: Party, act, withhold: bool, spec: ProtocolSpec, rng):
    """Execute one action. Returns None when deterministic (``br`` updated in place),
    otherwise a list of ``(probability, branch)`` forks. With ``rng`` set exactly one
    fork is drawn at each measurement."""
    if br.log is not None:
        tag = None
        if type(act) is Measure:
            tag = party.owner.value if withhold else party.owner.environment.value
        br.log.append((party.value, act.signature(), tag))
    handler = _HANDLERS.get(type(act))
    if handler is None:
        raise TypeError(f"unknown action {act!r}")
    return handler(br, party, act, withhold, spec, rng)


def _explore(start: _Branch, actions: Sequence, withhold: Mapping[Party, bool], spec: ProtocolSpec,
             rng: np.random.Generator | None, limit: int) -> list[_Branch]:
    """Run ``actions`` from ``start``; sample one path if ``rng`` is given, else enumerate all."""
    leaves = []
    stack = [(start, 0)]
    n = len(actions)
    while stack:
        br, i = stack.pop()
        while i < n:
            party, act = actions[i]
            forks = _step(br, party, act, withhold[party], spec, rng)
            i += 1
            if forks is None:
                continue
            br = forks[0][1]
            for _, other in reversed(forks[1:]):
                stack.append((other, i))
        leaves.append(br)
        if len(leaves) + len(stack) > limit:
            raise ResourceCapError(
                f"branch enumeration exceeds max_branches={limit}; use Monte Carlo sampling instead")
    return leaves


def _interleave(pa: Program, pb: Program) -> list:
    flat = []
    for i in range(max(len(pa.segments), len(pb.segments))):
        if i < len(pa.segments):
            flat.extend((Party.ALICE, a) for a in pa.segments[i])
        if i < len(pb.segments):
            flat.extend((Party.BOB, a) for a in pb.segments[i])
    return flat


class Simulation:
    """A protocol paired with concrete strategies; caches compiled commit programs."""

    def __init__(self, spec: ProtocolSpec, alice: Strategy, bob: Strategy, record_log: bool = False):
        if alice.party is not Party.ALICE or bob.party is not Party.BOB:
            raise ValueError("strategies passed in the wrong seats")
        self.spec = spec
        self.alice = alice
        self.bob = bob
        self.record_log = record_log
        self._compiled: dict[int, tuple] = {}

    def _compiled_commit(self, b: int):
        if b not in (0, 1):
            raise ValueError(f"b must be a bit, got {b!r}")
        if b not in self._compiled:
            pa, pb = self.alice.commit(b), self.bob.commit(b)
            self._compiled[b] = (_interleave(pa, pb), dict(pa.memory), dict(pb.memory))
        return self._compiled[b]

    def _start(self, b: int) -> tuple[_Branch, list]:
        actions, mem_a, mem_b = self._compiled_commit(b)
        br = _Branch(core.zero_state(0), ClassicalTranscript(),
                     {Party.ALICE: {}, Party.BOB: {}},
                     {Party.ALICE: dict(mem_a), Party.BOB: dict(mem_b)},
                     set(), [] if self.record_log else None, {})
        return br, actions

    def _withhold(self):
        return {Party.ALICE: self.alice.withhold, Party.BOB: self.bob.withhold}

    def _freeze(self, br: _Branch, phase: str, commit_length: int, result=None) -> Execution:
        return Execution(
            spec=self.spec,
            state=br.state,
            transcript=br.transcript,
            bits=MappingProxyType({p: MappingProxyType(dict(d)) for p, d in br.bits.items()}),
            memory=MappingProxyType({p: MappingProxyType(dict(d)) for p, d in br.memory.items()}),
            phase=phase,
            commit_length=commit_length,
            log=tuple(br.log) if br.log is not None else (),
            result=result,
            outcomes=MappingProxyType(dict(br.outcomes)),
        )

    # commit phase

    def commit_branches(self, b: int) -> list[Execution]:
        br, actions = self._start(b)
        leaves = _explore(br, actions, self._withhold(), self.spec, None, self.spec.max_branches)
        return [self._freeze(x, "post-commit", len(x.transcript.xi_S)) for x in leaves]

    def sample_commit(self, b: int, rng: np.random.Generator) -> Execution:
        br, actions = self._start(b)
        (leaf,) = _explore(br, actions, self._withhold(), self.spec, rng, 1)
        return self._freeze(leaf, "post-commit", len(leaf.transcript.xi_S))

    # unveil phase

    def _unveil_actions(self, ex: Execution, target: int | None) -> list:
        if ex.phase != "post-commit":
            raise PhaseError(f"unveil needs a post-commit execution, got phase {ex.phase!r}")
        acts = [(Party.ALICE, a) for a in self.alice.unveil(ex.view(Party.ALICE), target)]
        pending_b = sorted(k for k, v in ex.bits[Party.BOB].items() if isinstance(v, Pending))
        acts += [(Party.BOB, Resolve(k)) for k in pending_b]
        acts += [(Party.BOB, a) for a in self.bob.unveil(ex.view(Party.BOB), None)]
        return acts

    def _branch_of(self, ex: Execution) -> _Branch:
        return _Branch(ex.state, ex.transcript,
                       {p: dict(d) for p, d in ex.bits.items()},
                       {p: dict(d) for p, d in ex.memory.items()},
                       # withheld registers are read-only during commit only; unveil may act on them
                       set(),
                       list(ex.log) if self.record_log else None, dict(ex.outcomes))

    def _decode(self, ex: Execution, br: _Branch) -> UnveilResult:
        t = br.transcript
        announced = tuple(bit for bit, s in zip(t.xi_S[ex.commit_length:], t.senders[ex.commit_length:])
                          if s is Party.ALICE)
        bob_bits = {k: v for k, v in br.bits[Party.BOB].items() if isinstance(v, int)}
        return self.spec.decode(announced, MappingProxyType(bob_bits))

    def unveil_branches(self, ex: Execution, target: int | None = None) -> list[Execution]:
        acts = self._unveil_actions(ex, target)
        honest = {Party.ALICE: False, Party.BOB: False}
        leaves = _explore(self._branch_of(ex), acts, honest, self.spec, None, self.spec.max_branches)
        return [self._freeze(x, "post-unveil", ex.commit_length, self._decode(ex, x)) for x in leaves]

    def sample_unveil(self, ex: Execution, rng: np.random.Generator, target: int | None = None) -> Execution:
        acts = self._unveil_actions(ex, target)
        honest = {Party.ALICE: False, Party.BOB: False}
        (leaf,) = _explore(self._branch_of(ex), acts, honest, self.spec, rng, 1)
        return self._freeze(leaf, "post-unveil", ex.commit_length, self._decode(ex, leaf))

    # whole protocol

    def outcome_branches(self, b: int, target: int | None = None) -> list[Execution]:
        out = []
        for ex in self.commit_branches(b):
            out.extend(self.unveil_branches(ex, target))
        return out

    def outcome_distribution(self, b: int, target: int | None = None) -> dict[UnveilResult, float]:
        dist = {r: 0.0 for r in UnveilResult}
        for ex in self.outcome_branches(b, target):
            dist[ex.result] += ex.probability
        return dist

    def sample(self, b: int, rng: np.random.Generator, target: int | None = None) -> Execution:
        return self.sample_unveil(self.sample_commit(b, rng), rng, target)

    def sample_runs(self, b: int, rng: np.random.Generator, runs: int, target: int | None = None):
        """Many independent samples at once (vectorized); returns per-run ``gamma`` and verdicts."""
        from .batch import sample_runs

        return sample_runs(self, b, rng, runs, target)


# ------------------------------------------------------- functional surface


def run_commit(spec: ProtocolSpec, alice: Strategy, bob: Strategy, b: int,
               randomness: np.random.Generator) -> Execution:
    return Simulation(spec, alice, bob).sample_commit(b, randomness)


def run_unveil(execution: Execution, alice: Strategy, bob: Strategy, randomness: np.random.Generator,
               target: int | None = None) -> UnveilResult:
    return Simulation(execution.spec, alice, bob).sample_unveil(execution, randomness, target).result


def enumerate_branches(spec: ProtocolSpec, alice: Strategy, bob: Strategy,
                       b: int) -> list[tuple[ClassicalTranscript, Execution]]:
    """Every post-commit branch with its transcript; probabilities sum to one."""
    return [(ex.transcript, ex) for ex in Simulation(spec, alice, bob).commit_branches(b)]


def bob_view(spec: ProtocolSpec, alice: Strategy, bob: Strategy, b: int) -> dict:
    """``eta -> (P(eta | b), rho_B(eta))`` where ``rho_B`` mixes branches sharing ``eta``."""
    acc: dict = {}
    for ex in Simulation(spec, alice, bob).commit_branches(b):
        eta = ex.transcript.eta()
        rho = core.partial_trace(ex.state, [Owner.B]).matrix
        p = ex.probability
        if eta in acc:
            q, r = acc[eta]
            acc[eta] = (q + p, r + p * rho)
        else:
            acc[eta] = (p, p * rho)
    return {eta: (p, r / p) for eta, (p, r) in acc.items()}


@dataclass(frozen=True)
class ConcealmentReport:
    expected_fidelity: float
    marginal_gap: float
    trace_distance: float
    num_eta: int

    @property
    def no_information(self) -> bool:
        return self.marginal_gap <= 1e-9


def concealment_report(spec: ProtocolSpec, alice_honest: Strategy, bob: Strategy) -> ConcealmentReport:
    """Expected ``F(eta)`` plus the distinguishability of Bob's whole view.

    ``F(eta)`` is zero when ``eta`` occurs under only one value of ``b``;
    ``eta`` is weighted by its probability under a uniform prior on ``b``.
    ``trace_distance`` is that of the block-diagonal views
    ``sum_eta P(eta|b) rho_B(eta) (x) |eta><eta|``.
    """
    views = [bob_view(spec, alice_honest, bob, b) for b in (0, 1)]
    etas = set(views[0]) | set(views[1])
    expected = 0.0
    gap = 0.0
    td = 0.0
    for eta in etas:
        p0, r0 = views[0].get(eta, (0.0, None))
        p1, r1 = views[1].get(eta, (0.0, None))
        gap = max(gap, abs(p0 - p1))
        if r0 is None or r1 is None:
            td += 0.5 * (p0 + p1)
            continue
        expected += 0.5 * (p0 + p1) * fidelity(r0, r1)
        td += trace_distance(p0 * r0, p1 * r1)
    return ConcealmentReport(expected, gap, td, len(etas))


def audit_concealment(spec: ProtocolSpec, alice_honest: Strategy, bob: Strategy) -> float:
    """Expected fidelity ``E[F(eta)]`` between Bob's conditional states for ``b = 0, 1``."""
    return concealment_report(spec, alice_honest, bob).expected_fidelity


def action_log(spec: ProtocolSpec, alice: Strategy, bob: Strategy, b: int, party: Party = Party.ALICE) -> list:
    """Labeled action sequence of ``party`` in the first commit branch."""
    sim = Simulation(spec, alice, bob, record_log=True)
    ex = sim.commit_branches(b)[0]
    return [entry for entry in ex.log if entry[0] == party.value]
