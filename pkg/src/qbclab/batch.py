"""Vectorized sampling: many independent runs pushed through one action list together.

Commit programs are static, so every run executes the same actions and holds
the same registers; only amplitudes, measurement results and public bits
differ per run. Those live in arrays with one row per run. Classical controls
become row masks. Unveil actions may depend on a run's view, so runs are
grouped by the action lists their strategies return.

The scalar interpreter in :mod:`qbclab.protocol` stays the reference; this
module reproduces its semantics and its sampling distribution (not its
random stream).
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from . import core
from .core import Party, PureState, ResourceCapError
from .protocol import (
    _ADJOINT,
    _OTHER_OWNER,
    _OWNER,
    BASES,
    Alloc,
    Gate,
    Measure,
    PartyView,
    Pending,
    ProtocolViolation,
    Rebind,
    Resolve,
    SendBit,
    SendQubit,
    Sent,
    UnveilResult,
    _check_own,
)


class _Layout:
    """Register bookkeeping shared by every run; duck-types the parts of PureState used by ``_check_own``."""

    __slots__ = ("registers", "owners", "consumed")
    index = PureState.index

    def __init__(self, registers=(), owners=(), consumed=()):
        self.registers = registers
        self.owners = owners
        self.consumed = consumed

    def owner_of(self, register: str):
        return self.owners[self.index(register)]

    def registers_of(self, *owners) -> tuple[str, ...]:
        return tuple(r for r, o in zip(self.registers, self.owners) if o in owners)


class _Ensemble:
    __slots__ = ("amps", "state", "locked", "bits", "memory", "sent", "senders", "private", "prob")

    def __init__(self, amps, state, locked, bits, memory, sent, senders, private, prob):
        self.amps = amps  # (runs, 2**k)
        self.state = state
        self.locked = locked
        self.bits = bits  # party -> key -> int8 array or Pending
        self.memory = memory
        self.sent = sent  # list of int8 columns
        self.senders = senders
        self.private = private  # party -> list of int8 columns
        self.prob = prob

    @property
    def runs(self) -> int:
        return self.amps.shape[0]

    def take(self, rows: np.ndarray) -> "_Ensemble":
        return _Ensemble(
            self.amps[rows], self.state, set(self.locked),
            {p: {k: (v if type(v) is Pending else v[rows]) for k, v in d.items()} for p, d in self.bits.items()},
            {p: dict(d) for p, d in self.memory.items()},
            [c[rows] for c in self.sent], list(self.senders),
            {p: [c[rows] for c in cols] for p, cols in self.private.items()},
            self.prob[rows])


def _apply(amps: np.ndarray, k: int, axes: list[int], matrix: np.ndarray) -> np.ndarray:
    runs, m = amps.shape[0], len(axes)
    i = axes[0]
    if axes == list(range(i, i + m)):
        rest = 1 << (k - i - m)
        if rest == 1:
            return (amps.reshape(-1, 1 << m) @ matrix.T).reshape(runs, -1)
        return np.matmul(matrix, amps.reshape(runs << i, 1 << m, rest)).reshape(runs, -1)
    t = amps.reshape((runs,) + (2,) * k)
    src = [a + 1 for a in axes]
    t = np.moveaxis(t, src, range(1, m + 1)).reshape(runs, 1 << m, -1)
    t = np.matmul(matrix, t).reshape((runs,) + (2,) * k)
    return np.moveaxis(t, range(1, m + 1), src).reshape(runs, -1)


def _apply_gate(ens: _Ensemble, targets, matrix, rows=None) -> None:
    regs = ens.state.registers
    axes = [regs.index(t) for t in targets]
    k = len(regs)
    if rows is None:
        ens.amps = _apply(ens.amps, k, axes, matrix)
    else:
        ens.amps[rows] = _apply(ens.amps[rows], k, axes, matrix)


def _column(ens: _Ensemble, party: Party, ref):
    if type(ref) is Sent:
        try:
            return ens.sent[ref.index]
        except IndexError:
            raise ProtocolViolation(party, f"no public bit at {ref}") from None
    try:
        return ens.bits[party][ref]
    except KeyError:
        raise ProtocolViolation(party, f"unknown bit key {ref!r}") from None


def _collapse(ens: _Ensemble, register: str, basis: str, rng) -> np.ndarray:
    if basis != "+":
        _apply_gate(ens, (register,), _ADJOINT[basis])
    lay = ens.state
    i = lay.index(register)
    runs = ens.runs
    t = ens.amps.reshape(runs, 1 << i, 2, -1)
    zero, one = t[:, :, 0, :], t[:, :, 1, :]
    p0 = (zero.real**2 + zero.imag**2).sum(axis=(1, 2))
    outcome = rng.random(runs) >= p0
    p = np.where(outcome, 1.0 - p0, p0)
    post = np.where(outcome[:, None, None], one, zero) / np.sqrt(p)[:, None, None]
    ens.amps = post.reshape(runs, -1)
    ens.prob = ens.prob * p
    owner = lay.owners[i]
    ens.state = _Layout(lay.registers[:i] + lay.registers[i + 1:], lay.owners[:i] + lay.owners[i + 1:],
                        lay.consumed + ((register, owner.environment if owner in _OWNER.values() else owner),))
    ens.locked.discard(register)
    return outcome.astype(np.int8)


def _do_gate(ens, party, act, withhold, spec, rng):
    for t in act.targets:
        _check_own(ens, party, t, act)
    quantum, mask = [], None
    for ref in act.controls:
        v = _column(ens, party, ref)
        if type(v) is Pending:
            quantum.append(v)
        else:
            mask = v == 1 if mask is None else mask & (v == 1)
    rows = None
    if mask is not None:
        if not mask.any():
            return
        rows = None if mask.all() else np.flatnonzero(mask)
    if not quantum:
        _apply_gate(ens, act.targets, act.matrix, rows)
        return
    ctrl = tuple(p.register for p in quantum)
    if set(ctrl) & set(act.targets):
        raise ProtocolViolation(party, "a gate cannot target its own control")
    for p in quantum:
        if p.basis != "+":
            _apply_gate(ens, (p.register,), _ADJOINT[p.basis], rows)
    _apply_gate(ens, ctrl + act.targets, core.controlled(act.matrix, len(quantum)), rows)
    for p in quantum:
        if p.basis != "+":
            _apply_gate(ens, (p.register,), BASES[p.basis], rows)


def _do_alloc(ens, party, act, withhold, spec, rng):
    lay = ens.state
    if act.register in lay.registers or act.register in dict(lay.consumed):
        raise ProtocolViolation(party, f"register {act.register!r} already exists")
    if len(lay.registers) + 1 > spec.max_qubits:
        raise ResourceCapError(f"allocating {act.register!r} exceeds the simulation cap max_qubits={spec.max_qubits}")
    runs, d = ens.amps.shape
    amps = np.zeros((runs, 2 * d), dtype=complex)
    amps[:, ::2] = ens.amps
    ens.amps = amps
    ens.state = _Layout(lay.registers + (act.register,), lay.owners + (_OWNER[party],), lay.consumed)


def _do_measure(ens, party, act, withhold, spec, rng):
    _check_own(ens, party, act.register, act)
    own = ens.bits[party]
    if act.key in own:
        raise ProtocolViolation(party, f"bit key {act.key!r} already used")
    if withhold:
        own[act.key] = Pending(act.register, act.basis)
        ens.locked.add(act.register)
        return
    own[act.key] = _collapse(ens, act.register, act.basis, rng)
    ens.private[party].append(own[act.key])


def _do_send_qubit(ens, party, act, withhold, spec, rng):
    _check_own(ens, party, act.register, act)
    lay = ens.state
    i = lay.index(act.register)
    ens.state = _Layout(lay.registers, lay.owners[:i] + (_OTHER_OWNER[party],) + lay.owners[i + 1:], lay.consumed)


def _send(ens, party, column):
    ens.sent.append(column)
    ens.senders.append(party)


def _do_send_bit(ens, party, act, withhold, spec, rng):
    if act.key is None:
        if act.value not in (0, 1):
            raise ProtocolViolation(party, "SendBit needs a key or a constant bit")
        _send(ens, party, np.full(ens.runs, act.value, dtype=np.int8))
        return
    v = _column(ens, party, act.key)
    if type(v) is Pending:
        v = _collapse(ens, v.register, v.basis, rng)
        ens.bits[party][act.key] = v
    _send(ens, party, v ^ np.int8(act.flip))


def _do_resolve(ens, party, act, withhold, spec, rng):
    v = _column(ens, party, act.key)
    if type(v) is not Pending:
        return
    out = _collapse(ens, v.register, v.basis, rng)
    ens.bits[party][act.key] = out
    ens.private[party].append(out)


def _do_rebind(ens, party, act, withhold, spec, rng):
    own = ens.bits[party]
    for key, basis in act.bases:
        v = own.get(key)
        if type(v) is not Pending:
            raise ProtocolViolation(party, f"can only rebind withheld bits, {key!r} is {v!r}")
        if ens.state.owner_of(v.register) is not _OWNER[party]:
            raise ProtocolViolation(party, f"{v.register!r} is not held by {party.name}")
        if basis not in BASES:
            raise ProtocolViolation(party, f"unknown basis {basis!r}")
        own[key] = Pending(v.register, basis)
    ens.memory[party].update(dict(act.memory))


_HANDLERS = {
    Gate: _do_gate,
    Alloc: _do_alloc,
    Measure: _do_measure,
    SendQubit: _do_send_qubit,
    SendBit: _do_send_bit,
    Resolve: _do_resolve,
    Rebind: _do_rebind,
}


def _run(ens: _Ensemble, actions, withhold, spec, rng) -> None:
    for party, act in actions:
        handler = _HANDLERS.get(type(act))
        if handler is None:
            raise TypeError(f"unknown action {act!r}")
        handler(ens, party, act, withhold[party], spec, rng)


def _view(ens: _Ensemble, party: Party, row: int, commit_length: int) -> PartyView:
    own = ens.bits[party]
    return PartyView(
        party=party,
        xi_S=tuple(int(c[row]) for c in ens.sent),
        senders=tuple(ens.senders),
        commit_length=commit_length,
        bits=MappingProxyType({k: int(v[row]) for k, v in own.items() if type(v) is not Pending}),
        pending=MappingProxyType({k: v for k, v in own.items() if type(v) is Pending}),
        memory=MappingProxyType(dict(ens.memory[party])),
        registers=ens.state.registers_of(party.owner),
    )


@dataclass(frozen=True)
class BatchRuns:
    """Per-run public commit string (with sender tags), unveil verdict and branch probability."""

    gamma: tuple[tuple, ...]
    result: tuple[UnveilResult, ...]
    probability: np.ndarray

    def __len__(self) -> int:
        return len(self.result)

    def count(self, result: UnveilResult) -> int:
        return sum(r is result for r in self.result)


def sample_runs(sim, b: int, rng: np.random.Generator, runs: int, target: int | None = None) -> BatchRuns:
    """``runs`` independent samples of commit then unveil for ``sim`` (a :class:`Simulation`)."""
    if runs < 0:
        raise ValueError("runs must be non-negative")
    if runs == 0:
        return BatchRuns((), (), np.zeros(0))
    actions, mem_a, mem_b = sim._compiled_commit(b)
    spec = sim.spec
    ens = _Ensemble(np.ones((runs, 1), dtype=complex), _Layout(), set(),
                    {Party.ALICE: {}, Party.BOB: {}}, {Party.ALICE: dict(mem_a), Party.BOB: dict(mem_b)},
                    [], [], {Party.ALICE: [], Party.BOB: []}, np.ones(runs))
    _run(ens, actions, {Party.ALICE: sim.alice.withhold, Party.BOB: sim.bob.withhold}, spec, rng)
    n_commit = len(ens.sent)
    senders = tuple(s.value for s in ens.senders)
    cols = np.array(ens.sent, dtype=np.int8).reshape(n_commit, runs)
    gammas = tuple(tuple(zip(senders, map(int, cols[:, r]))) for r in range(runs))

    # unveil: group runs by the actions their views produce
    groups: dict = {}
    pending_b = sorted(k for k, v in ens.bits[Party.BOB].items() if type(v) is Pending)
    for r in range(runs):
        acts = [(Party.ALICE, a) for a in sim.alice.unveil(_view(ens, Party.ALICE, r, n_commit), target)]
        acts += [(Party.BOB, Resolve(k)) for k in pending_b]
        acts += [(Party.BOB, a) for a in sim.bob.unveil(_view(ens, Party.BOB, r, n_commit), None)]
        key = tuple(acts)
        try:
            hash(key)
        except TypeError:  # unhashable action contents: the run forms its own group
            key = object()
        groups.setdefault(key, (acts, []))[1].append(r)
    results: list = [None] * runs
    prob = np.empty(runs)
    honest = {Party.ALICE: False, Party.BOB: False}
    for acts, rows in groups.values():
        idx = np.asarray(rows)
        sub = ens.take(idx)
        sub.locked = set()
        _run(sub, acts, honest, spec, rng)
        bob_cols = {k: v for k, v in sub.bits[Party.BOB].items() if type(v) is not Pending}
        alice_cols = [c for c, s in zip(sub.sent[n_commit:], sub.senders[n_commit:]) if s is Party.ALICE]
        for j, r in enumerate(rows):
            announced = tuple(int(c[j]) for c in alice_cols)
            bob_bits = MappingProxyType({k: int(v[j]) for k, v in bob_cols.items()})
            results[r] = spec.decode(announced, bob_bits)
        prob[idx] = sub.prob
    return BatchRuns(gammas, tuple(results), prob)
