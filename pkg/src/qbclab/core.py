"""Pure-state simulation of labeled qubit registers.

Amplitudes are stored in register-list order with the first register as the
most significant bit, so ``|r0 r1 ... r_{k-1}>`` has index
``r0 * 2**(k-1) + ... + r_{k-1}``.

All values are immutable; every operation returns a new object.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MAX_QUBITS = 16

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
DENSITY_TOL = 1e-10


class QBCError(Exception):
    """Base class for every error raised by qbclab."""


class ResourceCapError(QBCError):
    """A register or branch count exceeded its configured cap."""


class RegisterError(QBCError):
    """Unknown, duplicated or consumed register."""


class InvariantError(QBCError):
    """A value violated one of its structural invariants."""


class Owner(enum.Enum):
    A = "A"
    B = "B"
    E_A = "E_A"
    E_B = "E_B"
    S_A = "S_A"
    S_B = "S_B"

    # members are singletons, so identity hashing agrees with equality and is cheaper
    __hash__ = object.__hash__

    @property
    def environment(self) -> "Owner":
        """Environment part a measurement by this party is sent to."""
        try:
            return _ENVIRONMENT[self]
        except KeyError:
            raise ValueError(f"{self} is not a party") from None


_ENVIRONMENT = {Owner.A: Owner.E_A, Owner.B: Owner.E_B}


def _as_owner(value) -> Owner:
    return value if isinstance(value, Owner) else Owner(value)


@dataclass(frozen=True, eq=False)
class PureState:
    """Global pure state over an ordered list of owned qubit registers.

    ``consumed`` maps registers that have been measured to the environment
    owner holding their classical record.
    """

    amplitudes: np.ndarray
    registers: tuple[str, ...]
    owners: tuple[Owner, ...]
    consumed: tuple[tuple[str, Owner], ...] = ()
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "registers", tuple(self.registers))
        if not self.check:
            object.__setattr__(self, "owners", tuple(self.owners))
            return
        object.__setattr__(self, "owners", tuple(_as_owner(o) for o in self.owners))
        k = len(self.registers)
        if len(set(self.registers)) != k:
            raise InvariantError(f"duplicate register ids in {self.registers}")
        if len(self.owners) != k:
            raise InvariantError("owner list does not match register list")
        if amps.size != 2**k:
            raise InvariantError(f"{amps.size} amplitudes for {k} registers")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise InvariantError(f"state is not normalized (|psi|^2 = {norm2!r})")

    @classmethod
    def _raw(cls, amplitudes, registers, owners, consumed) -> "PureState":
        # trusted internal constructor: inputs are already tuples and a flat complex vector
        obj = object.__new__(cls)
        amplitudes.setflags(write=False)
        d = obj.__dict__
        d["amplitudes"] = amplitudes
        d["registers"] = registers
        d["owners"] = owners
        d["consumed"] = consumed
        d["check"] = False
        return obj

    @property
    def num_qubits(self) -> int:
        return len(self.registers)

    def index(self, register: str) -> int:
        try:
            return self.registers.index(register)
        except ValueError:
            if register in dict(self.consumed):
                raise RegisterError(f"register {register!r} was already consumed by a measurement") from None
            raise RegisterError(f"unknown register {register!r}") from None

    def owner_of(self, register: str) -> Owner:
        return self.owners[self.index(register)]

    def registers_of(self, *owners: Owner) -> tuple[str, ...]:
        wanted = {_as_owner(o) for o in owners}
        return tuple(r for r, o in zip(self.registers, self.owners) if o in wanted)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def with_owner(self, register: str, owner: Owner) -> "PureState":
        i = self.index(register)
        owners = list(self.owners)
        owners[i] = _as_owner(owner)
        return PureState(self.amplitudes, self.registers, owners, self.consumed, check=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def __repr__(self) -> str:
        return f"PureState(registers={self.registers}, owners={[o.value for o in self.owners]})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Reduced state on ``registers`` (kept in global register order)."""

    matrix: np.ndarray
    registers: tuple[str, ...] = ()
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "registers", tuple(self.registers))
        if not self.check:
            return
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvariantError(f"density matrix must be square, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > DENSITY_TOL:
            raise InvariantError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > DENSITY_TOL:
            raise InvariantError(f"density matrix trace is {np.trace(m).real!r}")
        if m.shape[0] and np.linalg.eigvalsh(m).min() < -DENSITY_TOL:
            raise InvariantError("density matrix has a negative eigenvalue")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class Unitary:
    matrix: np.ndarray
    targets: tuple[str, ...]
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.check:
            return
        if m.shape != (2 ** len(self.targets),) * 2:
            raise InvariantError(f"matrix shape {m.shape} does not fit {len(self.targets)} target(s)")
        if len(set(self.targets)) != len(self.targets):
            raise RegisterError(f"duplicate targets {self.targets}")
        err = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]), 2)
        if err > UNITARY_TOL:
            raise InvariantError(f"matrix is not unitary (|U^dag U - I| = {err:.3g})")


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: int
    probability: float
    post_state: PureState


def zero_state(num_registers: int, owners: Sequence | Owner = Owner.A, names: Sequence[str] | None = None,
               max_qubits: int = DEFAULT_MAX_QUBITS) -> PureState:
    """All-``|0>`` product state. ``owners`` is either one owner or one per register."""
    if num_registers < 0:
        raise ValueError("num_registers must be non-negative")
    if num_registers > max_qubits:
        raise ResourceCapError(f"{num_registers} registers exceed the simulation cap max_qubits={max_qubits}")
    if isinstance(owners, (Owner, str)):
        owners = [owners] * num_registers
    if names is None:
        names = [f"q{i}" for i in range(num_registers)]
    amps = np.zeros(2**num_registers, dtype=complex)
    amps[0] = 1.0
    return PureState(amps, tuple(names), tuple(owners))


def allocate(state: PureState, register: str, owner: Owner, max_qubits: int = DEFAULT_MAX_QUBITS) -> PureState:
    """Append a fresh ``|0>`` register as the new least significant qubit."""
    if register in state.registers or register in dict(state.consumed):
        raise RegisterError(f"register {register!r} already exists")
    if state.num_qubits + 1 > max_qubits:
        raise ResourceCapError(f"allocating {register!r} exceeds the simulation cap max_qubits={max_qubits}")
    amps = np.zeros(2 * state.amplitudes.size, dtype=complex)
    amps[::2] = state.amplitudes
    return PureState._raw(amps, state.registers + (register,), state.owners + (_as_owner(owner),),
                          state.consumed)


def product_state(vectors: Sequence[np.ndarray], registers: Sequence[str], owners: Sequence) -> PureState:
    amps = np.ones(1, dtype=complex)
    for v in vectors:
        amps = np.kron(amps, np.asarray(v, dtype=complex))
    return PureState(amps, tuple(registers), tuple(owners))


def _apply_matrix(amps: np.ndarray, n: int, axes: Sequence[int], matrix: np.ndarray) -> np.ndarray:
    m = len(axes)
    i = axes[0]
    if m == 1 or list(axes) == list(range(i, i + m)):
        # contiguous targets; batched matmul is slow when the trailing block is tiny
        rest = 2 ** (n - i - m)
        if rest == 1:
            return (amps.reshape(-1, 2**m) @ matrix.T).reshape(-1)
        t = amps.reshape(2**i, 2**m, rest)
        if rest < 8 and amps.size >= 1024:
            return np.tensordot(matrix, t, axes=([1], [1])).transpose(1, 0, 2).reshape(-1)
        return np.matmul(matrix, t).reshape(-1)
    t = amps.reshape((2,) * n)
    t = np.moveaxis(t, axes, range(m)).reshape(2**m, -1)
    t = (matrix @ t).reshape((2,) * n)
    return np.moveaxis(t, range(m), axes).reshape(-1)


def apply_unitary(state: PureState, u: Unitary) -> PureState:
    return apply_matrix(state, u.targets, u.matrix)


def apply_matrix(state: PureState, targets: Sequence[str], matrix: np.ndarray) -> PureState:
    """Unchecked variant of :func:`apply_unitary` for matrices already known to be unitary."""
    regs = state.registers
    try:
        axes = [regs.index(t) for t in targets]
    except ValueError:
        axes = [state.index(t) for t in targets]
    out = _apply_matrix(state.amplitudes, len(state.registers), axes, matrix)
    return PureState._raw(out, state.registers, state.owners, state.consumed)


def outcome_probabilities(state: PureState, register: str) -> tuple[float, float]:
    i = state.index(register)
    t = state.amplitudes.reshape(2**i, 2, -1)
    p0 = float(np.vdot(t[:, 0, :], t[:, 0, :]).real)
    p1 = float(np.vdot(t[:, 1, :], t[:, 1, :]).real)
    total = p0 + p1
    return p0 / total, p1 / total


def project(state: PureState, register: str, outcome: int) -> tuple[float, PureState]:
    """Project ``register`` onto ``|outcome>`` and consume it into the owner's environment.

    Returns the outcome probability and the renormalized post-measurement state
    with the register removed from the amplitude vector.
    """
    i = state.index(register)
    owner = state.owners[i]
    t = state.amplitudes.reshape(2**i, 2, -1)
    branch = t[:, outcome, :].reshape(-1)
    p = float(np.vdot(branch, branch).real)
    if p <= 0.0:
        raise InvariantError(f"outcome {outcome} of {register!r} has zero probability")
    regs = state.registers[:i] + state.registers[i + 1:]
    owners = state.owners[:i] + state.owners[i + 1:]
    env = _ENVIRONMENT.get(owner, owner)
    post = PureState._raw(branch / np.sqrt(p), regs, owners, state.consumed + ((register, env),))
    return p, post


def collapse(state: PureState, register: str, draw: float) -> tuple[int, float, PureState]:
    """Sample-and-project in one pass; ``draw`` is uniform in [0, 1)."""
    i = state.index(register)
    t = state.amplitudes.reshape(1 << i, 2, -1)
    zero = t[:, 0, :]
    p0 = float(np.vdot(zero, zero).real)
    outcome = 0 if draw < p0 else 1
    p = p0 if outcome == 0 else 1.0 - p0
    branch = zero if outcome == 0 else t[:, 1, :]
    owner = state.owners[i]
    post = PureState._raw((branch * (1.0 / math.sqrt(p))).reshape(-1),
                          state.registers[:i] + state.registers[i + 1:],
                          state.owners[:i] + state.owners[i + 1:],
                          state.consumed + ((register, _ENVIRONMENT.get(owner, owner)),))
    return outcome, p, post


def measure(state: PureState, register: str, draw: float) -> MeasurementRecord:
    """Computational-basis measurement driven by a caller-supplied uniform draw in [0, 1)."""
    p0, _ = outcome_probabilities(state, register)
    outcome = 0 if draw < p0 else 1
    p, post = project(state, register, outcome)
    return MeasurementRecord(outcome, p, post)


def reduced_matrix(state: PureState, keep: Sequence[str]) -> np.ndarray:
    """Density matrix of the registers ``keep`` (ordered as in the state)."""
    keep_idx = sorted(state.index(r) for r in keep)
    rest = [i for i in range(state.num_qubits) if i not in keep_idx]
    n = state.num_qubits
    t = state.amplitudes.reshape((2,) * n)
    m = np.transpose(t, keep_idx + rest).reshape(2 ** len(keep_idx), -1)
    return m @ m.conj().T


def partial_trace(state: PureState, keep: Iterable) -> DensityMatrix:
    """Reduced density matrix on every register whose owner is in ``keep``.

    ``keep`` holds :class:`Owner` values. Owners with no live registers
    contribute a trivial factor, so keeping only them yields ``[[1]]``.
    """
    owners = {_as_owner(o) for o in keep}
    if not owners:
        raise ValueError("keep must name at least one owner")
    regs = state.registers_of(*owners)
    rho = reduced_matrix(state, regs)
    return DensityMatrix(rho, regs)


def overlap(a: PureState, b: PureState) -> complex:
    """``<a|b>`` after aligning ``b`` to ``a``'s register order."""
    return complex(np.vdot(a.amplitudes, reorder(b, a.registers).amplitudes))


def reorder(state: PureState, registers: Sequence[str]) -> PureState:
    registers = tuple(registers)
    if registers == state.registers:
        return state
    if sorted(registers) != sorted(state.registers):
        raise RegisterError(f"cannot reorder {state.registers} as {registers}")
    perm = [state.index(r) for r in registers]
    t = np.transpose(state.tensor(), perm).reshape(-1)
    return PureState(t, registers, [state.owners[i] for i in perm], state.consumed, check=False)


class Party(enum.Enum):
    ALICE = "A"
    BOB = "B"

    __hash__ = object.__hash__

    @property
    def owner(self) -> Owner:
        return _PARTY_OWNER[self]

    @property
    def other(self) -> "Party":
        return Party.BOB if self is Party.ALICE else Party.ALICE


_PARTY_OWNER = {Party.ALICE: Owner.A, Party.BOB: Owner.B}


@dataclass(frozen=True)
class ClassicalTranscript:
    """Classical strings of one branch.

    ``xi_S`` holds transmitted bits, with ``senders`` tagging who sent each
    one. ``xi_A``/``xi_B`` are the parties' private measurement records.
    """

    xi_S: tuple[int, ...] = ()
    senders: tuple[Party, ...] = ()
    xi_A: tuple[int, ...] = ()
    xi_B: tuple[int, ...] = ()
    branch_probability: float = 1.0

    @property
    def gamma(self) -> str:
        return "".join(str(b) for b in self.xi_S)

    @classmethod
    def _raw(cls, xi_S, senders, xi_A, xi_B, p) -> "ClassicalTranscript":
        obj = object.__new__(cls)
        d = obj.__dict__
        d["xi_S"], d["senders"], d["xi_A"], d["xi_B"], d["branch_probability"] = xi_S, senders, xi_A, xi_B, p
        return obj

    def private(self, party: Party) -> tuple[int, ...]:
        return self.xi_A if party is Party.ALICE else self.xi_B

    def eta(self) -> tuple:
        """Bob's classical view ``(xi_B, xi_S)`` with sender tags."""
        return (self.xi_B, tuple(zip((s.value for s in self.senders), self.xi_S)))

    def record(self, party: Party, bit: int, probability: float = 1.0) -> "ClassicalTranscript":
        p = self.branch_probability * probability
        if party is Party.ALICE:
            return ClassicalTranscript._raw(self.xi_S, self.senders, self.xi_A + (bit,), self.xi_B, p)
        return ClassicalTranscript._raw(self.xi_S, self.senders, self.xi_A, self.xi_B + (bit,), p)

    def with_probability(self, probability: float) -> "ClassicalTranscript":
        return ClassicalTranscript._raw(self.xi_S, self.senders, self.xi_A, self.xi_B,
                                        self.branch_probability * probability)


def transmit_classical(transcript: ClassicalTranscript, sender: Party, bit: int,
                       source: int | None = None) -> ClassicalTranscript:
    """Append ``bit`` to the public string ``xi_S``.

    ``source`` optionally names the index of the sender's private bit this
    message derives from; it must exist. Constant bits need no source.
    """
    sender = sender if isinstance(sender, Party) else Party(sender)
    if bit not in (0, 1):
        raise ValueError(f"not a bit: {bit!r}")
    if source is not None:
        private = transcript.private(sender)
        if not -len(private) <= source < len(private):
            raise QBCError(f"{sender.name} never generated private bit #{source}")
    return ClassicalTranscript._raw(transcript.xi_S + (int(bit),), transcript.senders + (sender,),
                                    transcript.xi_A, transcript.xi_B, transcript.branch_probability)


# Common gates.
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def controlled(matrix: np.ndarray, num_controls: int = 1) -> np.ndarray:
    """Matrix acting as ``matrix`` when every control qubit (listed first) is ``|1>``."""
    d = matrix.shape[0]
    full = np.eye(d * 2**num_controls, dtype=complex)
    full[-d:, -d:] = matrix
    return full


def ry_rotation(alpha: float) -> np.ndarray:
    """Real rotation sending ``|0>`` to ``cos(alpha)|0> + sin(alpha)|1>``."""
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]], dtype=complex)
