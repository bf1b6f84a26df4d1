"""Schmidt decompositions, fidelity, purifications and local steering unitaries.

Fidelity uses the square-root convention ``F = Tr sqrt(sqrt(rho) sigma sqrt(rho))``
so that for pure states ``F = |<u|v>|``.

Bipartite pure states are handled as amplitude matrices ``M`` with rows
indexed by the chosen side and columns by the rest, i.e.
``|psi> = sum M[a, b] |a>|b>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    DensityMatrix,
    InvariantError,
    Owner,
    PureState,
    QBCError,
    RegisterError,
    Unitary,
    reorder,
)

PSD_TOL = 1e-10
STEERING_TOL = 1e-8
_NOISE = 1e-14


class PreconditionError(QBCError):
    """Inputs do not satisfy an operation's mathematical precondition."""


def _matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def psd_sqrt(matrix: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Square root of a Hermitian PSD matrix by eigendecomposition.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything more negative
    is rejected.
    """
    m = _matrix(matrix)
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    if w.size and w.min() < -tol:
        raise InvariantError(f"matrix is not positive semidefinite (eigenvalue {w.min():.3g})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def _factor(m: np.ndarray, what: str) -> np.ndarray:
    # X with X X^dag = m; eigenvalues at rounding-noise level are dropped, since
    # their square roots (~1e-8) would otherwise leak into the fidelity
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    if w.size and w.min() < -PSD_TOL:
        raise InvariantError(f"{what} is not positive semidefinite (eigenvalue {w.min():.3g})")
    keep = w > _NOISE * max(w.max(initial=0.0), 1.0) * max(len(w), 1)
    return v[:, keep] * np.sqrt(w[keep])


def fidelity(rho, sigma) -> float:
    """Square-root fidelity between two density matrices.

    Evaluated as the trace norm of ``X^dag Y`` for factors ``rho = X X^dag``,
    ``sigma = Y Y^dag``, which equals ``Tr sqrt(sqrt(rho) sigma sqrt(rho))``.
    """
    r, s = _matrix(rho), _matrix(sigma)
    if r.shape != s.shape:
        raise ValueError(f"dimension mismatch: {r.shape} vs {s.shape}")
    x, y = _factor(r, "rho"), _factor(s, "sigma")
    if not x.size or not y.size:
        return 0.0
    return float(np.clip(np.linalg.svd(x.conj().T @ y, compute_uv=False).sum(), 0.0, 1.0))


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of ``rho - sigma``."""
    r, s = _matrix(rho), _matrix(sigma)
    if r.shape != s.shape:
        raise ValueError(f"dimension mismatch: {r.shape} vs {s.shape}")
    d = r - s
    return float(0.5 * np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2)).sum())


def side_registers(state: PureState, side: Iterable) -> tuple[str, ...]:
    """Resolve ``side`` (owners or register ids) to registers, in state order."""
    side = list(side)
    if all(isinstance(s, Owner) for s in side):
        return state.registers_of(*side)
    for r in side:
        state.index(r)
    if len(set(side)) != len(side):
        raise RegisterError(f"duplicate registers in {side}")
    wanted = set(side)
    return tuple(r for r in state.registers if r in wanted)


def bipartite_matrix(state: PureState, side: Iterable) -> tuple[np.ndarray, tuple[str, ...], tuple[str, ...]]:
    a = side_registers(state, side)
    b = tuple(r for r in state.registers if r not in set(a))
    ordered = reorder(state, a + b)
    return ordered.amplitudes.reshape(2 ** len(a), 2 ** len(b)), a, b


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    """``|psi> = sum_i coefficients[i] * left[:, i] (x) right[:, i]``."""

    coefficients: np.ndarray
    left: np.ndarray
    right: np.ndarray
    left_registers: tuple[str, ...]
    right_registers: tuple[str, ...]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.coefficients**2

    def rank(self, tol: float = 1e-12) -> int:
        return int(np.sum(self.coefficients > tol))

    def reconstruct(self) -> np.ndarray:
        """Amplitudes in ``left_registers + right_registers`` order."""
        m = (self.left * self.coefficients) @ self.right.T
        return m.reshape(-1)


def _fix_phases(u: np.ndarray, vh: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    # first non-negligible entry of each left vector made real positive
    u = u.copy()
    vh = vh.copy()
    for i in range(u.shape[1]):
        col = u[:, i]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size == 0:
            continue
        c = col[nz[0]]
        phase = np.conj(c) / abs(c)
        u[:, i] *= phase
        vh[i, :] /= phase
    return u, vh


def schmidt(state: PureState, side_a: Iterable, side_b: Iterable | None = None) -> SchmidtDecomposition:
    a = side_registers(state, side_a)
    if side_b is not None:
        b = side_registers(state, side_b)
        if set(a) & set(b):
            raise RegisterError(f"bipartition sides overlap: {sorted(set(a) & set(b))}")
        if len(a) + len(b) != state.num_qubits:
            missing = set(state.registers) - set(a) - set(b)
            raise RegisterError(f"bipartition omits registers {sorted(missing)}")
    m, a, b = bipartite_matrix(state, a)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    u, vh = _fix_phases(u, vh)
    total = float(np.sum(s**2))
    if abs(total - 1.0) > 1e-10:
        raise InvariantError(f"Schmidt weights sum to {total!r}")
    return SchmidtDecomposition(s, u, vh.T, a, b)


def reduced_fidelity(psi0: PureState, psi1: PureState, side: Iterable) -> float:
    """Fidelity of the reductions of two pure states onto the complement of ``side``.

    Computed as the trace norm of the cross operator ``M1 M0^dag`` on ``side``,
    which avoids forming the (possibly large) complement density matrices.
    """
    m0, a, b = bipartite_matrix(psi0, side)
    m1 = reorder(psi1, a + b).amplitudes.reshape(m0.shape)
    cross = m1 @ m0.conj().T
    return float(min(np.linalg.svd(cross, compute_uv=False).sum(), 1.0))


def _orth_complement(basis: np.ndarray, dim: int) -> np.ndarray:
    if basis.shape[1] == 0:
        return np.eye(dim, dtype=complex)
    q, _ = np.linalg.qr(basis, mode="complete")
    return q[:, basis.shape[1]:]


def _polar(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m, full_matrices=False)
    return u @ vh


def uhlmann_partner(rho0, psi1: PureState, side: Iterable, tol: float = 1e-12) -> PureState:
    """Purification of ``rho0`` with maximal real overlap with ``psi1``.

    ``rho0`` lives on the complement of ``side`` (same register order as in
    ``psi1``); the partner is built on ``side``. The achieved overlap equals
    ``fidelity(rho0, reduction of psi1)``.
    """
    m1, a, b = bipartite_matrix(psi1, side)
    r0 = _matrix(rho0)
    da, db = m1.shape
    if r0.shape != (db, db):
        raise ValueError(f"rho0 has shape {r0.shape}, expected {(db, db)}")
    if isinstance(rho0, DensityMatrix) and rho0.registers and tuple(rho0.registers) != b:
        raise RegisterError(f"rho0 registers {rho0.registers} do not match complement {b}")

    w, v = np.linalg.eigh((r0 + r0.conj().T) / 2)
    if w.min() < -PSD_TOL:
        raise InvariantError("rho0 is not positive semidefinite")
    keep = w > tol
    rank = int(keep.sum())
    if rank > da:
        raise PreconditionError(f"side of dimension {da} cannot purify a rank-{rank} state")
    support = v[:, keep]
    sqrt_r0 = (support * np.sqrt(w[keep])) @ support.conj().T

    x1 = m1.T  # db x da; rho_B(psi1) = x1 x1^dag
    y = sqrt_r0 @ x1
    u, s, vh = np.linalg.svd(y, full_matrices=True)
    k = int(np.sum(s > tol))
    w_op = u[:, :k] @ vh[:k, :]
    extra = rank - k
    if extra > 0:
        # finish an isometry from side onto supp(rho0)
        rest = support - u[:, :k] @ (u[:, :k].conj().T @ support)
        q, sv, _ = np.linalg.svd(rest, full_matrices=False)
        w_op = w_op + q[:, :extra] @ vh[k:k + extra, :]
    x0 = sqrt_r0 @ w_op
    partner = PureState(x0.T.reshape(-1), a + b, [psi1.owner_of(r) for r in a + b], psi1.consumed)
    return reorder(partner, psi1.registers)


def closest_purification(psi_ref: PureState, psi_target: PureState, side: Iterable) -> tuple[PureState, np.ndarray]:
    """Uhlmann partner computed from a reference purification instead of a density matrix.

    Every purification of the reduction of ``psi_ref`` on the complement of
    ``side`` is ``(V (x) I) psi_ref`` for a unitary ``V`` on ``side``; the one
    with maximal real overlap with ``psi_target`` has ``V = W U^dag`` where
    ``M_ref M_target^dag = U S W^dag``. Only ``side``-sized matrices are formed.
    Returns the partner (in ``psi_ref`` register order) and ``V``.
    """
    m0, a, b = bipartite_matrix(psi_ref, side)
    m1 = reorder(psi_target, a + b).amplitudes.reshape(m0.shape)
    u, _, wh = np.linalg.svd(m0 @ m1.conj().T)
    v = wh.conj().T @ u.conj().T
    partner = PureState((v @ m0).reshape(-1), a + b, [psi_ref.owner_of(r) for r in a + b], psi_ref.consumed,
                        check=False)
    return reorder(partner, psi_ref.registers), v


def reduction_gap(psi0: PureState, psi1: PureState, side: Iterable) -> float:
    """Spectral norm of the difference of the reductions on the complement of ``side``."""
    m0, a, b = bipartite_matrix(psi0, side)
    m1 = reorder(psi1, a + b).amplitudes.reshape(m0.shape)
    if m0.shape[1] <= 2 * m0.shape[0]:
        return float(np.linalg.norm(m0.T @ m0.conj() - m1.T @ m1.conj(), 2))
    # rho0 - rho1 = A^T J conj(A) for A = [M0; M1], J = diag(I, -I). With A^T = Q R
    # this is Q (R J R^dag) Q^dag, so the small Hermitian R J R^dag has the same norm
    stacked = np.vstack([m0, m1])
    _, r = np.linalg.qr(stacked.T)
    j = np.ones(stacked.shape[0])
    j[m0.shape[0]:] = -1
    ev = np.linalg.eigvalsh((r * j) @ r.conj().T)
    return float(np.abs(ev).max()) if ev.size else 0.0


def steering_unitary(psi_from: PureState, psi_to: PureState, side: Iterable,
                     tol: float = STEERING_TOL) -> Unitary:
    """Unitary on ``side`` only that maps ``psi_from`` to ``psi_to``.

    Requires the two states to have the same reduction on the complement of
    ``side``. Both are written over a shared Schmidt basis ``f_i`` of that
    complement, ``|psi_b> = sum sqrt(l_i) |e_i^(b)>|f_i>``, and the result
    sends each ``e_i^(0)`` to ``e_i^(1)``, completed on the orthogonal
    complement.
    """
    m0, a, b = bipartite_matrix(psi_from, side)
    m1 = reorder(psi_to, a + b).amplitudes.reshape(m0.shape)
    gap = reduction_gap(psi_from, psi_to, a)
    if gap > tol:
        raise PreconditionError(
            f"reductions outside {tuple(a)} differ by {gap:.3g} > {tol:g}; "
            "steer towards uhlmann_partner(...) instead")
    da = m0.shape[0]
    u0, s0, vh0 = np.linalg.svd(m0, full_matrices=False)
    if u0.shape[1] < da:
        u0 = np.hstack([u0, _orth_complement(u0, da)])
    k = int(np.sum(s0 > 1e-10))
    e0 = u0[:, :k]
    e1 = (m1 @ vh0[:k, :].conj().T) / s0[:k]
    if k:
        e1 = _polar(e1)
    q0 = u0[:, k:]
    if k < da:
        proj = q0 - e1 @ (e1.conj().T @ q0)
        sv = np.linalg.svd(proj, compute_uv=False)
        q1 = _polar(proj) if sv.min() > 0.5 else _orth_complement(e1, da)
    else:
        q1 = q0
    v = _polar(e1 @ e0.conj().T + q1 @ q0.conj().T)
    return Unitary(v, a)
