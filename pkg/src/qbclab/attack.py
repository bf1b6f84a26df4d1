"""Generic cheating attack built from withheld measurements and local steering.

Alice runs the honest commit for ``b = 0`` but keeps every measured register
(``commit_prime``). For each public string ``gamma`` she can recompute the
state she would hold had she committed to 1, find the purification of Bob's
reduction closest to it, and steer her own registers there before running
the honest unveil for 1.

States ``psi'_{b,gamma}`` are built with Bob's private measurement records
kept as explicit coherent registers owned by ``E_B``: each record register
sits in the basis vector of its outcome, so the state is exactly the one Bob
would hold had he deferred the measurement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from . import core
from .core import Owner, Party, PureState
from .protocol import (
    BASES,
    Gate,
    Pending,
    PartyView,
    ProtocolSpec,
    Rebind,
    Simulation,
    Strategy,
    UnveilResult,
    Withheld,
    action_log,
)
from .spectral import closest_purification, reduced_fidelity, steering_unitary

_RECORD_OWNERS = (Owner.E_A, Owner.E_B)


def commit_prime(spec: ProtocolSpec, bit: int = 0) -> Withheld:
    """Honest Alice for ``bit`` with every environment-bound measurement withheld."""
    return Withheld(spec.honest_alice(), bit=bit)


def commit_double_prime(spec: ProtocolSpec) -> Withheld:
    """Honest Bob with his measurements withheld."""
    return Withheld(spec.honest_bob())


def success_lower_bound(f: float, honest_success: float = 1.0) -> float:
    """Least acceptance probability on a state with overlap ``f`` to one accepted with ``honest_success``.

    With the default ``honest_success = 1`` this is ``f(F) = F**2``. In general
    the angles add: ``cos(arccos F + arccos sqrt(h))**2``, and 0 past a right angle.
    """
    if not -1e-12 <= f <= 1 + 1e-12:
        raise ValueError(f"fidelity must lie in [0, 1], got {f!r}")
    if not -1e-12 <= honest_success <= 1 + 1e-12:
        raise ValueError(f"honest success must lie in [0, 1], got {honest_success!r}")
    f = min(max(f, 0.0), 1.0)
    h = min(max(honest_success, 0.0), 1.0)
    if h == 1.0:
        return f * f
    angle = math.acos(f) + math.acos(math.sqrt(h))
    return math.cos(angle) ** 2 if angle < math.pi / 2 else 0.0


@dataclass(frozen=True, eq=False)
class GammaState:
    """Collapsed branch class of one public string under a withholding commit."""

    gamma: tuple
    probability: float
    state: PureState
    alice_pending: Mapping[str, Pending]
    alice_memory: Mapping


def _record_vector(outcome: int, basis: str) -> np.ndarray:
    return BASES[basis][:, outcome]


def coherent_state(branches) -> PureState:
    """Coherent sum of branches that share a public string, records made explicit.

    Each branch contributes ``sqrt(p) |psi_branch> (x) |records>``; measured
    registers reappear as record registers owned by the environment of the
    party that measured them.
    """
    first = branches[0]
    regs = first.state.registers
    owners = first.state.owners
    records = tuple(r for r, o in first.state.consumed if o in _RECORD_OWNERS)
    rec_owner = dict(first.state.consumed)
    total = sum(ex.probability for ex in branches)
    acc = None
    for ex in branches:
        st = ex.state
        if st.registers != regs or tuple(r for r, o in st.consumed if o in _RECORD_OWNERS) != records:
            raise core.InvariantError("branches of one public string hold different registers")
        vec = st.amplitudes * math.sqrt(ex.probability / total)
        for r in records:
            vec = np.kron(vec, _record_vector(*ex.outcomes[r]))
        acc = vec if acc is None else acc + vec
    kept = tuple((r, o) for r, o in first.state.consumed if o not in _RECORD_OWNERS)
    return PureState(acc, regs + records, owners + tuple(rec_owner[r] for r in records), kept)


def withheld_states(spec: ProtocolSpec, b: int, bob: Strategy | None = None) -> dict[tuple, GammaState]:
    """``gamma -> psi'_{b,gamma}`` for Alice running ``commit_prime(spec, b)``.

    ``bob`` defaults to ``commit_double_prime(spec)``, which keeps Bob's
    registers instead of recording outcomes in ``E_B``: the Bob-side reductions
    agree (up to renaming record registers) but there is a single branch per
    ``gamma``. Pass ``spec.honest_bob()`` for the recorded version.
    """
    bob = bob if bob is not None else commit_double_prime(spec)
    groups: dict[tuple, list] = {}
    for ex in Simulation(spec, commit_prime(spec, b), bob).commit_branches(b):
        groups.setdefault(ex.gamma, []).append(ex)
    out = {}
    for gamma, branches in groups.items():
        ex = branches[0]
        pending = {k: v for k, v in ex.bits[Party.ALICE].items() if isinstance(v, Pending)}
        out[gamma] = GammaState(
            gamma=gamma,
            probability=sum(x.probability for x in branches),
            state=coherent_state(branches),
            alice_pending=MappingProxyType(pending),
            alice_memory=MappingProxyType(dict(ex.memory[Party.ALICE])),
        )
    return out


def _alice_side(state: PureState) -> tuple[str, ...]:
    # everything Bob cannot see: Alice's registers and her own environment
    return state.registers_of(Owner.A, Owner.E_A)


def _aligned(psi0: PureState, psi1: PureState) -> PureState | None:
    if set(psi0.registers) != set(psi1.registers):
        return None
    return core.reorder(psi1, psi0.registers)


@dataclass(frozen=True)
class GammaAudit:
    gamma: tuple
    p0: float
    p1: float
    fidelity: float


def audit_by_gamma(spec: ProtocolSpec, bob: Strategy | None = None) -> list[GammaAudit]:
    """Per-``gamma`` fidelity ``F'(gamma)`` between Bob-side reductions under ``b = 0, 1``."""
    s0, s1 = withheld_states(spec, 0, bob), withheld_states(spec, 1, bob)
    rows = []
    for gamma in sorted(set(s0) | set(s1), key=repr):
        g0, g1 = s0.get(gamma), s1.get(gamma)
        f = 0.0
        if g0 is not None and g1 is not None:
            psi1 = _aligned(g0.state, g1.state)
            if psi1 is not None:
                f = reduced_fidelity(g0.state, psi1, _alice_side(g0.state))
        rows.append(GammaAudit(gamma, g0.probability if g0 else 0.0, g1.probability if g1 else 0.0, f))
    return rows


def fidelity_audit(spec: ProtocolSpec, bob: Strategy | None = None) -> float:
    """Expected ``F'(gamma)`` with ``gamma`` drawn from the commitment to 0."""
    return float(sum(r.p0 * r.fidelity for r in audit_by_gamma(spec, bob)))


def formal_identity(spec: ProtocolSpec, b: int = 0) -> list:
    """Differences between the action logs of ``commit_prime`` and the honest commit.

    Ownership tags are ignored; an empty list means the two are formally identical.
    """
    bob = spec.honest_bob()
    honest = action_log(spec, spec.honest_alice(), bob, b)
    withheld = action_log(spec, commit_prime(spec, b), bob, b)
    strip = [(p, sig) for p, sig, _ in honest], [(p, sig) for p, sig, _ in withheld]
    diffs = [(i, x, y) for i, (x, y) in enumerate(zip(*strip)) if x != y]
    if len(strip[0]) != len(strip[1]):
        diffs.append((min(map(len, strip)), "length", (len(strip[0]), len(strip[1]))))
    return diffs


@dataclass(frozen=True, eq=False)
class SteeringPlan:
    """Unveil recipe for one ``gamma``; ``unitary is None`` means the attack cannot start."""

    gamma: tuple
    fidelity: float
    partner_overlap: float
    targets: tuple[str, ...] = ()
    unitary: np.ndarray | None = None
    pending: Mapping[str, Pending] = field(default_factory=dict)
    memory: Mapping = field(default_factory=dict)

    @property
    def identity_deviation(self) -> float:
        """Distance of the steering unitary from the nearest global phase times identity."""
        if self.unitary is None:
            return math.nan
        tr = np.trace(self.unitary)
        phase = tr / abs(tr) if abs(tr) > 1e-12 else 1.0
        return float(np.linalg.norm(self.unitary - phase * np.eye(len(self.unitary)), 2))


def plan_steering(spec: ProtocolSpec, gamma: tuple, states0=None, states1=None) -> SteeringPlan:
    """Steering unitary that turns ``psi'_{0,gamma}`` into the Uhlmann partner of ``psi'_{1,gamma}``."""
    states0 = states0 if states0 is not None else withheld_states(spec, 0)
    states1 = states1 if states1 is not None else withheld_states(spec, 1)
    g0, g1 = states0.get(gamma), states1.get(gamma)
    if g0 is None or g1 is None:
        return SteeringPlan(gamma, 0.0, 0.0)
    psi0 = g0.state
    psi1 = _aligned(psi0, g1.state)
    if psi1 is None:
        return SteeringPlan(gamma, 0.0, 0.0)
    fid = reduced_fidelity(psi0, psi1, _alice_side(psi0))
    # Alice can only act on registers she holds, not on her environment
    targets = psi0.registers_of(Owner.A)
    partner, _ = closest_purification(psi0, psi1, targets)
    overlap = float(abs(core.overlap(partner, psi1)))
    u = steering_unitary(psi0, partner, targets)
    return SteeringPlan(gamma, fid, overlap, tuple(u.targets), u.matrix,
                        MappingProxyType(dict(g1.alice_pending)), MappingProxyType(dict(g1.alice_memory)))


class PurificationAttack(Strategy):
    """Commits to 0 with ``commit_prime``; unveils 1 by steering then running the honest unveil.

    Plans are computed per ``gamma`` on first use and cached.
    """

    party = Party.ALICE
    withhold = True

    def __init__(self, spec: ProtocolSpec):
        self.spec = spec
        self.base = spec.honest_alice()
        self._states: dict[int, dict] = {}
        self._plans: dict[tuple, SteeringPlan] = {}
        self._gates: dict[tuple, Gate] = {}

    def states(self, b: int) -> dict:
        if b not in self._states:
            self._states[b] = withheld_states(self.spec, b)
        return self._states[b]

    def plan(self, gamma: tuple) -> SteeringPlan:
        if gamma not in self._plans:
            self._plans[gamma] = plan_steering(self.spec, gamma, self.states(0), self.states(1))
        return self._plans[gamma]

    def commit(self, b: int):
        return self.base.commit(0)

    def unveil(self, view: PartyView, target: int | None) -> list:
        if not target:
            return self.base.unveil(view, 0)
        plan = self.plan(view.gamma)
        if plan.unitary is None:
            return self.base.unveil(view, 0)
        pending = {k: Pending(v.register, plan.pending[k].basis if k in plan.pending else v.basis)
                   for k, v in view.pending.items()}
        steered = PartyView(view.party, view.xi_S, view.senders, view.commit_length, view.bits,
                            MappingProxyType(pending), MappingProxyType(dict(plan.memory)), view.registers)
        rebind = Rebind(tuple(sorted((k, v.basis) for k, v in pending.items())),
                        tuple(sorted(plan.memory.items(), key=lambda kv: kv[0])))
        if view.gamma not in self._gates:
            self._gates[view.gamma] = Gate(plan.unitary, plan.targets, label="steer")
        return [self._gates[view.gamma], rebind] + list(self.base.unveil(steered, 1))

    def __repr__(self):
        return f"PurificationAttack({self.spec.name})"


@dataclass(frozen=True)
class PlanSummary:
    expected_fidelity: float
    expected_partner_overlap: float
    identity_deviation: float


def plan_summary(attack: PurificationAttack) -> PlanSummary:
    """Exact expectations over ``gamma`` (weighted by the commitment to 0) of the steering plans."""
    f = o = 0.0
    devs = []
    for gamma, g in attack.states(0).items():
        plan = attack.plan(gamma)
        f += g.probability * plan.fidelity
        o += g.probability * plan.partner_overlap
        if plan.unitary is not None:
            devs.append(plan.identity_deviation)
    return PlanSummary(f, o, max(devs) if devs else math.nan)


def synthesize_unveil_prime(spec: ProtocolSpec) -> PurificationAttack:
    return PurificationAttack(spec)


@dataclass(frozen=True)
class GammaOutcome:
    """Attack statistics for one public string.

    ``honest_success`` is the rate at which the honest unveil of 1 is accepted
    after an honest commitment to 1 with the same ``gamma``; the bound scales with it.
    """

    gamma: tuple
    probability: float
    fidelity: float
    partner_overlap: float
    honest_success: float
    bound: float
    success: float
    success_stderr: float
    conditional_success: float
    bottom: float
    bound_stderr: float = 0.0
    trials: int | None = None


@dataclass(frozen=True)
class AttackReport:
    """Attack outcome per ``gamma`` plus expectations; ``exact`` marks enumerated values."""

    exact: bool
    per_gamma: tuple[GammaOutcome, ...]
    expected_fidelity: float
    expected_success: float
    success_stderr: float
    conditional_success: float
    conditional_stderr: float
    bottom_rate: float
    expected_bound: float
    identity_deviation: float
    tolerance_sigmas: float = 4.0

    @property
    def bound_satisfied(self) -> bool:
        for g in self.per_gamma:
            if g.probability <= 0:
                continue
            if g.success < g.bound - self.tolerance(g):
                return False
        return True

    def tolerance(self, g: GammaOutcome) -> float:
        if self.exact:
            return 1e-9
        return self.tolerance_sigmas * _band(g)


def _band(g: GammaOutcome) -> float:
    # an empirical rate of exactly 0 or 1 has zero stderr; use the binomial width at the bound instead
    n = g.trials or 1
    binom = math.sqrt(max(g.bound * (1 - g.bound), 0.0) / n)
    return math.hypot(max(g.success_stderr, binom, 1.0 / n), g.bound_stderr)


def _rate(k: int, n: int) -> tuple[float, float]:
    if n == 0:
        return math.nan, math.nan
    r = k / n
    return r, math.sqrt(r * (1 - r) / n)


def _deviation(attack: PurificationAttack, rows) -> float:
    devs = [attack.plan(r.gamma).identity_deviation for r in rows if attack.plan(r.gamma).unitary is not None]
    return max(devs) if devs else math.nan


def honest_acceptance(spec: ProtocolSpec, target: int = 1) -> dict[tuple, float]:
    """``gamma -> Pr[unveil of target accepted | gamma]`` for an honest commitment to ``target``."""
    sim = Simulation(spec, commit_prime(spec, target), spec.honest_bob())
    acc: dict[tuple, list[float]] = {}
    for ex in sim.commit_branches(target):
        a = acc.setdefault(ex.gamma, [0.0, 0.0])
        a[0] += ex.probability
        for leaf in sim.unveil_branches(ex, target):
            if leaf.result.bit == target:
                a[1] += leaf.probability
    return {g: s / p for g, (p, s) in acc.items()}


def exact_attack_report(spec: ProtocolSpec, target: int = 1, attack: PurificationAttack | None = None) -> AttackReport:
    """Enumerate every commit and unveil branch of the attack against honest Bob."""
    attack = attack or PurificationAttack(spec)
    # the withheld states are the largest objects; build them first so a cap error comes early
    attack.states(0), attack.states(1)
    honest = honest_acceptance(spec, target)
    sim = Simulation(spec, attack, spec.honest_bob())
    per: dict[tuple, list[float]] = {}
    for ex in sim.commit_branches(0):
        acc = per.setdefault(ex.gamma, [0.0, 0.0, 0.0])
        acc[0] += ex.probability
        for leaf in sim.unveil_branches(ex, target):
            if leaf.result.bit == target:
                acc[1] += leaf.probability
            elif leaf.result is UnveilResult.BOTTOM:
                acc[2] += leaf.probability
    rows = []
    for g, (p, s, bot) in sorted(per.items(), key=repr):
        plan = attack.plan(g)
        h = honest.get(g, 0.0)
        rows.append(GammaOutcome(g, p, plan.fidelity, plan.partner_overlap, h,
                                 success_lower_bound(plan.fidelity, h), s / p, 0.0,
                                 s / (p - bot) if p - bot > 0 else math.nan, bot / p))
    succ = sum(r.probability * r.success for r in rows)
    bot = sum(r.probability * r.bottom for r in rows)
    return AttackReport(
        exact=True,
        per_gamma=tuple(rows),
        expected_fidelity=sum(r.probability * r.fidelity for r in rows),
        expected_success=succ,
        success_stderr=0.0,
        conditional_success=succ / (1 - bot) if bot < 1 else math.nan,
        conditional_stderr=0.0,
        bottom_rate=bot,
        expected_bound=sum(r.probability * r.bound for r in rows),
        identity_deviation=_deviation(attack, rows),
    )


@dataclass
class AttackTally:
    """Mergeable Monte Carlo counts keyed by ``gamma``.

    ``attack[gamma] = [runs, successes, bottoms]``; ``honest[gamma] = [runs, accepted]``.
    """

    attack: dict = field(default_factory=dict)
    honest: dict = field(default_factory=dict)

    def merge(self, other: "AttackTally") -> "AttackTally":
        for mine, theirs in ((self.attack, other.attack), (self.honest, other.honest)):
            for g, counts in theirs.items():
                c = mine.setdefault(g, [0] * len(counts))
                for i, v in enumerate(counts):
                    c[i] += v
        return self


def sample_attack(spec: ProtocolSpec, rng: np.random.Generator, trials: int, target: int = 1,
                  attack: PurificationAttack | None = None) -> AttackTally:
    """``trials`` attack runs against honest Bob, each paired with one honest reference run."""
    attack = attack or PurificationAttack(spec)
    sim = Simulation(spec, attack, spec.honest_bob())
    ref = Simulation(spec, commit_prime(spec, target), spec.honest_bob())
    tally = AttackTally()
    runs = sim.sample_runs(0, rng, trials, target)
    for g, r in zip(runs.gamma, runs.result):
        c = tally.attack.setdefault(g, [0, 0, 0])
        c[0] += 1
        c[1] += r.bit == target
        c[2] += r is UnveilResult.BOTTOM
    ref_runs = ref.sample_runs(target, rng, trials, target)
    for g, r in zip(ref_runs.gamma, ref_runs.result):
        h = tally.honest.setdefault(g, [0, 0])
        h[0] += 1
        h[1] += r.bit == target
    return tally


def mc_attack_report(spec: ProtocolSpec, tally: AttackTally, sigmas: float = 4.0,
                     attack: PurificationAttack | None = None) -> AttackReport:
    attack = attack or PurificationAttack(spec)
    rows = []
    total = sum(c[0] for c in tally.attack.values())
    hits = sum(c[1] for c in tally.attack.values())
    bottoms = sum(c[2] for c in tally.attack.values())
    for g, (n, s, b) in sorted(tally.attack.items(), key=repr):
        plan = attack.plan(g)
        hn, hs = tally.honest.get(g, (0, 0))
        h, h_se = _rate(hs, hn) if hn else (0.0, 0.0)
        bound = success_lower_bound(plan.fidelity, h)
        rate, se = _rate(s, n)
        rows.append(GammaOutcome(g, n / total, plan.fidelity, plan.partner_overlap, h, bound, rate, se,
                                 _rate(s, n - b)[0], b / n, h_se, n))
    succ, succ_se = _rate(hits, total)
    cond, cond_se = _rate(hits, total - bottoms)
    return AttackReport(
        exact=False,
        per_gamma=tuple(rows),
        expected_fidelity=sum(r.probability * r.fidelity for r in rows),
        expected_success=succ,
        success_stderr=succ_se,
        conditional_success=cond,
        conditional_stderr=cond_se,
        bottom_rate=bottoms / total,
        expected_bound=sum(r.probability * r.bound for r in rows),
        identity_deviation=_deviation(attack, rows),
        tolerance_sigmas=sigmas,
    )
