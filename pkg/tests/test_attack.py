import math

import numpy as np
import pytest

from qbclab import core
from qbclab.attack import (
    PurificationAttack,
    audit_by_gamma,
    commit_double_prime,
    commit_prime,
    exact_attack_report,
    fidelity_audit,
    formal_identity,
    honest_acceptance,
    mc_attack_report,
    plan_steering,
    plan_summary,
    sample_attack,
    success_lower_bound,
    withheld_states,
)
from qbclab.core import Owner, Party
from qbclab.protocol import Rebind, Simulation, UnveilResult
from qbclab.protocols import bb84_protocol, toy_protocol

ALPHAS = [0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8, math.pi / 2]


class TestBound:
    @pytest.mark.parametrize("f,expected", [(1.0, 1.0), (0.0, 0.0), (math.cos(math.pi / 4), 0.5)])
    def test_square(self, f, expected):
        assert success_lower_bound(f) == pytest.approx(expected, abs=1e-12)

    def test_perfect_overlap_inherits_honest_rate(self):
        assert success_lower_bound(1.0, 0.4375) == pytest.approx(0.4375)

    def test_angles_add(self):
        f, h = math.cos(0.3), math.cos(0.5) ** 2
        assert success_lower_bound(f, h) == pytest.approx(math.cos(0.8) ** 2)
        assert success_lower_bound(math.cos(1.0), math.cos(1.0) ** 2) == 0.0

    def test_monotone(self):
        vals = [success_lower_bound(f, 0.7) for f in np.linspace(0, 1, 50)]
        assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("bad", [-0.1, 1.1])
    def test_range(self, bad):
        with pytest.raises(ValueError):
            success_lower_bound(bad)
        with pytest.raises(ValueError):
            success_lower_bound(0.5, bad)


class TestWithheldStates:
    def test_bb84_has_one_public_string(self):
        states = withheld_states(bb84_protocol(2), 0)
        assert list(states) == [()]
        g = states[()]
        assert g.probability == pytest.approx(1.0)
        assert set(g.state.registers_of(Owner.A)) == {"r0", "r1"}
        assert set(g.alice_pending) == {"w0", "w1"}
        assert {p.basis for p in g.alice_pending.values()} == {"+"}

    @pytest.mark.parametrize("n", [1, 2, 3])
    @pytest.mark.parametrize("b", [0, 1])
    def test_recorded_bob_equals_withheld_bob(self, n, b):
        spec = bb84_protocol(n)
        recorded = withheld_states(spec, b, spec.honest_bob())
        kept = withheld_states(spec, b, commit_double_prime(spec))
        assert set(recorded) == set(kept)
        for gamma, g in recorded.items():
            psi_r, psi_k = g.state, kept[gamma].state
            assert set(psi_r.registers_of(Owner.E_B)) == set(psi_k.registers_of(Owner.B))
            bob_regs = sorted(psi_k.registers_of(Owner.B))
            rho_r = core.reduced_matrix(core.reorder(psi_r, bob_regs + list(psi_r.registers_of(Owner.A))),
                                        bob_regs)
            rho_k = core.reduced_matrix(core.reorder(psi_k, bob_regs + list(psi_k.registers_of(Owner.A))),
                                        bob_regs)
            assert np.max(np.abs(rho_r - rho_k)) <= 1e-10
            assert abs(core.overlap(psi_k, psi_r.with_owner(bob_regs[0], Owner.B))) == pytest.approx(1.0)

    def test_toy_state(self):
        alpha = 0.7
        g = withheld_states(toy_protocol(alpha), 1)[()]
        expected = np.kron([1, 0], core.ry_rotation(alpha)[:, 0])
        np.testing.assert_allclose(core.reorder(g.state, ["a", "q"]).amplitudes, expected, atol=1e-15)


class TestAudit:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_bb84_fidelity_is_one(self, n):
        assert fidelity_audit(bb84_protocol(n)) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("n", [1, 2])
    def test_bb84_with_recorded_bob(self, n):
        spec = bb84_protocol(n)
        assert fidelity_audit(spec, spec.honest_bob()) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_toy_fidelity_is_cos_alpha(self, alpha):
        assert fidelity_audit(toy_protocol(alpha)) == pytest.approx(math.cos(alpha), abs=1e-9)

    def test_rows(self):
        (row,) = audit_by_gamma(toy_protocol(0.2))
        assert row.gamma == () and row.p0 == row.p1 == pytest.approx(1.0)

    @pytest.mark.parametrize("spec", [bb84_protocol(1), bb84_protocol(3), toy_protocol(0.4)], ids=repr)
    @pytest.mark.parametrize("b", [0, 1])
    def test_formal_identity(self, spec, b):
        assert formal_identity(spec, b) == []

    def test_withheld_alice_pins_bit(self):
        spec = bb84_protocol(1)
        assert commit_prime(spec, 1).commit(0).memory["b"] == 1


class TestPlan:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
    def test_bb84_steering_is_trivial(self, n):
        plan = PurificationAttack(bb84_protocol(n)).plan(())
        assert plan.fidelity == pytest.approx(1.0, abs=1e-9)
        assert plan.partner_overlap == pytest.approx(1.0, abs=1e-9)
        assert plan.identity_deviation <= 1e-8
        assert {p.basis for p in plan.pending.values()} == {"x"}

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_toy_partner_overlap(self, alpha):
        spec = toy_protocol(alpha)
        plan = plan_steering(spec, ())
        assert plan.fidelity == pytest.approx(math.cos(alpha), abs=1e-9)
        assert plan.partner_overlap == pytest.approx(math.cos(alpha), abs=1e-9)
        assert plan.targets == ("a",)

    def test_unknown_gamma(self):
        plan = plan_steering(bb84_protocol(1), (("A", 1),))
        assert plan.unitary is None and plan.fidelity == 0.0
        assert math.isnan(plan.identity_deviation)

    def test_unveil_is_steer_rebind_then_honest(self):
        spec = bb84_protocol(2)
        attack = PurificationAttack(spec)
        sim = Simulation(spec, attack, spec.honest_bob())
        (ex,) = sim.commit_branches(0)[:1]
        acts = attack.unveil(ex.view(Party.ALICE), 1)
        assert acts[0].label == "steer"
        assert isinstance(acts[1], Rebind)
        assert dict(acts[1].bases) == {"w0": "x", "w1": "x"}
        assert attack.unveil(ex.view(Party.ALICE), 1)[0] is acts[0]
        honest_zero = attack.unveil(ex.view(Party.ALICE), 0)
        assert [a.key for a in honest_zero] == ["w0", "w1"]

    def test_summary(self):
        s = plan_summary(PurificationAttack(toy_protocol(math.pi / 3)))
        assert s.expected_fidelity == pytest.approx(0.5, abs=1e-12)
        assert s.expected_partner_overlap == pytest.approx(0.5, abs=1e-12)


class TestExactAttack:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_bb84_always_decodes_as_one(self, n):
        rep = exact_attack_report(bb84_protocol(n))
        assert rep.exact
        assert rep.conditional_success == pytest.approx(1.0, abs=1e-12)
        assert rep.expected_success == pytest.approx(1 - 0.75**n, abs=1e-12)
        assert rep.bottom_rate == pytest.approx(0.75**n, abs=1e-12)
        assert rep.expected_fidelity == pytest.approx(1.0, abs=1e-9)
        assert rep.identity_deviation <= 1e-8
        assert rep.bound_satisfied

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_toy_success_is_cos_squared(self, alpha):
        rep = exact_attack_report(toy_protocol(alpha))
        assert rep.expected_success == pytest.approx(math.cos(alpha) ** 2, abs=1e-12)
        assert rep.expected_bound == pytest.approx(math.cos(alpha) ** 2, abs=1e-12)
        assert rep.bound_satisfied

    def test_honest_acceptance(self):
        assert honest_acceptance(bb84_protocol(2)) == {(): pytest.approx(1 - 0.75**2)}
        assert honest_acceptance(toy_protocol(0.3)) == {(): pytest.approx(1.0)}

    def test_target_zero_is_honest(self):
        spec = bb84_protocol(2)
        dist = Simulation(spec, PurificationAttack(spec), spec.honest_bob()).outcome_distribution(0, 0)
        assert dist[UnveilResult.ONE] == 0.0


class TestSampledAttack:
    def test_toy_within_four_sigma(self):
        alpha = math.pi / 4
        spec = toy_protocol(alpha)
        tally = sample_attack(spec, np.random.default_rng(3), 2000)
        rep = mc_attack_report(spec, tally)
        assert not rep.exact
        assert abs(rep.expected_success - 0.5) <= 4 * rep.success_stderr
        assert rep.bound_satisfied

    def test_bb84_conditional_success(self):
        spec = bb84_protocol(3)
        tally = sample_attack(spec, np.random.default_rng(4), 400)
        rep = mc_attack_report(spec, tally)
        assert rep.conditional_success == 1.0
        assert rep.bound_satisfied

    def test_tally_merge(self):
        spec = toy_protocol(0.5)
        attack = PurificationAttack(spec)
        a = sample_attack(spec, np.random.default_rng(1), 50, attack=attack)
        b = sample_attack(spec, np.random.default_rng(2), 70, attack=attack)
        merged = a.merge(b)
        assert sum(c[0] for c in merged.attack.values()) == 120
        assert sum(c[0] for c in merged.honest.values()) == 120
