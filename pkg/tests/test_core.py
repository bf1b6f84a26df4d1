import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbclab import core
from qbclab.core import (
    ClassicalTranscript,
    DensityMatrix,
    InvariantError,
    Owner,
    Party,
    PureState,
    QBCError,
    RegisterError,
    ResourceCapError,
    Unitary,
)

KET_PLUS = np.array([1, 1]) / np.sqrt(2)


def bell(owners=(Owner.A, Owner.B), names=("a", "b")) -> PureState:
    return PureState(np.array([1, 0, 0, 1]) / np.sqrt(2), names, owners)


def random_state(rng, k, owners=None):
    v = rng.normal(size=2**k) + 1j * rng.normal(size=2**k)
    v /= np.linalg.norm(v)
    owners = owners or [Owner.A] * k
    return PureState(v, [f"r{i}" for i in range(k)], owners)


class TestZeroState:
    def test_empty_register_list_is_scalar_one(self):
        s = core.zero_state(0)
        assert s.amplitudes.tolist() == [1]
        assert s.registers == ()

    def test_two_registers(self):
        assert core.zero_state(2).amplitudes.tolist() == [1, 0, 0, 0]

    def test_single_bob_register_reduces_to_ket_zero(self):
        s = core.zero_state(1, Owner.B)
        rho = core.partial_trace(s, [Owner.B])
        np.testing.assert_array_equal(rho.matrix, [[1, 0], [0, 0]])

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            core.zero_state(-1)

    def test_cap(self):
        with pytest.raises(ResourceCapError):
            core.zero_state(5, max_qubits=4)


class TestPureStateInvariants:
    def test_unnormalized_rejected(self):
        with pytest.raises(InvariantError):
            PureState([1, 1], ["a"], [Owner.A])

    def test_tiny_norm_error_tolerated(self):
        PureState([1 + 1e-14, 0], ["a"], [Owner.A])

    def test_size_mismatch(self):
        with pytest.raises(InvariantError):
            PureState([1, 0], ["a", "b"], [Owner.A, Owner.A])

    def test_duplicate_register(self):
        with pytest.raises(InvariantError):
            PureState([1, 0, 0, 0], ["a", "a"], [Owner.A, Owner.B])

    def test_amplitudes_are_read_only(self):
        s = core.zero_state(1)
        with pytest.raises(ValueError):
            s.amplitudes[0] = 0

    def test_owner_strings_accepted(self):
        s = PureState([1, 0], ["a"], ["B"])
        assert s.owner_of("a") is Owner.B


class TestAllocate:
    def test_appends_zero(self):
        s = core.allocate(core.zero_state(0), "x", Owner.A)
        assert s.registers == ("x",)
        assert s.amplitudes.tolist() == [1, 0]

    def test_existing_register(self):
        s = core.zero_state(1, names=["x"])
        with pytest.raises(RegisterError):
            core.allocate(s, "x", Owner.A)

    def test_cap(self):
        s = core.zero_state(3)
        with pytest.raises(ResourceCapError):
            core.allocate(s, "extra", Owner.A, max_qubits=3)


class TestGates:
    def test_hadamard_makes_plus(self):
        s = core.apply_unitary(core.zero_state(1, names=["a"]), Unitary(core.H, ["a"]))
        np.testing.assert_allclose(s.amplitudes, KET_PLUS, atol=1e-15)

    def test_hadamard_then_cnot_is_bell(self):
        s = core.zero_state(2, names=["a", "b"])
        s = core.apply_unitary(s, Unitary(core.H, ["a"]))
        s = core.apply_unitary(s, Unitary(core.CNOT, ["a", "b"]))
        np.testing.assert_allclose(s.amplitudes, bell().amplitudes, atol=1e-15)

    def test_target_order_matters(self):
        s = PureState([0, 0, 1, 0], ["a", "b"], [Owner.A, Owner.A])  # |10>
        flipped = core.apply_unitary(s, Unitary(core.CNOT, ["b", "a"]))
        np.testing.assert_allclose(flipped.amplitudes, [0, 0, 1, 0])
        flipped = core.apply_unitary(s, Unitary(core.CNOT, ["a", "b"]))
        np.testing.assert_allclose(flipped.amplitudes, [0, 0, 0, 1])

    def test_non_unitary_rejected(self):
        with pytest.raises(InvariantError):
            Unitary(np.array([[1, 1], [0, 1]]), ["a"])

    def test_wrong_shape_rejected(self):
        with pytest.raises(InvariantError):
            Unitary(np.eye(4), ["a"])

    def test_unknown_target(self):
        with pytest.raises(RegisterError):
            core.apply_unitary(core.zero_state(1), Unitary(core.X, ["missing"]))

    def test_controlled_and_rotation(self):
        np.testing.assert_allclose(core.controlled(core.X), core.CNOT)
        np.testing.assert_allclose(core.ry_rotation(0.3)[:, 0], [np.cos(0.3), np.sin(0.3)])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.data())
    def test_matches_dense_kronecker(self, seed, k, data):
        rng = np.random.default_rng(seed)
        s = random_state(rng, k)
        m = data.draw(st.integers(1, min(3, k)))
        targets = data.draw(st.permutations(s.registers)).__getitem__(slice(0, m))
        q, _ = np.linalg.qr(rng.normal(size=(2**m, 2**m)) + 1j * rng.normal(size=(2**m, 2**m)))
        out = core.apply_unitary(s, Unitary(q, targets))
        # dense reference: permute targets to the front, act, permute back
        front = list(targets) + [r for r in s.registers if r not in targets]
        ref = core.reorder(s, front).amplitudes.reshape(2**m, -1)
        ref = PureState((q @ ref).reshape(-1), front, [Owner.A] * k)
        np.testing.assert_allclose(out.amplitudes, core.reorder(ref, s.registers).amplitudes, atol=1e-12)


class TestMeasurement:
    def test_bell_draw_point_three(self):
        rec = core.measure(bell(), "a", 0.3)
        assert rec.outcome == 0
        assert rec.probability == pytest.approx(0.5)
        # the measured register leaves the vector; what remains is |0> on b
        assert rec.post_state.registers == ("b",)
        np.testing.assert_allclose(rec.post_state.amplitudes, [1, 0])
        assert rec.post_state.consumed == (("a", Owner.E_A),)

    def test_ket_one(self):
        s = PureState([0, 1], ["a"], [Owner.B])
        rec = core.measure(s, "a", 0.999)
        assert rec.outcome == 1
        assert rec.post_state.consumed == (("a", Owner.E_B),)

    def test_plus_in_diagonal_basis(self):
        s = PureState(KET_PLUS, ["a"], [Owner.A])
        rotated = core.apply_unitary(s, Unitary(core.H.conj().T, ["a"]))
        for draw in (0.0, 0.5, 0.99):
            assert core.measure(rotated, "a", draw).outcome == 0

    def test_consumed_register_cannot_be_reused(self):
        post = core.measure(bell(), "a", 0.1).post_state
        with pytest.raises(RegisterError, match="consumed"):
            post.index("a")

    def test_zero_probability_projection(self):
        with pytest.raises(InvariantError):
            core.project(core.zero_state(1, names=["a"]), "a", 1)

    def test_collapse_agrees_with_measure(self):
        rng = np.random.default_rng(3)
        s = random_state(rng, 4)
        for draw in rng.random(20):
            rec = core.measure(s, "r2", draw)
            out, p, post = core.collapse(s, "r2", draw)
            assert out == rec.outcome
            assert p == pytest.approx(rec.probability, abs=1e-14)
            np.testing.assert_allclose(post.amplitudes, rec.post_state.amplitudes, atol=1e-14)

    def test_outcome_frequencies(self):
        s = PureState([np.sqrt(0.2), np.sqrt(0.8)], ["a"], [Owner.A])
        rng = np.random.default_rng(0)
        ones = sum(core.measure(s, "a", d).outcome for d in rng.random(20000))
        assert abs(ones / 20000 - 0.8) < 4 * np.sqrt(0.16 / 20000)


class TestPartialTrace:
    def test_bell_keep_b_is_maximally_mixed(self):
        rho = core.partial_trace(bell(), [Owner.B])
        np.testing.assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-15)

    def test_product_keep_b(self):
        s = core.product_state([[1, 0], [0, 1]], ["a", "b"], [Owner.A, Owner.B])
        np.testing.assert_allclose(core.partial_trace(s, [Owner.B]).matrix, np.diag([0, 1]))

    def test_keeping_an_absent_owner_gives_scalar(self):
        rho = core.partial_trace(bell(), [Owner.E_B])
        np.testing.assert_allclose(rho.matrix, [[1]])

    def test_empty_keep(self):
        with pytest.raises(ValueError):
            core.partial_trace(bell(), [])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
    def test_result_is_a_density_matrix(self, seed, ka, kb):
        s = random_state(np.random.default_rng(seed), ka + kb, [Owner.A] * ka + [Owner.B] * kb)
        rho = core.partial_trace(s, [Owner.B])
        DensityMatrix(rho.matrix)  # validates Hermitian, trace 1, PSD
        assert rho.dim == 2**kb


class TestDensityMatrix:
    def test_rejects_bad_trace(self):
        with pytest.raises(InvariantError):
            DensityMatrix(np.eye(2))

    def test_rejects_negative(self):
        with pytest.raises(InvariantError):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_rejects_non_hermitian(self):
        with pytest.raises(InvariantError):
            DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))


class TestReorderOverlap:
    def test_reorder_roundtrip(self):
        s = random_state(np.random.default_rng(1), 3)
        back = core.reorder(core.reorder(s, ["r2", "r0", "r1"]), s.registers)
        np.testing.assert_allclose(back.amplitudes, s.amplitudes)

    def test_overlap_ignores_register_order(self):
        s = random_state(np.random.default_rng(2), 3)
        assert core.overlap(s, core.reorder(s, ["r1", "r2", "r0"])) == pytest.approx(1.0)

    def test_reorder_rejects_other_registers(self):
        with pytest.raises(RegisterError):
            core.reorder(core.zero_state(2), ["q0", "zz"])


class TestTransmitClassical:
    def test_append_to_empty(self):
        t = core.transmit_classical(ClassicalTranscript(), Party.ALICE, 1)
        assert t.gamma == "1"

    def test_append_to_existing(self):
        t = ClassicalTranscript()
        for bit in (1, 0, 0):
            t = core.transmit_classical(t, Party.ALICE, bit)
        assert t.gamma == "100"
        assert t.senders == (Party.ALICE,) * 3

    def test_source_must_exist(self):
        with pytest.raises(QBCError, match="never generated"):
            core.transmit_classical(ClassicalTranscript(), Party.BOB, 1, source=0)
        t = ClassicalTranscript().record(Party.BOB, 1)
        assert core.transmit_classical(t, Party.BOB, 1, source=0).xi_S == (1,)

    def test_not_a_bit(self):
        with pytest.raises(ValueError):
            core.transmit_classical(ClassicalTranscript(), Party.ALICE, 2)

    def test_eta_carries_sender_tags(self):
        t = core.transmit_classical(ClassicalTranscript().record(Party.BOB, 0), Party.ALICE, 1)
        assert t.eta() == ((0,), (("A", 1),))
