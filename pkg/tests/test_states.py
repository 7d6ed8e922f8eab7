"""State core: preparation, gates, measurements, and their invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsdcsim.errors import RegisterLimitError, SpanError
from qsdcsim.states import (
    MAX_AMPLITUDES,
    PauliGate,
    ShiftPhaseGate,
    StateVector,
    basis_state,
    family_probabilities,
    gate_matrix,
    inner_product,
    make_ghz,
    measure_bell,
    measure_computational,
    measure_family,
    measure_x_basis,
    rotate_to_x_basis,
)

from conftest import random_state

SQRT2_INV = 2**-0.5


def ket(bits: str, dim: int = 2) -> int:
    return int(bits, dim)


class TestMakeGhz:
    def test_qubit_triplet(self):
        state = make_ghz(3, 2)
        expected = np.zeros(8, dtype=complex)
        expected[ket("000")] = expected[ket("111")] = SQRT2_INV
        np.testing.assert_allclose(state.amps, expected, atol=1e-15)

    def test_qutrit_triplet(self):
        state = make_ghz(3, 3)
        expected = np.zeros(27, dtype=complex)
        for n in range(3):
            expected[n * 13] = 3**-0.5  # |nnn> = n * (9 + 3 + 1)
        np.testing.assert_allclose(state.amps, expected, atol=1e-15)

    def test_bell_pair_degenerate_case(self):
        state = make_ghz(2, 2)
        expected = np.zeros(4, dtype=complex)
        expected[0] = expected[3] = SQRT2_INV
        np.testing.assert_allclose(state.amps, expected, atol=1e-15)

    def test_register_limit(self):
        assert make_ghz(20, 2).size == MAX_AMPLITUDES
        with pytest.raises(RegisterLimitError):
            make_ghz(21, 2)
        with pytest.raises(RegisterLimitError):
            make_ghz(13, 3)

    def test_rejects_single_particle(self):
        with pytest.raises(ValueError):
            make_ghz(1, 2)


class TestGates:
    def test_iy_is_the_fixed_real_matrix(self):
        np.testing.assert_array_equal(
            gate_matrix(PauliGate.IY, 2), np.array([[0, 1], [-1, 0]], dtype=complex)
        )

    @pytest.mark.parametrize("gate", list(PauliGate))
    def test_pauli_unitarity(self, gate):
        mat = gate_matrix(gate, 2)
        np.testing.assert_allclose(mat.conj().T @ mat, np.eye(2), atol=1e-12)

    @pytest.mark.parametrize("dim", [2, 3, 5])
    def test_shift_phase_unitarity(self, dim):
        for m in range(dim):
            for n in range(dim):
                mat = gate_matrix(ShiftPhaseGate(m, n), dim)
                assert np.abs(mat.conj().T @ mat - np.eye(dim)).max() < 1e-12

    def test_pauli_rejects_qutrits(self):
        state = make_ghz(3, 3)
        from qsdcsim.states import apply_single

        with pytest.raises(ValueError):
            apply_single(state, 0, PauliGate.X)

    def test_shift_phase_range_check(self):
        with pytest.raises(ValueError):
            gate_matrix(ShiftPhaseGate(3, 0), 3)


class TestApplySingle:
    def test_flip_on_middle_particle_gives_fifth_member(self):
        from qsdcsim.states import apply_single

        out = apply_single(make_ghz(3, 2), 1, PauliGate.X)
        expected = np.zeros(8, dtype=complex)
        expected[ket("010")] = expected[ket("101")] = SQRT2_INV
        np.testing.assert_allclose(out.amps, expected, atol=1e-15)

    def test_identity_leaves_state_unchanged(self):
        from qsdcsim.states import apply_single

        state = make_ghz(3, 2)
        out = apply_single(state, 2, PauliGate.I)
        np.testing.assert_array_equal(out.amps, state.amps)

    def test_shift_phase_on_qutrit(self):
        from qsdcsim.states import apply_single

        out = apply_single(basis_state(3, 1, (1,)), 0, ShiftPhaseGate(1, 2))
        expected = np.zeros(3, dtype=complex)
        expected[0] = np.exp(2j * np.pi / 3)  # |1> -> e^{2 pi i /3} |0>
        np.testing.assert_allclose(out.amps, expected, atol=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 2), st.sampled_from(list(PauliGate)))
    def test_norm_preserved(self, seed, particle, gate):
        from qsdcsim.states import apply_single

        state = random_state(2, 3, np.random.default_rng(seed))
        out = apply_single(state, particle, gate)
        assert abs(np.linalg.norm(out.amps) - 1.0) < 1e-10


class TestComputationalMeasurement:
    def test_ghz_collapse(self, rng):
        seen = set()
        for _ in range(64):
            out = measure_computational(make_ghz(3, 2), 2, rng)
            seen.add(out.label)
            expected = np.zeros(8, dtype=complex)
            expected[ket("000") if out.label == 0 else ket("111")] = 1.0
            np.testing.assert_allclose(out.post_state.amps, expected, atol=1e-12)
        assert seen == {0, 1}

    def test_eigenstate_is_certain(self, rng):
        state = basis_state(2, 3, (1, 1, 1))
        for particle in range(3):
            out = measure_computational(state, particle, rng)
            assert out.label == 1
            np.testing.assert_array_equal(out.post_state.amps, state.amps)

    def test_projection_of_flipped_member(self, rng):
        amps = np.zeros(8, dtype=complex)
        amps[ket("010")] = amps[ket("101")] = SQRT2_INV
        state = StateVector(2, 3, amps)
        for _ in range(32):
            out = measure_computational(state, 0, rng)
            if out.label == 0:
                expected = np.zeros(8, dtype=complex)
                expected[ket("010")] = 1.0
                np.testing.assert_allclose(out.post_state.amps, expected, atol=1e-12)
                return
        pytest.fail("outcome 0 never sampled")

    def test_born_rule_frequencies(self):
        # Frequencies must match squared amplitudes within 3 standard errors.
        rng = np.random.default_rng(99)
        state = random_state(2, 3, rng)
        probs = (np.abs(state.amps) ** 2).reshape(2, 4).sum(axis=1)
        trials = 100_000
        hits = sum(measure_computational(state, 0, rng).label for _ in range(trials))
        rate = hits / trials
        se = np.sqrt(probs[1] * (1 - probs[1]) / trials)
        assert abs(rate - probs[1]) < 3 * se

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 2))
    def test_idempotent(self, seed, particle):
        rng = np.random.default_rng(seed)
        state = random_state(2, 3, rng)
        first = measure_computational(state, particle, rng)
        second = measure_computational(first.post_state, particle, rng)
        assert second.label == first.label
        np.testing.assert_allclose(second.post_state.amps, first.post_state.amps, atol=1e-12)


class TestXBasisMeasurement:
    def test_ghz_collapse_states(self, rng):
        # Collapse of the triplet after an x measurement of the check particle:
        # + leaves the pair correlated in x with even parity, - with odd.
        phi_plus = np.zeros(4, dtype=complex)
        phi_plus[0] = phi_plus[3] = SQRT2_INV
        phi_minus = np.zeros(4, dtype=complex)
        phi_minus[0], phi_minus[3] = SQRT2_INV, -SQRT2_INV
        plus = np.array([1, 1], dtype=complex) * SQRT2_INV
        minus = np.array([1, -1], dtype=complex) * SQRT2_INV
        seen = set()
        for _ in range(32):
            out = measure_x_basis(make_ghz(3, 2), 2, rng)
            seen.add(out.label)
            if out.label == +1:
                expected = np.kron(phi_plus, plus)
            else:
                expected = np.kron(phi_minus, minus)
            assert abs(abs(np.vdot(expected, out.post_state.amps)) - 1.0) < 1e-10
        assert seen == {+1, -1}

    def test_plus_eigenstate(self, rng):
        state = StateVector(2, 1, np.array([1, 1], dtype=complex) * SQRT2_INV)
        for _ in range(8):
            assert measure_x_basis(state, 0, rng).label == +1

    def test_rejects_qutrits(self, rng):
        with pytest.raises(ValueError):
            measure_x_basis(make_ghz(3, 3), 0, rng)


class TestBellMeasurement:
    def test_phi_plus_is_certain(self, rng):
        state = make_ghz(2, 2)
        for _ in range(8):
            out = measure_bell(state, (0, 1), rng)
            assert out.label == 0

    def test_phi_minus_is_certain(self, rng):
        amps = np.zeros(4, dtype=complex)
        amps[0], amps[3] = SQRT2_INV, -SQRT2_INV
        state = StateVector(2, 2, amps)
        for _ in range(8):
            assert measure_bell(state, (0, 1), rng).label == 1

    def test_product_zero_state_splits_phi(self):
        # |00> = (Phi+ + Phi-)/sqrt2, so both outcomes appear with rate 1/2.
        rng = np.random.default_rng(5)
        counts = {0: 0, 1: 0}
        trials = 4000
        for _ in range(trials):
            out = measure_bell(basis_state(2, 2, (0, 0)), (0, 1), rng)
            counts[out.label] += 1
        assert set(counts) == {0, 1}
        se = np.sqrt(0.25 / trials)
        assert abs(counts[0] / trials - 0.5) < 3 * se

    def test_embedded_pair_collapse(self, rng):
        # GHZ = (|Phi+>|0> + |Phi->|1>) / sqrt2 on the (A,B) pair, up to layout.
        out = measure_bell(make_ghz(3, 2), (0, 1), rng)
        assert out.label in (0, 1)
        assert abs(np.linalg.norm(out.post_state.amps) - 1.0) < 1e-10

    def test_rejects_duplicate_indices(self, rng):
        with pytest.raises(ValueError):
            measure_bell(make_ghz(3, 2), (1, 1), rng)


class TestFamilyMeasurement:
    def _family(self):
        from qsdcsim.codec import QUBIT3, build_family

        return build_family(QUBIT3)

    def test_member_detected_with_certainty(self, rng):
        family = self._family()
        amps = np.zeros(8, dtype=complex)
        amps[ket("010")] = amps[ket("101")] = SQRT2_INV
        out = measure_family(StateVector(2, 3, amps), family, rng)
        assert out.label == 4  # the I x X member
        assert abs(abs(inner_product(out.post_state, family.members[4])) - 1.0) < 1e-12

    def test_base_member_self(self, rng):
        family = self._family()
        assert measure_family(family.members[0], family, rng).label == 0

    def test_global_phase_invisible(self, rng):
        family = self._family()
        flipped = StateVector(2, 3, -family.members[2].amps)
        probs = family_probabilities(flipped, family)
        np.testing.assert_allclose(probs, np.eye(8)[2], atol=1e-12)
        assert measure_family(flipped, family, rng).label == 2

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 2 * np.pi))
    def test_phase_invariance_property(self, seed, theta):
        family = self._family()
        state = random_state(2, 3, np.random.default_rng(seed))
        rotated = StateVector(2, 3, np.exp(1j * theta) * state.amps)
        np.testing.assert_allclose(
            family_probabilities(state, family),
            family_probabilities(rotated, family),
            atol=1e-12,
        )

    def test_span_error_for_partial_family(self, rng):
        family = self._family()
        outside = family.members[5]
        with pytest.raises(SpanError):
            measure_family(outside, family.members[:2], rng)

    def test_environment_particles_are_traced(self, rng):
        # A member tensor an uncorrelated extra qubit: same outcome, and the
        # collapsed state keeps the environment factor.
        family = self._family()
        extra = np.kron(family.members[3].amps, np.array([0, 1], dtype=complex))
        out = measure_family(StateVector(2, 4, extra), family, rng)
        assert out.label == 3
        assert abs(abs(np.vdot(extra, out.post_state.amps)) - 1.0) < 1e-10

    def test_repeat_measurement_is_stable(self, rng):
        family = self._family()
        state = random_state(2, 3, rng)
        first = measure_family(state, family, rng)
        second = measure_family(first.post_state, family, rng)
        assert second.label == first.label


class TestInnerProduct:
    def test_normalization(self):
        g = make_ghz(3, 2)
        assert abs(inner_product(g, g) - 1.0) < 1e-12

    def test_orthogonal_members(self):
        from qsdcsim.codec import QUBIT3, build_family

        family = build_family(QUBIT3)
        assert abs(inner_product(family.members[0], family.members[1])) < 1e-12

    def test_partial_overlap(self):
        assert abs(inner_product(basis_state(2, 3, (0, 0, 0)), make_ghz(3, 2)) - SQRT2_INV) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            inner_product(make_ghz(3, 2), make_ghz(2, 2))


class TestStateVectorInvariants:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            StateVector(2, 2, np.array([1, 1, 0, 0], dtype=complex))

    def test_amps_are_read_only(self):
        state = make_ghz(3, 2)
        with pytest.raises(ValueError):
            state.amps[0] = 0

    def test_digit_layout(self):
        state = basis_state(2, 3, (1, 0, 1))
        assert np.argmax(np.abs(state.amps)) == 5
        assert state.digits_of_index(5) == (1, 0, 1)

    def test_x_rotation_is_an_involution(self, rng):
        state = random_state(2, 3, rng)
        back = rotate_to_x_basis(rotate_to_x_basis(state))
        np.testing.assert_allclose(back.amps, state.amps, atol=1e-12)
