"""Quantum engine checks.

The oracle here builds the full 2n-qubit state and takes expectation values of
explicit operators, independently of the conditional-vector route used by
``quantum_behavior``.
"""

import itertools
from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdnet.inequalities import bilocal_I, bilocal_J, s_n, star_Ij
from mdnet.quantum import (
    PAULI_X,
    PAULI_Z,
    QuantumSetup,
    bell_basis,
    bell_states,
    default_sign_convention,
    dichotomic_observable,
    even_subsets,
    ghz_type_basis,
    mixed_behavior,
    optimal_bilocal_setup,
    optimal_star_setup,
    quantum_behavior,
    singlet,
    xz_string,
)
from mdnet.scenario import BehaviorTensor, correlator, no_signaling_check, validate_behavior


def full_state_correlator(setup, x, op_central):
    """<A^1_{x1} ... A^n_{xn} (x) O> with qubits reordered as branches then central."""
    n = setup.n
    psi = np.array([1.0 + 0j])
    for s in setup.source_states:
        psi = np.kron(psi, s)
    # current order: (b1, c1, b2, c2, ...); move to (b1..bn, c1..cn)
    psi = psi.reshape((2,) * (2 * n))
    order = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    psi = np.transpose(psi, order).reshape(-1)
    op = np.array([[1.0 + 0j]])
    for i in range(n):
        op = np.kron(op, dichotomic_observable(setup.branch_angles[i][x[i]]))
    op = np.kron(op, op_central)
    return float(np.real(psi.conj() @ op @ psi))


def random_unitary(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


def random_setup(n, seed):
    rng = np.random.default_rng(seed)
    states = []
    for _ in range(n):
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        states.append(v / np.linalg.norm(v))
    angles = [tuple(rng.uniform(-np.pi, np.pi, 2)) for _ in range(n)]
    return QuantumSetup(n, states, angles, ghz_type_basis(n))


class TestPrimitives:
    def test_singlet(self):
        s = singlet()
        assert np.linalg.norm(s) == pytest.approx(1.0, abs=1e-15)
        assert abs(s[0]) == 0
        np.testing.assert_allclose(s, [0, 1 / sqrt(2), -1 / sqrt(2), 0])

    def test_singlet_invariant_under_uu(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            u = random_unitary(rng)
            out = np.kron(u, u) @ singlet()
            assert abs(np.vdot(singlet(), out)) == pytest.approx(1.0, abs=1e-12)

    def test_observable(self):
        np.testing.assert_allclose(dichotomic_observable(0), PAULI_Z)
        np.testing.assert_allclose(dichotomic_observable(np.pi / 2), PAULI_X, atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-10, 10))
    def test_observable_squares_to_identity(self, theta):
        o = dichotomic_observable(theta)
        np.testing.assert_allclose(o @ o, np.eye(2), atol=1e-12)


class TestBases:
    def test_bell_orthonormal_and_maximally_entangled(self):
        b = bell_basis()
        np.testing.assert_allclose(b.conj().T @ b, np.eye(4), atol=1e-12)
        for v in bell_states().values():
            m = v.reshape(2, 2)
            np.testing.assert_allclose(m @ m.conj().T, np.eye(2) / 2, atol=1e-12)

    def test_ghz_two_sources_is_bell(self):
        overlap = np.abs(ghz_type_basis(2).conj().T @ bell_basis())
        np.testing.assert_allclose(overlap, np.eye(4), atol=1e-12)

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_ghz_orthonormal(self, n):
        b = ghz_type_basis(n)
        assert b.shape == (2**n, 2**n)
        np.testing.assert_allclose(b.conj().T @ b, np.eye(2**n), atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_stabilizer_strings_are_diagonal(self, n):
        b = ghz_type_basis(n)
        for subset in even_subsets(n):
            d = b.conj().T @ xz_string(n, subset) @ b
            np.testing.assert_allclose(d, np.diag(np.diag(d)), atol=1e-12)
            np.testing.assert_allclose(np.abs(np.diag(d)), 1, atol=1e-12)

    def test_default_conventions(self):
        t2 = default_sign_convention(2).table
        np.testing.assert_array_equal(t2[0], [1, 1, -1, -1])
        np.testing.assert_array_equal(t2[1], [1, -1, 1, -1])
        t3 = default_sign_convention(3).table
        np.testing.assert_array_equal(t3[3], -t3[0] * t3[1] * t3[2])


class TestBehaviors:
    def test_bilocal_optimum(self):
        t = quantum_behavior(optimal_bilocal_setup())
        assert bilocal_I(t) == pytest.approx(0.5, abs=1e-9)
        assert bilocal_J(t) == pytest.approx(0.5, abs=1e-9)
        assert s_n(t).aggregate_S == pytest.approx(sqrt(2), abs=1e-9)
        assert no_signaling_check(t, 1e-12).passed

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_star_optimum(self, n):
        t = quantum_behavior(optimal_star_setup(n))
        assert s_n(t).aggregate_S == pytest.approx(2 ** (n - 2) * sqrt(2), abs=1e-9)

    def test_components_three_sources(self):
        t = quantum_behavior(optimal_star_setup(3))
        for j in range(1, 5):
            assert abs(star_Ij(t, j)) == pytest.approx(2 ** -1.5, abs=1e-12)

    @pytest.mark.parametrize("n", [2, 3])
    def test_matches_full_state_oracle(self, n):
        setup = random_setup(n, 11 + n)
        t = quantum_behavior(setup)
        conv = setup.sign_convention
        basis = setup.central_basis
        for j, subset in enumerate(even_subsets(n)):
            op = basis @ np.diag(conv.table[j]) @ basis.conj().T
            for x in itertools.product((0, 1), repeat=n):
                assert correlator(t, x, conv.table[j]) == pytest.approx(
                    full_state_correlator(setup, x, op), abs=1e-12
                )

    def test_product_sources_factorize(self):
        zero = np.array([1, 0, 0, 0], dtype=complex)
        setup = QuantumSetup(2, [zero, zero], [(0.3, 0.3), (0.3, 0.3)], bell_basis())
        p = quantum_behavior(setup).probabilities
        for x, z in itertools.product((0, 1), repeat=2):
            block = p[x, z]
            pa = block.sum(axis=(1, 2))
            pb = block.sum(axis=(0, 1))
            pc = block.sum(axis=(0, 2))
            np.testing.assert_allclose(block, np.einsum("a,c,b->acb", pa, pc, pb), atol=1e-12)
        assert s_n(quantum_behavior(setup)).aggregate_S <= 1 + 1e-9

    def test_global_phase_invariance(self):
        base = optimal_star_setup(3)
        shifted = optimal_star_setup(3)
        shifted.source_states[1] = shifted.source_states[1] * np.exp(0.77j)
        np.testing.assert_allclose(
            quantum_behavior(base).probabilities, quantum_behavior(shifted).probabilities, atol=1e-12
        )

    def test_one_classical_source_kills_violation(self):
        setups = []
        for state in bell_states().values():
            s = optimal_bilocal_setup()
            s.source_states[0] = state
            setups.append(s)
        t = mixed_behavior(setups, [0.25] * 4)
        assert s_n(t).aggregate_S <= 1 + 1e-9

    def test_alice_charlie_symmetry(self):
        s = optimal_bilocal_setup()
        t = quantum_behavior(s)
        swapped = np.transpose(t.probabilities, (1, 0, 3, 2, 4))
        t2 = BehaviorTensor(t.scenario, swapped)
        assert bilocal_I(t2) == pytest.approx(bilocal_I(t), abs=1e-12)
        assert bilocal_J(t2) == pytest.approx(bilocal_J(t), abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from([2, 3]))
    def test_random_setups_valid_and_no_signaling(self, seed, n):
        t = quantum_behavior(random_setup(n, seed))
        assert validate_behavior(t).passed
        assert no_signaling_check(t, 1e-12).passed


class TestSetupValidation:
    def test_rejects_unnormalized_state(self):
        with pytest.raises(ValueError):
            QuantumSetup(2, [np.ones(4), singlet()], [(0, 0), (0, 0)], bell_basis())

    def test_rejects_non_orthonormal_basis(self):
        bad = bell_basis()
        bad[:, 0] = bad[:, 1]
        with pytest.raises(ValueError):
            QuantumSetup(2, [singlet(), singlet()], [(0, 0), (0, 0)], bad)

    def test_json_round_trip(self):
        s = optimal_star_setup(3)
        back = QuantumSetup.from_json(s.to_json())
        np.testing.assert_allclose(quantum_behavior(back).probabilities, quantum_behavior(s).probabilities)
