import numpy as np
import pytest
import scipy.linalg as sla

from mebench.system import (SystemParams, build_model, cluster_frequencies,
                            interaction_picture_L, jump_decomposition,
                            pauli_product)

from conftest import DETUNED, RESONANT

PSI_P = np.array([1.0, 1.0]) / np.sqrt(2)
PSI_M = np.array([1.0, -1.0]) / np.sqrt(2)
FLIP = np.outer(PSI_M, PSI_P)  # |psi_-><psi_+| on one qubit


class TestBuildModel:
    def test_resonant_eigenvalues(self):
        m = build_model(RESONANT)
        assert np.allclose(m.eigvals, [-1.0, 0.0, 0.0, 1.0], atol=1e-14)

    def test_detuned_eigenvalues(self):
        m = build_model(DETUNED)
        assert np.allclose(m.eigvals, [-0.975, -0.025, 0.025, 0.975], atol=1e-14)

    def test_coupling_operator_spectrum(self):
        m = build_model(DETUNED)
        assert abs(np.trace(m.coupling)) <= 1e-15
        sq_eigs = np.sort(np.linalg.eigvalsh(m.coupling @ m.coupling))
        assert np.allclose(sq_eigs, [0.0, 0.0, 1.0, 1.0], atol=1e-14)

    def test_eigendecomposition_attached(self):
        m = build_model(DETUNED)
        resid = m.hamiltonian @ m.eigvecs - m.eigvecs @ np.diag(m.eigvals)
        assert np.linalg.norm(resid) <= 1e-13


class TestJumpDecomposition:
    def test_detuned_structure(self, detuned_model):
        dec = jump_decomposition(detuned_model)
        assert len(dec) == 4
        assert np.allclose(np.sort(dec.frequencies), [-1.0, -0.95, 0.95, 1.0], atol=1e-12)
        # single-qubit flips
        assert np.linalg.norm(dec.operator(1.0) - 0.5 * np.kron(FLIP, np.eye(2))) <= 1e-12
        assert np.linalg.norm(dec.operator(0.95) - 0.5 * np.kron(np.eye(2), FLIP)) <= 1e-12

    def test_resonant_structure(self, resonant_model):
        dec = jump_decomposition(resonant_model)
        assert len(dec) == 2
        expected = 0.5 * (np.kron(FLIP, np.eye(2)) + np.kron(np.eye(2), FLIP))
        assert np.linalg.norm(dec.operator(1.0) - expected) <= 1e-12

    def test_zero_frequency_component_absent(self, detuned_model, resonant_model):
        for model in (detuned_model, resonant_model):
            dec = jump_decomposition(model)
            assert np.abs(dec.frequencies).min() > 0.5

    def test_completeness(self, detuned_model):
        dec = jump_decomposition(detuned_model)
        assert np.linalg.norm(dec.operators.sum(axis=0) - detuned_model.coupling) <= 1e-12

    def test_hermiticity_pairing(self, detuned_model, resonant_model):
        for model in (detuned_model, resonant_model):
            dec = jump_decomposition(model)
            for w in dec.frequencies:
                pair = dec.operator(-w)
                assert np.linalg.norm(pair - dec.operator(w).conj().T) <= 1e-12

    def test_ambiguous_grouping_rejected(self):
        # detuning just above the merge window but below twice of it
        m = build_model(SystemParams(1.0, 1.0 - 5e-10))
        with pytest.raises(ValueError, match="ambiguous"):
            jump_decomposition(m, group_tol=3e-10)

    def test_tiny_detuning_merges_to_resonant_form(self, resonant_model):
        m = build_model(SystemParams(1.0, 1.0 - 1e-12))
        dec = jump_decomposition(m)
        ref = jump_decomposition(resonant_model)
        assert len(dec) == 2
        assert np.linalg.norm(dec.operator(1.0) - ref.operator(1.0)) <= 1e-9


class TestInteractionPicture:
    def test_at_zero(self, detuned_model):
        dec = jump_decomposition(detuned_model)
        assert np.linalg.norm(interaction_picture_L(dec, 0.0) - detuned_model.coupling) <= 1e-14

    def test_matches_conjugation_oracle(self, detuned_model):
        dec = jump_decomposition(detuned_model)
        h = detuned_model.hamiltonian
        for t in (0.3, 1.7, 9.1):
            expected = sla.expm(1j * h * t) @ detuned_model.coupling @ sla.expm(-1j * h * t)
            assert np.linalg.norm(interaction_picture_L(dec, t) - expected) <= 1e-10

    def test_conjugation_oracle_random_times(self, detuned_model, resonant_model):
        rng = np.random.default_rng(23)
        for model in (detuned_model, resonant_model):
            dec = jump_decomposition(model)
            h = model.hamiltonian
            for t in rng.uniform(0.0, 20.0, size=20):
                expected = sla.expm(1j * h * t) @ model.coupling @ sla.expm(-1j * h * t)
                assert np.linalg.norm(interaction_picture_L(dec, t) - expected) <= 1e-10

    def test_resonant_periodicity(self, resonant_model):
        dec = jump_decomposition(resonant_model)
        period = 2.0 * np.pi
        for t in (0.2, 1.1, 4.4):
            diff = interaction_picture_L(dec, t + period) - interaction_picture_L(dec, t)
            assert np.linalg.norm(diff) <= 1e-10


class TestClustering:
    def test_detuned_pair_clusters(self, detuned_model):
        dec = jump_decomposition(detuned_model)
        clustering = cluster_frequencies(dec, 0.1)
        assert len(clustering) == 2
        assert np.allclose(np.sort(clustering.frequencies), [-0.975, 0.975], atol=1e-12)
        nonlocal_op = 0.5 * (np.kron(FLIP, np.eye(2)) + np.kron(np.eye(2), FLIP))
        plus = clustering.clusters[int(np.argmax(clustering.frequencies))]
        assert np.linalg.norm(plus.operator - nonlocal_op) <= 1e-12
        assert np.allclose(np.sort(plus.members), [0.95, 1.0])

    def test_zero_tolerance_keeps_everything_apart(self, detuned_model):
        dec = jump_decomposition(detuned_model)
        clustering = cluster_frequencies(dec, 0.0)
        assert len(clustering) == len(dec)

    def test_resonant_clustering_is_identity(self, resonant_model):
        dec = jump_decomposition(resonant_model)
        for tol in (0.0, 0.1, 1.0):
            clustering = cluster_frequencies(dec, tol)
            assert len(clustering) == len(dec)
            assert np.allclose(np.sort(clustering.frequencies), np.sort(dec.frequencies))

    def test_cluster_operators_sum_to_coupling(self, detuned_model):
        dec = jump_decomposition(detuned_model)
        for tol in (0.0, 0.1, 0.5):
            clustering = cluster_frequencies(dec, tol)
            total = sum(c.operator for c in clustering.clusters)
            assert np.linalg.norm(total - detuned_model.coupling) <= 1e-12


def test_pauli_products_basis():
    assert np.allclose(pauli_product(0, 0), np.eye(4))
    assert np.linalg.norm(pauli_product(3, 3) - np.diag([1.0, -1.0, -1.0, 1.0])) == 0
    with pytest.raises(IndexError):
        pauli_product(4, 0)
