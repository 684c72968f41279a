import numpy as np
import pytest

from mebench import engine
from mebench.bath import BathParams
from mebench.engine import (EngineError, IntegrationError, Superoperator,
                            commutator_superop, devectorize, expm, hermitian_eigs,
                            integrate, left_multiply, nullspace, right_multiply,
                            sandwich, vectorize)
from mebench.masters import qome_generator, rfe_generator
from mebench.system import build_model

from conftest import DETUNED, FIG2_BATH, random_hermitian


class TestVectorize:
    def test_column_stacking_convention(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(vectorize(x), [1.0, 3.0, 2.0, 4.0])

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        assert np.array_equal(devectorize(vectorize(x)), x)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            vectorize(np.ones((2, 3)))
        with pytest.raises(ValueError):
            devectorize(np.ones(5))

    def test_sandwich_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(6):
            a, x, b = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
                       for _ in range(3))
            lhs = sandwich(a, b) @ vectorize(x)
            assert np.linalg.norm(lhs - vectorize(a @ x @ b)) <= 1e-13 * np.linalg.norm(lhs)

    def test_left_right_multiply(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert np.allclose(devectorize(left_multiply(a) @ vectorize(x)), a @ x)
        assert np.allclose(devectorize(right_multiply(a) @ vectorize(x)), x @ a)

    def test_commutator_superop(self):
        rng = np.random.default_rng(8)
        h = random_hermitian(rng)
        x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        lhs = devectorize(commutator_superop(h) @ vectorize(x))
        assert np.allclose(lhs, -1j * (h @ x - x @ h))

    def test_superoperator_wrapper(self):
        s = Superoperator(commutator_superop(np.diag([1.0, -1.0])))
        assert s.dim == 2
        x = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        assert np.allclose(s.apply(x), -1j * (np.diag([1.0, -1.0]) @ x - x @ np.diag([1.0, -1.0])))
        with pytest.raises(ValueError):
            Superoperator(np.ones((3, 4)))


class TestIntegrate:
    def test_scalar_decay(self):
        times = np.linspace(0.0, 3.0, 7)
        y = integrate(lambda t, y: -y, [1.0], times, rtol=1e-11, atol=1e-13)
        assert np.allclose(y[:, 0], np.exp(-times), atol=1e-10)

    def test_constant_generator_matches_expm(self):
        rng = np.random.default_rng(9)
        gen = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        gen = gen - 3.0 * np.eye(6)
        y0 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        times = np.array([0.0, 0.4, 1.3])
        y = integrate(lambda t, y: gen @ y, y0, times, rtol=1e-11, atol=1e-13)
        for t, row in zip(times, y):
            assert np.linalg.norm(row - expm(gen * t) @ y0) <= 1e-8

    def test_dense_output_grid_refinement_stable(self):
        gen = np.array([[0.0, 1.0], [-1.0, -0.1]], dtype=complex)
        coarse = np.linspace(0.0, 5.0, 21)
        fine = np.linspace(0.0, 5.0, 41)
        y_c = integrate(lambda t, y: gen @ y, [1.0, 0.0], coarse)
        y_f = integrate(lambda t, y: gen @ y, [1.0, 0.0], fine)
        assert np.allclose(y_c, y_f[::2], atol=1e-12, rtol=0)

    def test_non_finite_rhs_raises(self):
        with pytest.raises(IntegrationError):
            integrate(lambda t, y: y * np.nan, [1.0], [0.0, 1.0])

    def test_rejects_descending_times(self):
        with pytest.raises(ValueError):
            integrate(lambda t, y: -y, [1.0], [0.0, 1.0, 0.5])

    def test_step_halving_order_on_relaxation_generator(self):
        """Richardson order estimate with forced fixed steps."""
        model = build_model(DETUNED)
        pieces = rfe_generator(model, FIG2_BATH, 0.0, "tdc").matrix  # t=0 form

        def rhs(t, y):
            return rfe_generator(model, FIG2_BATH, t, "tdc").matrix @ y

        y0 = vectorize(np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex))
        t_end = 0.8
        ref = integrate(rhs, y0, [0.0, t_end], rtol=1e-12, atol=1e-14)[-1]
        errs = []
        for h in (0.08, 0.04):
            y = integrate(rhs, y0, [0.0, t_end], rtol=1e12, atol=1e12, max_step=h)[-1]
            errs.append(np.linalg.norm(y - ref))
        order = np.log2(errs[0] / errs[1])
        assert order >= 4.5
        assert pieces.shape == (16, 16)


class TestExpm:
    def test_zero(self):
        assert np.allclose(expm(np.zeros((4, 4))), np.eye(4))

    def test_diagonal(self):
        d = np.diag([0.3, -1.2, 2.5])
        assert np.allclose(expm(d), np.diag(np.exp([0.3, -1.2, 2.5])))

    def test_anti_hermitian_gives_unitary(self):
        rng = np.random.default_rng(12)
        m = random_hermitian(rng, 16)
        u = expm(1j * m)
        assert np.linalg.norm(u.conj().T @ u - np.eye(16)) <= 1e-10

    def test_inverse_identity_up_to_large_norms(self):
        rng = np.random.default_rng(14)
        base = 1j * random_hermitian(rng, 8)
        base /= np.linalg.norm(base)
        for scale in (1.0, 10.0, 100.0, 1000.0):
            m = scale * base
            assert np.linalg.norm(expm(m) @ expm(-m) - np.eye(8)) <= 1e-10

    def test_overflow_raises(self):
        with pytest.raises(EngineError):
            expm(np.diag([1e5, 0.0]))


class TestEigsAndNullspace:
    def test_pauli_z(self):
        vals, vecs = hermitian_eigs(np.diag([1.0, -1.0]).astype(complex))
        assert np.allclose(vals, [-1.0, 1.0])
        assert np.linalg.norm(vecs.conj().T @ vecs - np.eye(2)) <= 1e-14

    def test_reconstruction(self):
        rng = np.random.default_rng(15)
        x = random_hermitian(rng, 16)
        vals, vecs = hermitian_eigs(x)
        assert np.linalg.norm(x - (vecs * vals) @ vecs.conj().T) <= 1e-10

    def test_non_hermitian_rejected(self):
        with pytest.raises(EngineError):
            hermitian_eigs(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_nullspace_of_secular_generator_is_one_dimensional(self, detuned_model, fig2_bath):
        s = qome_generator(detuned_model, fig2_bath).matrix
        kernel = nullspace(s)
        assert kernel.shape == (16, 1)
        assert np.linalg.norm(s @ kernel[:, 0]) <= 1e-9 * np.linalg.norm(s)

    def test_nullspace_empty_raises(self):
        with pytest.raises(EngineError):
            nullspace(np.eye(5))
