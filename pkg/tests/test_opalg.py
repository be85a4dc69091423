import numpy as np
import pytest

from ertrans.errors import (
    InvalidDimensionError,
    InvalidOperatorError,
    InvalidParameterError,
)
from ertrans.opalg import (
    DensityMatrix,
    ModeSpace,
    Operator,
    annihilation,
    embed,
    expectation,
    fock_state,
    hermitian_eigensolve,
    number_operator,
    product_state,
    thermal_state,
)


class TestAnnihilation:
    def test_dim2(self):
        assert np.array_equal(annihilation(2).matrix, [[0, 1], [0, 0]])

    def test_number_operator_diagonal(self):
        n = number_operator(4)
        assert np.allclose(n.matrix, np.diag([0, 1, 2, 3]))

    def test_commutator_truncation(self):
        a = annihilation(10)
        comm = a.matrix @ a.dag().matrix - a.dag().matrix @ a.matrix
        dev = comm - np.eye(10)
        # deviation confined to the top Fock entry (9, 9)
        dev[9, 9] = 0
        assert np.abs(dev).max() < 1e-14
        assert comm[9, 9].real == pytest.approx(-9)

    def test_invalid_dim(self):
        with pytest.raises(InvalidDimensionError):
            annihilation(1)


class TestEmbed:
    def test_factorization(self):
        a = annihilation(2)
        sp = ModeSpace((2, 2))
        full = embed(a, 0, sp)
        assert np.allclose(full.matrix, np.kron(a.matrix, np.eye(2)))

    def test_distinct_modes_commute(self):
        sp = ModeSpace((3, 3))
        a1 = embed(annihilation(3), 0, sp)
        a2d = embed(annihilation(3), 1, sp).dag()
        comm = a1.matrix @ a2d.matrix - a2d.matrix @ a1.matrix
        assert np.abs(comm).max() < 1e-14

    def test_kronecker_spectrum(self):
        sp = ModeSpace((5, 5, 5))
        n = embed(number_operator(5), 2, sp)
        w = np.linalg.eigvalsh(n.matrix)
        for k in range(5):
            assert np.sum(np.isclose(w, k)) == 25

    def test_shape_mismatch(self):
        with pytest.raises(InvalidDimensionError):
            embed(annihilation(3), 0, ModeSpace((2, 2)))


class TestThermalState:
    def test_zero_temperature(self):
        assert np.allclose(thermal_state(4, 0.0).matrix, np.diag([1, 0, 0, 0]))

    def test_geometric_law(self):
        nbar = 0.387
        rho = thermal_state(5, nbar).matrix
        q = nbar / (1 + nbar)
        p0 = 1 / (1 + nbar)
        norm = (1 - q) * sum(q**n for n in range(5))
        assert rho[0, 0].real == pytest.approx(p0 / norm, rel=1e-12)
        assert rho[1, 1].real == pytest.approx(p0 * q / norm, rel=1e-12)
        assert p0 == pytest.approx(0.7215, abs=1e-3)
        assert p0 * q == pytest.approx(0.2014, abs=1e-3)

    def test_trace_and_positivity(self):
        rho = thermal_state(7, 2.3)
        assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-12)
        assert np.diag(rho.matrix).real.min() >= 0

    def test_mean_monotone_in_dim(self):
        means = [
            expectation(thermal_state(d, 0.8), number_operator(d)).real
            for d in (3, 6, 12, 24)
        ]
        assert all(b >= a for a, b in zip(means, means[1:]))
        assert means[-1] <= 0.8 + 1e-9

    def test_negative_nbar(self):
        with pytest.raises(InvalidParameterError):
            thermal_state(4, -0.1)


class TestExpectation:
    def test_fock_eigenstate(self):
        assert expectation(fock_state(4, 1), number_operator(4)).real == pytest.approx(1.0)

    def test_thermal_mean(self):
        val = expectation(thermal_state(20, 0.5), number_operator(20))
        assert abs(val.real - 0.5) < 1e-4
        assert abs(val.imag) < 1e-10

    def test_identity(self):
        sp = ModeSpace((4,))
        ident = Operator(sp, np.eye(4))
        assert expectation(thermal_state(4, 1.1), ident).real == pytest.approx(1.0)

    def test_space_mismatch(self):
        with pytest.raises(InvalidDimensionError):
            expectation(fock_state(3, 0), number_operator(4))


class TestHermitianEigensolve:
    def test_diagonal(self):
        op = Operator(ModeSpace((3,)), np.diag([3.0, 1.0, 2.0]))
        w, _ = hermitian_eigensolve(op)
        assert np.allclose(w, [1, 2, 3])

    def test_pauli_x(self):
        op = Operator(ModeSpace((2,)), np.array([[0, 1], [1, 0]], dtype=complex))
        w, v = hermitian_eigensolve(op)
        assert np.allclose(w, [-1, 1])
        assert np.allclose(v.conj().T @ v, np.eye(2), atol=1e-10)

    def test_trace_identity_random(self):
        rng = np.random.default_rng(3)
        m = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        m = m + m.conj().T
        op = Operator(ModeSpace((16,)), m)
        w, v = hermitian_eigensolve(op)
        assert np.sum(w) == pytest.approx(np.trace(m).real, abs=1e-9)
        # reconstruction
        rec = v @ np.diag(w) @ v.conj().T
        assert np.abs(rec - m).max() < 1e-8 * np.abs(m).max()

    def test_non_hermitian_rejected(self):
        op = Operator(ModeSpace((2,)), np.array([[0, 1], [0, 0]], dtype=complex))
        with pytest.raises(InvalidOperatorError):
            hermitian_eigensolve(op)


class TestDensityMatrix:
    def test_trace_enforced(self):
        with pytest.raises(InvalidOperatorError):
            DensityMatrix(ModeSpace((2,)), np.diag([0.6, 0.6]))

    def test_positivity_enforced(self):
        with pytest.raises(InvalidOperatorError):
            DensityMatrix(ModeSpace((2,)), np.diag([1.5, -0.5]))

    def test_product_state(self):
        rho = product_state([fock_state(2, 1), thermal_state(3, 0.2)])
        assert rho.space.dims == (2, 3)
        assert np.trace(rho.matrix).real == pytest.approx(1.0)
