import math

import numpy as np
import pytest

from ertrans.errors import (
    DegenerateTransitionError,
    InvalidPairError,
    InvalidParameterError,
)
from ertrans.spinham import (
    CoherenceModel,
    SpinParams,
    build_hamiltonian,
    coherence_time,
    default_spin_params,
    energy_levels,
    field_sweep,
    find_zefoz,
    load_spin_params,
    rank_transitions,
    spin_matrices,
    transition_dipole,
    zeeman_sensitivity,
    zeta_operators,
)

# a fully anisotropic, realistic site-1-like parameter set used as a fixed
# fixture so these tests do not depend on the shipped data file
G_FIX = np.array([[2.90, -2.95, -3.56], [-2.95, 8.90, 5.57], [-3.56, 5.57, 5.12]])
A_FIX = 1e6 * np.array(
    [[274.3, -202.5, -350.8], [-202.5, 827.5, 635.2], [-350.8, 635.2, 706.1]]
)
Q_FIX = 1e6 * np.array(
    [[10.4, -9.3, -104.1], [-9.3, -61.0, -14.4], [-104.1, -14.4, 50.6]]
)


@pytest.fixture(scope="module")
def params():
    return SpinParams(g_tensor=G_FIX, A_tensor=A_FIX, Q_tensor=Q_FIX)


class TestSpinMatrices:
    def test_half_is_pauli(self):
        jx, jy, jz = spin_matrices(0.5)
        assert np.allclose(jx.matrix, [[0, 0.5], [0.5, 0]])
        assert np.allclose(jy.matrix, [[0, -0.5j], [0.5j, 0]])
        assert np.allclose(jz.matrix, np.diag([0.5, -0.5]))

    def test_casimir_seven_halves(self):
        jx, jy, jz = spin_matrices(3.5)
        j2 = jx.matrix @ jx.matrix + jy.matrix @ jy.matrix + jz.matrix @ jz.matrix
        assert np.allclose(j2, 3.5 * 4.5 * np.eye(8), atol=1e-12)

    def test_commutator(self):
        jx, jy, jz = spin_matrices(1.0)
        comm = jx.matrix @ jy.matrix - jy.matrix @ jx.matrix
        assert np.allclose(comm, 1j * jz.matrix, atol=1e-12)

    def test_invalid_j(self):
        with pytest.raises(InvalidParameterError):
            spin_matrices(0.3)


class TestBuildHamiltonian:
    def test_dimension(self, params):
        h = build_hamiltonian(params, [0, 0, 0])
        assert h.matrix.shape == (16, 16)
        assert h.is_hermitian()

    def test_zero_tensors(self):
        p = SpinParams(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 3)))
        h = build_hamiltonian(p, [0.1, -0.2, 0.3])
        # only the nuclear Zeeman term survives
        zn = -p.beta_n * p.g_n
        w = np.linalg.eigvalsh(h.matrix)
        expected = zn * np.linalg.norm([0.1, -0.2, 0.3]) * (3.5 - np.arange(8))
        expected = np.sort(np.repeat(expected, 2))
        assert np.allclose(np.sort(w), expected, rtol=1e-12)

    def test_isotropic_electron_zeeman(self):
        g = 2.0
        p = SpinParams(g * np.eye(3), np.zeros((3, 3)), np.zeros((3, 3)), g_n=0.0)
        b = 0.25
        w = np.sort(np.linalg.eigvalsh(build_hamiltonian(p, [0, 0, b]).matrix))
        split = p.beta_e * g * b
        assert w[15] - w[0] == pytest.approx(split, rel=1e-12)
        # eight-fold degeneracy of each electron branch
        assert np.ptp(w[:8]) < 1e-3
        assert np.ptp(w[8:]) < 1e-3

    def test_linear_in_field(self, params):
        b1 = np.array([0.02, -0.01, 0.05])
        b2 = np.array([-0.03, 0.04, 0.01])
        h0 = build_hamiltonian(params, [0, 0, 0]).matrix
        h1 = build_hamiltonian(params, b1).matrix
        h2 = build_hamiltonian(params, b2).matrix
        h12 = build_hamiltonian(params, b1 + b2).matrix
        assert np.abs(h12 - (h1 + h2 - h0)).max() < 1e-3

    def test_trace_field_independent(self, params):
        t0 = np.trace(build_hamiltonian(params, [0, 0, 0]).matrix).real
        t1 = np.trace(build_hamiltonian(params, [0.3, -0.2, 0.7]).matrix).real
        assert t1 == pytest.approx(t0, abs=1e-3)

    def test_zeta_is_field_derivative(self, params):
        zetas = zeta_operators(params)
        h0 = build_hamiltonian(params, [0, 0, 0]).matrix
        for i, e_i in enumerate(np.eye(3)):
            h1 = build_hamiltonian(params, 1e-3 * e_i).matrix
            fd = (h1 - h0) / 1e-3
            assert np.abs(fd - zetas[i]).max() < 1e-2 * np.abs(zetas[i]).max()

    def test_bad_field_shape(self, params):
        with pytest.raises(InvalidParameterError):
            build_hamiltonian(params, [0.0, 0.0])


class TestFiniteDifferenceOracles:
    """Gradient and curvature against central differences of the spectrum."""

    def gap(self, params, B, m, n):
        w, _ = energy_levels(params, B)
        return w[n - 1] - w[m - 1]

    def test_gradient_random_fields(self, params):
        rng = np.random.default_rng(7)
        h = 1e-5
        checked = 0
        while checked < 20:
            B = rng.uniform(-0.08, 0.08, 3)
            m, n = sorted(rng.choice(np.arange(1, 17), 2, replace=False))
            try:
                nu, _ = zeeman_sensitivity(params, B, int(m), int(n))
            except DegenerateTransitionError:
                continue
            for i, e_i in enumerate(np.eye(3)):
                fd = (
                    self.gap(params, B + h * e_i, m, n)
                    - self.gap(params, B - h * e_i, m, n)
                ) / (2 * h)
                scale = max(abs(fd), 1e-3 * np.linalg.norm(nu) + 1.0)
                assert abs(fd - nu[i]) < 1e-2 * scale
            checked += 1

    def test_curvature_random_fields(self, params):
        rng = np.random.default_rng(11)
        h = 1e-4
        checked = 0
        while checked < 10:
            B = rng.uniform(-0.08, 0.08, 3)
            m, n = sorted(rng.choice(np.arange(1, 17), 2, replace=False))
            try:
                _, C = zeeman_sensitivity(params, B, int(m), int(n))
            except DegenerateTransitionError:
                continue
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            fd = (
                self.gap(params, B + h * u, m, n)
                - 2 * self.gap(params, B, m, n)
                + self.gap(params, B - h * u, m, n)
            ) / h**2
            quad = u @ C @ u
            scale = max(abs(fd), 1e-3 * np.abs(C).max() + 1.0)
            assert abs(fd - quad) < 1e-2 * scale
            checked += 1

    def test_zero_field_gradients_vanish(self, params):
        # time-reversal symmetry: isolated levels have no first-order Zeeman
        # shift at zero field (levels 3-12 are well isolated for this fixture)
        recs = rank_transitions(params, [0, 0, 0], (0.1, 5.0))
        for r in recs:
            m, n = r.level_pair
            if 3 <= m <= 12 and 3 <= n <= 12:
                assert r.S1_Hz_per_T < 1e3, r.level_pair


class TestToyModels:
    def test_scalar_g_gradient(self):
        g = 2.0
        p = SpinParams(g * np.eye(3), np.zeros((3, 3)), np.zeros((3, 3)), g_n=0.0)
        B = np.array([0.0, 0.0, 0.05])
        # spin-flip transition between the two electron branches
        nu, C = zeeman_sensitivity(p, B, 1, 16)
        assert np.linalg.norm(nu) == pytest.approx(p.beta_e * g, rel=1e-9)
        # the gap beta_e*g*|B| is exactly linear along the field direction
        bhat = B / np.linalg.norm(B)
        assert abs(bhat @ C @ bhat) < 1e-3 * p.beta_e

    def test_linear_model_no_field_direction_curvature(self):
        p = SpinParams(2.0 * np.eye(3), np.zeros((3, 3)), np.zeros((3, 3)))
        B = np.array([0.0, 0.0, 0.08])
        nu, C = zeeman_sensitivity(p, B, 1, 16)
        assert abs(C[2, 2]) < 1.0  # Hz/T^2, essentially zero

    def test_zefoz_empty_for_pure_zeeman(self):
        p = SpinParams(2.0 * np.eye(3), np.zeros((3, 3)), np.zeros((3, 3)))
        hits = find_zefoz(p, [np.array([0.0, 0.0, 0.05])], tol=1e4)
        assert hits == []


class TestCoherence:
    def test_infinite_when_insensitive(self):
        assert coherence_time(np.zeros(3), np.zeros((3, 3))) == math.inf

    def test_first_order_limited(self):
        model = CoherenceModel(delta_B=26e-6)
        nu = np.array([1e9, 0.0, 0.0])
        t2 = coherence_time(nu, np.zeros((3, 3)), model)
        assert t2 == pytest.approx(1.0 / (math.pi * 1e9 * 26e-6), rel=1e-12)

    def test_second_order_limited(self):
        model = CoherenceModel(delta_B=26e-6)
        C = np.diag([0.0, 0.0, 4e13])
        t2 = coherence_time(np.zeros(3), C, model)
        assert t2 == pytest.approx(1.0 / (math.pi * 4e13 * 26e-6**2), rel=1e-12)

    def test_invalid_model(self):
        with pytest.raises(InvalidParameterError):
            CoherenceModel(delta_B=0.0)


class TestDipoles:
    def test_symmetric_in_labels(self, params):
        B = np.array([0.01, 0.02, 0.03])
        d1 = transition_dipole(params, B, 5, 11)
        d2 = transition_dipole(params, B, 11, 5)
        assert np.allclose(d1, d2, rtol=1e-12)

    def test_nonnegative(self, params):
        d = transition_dipole(params, [0, 0, 0], 7, 10)
        assert (d >= 0).all()

    def test_same_level_rejected(self, params):
        with pytest.raises(InvalidPairError):
            transition_dipole(params, [0, 0, 0], 4, 4)

    def test_out_of_range(self, params):
        with pytest.raises(InvalidParameterError):
            transition_dipole(params, [0, 0, 0], 0, 5)


class TestRankTransitions:
    def test_sorted_by_t2(self, params):
        recs = rank_transitions(params, [0, 0, 0], (1.0, 3.0))
        t2s = [r.T2_s for r in recs]
        assert t2s == sorted(t2s, reverse=True)

    def test_window_respected(self, params):
        recs = rank_transitions(params, [0, 0, 0], (1.0, 2.0))
        for r in recs:
            assert 1.0 <= r.frequency_GHz <= 2.0

    def test_inverted_window(self, params):
        with pytest.raises(InvalidParameterError):
            rank_transitions(params, [0, 0, 0], (2.0, 1.0))


class TestFieldSweep:
    def test_starts_at_zero_field(self, params):
        bs, freqs = field_sweep(params, [0, 0, 1], 0.1, 21)
        w0, _ = energy_levels(params, [0, 0, 0])
        assert bs[0] == 0.0
        assert np.allclose(freqs[0], w0, atol=1.0)

    def test_continuity(self, params):
        bs, freqs = field_sweep(params, [0, 1, 0], 0.2, 101)
        step_jump = np.abs(np.diff(freqs, axis=0)).max()
        # slopes bounded by the largest Zeeman slope times the field step
        assert step_jump < 200e9 * (bs[1] - bs[0]) * 1.5

    def test_invalid_axis(self, params):
        with pytest.raises(InvalidParameterError):
            field_sweep(params, [0, 0, 0], 0.1, 10)


class TestDegenerateClusters:
    def test_degenerate_pair_rejected(self, params):
        w, _ = energy_levels(params, [0, 0, 0])
        gaps = np.diff(w)
        k = int(np.argmin(gaps))
        if gaps[k] < 1e6:
            with pytest.raises(DegenerateTransitionError):
                zeeman_sensitivity(params, [0, 0, 0], k + 1, k + 2)

    def test_cluster_dipole_deterministic(self, params):
        d1 = transition_dipole(params, [0, 0, 0], 1, 16)
        d2 = transition_dipole(params, [0, 0, 0], 1, 16)
        assert np.array_equal(d1, d2)


class TestParamsIO:
    def test_round_trip(self, tmp_path, params):
        path = tmp_path / "test.params"
        lines = [
            "# test file",
            "g_row_major = " + " ".join(f"{x:.10g}" for x in G_FIX.ravel()),
            "A_MHz_row_major = "
            + " ".join(f"{x:.10g}" for x in (A_FIX / 1e6).ravel()),
            "Q_MHz_row_major = "
            + " ".join(f"{x:.10g}" for x in (Q_FIX / 1e6).ravel()),
            "g_n = -0.1618",
            "S = 0.5",
            "I = 3.5",
            "beta_e_GHz_per_T = 13.996245",
            "beta_n_MHz_per_T = 7.622593",
            "site = 1",
            "source = test",
        ]
        path.write_text("\n".join(lines) + "\n")
        p = load_spin_params(path)
        assert np.allclose(p.g_tensor, params.g_tensor)
        assert np.allclose(p.A_tensor, params.A_tensor)
        assert np.allclose(p.Q_tensor, params.Q_tensor)
        assert p.g_n == -0.1618

    def test_missing_key(self, tmp_path):
        path = tmp_path / "bad.params"
        path.write_text("g_row_major = 1 0 0 0 1 0 0 0 1\n")
        with pytest.raises(InvalidParameterError):
            load_spin_params(path)

    def test_default_params_load(self):
        p = default_spin_params()
        assert p.dim == 16
        assert p.site == 1
        assert p.source


class TestSpinParamsValidation:
    def test_wrong_shape(self):
        with pytest.raises(InvalidParameterError):
            SpinParams(np.eye(2), np.zeros((3, 3)), np.zeros((3, 3)))

    def test_bad_spin(self):
        with pytest.raises(InvalidParameterError):
            SpinParams(np.eye(3), np.zeros((3, 3)), np.zeros((3, 3)), S=0.4)

    def test_asymmetric_tensor_symmetrized(self):
        A = np.zeros((3, 3))
        A[0, 1] = 2e6
        with pytest.warns(UserWarning):
            p = SpinParams(np.eye(3), A, np.zeros((3, 3)))
        assert np.allclose(p.A_tensor, p.A_tensor.T)
