"""
NLIE tests - kernels, convolution, driving terms, plateaus, free energy and
correlation length.
Run with:  pytest tests/test_tba.py -v
"""
import pytest
import sys
import os

import numpy as np
from scipy.integrate import quad

sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from ospqtm.spectral import ModelParams, ParameterError
from ospqtm.bae import solve_for_rank
from ospqtm.fusion import FusionIndex, real_axis_zeros
from ospqtm.qtm import build_qtm, top_eigenvalues, gap_ratio, hamiltonian_free_energy
from ospqtm.tba import (
    FREE_ENERGY_CONSTANT, KERNEL_MASS, TbaConfig, GridFunction, TbaSolution,
    GridMismatchError, TbaConvergenceError,
    kernel, convolve, convolve_samples, shifted_convolution, integrate,
    trotter_driving, finite_n_driving, finite_n_constant, plateau,
    verify_constant_y_system, tanh_pair, solve_tba, free_energy, solve_excited,
    correlation_length, thermodynamics,
)

LN3 = np.log(3.0)


def grid_function(values, V=10.0, h=0.01, c_inf=0.0) -> GridFunction:
    return GridFunction(V, h, np.asarray(values, dtype=float), c_inf)


def unit_grid(V=10.0, h=0.01) -> np.ndarray:
    half = int(round(V / h))
    return h * np.arange(-half, half + 1)


@pytest.fixture(scope="module")
def hot():
    return solve_tba(TbaConfig(), 1e-3, -1.0)


@pytest.fixture(scope="module")
def unit_beta():
    cfg = TbaConfig()
    sol1 = solve_tba(cfg, 1.0, -1.0)
    return sol1, solve_excited(cfg, 1.0, -1.0, largest=sol1)


# ---------------------------------------------------------------------------
# Kernels and convolution
# ---------------------------------------------------------------------------

class TestKernels:
    def test_k_at_zero(self):
        assert float(kernel("K", 0.0)) == pytest.approx(0.5)

    def test_g_at_zero(self):
        assert float(kernel("G", 0.0)) == pytest.approx(4 / (3 * np.sqrt(3)))
        assert float(kernel("G", 1e-7)) == pytest.approx(4 / (3 * np.sqrt(3)), rel=1e-9)

    @pytest.mark.parametrize("kind", ["K", "G"])
    def test_mass(self, kind):
        total, _ = quad(lambda v: float(kernel(kind, v)), -np.inf, np.inf)
        assert total == pytest.approx(KERNEL_MASS[kind], rel=1e-8)

    def test_g_closed_form(self):
        v = 0.37
        expected = 2 / np.sqrt(3) * np.sinh(4 * np.pi * v / 3) / np.sinh(2 * np.pi * v)
        assert float(kernel("G", v)) == pytest.approx(expected, rel=1e-12)

    def test_unknown_kernel(self):
        with pytest.raises(ParameterError):
            kernel("H", 0.0)


class TestConvolution:
    def test_constant(self):
        f = grid_function(np.full(2001, 3.0), c_inf=3.0)
        out = convolve("K", f)
        np.testing.assert_allclose(out.samples, 1.5, atol=1e-12)
        assert out.c_inf == pytest.approx(1.5)

    def test_linearity(self):
        v = unit_grid()
        f = grid_function(np.exp(-v ** 2), c_inf=0.0)
        g = grid_function(np.tanh(v) ** 2, c_inf=1.0)
        lhs = convolve("K", 2.0 * f + (-0.5) * g)
        rhs = 2.0 * convolve("K", f) + (-0.5) * convolve("K", g)
        np.testing.assert_allclose(lhs.samples, rhs.samples, atol=1e-12)

    def test_narrow_gaussian(self):
        v = unit_grid()
        width, v0 = 0.05, 0.3
        bump = np.exp(-0.5 * ((v - v0) / width) ** 2) / (width * np.sqrt(2 * np.pi))
        out = convolve("K", grid_function(bump))
        np.testing.assert_allclose(out.samples, kernel("K", v - v0), atol=1e-2)

    def test_shifted_matches_plain_at_zero_shift(self):
        v = unit_grid()
        samples = np.exp(-v ** 2) + 0.5
        plain = convolve_samples("K", samples, 0.5, 0.01)
        idx = np.arange(0, v.size, 97)
        shifted = shifted_convolution(samples, 0.5, 0.01, v[idx], 0.0)
        np.testing.assert_allclose(shifted.real, plain[idx], atol=1e-12)
        np.testing.assert_allclose(shifted.imag, 0.0, atol=1e-12)

    def test_integrate_constant(self):
        f = grid_function(np.full(2001, 2.0), c_inf=2.0)
        assert integrate("K", f) == pytest.approx(1.0)
        assert integrate("G", f) == pytest.approx(2.0)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatchError):
            grid_function(np.zeros(2001)) + grid_function(np.zeros(201), V=10.0, h=0.1)

    def test_wrong_sample_count(self):
        with pytest.raises(GridMismatchError):
            GridFunction(10.0, 0.01, np.zeros(100))


# ---------------------------------------------------------------------------
# Driving terms
# ---------------------------------------------------------------------------

class TestDriving:
    def test_trotter_limit_at_origin(self):
        assert float(trotter_driving(0.0, 1.0, -1.0)) == pytest.approx(-np.pi)

    def test_finite_n_approaches_limit(self):
        v = 0.3
        limit = float(trotter_driving(v, 1.0, -1.0))
        errors = [abs(float(finite_n_driving(v, N, 1.0 / N, -1)) - limit)
                  for N in (64, 256, 1024, 4096)]
        assert all(b < a for a, b in zip(errors, errors[1:]))

    def test_sup_error_at_large_trotter_number(self):
        v = np.linspace(-5, 5, 201)
        N = 4096
        err = np.abs(finite_n_driving(v, N, 1.0 / N, -1) - trotter_driving(v, 1.0, -1.0))
        assert err.max() < 1e-4

    def test_even(self):
        v = np.array([0.2, 1.7])
        np.testing.assert_allclose(finite_n_driving(v, 12, 0.05, -1),
                                   finite_n_driving(-v, 12, 0.05, -1), rtol=1e-14)

    def test_odd_trotter_number(self):
        with pytest.raises(ParameterError):
            finite_n_driving(0.0, 5, 0.1, -1)

    def test_finite_n_constant_limit(self):
        N, u = 10000, 1e-4
        assert finite_n_constant(N, u) / (N * u) == pytest.approx(FREE_ENERGY_CONSTANT, rel=1e-3)


# ---------------------------------------------------------------------------
# Plateaus
# ---------------------------------------------------------------------------

class TestPlateaus:
    @pytest.mark.parametrize("m, k, expected", [(1, 1, 2), (2, 1, 5), (1, 2, -2), (2, 2, 1),
                                                (3, 2, -3)])
    def test_values(self, m, k, expected):
        assert plateau(m, k) == expected

    @pytest.mark.parametrize("k", [1, 2])
    def test_constant_y_system_exact(self, k):
        assert all(r == 0 for r in verify_constant_y_system(10, k))

    def test_tanh_pair(self):
        v = np.array([0.0, 1.0])
        np.testing.assert_allclose(tanh_pair(v, None), 1.0)
        assert tanh_pair(1.0, 1.0) == pytest.approx(0.0)

    def test_free_energy_constant(self):
        assert -FREE_ENERGY_CONSTANT == pytest.approx(-1.41840, abs=1e-5)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class TestTbaConfig:
    def test_defaults(self):
        cfg = TbaConfig()
        assert cfg.size == 1201
        assert cfg.grid()[0] == pytest.approx(-30.0)

    @pytest.mark.parametrize("kwargs", [
        {"m_max": 1}, {"V": 5.0}, {"h": 0.2}, {"V": 10.0, "h": 0.03}, {"tol": 0.0},
        {"damping": 0.0}, {"deltas": (0.01,)},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            TbaConfig(**kwargs)


# ---------------------------------------------------------------------------
# Largest eigenvalue
# ---------------------------------------------------------------------------

class TestLargest:
    def test_high_temperature_completeness(self, hot):
        assert -1e-3 * free_energy(hot) == pytest.approx(LN3, abs=1e-3)

    def test_plateaus_at_high_temperature(self, hot):
        inner = np.abs(hot.grid) <= hot.config.V / 2
        for m, y in enumerate(hot.Y[:5], start=1):
            np.testing.assert_allclose(y.samples[inner], plateau(m), rtol=1e-2)

    def test_converged(self, hot):
        assert hot.history[-1] < hot.config.tol
        assert hot.to_json()["k"] == 1

    def test_unconverged_free_energy(self):
        cfg = TbaConfig()
        sol = TbaSolution(cfg, 1.0, -1.0, 1, np.zeros((cfg.m_max, cfg.size)))
        with pytest.raises(TbaConvergenceError):
            free_energy(sol)

    def test_free_energy_needs_largest(self, hot):
        sol = TbaSolution(hot.config, 1e-3, -1.0, 2, hot.lam, history=hot.history)
        with pytest.raises(ParameterError):
            free_energy(sol)

    def test_nonpositive_beta(self):
        with pytest.raises(ParameterError):
            solve_tba(TbaConfig(), 0.0, -1.0)

    @pytest.mark.slow
    def test_low_temperature_constant(self):
        sol = solve_tba(TbaConfig(), 50.0, -1.0)
        assert free_energy(sol) == pytest.approx(-FREE_ENERGY_CONSTANT, abs=2e-3)

    @pytest.mark.slow
    def test_monotonic_in_temperature(self):
        cfg = TbaConfig()
        f = [free_energy(solve_tba(cfg, beta, -1.0)) for beta in (4.0, 2.0, 1.0, 0.5)]
        assert all(b < a for a, b in zip(f, f[1:]))

    @pytest.mark.slow
    def test_truncation_stability(self):
        f8 = free_energy(solve_tba(TbaConfig(m_max=8), 1.0, -1.0))
        f12 = free_energy(solve_tba(TbaConfig(m_max=12), 1.0, -1.0))
        assert abs(f8 - f12) < 1e-6

    @pytest.mark.slow
    def test_finite_trotter_number(self):
        """The finite-N NLIE reproduces ln of the QTM eigenvalue at N = 4."""
        beta, N = 0.2, 4
        sol = solve_tba(TbaConfig(), beta, -1.0, trotter=N)
        lam = top_eigenvalues(build_qtm(ModelParams(J=-1.0, beta=beta, N=N), 0.0), 1)[0]
        assert -beta * free_energy(sol) == pytest.approx(np.log(lam.real), abs=1e-5)


class TestThermodynamics:
    def test_quadratic_free_energy(self):
        T = np.linspace(0.5, 3.0, 11)
        a = 0.7
        s, c = thermodynamics(T, -a * T ** 2)
        np.testing.assert_allclose(s[1:-1], 2 * a * T[1:-1], rtol=1e-12)
        np.testing.assert_allclose(c[2:-2], 2 * a * T[2:-2], rtol=1e-12)

    def test_too_few_points(self):
        s, c = thermodynamics([1.0, 2.0], [0.0, -1.0])
        assert np.all(np.isnan(s)) and np.all(np.isnan(c))


# ---------------------------------------------------------------------------
# Second eigenvalue and correlation length
# ---------------------------------------------------------------------------

class TestExcited:
    def test_needs_antiferromagnet(self):
        with pytest.raises(ParameterError):
            solve_excited(TbaConfig(), 1.0, 1.0)

    def test_correlation_length_needs_both_ranks(self, hot):
        with pytest.raises(ParameterError):
            correlation_length(hot, hot)

    @pytest.mark.slow
    def test_correlation_length_at_unit_beta(self, unit_beta):
        sol1, sol2 = unit_beta
        assert sol2.x[0] > 0
        assert sol2.phase_residual == 0.0
        for m, y in enumerate(sol2.Y[:3], start=1):
            assert y.samples[-1] == pytest.approx(plateau(m, 2), abs=1e-3)
        xi = correlation_length(sol1, sol2)
        assert 0 < xi < np.inf

        params = ModelParams(J=-1.0, beta=1.0, N=12)
        state = solve_for_rank(2, params)
        finite = [x for x in real_axis_zeros(FusionIndex(1, 2), state, params) if x > 0]
        assert sol2.x[0] == pytest.approx(finite[0], rel=0.1)

    @pytest.mark.slow
    def test_qtm_gap_approaches_inverse_correlation_length(self, unit_beta):
        target = 1.0 / correlation_length(*unit_beta)
        deviations = []
        for N in (4, 6, 8):
            values = top_eigenvalues(build_qtm(ModelParams(J=-1.0, beta=1.0, N=N), 0.0), 2)
            deviations.append(abs(-np.log(gap_ratio(values)) - target))
        assert deviations[0] > deviations[1] > deviations[2]
        assert deviations[2] < 0.2 * target


# ---------------------------------------------------------------------------
# Exact diagonalization
# ---------------------------------------------------------------------------

class TestAgainstChain:
    @pytest.mark.slow
    def test_free_energy_within_finite_size_spread(self, unit_beta):
        f = free_energy(unit_beta[0])
        f6, f8 = (hamiltonian_free_energy(L, 1.0, -1.0) for L in (6, 8))
        assert abs(f - f8) <= abs(f8 - f6)
