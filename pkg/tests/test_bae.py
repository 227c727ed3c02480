"""
Bethe ansatz equation tests - seeds, residuals, Newton solver and string patterns.
Run with:  pytest tests/test_bae.py -v
"""
import pytest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from ospqtm.spectral import ModelParams, BetheState, ParameterError, t1_eval
from ospqtm.qtm import build_qtm, top_eigenvalues
from ospqtm.bae import (
    SYMMETRY_LINE, UnsupportedSeedError, BetheConvergenceError, SingularJacobianError,
    NewtonReport,
    center_grid, seed_state, random_seed, bae_residual, bae_residuals,
    normalized_residuals, bae_jacobian, symmetry_residuals, symmetrize,
    solve_newton, solve_for_rank, continue_in_beta, classify_strings,
    save_state, load_state,
)


@pytest.fixture(scope="module")
def params4():
    return ModelParams.from_u(0.05, 4)


@pytest.fixture(scope="module")
def largest4(params4):
    return solve_for_rank(1, params4)


@pytest.fixture(scope="module")
def second4(params4):
    return solve_for_rank(2, params4)


# ---------------------------------------------------------------------------
# Seeds
# ---------------------------------------------------------------------------

class TestSeeds:
    def test_center_grid_symmetric(self):
        centers = center_grid(4, 2.0)
        assert len(centers) == 4
        assert centers == tuple(-c for c in reversed(centers))
        assert 0.0 not in centers

    def test_center_grid_odd_has_zero(self):
        assert 0.0 in center_grid(5, 1.0)

    def test_largest_sector_root_count(self):
        for N in (2, 4, 12):
            state = seed_state(1, ModelParams.from_u(0.05, N))
            assert state.n == N
            assert state.sigma == 1

    @pytest.mark.parametrize("N, pattern", [
        (12, {"two-string": 4, "three-string": 1}),
        (14, {"one-string": 1, "two-string": 6}),
    ])
    def test_second_sector_pattern(self, N, pattern):
        state = seed_state(2, ModelParams.from_u(0.05, N))
        assert state.n == N - 1
        assert classify_strings(state).counts == pattern

    def test_fig1_seed_pattern(self):
        state = seed_state(1, ModelParams.from_u(0.05, 12))
        assert classify_strings(state).describe() == "6 two-strings"

    def test_seed_is_symmetric(self):
        state = seed_state(2, ModelParams.from_u(0.05, 12))
        res = symmetry_residuals(state)
        assert res["imaginary_axis"] < 1e-14
        assert res["line_3/4"] < 1e-14

    def test_random_seed_keeps_content(self):
        params = ModelParams.from_u(0.05, 12)
        state = random_seed(2, params, np.random.default_rng(3))
        assert state.n == 11
        assert max(symmetry_residuals(state).values()) < 1e-12

    def test_second_sector_requires_antiferromagnet(self):
        with pytest.raises(UnsupportedSeedError):
            seed_state(2, ModelParams.from_u(-0.05, 12))

    def test_unknown_rank(self):
        with pytest.raises(UnsupportedSeedError):
            seed_state(3, ModelParams.from_u(0.05, 4))


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------

class TestResiduals:
    def test_formula(self):
        params = ModelParams.from_u(0.1, 4)
        state = BetheState((0.3 + 0.4j, -0.3 + 0.4j, 0.3 + 1.1j, -0.3 + 1.1j), N=4)
        v = state.array
        u = params.u
        php = lambda z: (z + 1j * u) ** 2
        phm = lambda z: (z - 1j * u) ** 2
        q = lambda z: np.prod(z - v)
        for k in range(4):
            x = v[k]
            expected = (phm(x + 0.5j) * php(x - 1j) * q(x + 0.5j) * q(x - 1j)
                        + phm(x - 0.5j) * php(x - 2j) * q(x - 0.5j) * q(x + 1j))
            assert bae_residual(state, k + 1, params) == pytest.approx(expected, rel=1e-12)

    def test_index_out_of_range(self, params4):
        state = seed_state(1, params4)
        with pytest.raises(ParameterError):
            bae_residual(state, 0, params4)
        with pytest.raises(ParameterError):
            bae_residual(state, 5, params4)

    def test_jacobian_matches_finite_differences(self, params4):
        state = BetheState((0.31 + 0.27j, -0.29 + 0.22j, 0.35 + 1.2j, -0.4 + 1.31j), N=4)
        jac = bae_jacobian(state, params4)
        h = 1e-6
        F0 = bae_residuals(state, params4)
        for j in range(4):
            shifted = state.array.copy()
            shifted[j] += h
            F1 = bae_residuals(BetheState(tuple(shifted), N=4), params4)
            np.testing.assert_allclose((F1 - F0) / h, jac[:, j], rtol=1e-4, atol=1e-8)

    def test_empty_state(self, params4):
        assert bae_residuals(BetheState((), N=4), params4).size == 0


class TestSymmetry:
    def test_symmetrize_projects(self):
        v = np.array([0.5 + 0.25j, -0.5001 + 0.2502j, 0.4999 + 1.25j, -0.5 + 1.2499j])
        w = symmetrize(v)
        res = symmetry_residuals(BetheState(tuple(w), N=4))
        assert res["imaginary_axis"] < 1e-14
        assert res["line_3/4"] < 1e-14

    def test_symmetrize_leaves_asymmetric_set(self):
        v = np.array([2.0 + 0.1j, 0.3 + 3.0j])
        np.testing.assert_allclose(symmetrize(v, threshold=0.25), v)

    def test_symmetry_line_value(self):
        assert SYMMETRY_LINE == 0.75


# ---------------------------------------------------------------------------
# Newton solver
# ---------------------------------------------------------------------------

class TestNewton:
    def test_largest_converges(self, largest4, params4):
        assert largest4.n == 4
        assert normalized_residuals(largest4, params4).max() < 1e-12

    def test_largest_symmetric(self, largest4):
        assert max(symmetry_residuals(largest4).values()) < 1e-8

    def test_second_sector(self, second4, params4):
        assert second4.n == 3
        assert second4.sigma == -1
        assert normalized_residuals(second4, params4).max() < 1e-12

    def test_idempotent(self, largest4, params4):
        report = NewtonReport(0, 0.0)
        again = solve_newton(largest4, params4, tol=1e-12, report=report)
        assert report.iterations <= 2
        np.testing.assert_allclose(sorted(again.roots, key=lambda z: (z.real, z.imag)),
                                   sorted(largest4.roots, key=lambda z: (z.real, z.imag)),
                                   atol=1e-10)

    def test_largest_beats_second(self, largest4, second4, params4):
        assert abs(t1_eval(0.0, largest4, params4)) > abs(t1_eval(0.0, second4, params4))

    def test_bad_tolerance(self, params4):
        with pytest.raises(ParameterError):
            solve_newton(seed_state(1, params4), params4, tol=0.0)

    def test_non_convergence_carries_best(self, params4):
        with pytest.raises(BetheConvergenceError) as info:
            solve_newton(seed_state(1, params4), params4, tol=1e-30, max_iter=3)
        assert info.value.best is not None
        assert info.value.iterations <= 3

    @pytest.mark.slow
    def test_continuation_agrees(self, largest4, params4):
        continued = continue_in_beta(1, params4, beta_start=params4.beta / 64)
        key = lambda z: (round(z.real, 6), round(z.imag, 6))
        np.testing.assert_allclose(sorted(continued.roots, key=key),
                                   sorted(largest4.roots, key=key), atol=1e-10)

    @pytest.mark.slow
    def test_fig1_pattern(self):
        params = ModelParams.from_u(0.05, 12)
        state = solve_for_rank(1, params)
        assert classify_strings(state).describe() == "6 two-strings"
        assert normalized_residuals(state, params).max() < 1e-10
        assert max(symmetry_residuals(state).values()) < 1e-8

    @pytest.mark.slow
    @pytest.mark.parametrize("N, pattern", [
        (12, {"two-string": 4, "three-string": 1}),
        (14, {"one-string": 1, "two-string": 6}),
    ])
    def test_second_sector_solved_pattern(self, N, pattern):
        params = ModelParams.from_u(0.05, N)
        state = solve_for_rank(2, params)
        assert state.n == N - 1
        assert classify_strings(state).counts == pattern
        assert normalized_residuals(state, params).max() < 1e-10
        assert max(symmetry_residuals(state).values()) < 1e-8


def on_vacuum_zero(state, params, tol=1e-6):
    u = params.u
    traps = np.array([1j * u - 0.5j, 1j * u + 0.5j, 1j - 1j * u, 2j - 1j * u])
    return bool(np.min(np.abs(state.array[:, None] - traps[None, :])) < tol)


class TestExhaustiveSmallChain:
    @pytest.mark.slow
    def test_grid_search_finds_no_larger_state(self):
        params = ModelParams.from_u(0.05, 2)
        largest = solve_for_rank(1, params)
        target = abs(complex(t1_eval(0.0, largest, params)))
        grid = np.linspace(-1.5, 1.5, 61)
        found = []
        for p in grid:
            for q in grid:
                w = complex(p, q)
                if abs(w) < 1e-9:
                    continue
                seed = BetheState((0.75j + w, 0.75j - w), N=2, k=1)
                if not normalized_residuals(seed, params).max() <= 0.5:
                    continue
                try:
                    state = solve_newton(seed, params, tol=1e-12, max_iter=50, symmetric=False)
                except (BetheConvergenceError, SingularJacobianError, ParameterError):
                    continue
                if on_vacuum_zero(state, params):
                    continue
                assert normalized_residuals(state, params).max() < 1e-12
                found.append(complex(t1_eval(0.0, state, params)))
        op = build_qtm(params, 0.0)
        spectrum = top_eigenvalues(op, op.dimension)
        # keep solutions that are QTM eigenvalues in the two-root sector
        physical = [abs(t) for t in found
                    if np.min(np.abs(spectrum - t)) < 1e-8 * abs(spectrum[0])]
        assert physical
        assert max(physical) == pytest.approx(target, rel=1e-9)
        assert target == pytest.approx(abs(spectrum[0]), rel=1e-9)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

class TestOutput:
    def test_classify_mixed(self):
        state = BetheState((0.25j, 1.25j, 0.75j, 1.0 + 0.3j, 1.0 + 1.2j), N=6)
        pattern = classify_strings(state)
        assert pattern.counts == {"two-string": 1, "three-string": 1}
        assert pattern.describe() == "1 two-string, 1 three-string"

    def test_save_load(self, tmp_path, params4):
        state = seed_state(1, params4)
        path = save_state(state, params4, tmp_path / "roots.json")
        loaded, u = load_state(path)
        assert loaded.roots == state.roots
        assert u == pytest.approx(0.05)
