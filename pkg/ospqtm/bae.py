"""
ospqtm BAE - Bethe ansatz equations for the two leading QTM eigenvalues.

Roots are seeded from string patterns symmetric about the imaginary axis
and the line Im v = 3/4, then refined by damped Newton iteration on the
cleared-denominator residual.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .spectral import (BetheState, ModelParams, OspQtmError, ParameterError,
                       int_power, t1_eval)

logger = logging.getLogger(__name__)

SYMMETRY_LINE = 0.75


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class BetheConvergenceError(OspQtmError):
    """Newton iteration did not reach the requested tolerance."""

    def __init__(self, message: str, best: Optional[BetheState] = None,
                 iterations: int = 0, residual: float = float("inf")):
        super().__init__(message)
        self.best = best
        self.iterations = iterations
        self.residual = residual


class SingularJacobianError(OspQtmError):
    """The Newton Jacobian is singular; the seed is degenerate."""


class UnsupportedSeedError(OspQtmError, ValueError):
    """No seed pattern is defined for the requested (k, N, J)."""


# ---------------------------------------------------------------------------
# Seed patterns
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeedPattern:
    """A family of strings: kind, real centers and imaginary offsets about Im v = 3/4."""
    kind: str
    centers: Tuple[float, ...]
    offsets: Tuple[float, ...]

    def roots(self) -> List[complex]:
        return [complex(c, SYMMETRY_LINE + d) for c in self.centers for d in self.offsets]


STRING_OFFSETS = {
    "two-string": lambda d: (-d, d),
    "three-string": lambda d: (-2 * d, 0.0, 2 * d),
    "one-string": lambda d: (0.0,),
}


def center_grid(count: int, half_width: float, skip_zero: bool = False) -> Tuple[float, ...]:
    """``count`` centers symmetric about zero, spread over [-half_width, half_width]."""
    if count == 0:
        return ()
    if count % 2 and skip_zero:
        raise UnsupportedSeedError("odd number of two-strings cannot avoid the center")
    if count % 2:
        half = (count - 1) // 2
        pos = [half_width * (j + 1) / max(half, 1) for j in range(half)]
        return tuple([-p for p in reversed(pos)] + [0.0] + pos)
    half = count // 2
    pos = [half_width * (j + 0.5) / half for j in range(half)]
    return tuple([-p for p in reversed(pos)] + pos)


def seed_patterns(k: int, params: ModelParams, half_width: float = 1.0,
                  d: float = 0.5) -> List[SeedPattern]:
    N = params.N
    if k == 1:
        return [SeedPattern("two-string", center_grid(N // 2, half_width),
                            STRING_OFFSETS["two-string"](d))]
    if k != 2:
        raise UnsupportedSeedError(f"rank k={k} is not supported (k in {{1, 2}})")
    if params.J >= 0:
        raise UnsupportedSeedError("the k=2 string patterns are defined for J < 0 only")
    if N % 4 == 0:
        n_two, extra = N // 2 - 2, "three-string"
    else:
        n_two, extra = N // 2 - 1, "one-string"
    return [
        SeedPattern("two-string", center_grid(n_two, half_width, skip_zero=True),
                    STRING_OFFSETS["two-string"](d)),
        SeedPattern(extra, (0.0,), STRING_OFFSETS[extra](d)),
    ]


def default_half_width(params: ModelParams) -> float:
    return max(1.0, np.log(1.0 / abs(params.u)) / np.pi)


def seed_state(k: int, params: ModelParams, half_width: Optional[float] = None,
               d: float = 0.5) -> BetheState:
    """Seed roots for rank k: two-strings plus (k=2) one three-string or one-string."""
    if half_width is None:
        half_width = default_half_width(params)
    roots: List[complex] = []
    for pattern in seed_patterns(k, params, half_width, d):
        roots.extend(pattern.roots())
    return BetheState(tuple(roots), N=params.N, k=k)


def random_seed(k: int, params: ModelParams, rng: np.random.Generator) -> BetheState:
    """A random seed with the same string content and symmetry as seed_state."""
    patterns = seed_patterns(k, params)
    roots: List[complex] = []
    for p in patterns:
        d = rng.uniform(0.3, 0.7)
        if p.kind == "two-string":
            half = len(p.centers) // 2
            pos = np.sort(rng.uniform(0.1, 2.5 * default_half_width(params), size=half))
            centers = list(-pos[::-1]) + ([0.0] if len(p.centers) % 2 else []) + list(pos)
        else:
            centers = [0.0]
        roots.extend(SeedPattern(p.kind, tuple(centers), STRING_OFFSETS[p.kind](d)).roots())
    return BetheState(tuple(roots), N=params.N, k=k)


# ---------------------------------------------------------------------------
# Residual and Jacobian
# ---------------------------------------------------------------------------

def _phi_and_derivative(x: np.ndarray, s: int, params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    p = params.N // 2
    z = x + s * 1j * params.u
    lower = int_power(z, p - 1)
    return lower * z, p * lower


def _shifted_products(roots: np.ndarray, shift: complex) -> Tuple[np.ndarray, np.ndarray]:
    """Q(v_k + shift) for every k and its gradient with respect to all roots."""
    n = roots.size
    factors = roots[:, None] + shift - roots[None, :]
    prefix = np.ones((n, n + 1), dtype=complex)
    suffix = np.ones((n, n + 1), dtype=complex)
    for j in range(n):
        prefix[:, j + 1] = prefix[:, j] * factors[:, j]
        suffix[:, n - j - 1] = suffix[:, n - j] * factors[:, n - j - 1]
    leave_one_out = prefix[:, :n] * suffix[:, 1:]
    values = prefix[:, n]
    grad = -leave_one_out
    # the diagonal factor equals ``shift`` and does not depend on v_k
    np.fill_diagonal(grad, 0.0)
    grad[np.diag_indices(n)] = -grad.sum(axis=1)
    return values, grad


def _residual_terms(state: BetheState, params: ModelParams):
    v = state.array
    phm_a, dphm_a = _phi_and_derivative(v + 0.5j, -1, params)
    php_a, dphp_a = _phi_and_derivative(v - 1j, +1, params)
    phm_b, dphm_b = _phi_and_derivative(v - 0.5j, -1, params)
    php_b, dphp_b = _phi_and_derivative(v - 2j, +1, params)
    A, dA = phm_a * php_a, dphm_a * php_a + phm_a * dphp_a
    B, dB = phm_b * php_b, dphm_b * php_b + phm_b * dphp_b
    q_p, g_p = _shifted_products(v, 0.5j)
    q_m1, g_m1 = _shifted_products(v, -1j)
    q_m, g_m = _shifted_products(v, -0.5j)
    q_p1, g_p1 = _shifted_products(v, 1j)
    D, dD = q_p * q_m1, g_p * q_m1[:, None] + q_p[:, None] * g_m1
    C, dC = q_m * q_p1, g_m * q_p1[:, None] + q_m[:, None] * g_p1
    return A, dA, B, dB, C, dC, D, dD


def bae_residuals(state: BetheState, params: ModelParams) -> np.ndarray:
    """F_k = φ₋(v_k+i/2)φ₊(v_k-i)Q(v_k+i/2)Q(v_k-i) + σφ₋(v_k-i/2)φ₊(v_k-2i)Q(v_k-i/2)Q(v_k+i)."""
    if state.n == 0:
        return np.empty(0, dtype=complex)
    A, _, B, _, C, _, D, _ = _residual_terms(state, params)
    return A * D + state.sigma * B * C


def bae_residual(state: BetheState, k: int, params: ModelParams) -> complex:
    if not 1 <= k <= state.n:
        raise ParameterError(f"root index {k} out of range 1..{state.n}")
    return complex(bae_residuals(state, params)[k - 1])


def normalized_residuals(state: BetheState, params: ModelParams) -> np.ndarray:
    """|F_k| / (|A D| + |B C|): scale-free measure of how well each equation holds."""
    if state.n == 0:
        return np.empty(0)
    A, _, B, _, C, _, D, _ = _residual_terms(state, params)
    scale = np.abs(A * D) + np.abs(B * C)
    return np.abs(A * D + state.sigma * B * C) / np.where(scale > 0, scale, 1.0)


def bae_jacobian(state: BetheState, params: ModelParams) -> np.ndarray:
    A, dA, B, dB, C, dC, D, dD = _residual_terms(state, params)
    s = state.sigma
    jac = A[:, None] * dD + s * B[:, None] * dC
    jac[np.diag_indices(state.n)] += dA * D + s * dB * C
    return jac


# ---------------------------------------------------------------------------
# Symmetry
# ---------------------------------------------------------------------------

def _reflect_imag_axis(v: np.ndarray) -> np.ndarray:
    return -np.conj(v)


def _reflect_symmetry_line(v: np.ndarray) -> np.ndarray:
    return np.conj(v) + 2j * SYMMETRY_LINE


def _pairing(v: np.ndarray, image: np.ndarray) -> Tuple[np.ndarray, float]:
    cost = np.abs(v[:, None] - image[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty_like(cols)
    perm[rows] = cols
    return perm, float(cost[rows, cols].max()) if v.size else 0.0


def symmetry_residuals(state: BetheState) -> Dict[str, float]:
    """Distance of the root multiset from its images under both reflections."""
    v = state.array
    if v.size == 0:
        return {"imaginary_axis": 0.0, "line_3/4": 0.0}
    return {
        "imaginary_axis": _pairing(v, _reflect_imag_axis(v))[1],
        "line_3/4": _pairing(v, _reflect_symmetry_line(v))[1],
    }


def symmetrize(v: np.ndarray, threshold: float = 0.25) -> np.ndarray:
    """Project onto exact symmetry under both reflections when already close to it."""
    for reflect in (_reflect_imag_axis, _reflect_symmetry_line):
        image = reflect(v)
        perm, mismatch = _pairing(v, image)
        if mismatch > threshold:
            logger.debug("[BAE] symmetry projection skipped (mismatch %.3g)", mismatch)
            continue
        v = 0.5 * (v + image[perm])
    return v


# ---------------------------------------------------------------------------
# Newton solver
# ---------------------------------------------------------------------------

@dataclass
class NewtonReport:
    iterations: int
    residual: float
    history: List[float] = field(default_factory=list)


def solve_newton(seed: BetheState, params: ModelParams, tol: float = 1e-12,
                 max_iter: int = 200, symmetric: bool = True,
                 report: Optional[NewtonReport] = None) -> BetheState:
    """
    Damped Newton iteration on the cleared BAE residual.

    Convergence is measured by the normalized residual. Each step is halved
    up to 20 times until the residual norm decreases; with ``symmetric`` the
    iterate is projected back onto the reflection-symmetric manifold.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if seed.n == 0:
        if report is not None:
            report.iterations, report.residual = 0, 0.0
        return seed
    v = seed.array.copy()
    if symmetric:
        v = symmetrize(v)
    state = BetheState(tuple(v), N=seed.N, k=seed.k)
    err = float(normalized_residuals(state, params).max())
    history = [err]
    best, best_err = state, err
    iterations = 0
    while err >= tol and iterations < max_iter:
        iterations += 1
        F = bae_residuals(state, params)
        try:
            step = np.linalg.solve(bae_jacobian(state, params), -F)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(f"singular Jacobian at iteration {iterations}") from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobianError(f"non-finite Newton step at iteration {iterations}")
        t = 1.0
        for _ in range(21):
            trial_v = v + t * step
            if symmetric:
                trial_v = symmetrize(trial_v)
            try:
                trial = BetheState(tuple(trial_v), N=seed.N, k=seed.k)
                trial_err = float(normalized_residuals(trial, params).max())
            except ParameterError:
                trial_err = np.inf
            if trial_err < err:
                break
            t *= 0.5
        else:
            logger.debug("[BAE] line search stalled at residual %.3g", err)
            break
        v, state, err = trial_v, trial, trial_err
        history.append(err)
        if err < best_err:
            best, best_err = state, err
        logger.debug("[BAE] iteration %d: residual %.3e (step %.3g)", iterations, err, t)
    if report is not None:
        report.iterations, report.residual, report.history = iterations, best_err, history
    if best_err >= tol:
        raise BetheConvergenceError(
            f"Newton did not converge: residual {best_err:.3e} after {iterations} iterations",
            best=best, iterations=iterations, residual=best_err)
    logger.debug("[BAE] converged in %d iterations (residual %.2e)", iterations, best_err)
    return best


def _degenerate(state: BetheState, params: ModelParams) -> bool:
    """Roots sitting on vacuum zeros satisfy F_k = 0 trivially."""
    u = params.u
    traps = np.array([1j * u - 0.5j, 1j * u + 0.5j, 1j - 1j * u, 2j - 1j * u])
    v = state.array
    if v.size == 0:
        return False
    return bool(np.min(np.abs(v[:, None] - traps[None, :])) < 1e-6 or state.spacing() < 1e-6)


def candidate_seeds(k: int, params: ModelParams, random_starts: int = 0,
                    rng_seed: int = 0) -> List[BetheState]:
    base = default_half_width(params)
    seeds = [seed_state(k, params, half_width=base * f, d=d)
             for d in (0.5, 0.25) for f in (1.0, 0.5, 1.5)]
    rng = np.random.default_rng(rng_seed)
    seeds.extend(random_seed(k, params, rng) for _ in range(random_starts))
    return seeds


def solve_for_rank(k: int, params: ModelParams, tol: float = 1e-12, max_iter: int = 200,
                   random_starts: Optional[int] = None, rng_seed: int = 0) -> BetheState:
    """
    Solve the BAE for the state of rank k (1 = largest, 2 = second largest).

    Several seeds are refined; among the distinct converged solutions the
    one with the largest |T_1(0)| is returned. Falls back to continuation
    in beta when no seed converges.
    """
    if random_starts is None:
        random_starts = 8 if params.N <= 8 else 2
    found: List[Tuple[float, BetheState]] = []
    for seed in candidate_seeds(k, params, random_starts, rng_seed):
        try:
            state = solve_newton(seed, params, tol=tol, max_iter=max_iter)
        except (BetheConvergenceError, SingularJacobianError) as exc:
            logger.debug("[BAE] seed rejected: %s", exc)
            continue
        if _degenerate(state, params):
            continue
        value = abs(complex(t1_eval(0.0, state, params)))
        if not np.isfinite(value):
            continue
        found.append((value, state))
    if not found:
        logger.warning("[BAE] no static seed converged for k=%d, N=%d; continuing in beta",
                       k, params.N)
        return continue_in_beta(k, params, tol=tol, max_iter=max_iter)
    found.sort(key=lambda item: -item[0])
    value, state = found[0]
    logger.info("[BAE] k=%d N=%d u=%.4g: %d candidates, |T1(0)| = %.10g (%s)",
                k, params.N, params.u, len(found), value, classify_strings(state).describe())
    return state


def continue_in_beta(k: int, params: ModelParams, beta_start: Optional[float] = None,
                     tol: float = 1e-12, max_iter: int = 200, max_halvings: int = 12,
                     start: Optional[BetheState] = None) -> BetheState:
    """
    Follow a solution from ``beta_start`` to ``params.beta`` by geometric steps.

    Each accepted step doubles the next step factor and each failure halves
    it. ``start`` may supply the solution at ``beta_start``.
    """
    if beta_start is None:
        beta_start = params.beta / 16
    current_params = params.with_beta(beta_start)
    if start is None:
        state = None
        for seed in candidate_seeds(k, current_params, random_starts=4):
            try:
                state = solve_newton(seed, current_params, tol=tol, max_iter=max_iter)
                break
            except (BetheConvergenceError, SingularJacobianError):
                continue
        if state is None:
            raise BetheConvergenceError(f"no converged start at beta={beta_start:g}")
    else:
        state = start
    beta = beta_start
    ratio = 2.0 if params.beta > beta_start else 0.5
    halvings = 0
    while not np.isclose(beta, params.beta, rtol=1e-14, atol=0.0):
        target = beta * ratio
        if (ratio > 1 and target > params.beta) or (ratio < 1 and target < params.beta):
            target = params.beta
        try:
            state = solve_newton(state, params.with_beta(target), tol=tol, max_iter=max_iter)
        except (BetheConvergenceError, SingularJacobianError):
            halvings += 1
            if halvings > max_halvings:
                raise BetheConvergenceError(f"continuation stalled at beta={beta:g}", best=state)
            ratio = np.sqrt(ratio)
            continue
        logger.debug("[BAE] continuation beta=%.6g -> %.6g", beta, target)
        beta = target
        ratio = ratio ** 2 if abs(np.log(ratio)) < np.log(2.0) else ratio
    return state


# ---------------------------------------------------------------------------
# Classification and serialization
# ---------------------------------------------------------------------------

STRING_NAMES = {1: "one-string", 2: "two-string", 3: "three-string"}


@dataclass
class StringPattern:
    """Roots grouped into strings by common real part."""
    strings: List[Tuple[float, Tuple[float, ...]]]

    @property
    def counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for n in sorted(len(imag) for _, imag in self.strings):
            name = STRING_NAMES.get(n, f"{n}-string")
            counts[name] = counts.get(name, 0) + 1
        return counts

    def describe(self) -> str:
        return ", ".join(f"{c} {name}s" if c > 1 else f"{c} {name}"
                         for name, c in self.counts.items())


def classify_strings(state: BetheState, tol: float = 1e-4) -> StringPattern:
    """Cluster roots by real part; each cluster is one string."""
    v = sorted(state.roots, key=lambda z: (z.real, z.imag))
    strings: List[Tuple[float, Tuple[float, ...]]] = []
    group: List[complex] = []
    for z in v:
        if group and abs(z.real - group[0].real) > tol:
            strings.append((float(np.mean([g.real for g in group])),
                            tuple(sorted(g.imag for g in group))))
            group = []
        group.append(z)
    if group:
        strings.append((float(np.mean([g.real for g in group])),
                        tuple(sorted(g.imag for g in group))))
    return StringPattern(strings)


def save_state(state: BetheState, params: ModelParams, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(state.to_json(params), indent=2))
    return path


def load_state(path) -> Tuple[BetheState, float]:
    doc = json.loads(Path(path).read_text())
    return BetheState.from_json(doc), float(doc["u"])
