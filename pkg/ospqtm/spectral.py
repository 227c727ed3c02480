"""
ospqtm Spectral core - building blocks of the analytic Bethe ansatz.

Provides the model parameters, Bethe states, the vacuum functions φ±,
the Q-function, the three box functions and the QTM eigenvalue T_1(v)
evaluated over a common denominator.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[complex, float, np.ndarray]

ONE = "1"
ZERO = "0"
ONE_BAR = "1bar"
ALPHABET: Tuple[str, str, str] = (ONE, ZERO, ONE_BAR)

#: grading p(a) of the three basis states
PARITY = {ONE: 1, ZERO: 0, ONE_BAR: 1}

POLE_EPS = 1e-8


# ---------------------------------------------------------------------------
# Exceptions
# ---------------------------------------------------------------------------

class OspQtmError(Exception):
    """Root of all errors raised by ospqtm."""


class ParameterError(OspQtmError, ValueError):
    """Invalid model parameters, states or indices."""


class PoleProximityError(OspQtmError):
    """Evaluation point lies on (or too close to) a pole of a box function."""

    def __init__(self, message: str, pole: complex):
        super().__init__(message)
        self.pole = pole


# ---------------------------------------------------------------------------
# ModelParams / BetheState
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """
    Coupling J, inverse temperature beta and Trotter number N.

    The Trotter parameter u = -J*beta/N is always recomputed from the other
    three fields.
    """
    J: float
    beta: float
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2 or self.N % 2:
            raise ParameterError(f"Trotter number must be even and >= 2, got {self.N}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if self.J == 0:
            raise ParameterError("coupling J must be nonzero")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "J", float(self.J))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def u(self) -> float:
        return -self.J * self.beta / self.N

    @classmethod
    def from_u(cls, u: float, N: int, J: float = -1.0) -> "ModelParams":
        """Build parameters for a given Trotter parameter; the sign of J follows u."""
        if u == 0:
            raise ParameterError("u = 0 corresponds to beta = 0")
        J = -abs(J) if u > 0 else abs(J)
        return cls(J=J, beta=-u * N / J, N=N)

    def with_beta(self, beta: float) -> "ModelParams":
        return ModelParams(J=self.J, beta=beta, N=self.N)


@dataclass(frozen=True)
class BetheState:
    """
    A sector (root count n, sign sigma = (-1)^(N-n)) and its Bethe roots.

    ``k`` records the eigenvalue rank the state was solved for, if any.
    """
    roots: Tuple[complex, ...]
    N: int
    k: int = 0
    sigma: int = field(init=False)

    def __post_init__(self):
        roots = tuple(complex(r) for r in self.roots)
        object.__setattr__(self, "roots", roots)
        if len(roots) > self.N:
            raise ParameterError(f"n = {len(roots)} exceeds N = {self.N}")
        if len(roots) > 1:
            arr = np.asarray(roots)
            gaps = np.abs(arr[:, None] - arr[None, :])
            gaps[np.diag_indices_from(gaps)] = np.inf
            if gaps.min() <= 1e-12:
                raise ParameterError("coincident Bethe roots")
        object.__setattr__(self, "sigma", 1 if (self.N - len(roots)) % 2 == 0 else -1)

    @property
    def n(self) -> int:
        return len(self.roots)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.roots, dtype=complex)

    def spacing(self) -> float:
        """Minimal distance between roots (1.0 when fewer than two roots)."""
        if self.n < 2:
            return 1.0
        arr = self.array
        gaps = np.abs(arr[:, None] - arr[None, :])
        gaps[np.diag_indices_from(gaps)] = np.inf
        return float(gaps.min())

    def to_json(self, params: ModelParams) -> dict:
        return {
            "N": self.N,
            "u": params.u,
            "n": self.n,
            "k": self.k,
            "roots": [[r.real, r.imag] for r in self.roots],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BetheState":
        return cls(tuple(complex(re, im) for re, im in doc["roots"]),
                   N=int(doc["N"]), k=int(doc.get("k", 0)))


def vacuum_state(N: int) -> BetheState:
    return BetheState((), N=N)


# ---------------------------------------------------------------------------
# Elementary functions
# ---------------------------------------------------------------------------

def int_power(z: ArrayLike, p: int) -> np.ndarray:
    """z**p for integer p >= 0 by repeated squaring (no log/exp)."""
    z = np.asarray(z, dtype=complex)
    result = np.ones_like(z)
    base = z.copy()
    while p:
        if p & 1:
            result = result * base
        p >>= 1
        if p:
            base = base * base
    return result


def _sign(sign) -> int:
    if sign in ("+", 1, +1):
        return 1
    if sign in ("-", -1):
        return -1
    raise ParameterError(f"sign must be '+' or '-', got {sign!r}")


def phi(v: ArrayLike, sign, params: ModelParams) -> np.ndarray:
    """φ±(v) = (v ± iu)^(N/2)."""
    s = _sign(sign)
    return int_power(np.asarray(v, dtype=complex) + s * 1j * params.u, params.N // 2)


def q_eval(state: BetheState, v: ArrayLike) -> np.ndarray:
    """Q(v) = prod_j (v - v_j); identically 1 without roots."""
    v = np.asarray(v, dtype=complex)
    if state.n == 0:
        return np.ones_like(v)
    return np.prod(v[..., None] - state.array, axis=-1)


def vacuum(a: str, v: ArrayLike, state: BetheState, params: ModelParams) -> np.ndarray:
    """Vacuum part ψ_a(v), including the sign (-1)^(N-n) for a in {1, 1bar}."""
    v = np.asarray(v, dtype=complex)
    if a == ONE:
        return state.sigma * (phi(v, "+", params) * phi(v + 1j, "-", params)
                              * phi(v - 0.5j, "+", params) / phi(v - 1.5j, "+", params))
    if a == ZERO:
        return phi(v, "+", params) * phi(v, "-", params)
    if a == ONE_BAR:
        return state.sigma * (phi(v, "-", params) * phi(v - 1j, "+", params)
                              * phi(v + 0.5j, "-", params) / phi(v + 1.5j, "-", params))
    raise ParameterError(f"unknown box label {a!r}")


# shifts s entering Q(v + s) in numerator / denominator of each box
BOX_SHIFTS = {
    ONE: ((-0.5j,), (0.5j,)),
    ZERO: ((0.0, 1.5j), (0.5j, 1j)),
    ONE_BAR: ((2j,), (1j,)),
}


def pole_locations(a: str, state: BetheState, params: ModelParams) -> np.ndarray:
    """All points where a denominator of box ``a`` vanishes."""
    poles = [state.array - s for s in BOX_SHIFTS[a][1]]
    if a == ONE:
        poles.append(np.array([1.5j - 1j * params.u]))
    elif a == ONE_BAR:
        poles.append(np.array([1j * params.u - 1.5j]))
    return np.concatenate(poles) if poles else np.empty(0, dtype=complex)


def _check_poles(v: np.ndarray, poles: np.ndarray, scale: float, eps: float) -> None:
    if poles.size == 0:
        return
    dist = np.abs(v.reshape(-1)[:, None] - poles[None, :])
    idx = np.unravel_index(np.argmin(dist), dist.shape)
    if dist[idx] < eps * scale:
        pole = complex(poles[idx[1]])
        raise PoleProximityError(
            f"evaluation point within {dist[idx]:.3g} of pole {pole:.6g}", pole)


def box_eval(a: str, v: ArrayLike, state: BetheState, params: ModelParams,
             eps: float = POLE_EPS) -> np.ndarray:
    """The box function of label ``a`` at v (vectorized over v)."""
    v = np.asarray(v, dtype=complex)
    _check_poles(v, pole_locations(a, state, params), state.spacing(), eps)
    num_shifts, den_shifts = BOX_SHIFTS[a]
    ratio = np.ones_like(v)
    for s in num_shifts:
        ratio = ratio * q_eval(state, v + s)
    for s in den_shifts:
        ratio = ratio / q_eval(state, v + s)
    return vacuum(a, v, state, params) * ratio


# ---------------------------------------------------------------------------
# T_1 over a common denominator
# ---------------------------------------------------------------------------

def t1_numerator(v: ArrayLike, state: BetheState, params: ModelParams) -> np.ndarray:
    """T_1(v) times φ₊(v-3i/2)φ₋(v+3i/2)Q(v+i/2)Q(v+i); an entire function."""
    v = np.asarray(v, dtype=complex)
    p, q, s = params, state, state.sigma
    outer = phi(v - 1.5j, "+", p) * phi(v + 1.5j, "-", p)
    term1 = (s * phi(v, "+", p) * phi(v + 1j, "-", p) * phi(v - 0.5j, "+", p)
             * phi(v + 1.5j, "-", p) * q_eval(q, v - 0.5j) * q_eval(q, v + 1j))
    term0 = phi(v, "+", p) * phi(v, "-", p) * outer * q_eval(q, v) * q_eval(q, v + 1.5j)
    term1bar = (s * phi(v, "-", p) * phi(v - 1j, "+", p) * phi(v + 0.5j, "-", p)
                * phi(v - 1.5j, "+", p) * q_eval(q, v + 2j) * q_eval(q, v + 0.5j))
    return term1 + term0 + term1bar


def t1_denominator(v: ArrayLike, state: BetheState, params: ModelParams) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return (phi(v - 1.5j, "+", params) * phi(v + 1.5j, "-", params)
            * q_eval(state, v + 0.5j) * q_eval(state, v + 1j))


def removable_value(func: Callable[[np.ndarray], np.ndarray], v0: complex,
                    radius: float, samples: int = 32) -> complex:
    """Value at v0 of a function analytic in the disk, by the mean-value property."""
    theta = 2 * np.pi * np.arange(samples) / samples
    return complex(np.mean(func(v0 + radius * np.exp(1j * theta))))


def near_apparent_pole(v: np.ndarray, poles: np.ndarray, radius: float) -> np.ndarray:
    if poles.size == 0:
        return np.zeros(v.shape, dtype=bool)
    return np.min(np.abs(v[..., None] - poles), axis=-1) < radius


def t1_eval(v: ArrayLike, state: BetheState, params: ModelParams,
            near: float = 1e-4) -> np.ndarray:
    """
    QTM eigenvalue T_1(v) = box(1) + box(0) + box(1bar).

    Evaluated as numerator / common denominator. Points closer than
    ``near`` (in units of the root spacing) to a Q-induced pole are
    evaluated through the mean-value property on a small circle, which is
    exact for the pole-free function a BAE solution produces.
    """
    v = np.asarray(v, dtype=complex)
    scalar = v.ndim == 0
    v = np.atleast_1d(v)
    result = t1_numerator(v, state, params) / t1_denominator(v, state, params)
    apparent = np.concatenate([state.array - 0.5j, state.array - 1j])
    radius = near * state.spacing()
    mask = near_apparent_pole(v, apparent, radius)
    if mask.any():
        def direct(z):
            return t1_numerator(z, state, params) / t1_denominator(z, state, params)
        for idx in np.flatnonzero(mask):
            result[idx] = removable_value(direct, v[idx], 50 * radius)
    return result[0] if scalar else result


def residue(labels: Sequence[str], v0: complex, state: BetheState, params: ModelParams,
            radius: float = 1e-3, samples: int = 64) -> complex:
    """Residue at v0 of the sum of the given boxes, by trapezoidal contour quadrature."""
    theta = 2 * np.pi * np.arange(samples) / samples
    z = v0 + radius * np.exp(1j * theta)
    total = sum(box_eval(a, z, state, params, eps=0.0) for a in labels)
    return complex(np.mean(total * (z - v0)))


def leading_coefficient(sigma: int, m: int = 1) -> int:
    """Coefficient of v^N in T_m(v): sum over tableaux of sigma^(#1 + #1bar)."""
    if m < 0:
        return 0
    return sum(sigma ** j * (j + 1) for j in range(m + 1))


def as_complex_list(values: Iterable[complex]) -> list:
    return [[float(np.real(z)), float(np.imag(z))] for z in values]
