"""
ospqtm Fusion - tableau sums, T-/Y-systems and zeros of the fusion hierarchy.

T_m(v) is the one-column dressed vacuum form: a sum over weakly increasing
tableaux of products of shifted boxes, divided by the normalization N_m(v).
Its cleared form P_m(v) = T_m(v)·φ₊(v-i(m+2)/2)·φ₋(v+i(m+2)/2) is a
polynomial of degree 2N whose zeros are located by the argument principle.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .spectral import (ALPHABET, ONE, ONE_BAR, POLE_EPS, ArrayLike, BetheState,
                       ModelParams, OspQtmError, ParameterError, PoleProximityError,
                       box_eval, leading_coefficient, near_apparent_pole, phi,
                       removable_value)

logger = logging.getLogger(__name__)

ORDER = {a: i for i, a in enumerate(ALPHABET)}


class WindingError(OspQtmError):
    """Argument-principle counts are inconsistent or incomplete."""


# ---------------------------------------------------------------------------
# Tableaux
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tableau:
    """One column of m boxes, weakly increasing in 1 ≺ 0 ≺ 1bar."""
    entries: Tuple[str, ...]

    def __post_init__(self):
        ranks = [ORDER[a] for a in self.entries]
        if ranks != sorted(ranks):
            raise ParameterError(f"tableau {self.entries} is not weakly increasing")

    @property
    def m(self) -> int:
        return len(self.entries)

    def sign(self, sigma: int) -> int:
        return sigma ** sum(1 for a in self.entries if a in (ONE, ONE_BAR))


@dataclass(frozen=True)
class FusionIndex:
    m: int
    k: int = 1

    def __post_init__(self):
        if self.m < 0:
            raise ParameterError(f"fusion level must be >= 0, got {self.m}")
        if self.k not in (1, 2):
            raise ParameterError(f"rank must be 1 or 2, got {self.k}")


def enumerate_tableaux(m: int) -> List[Tableau]:
    if m < 1:
        raise ParameterError(f"tableaux need m >= 1, got {m}")
    return [Tableau(entries) for entries in itertools.combinations_with_replacement(ALPHABET, m)]


def box_arguments(m: int, v: ArrayLike) -> List[np.ndarray]:
    """Arguments v - i(m+1-2k)/2 of boxes k = 1..m, top to bottom."""
    v = np.asarray(v, dtype=complex)
    return [v - 0.5j * (m + 1 - 2 * k) for k in range(1, m + 1)]


# ---------------------------------------------------------------------------
# Scalar functions
# ---------------------------------------------------------------------------

def normalization(m: int, v: ArrayLike, params: ModelParams) -> np.ndarray:
    """N_m(v) = prod_{j=1}^{m-1} φ₋(v+(m+1-2j)i/2) φ₊(v-(m+1-2j)i/2)."""
    v = np.asarray(v, dtype=complex)
    out = np.ones_like(v)
    for j in range(1, m):
        s = 0.5j * (m + 1 - 2 * j)
        out = out * phi(v + s, "-", params) * phi(v - s, "+", params)
    return out


def outer_factor(m: int, v: ArrayLike, params: ModelParams) -> np.ndarray:
    """φ₊(v-i(m+2)/2)·φ₋(v+i(m+2)/2); clears every pole of T_m."""
    v = np.asarray(v, dtype=complex)
    s = 0.5j * (m + 2)
    return phi(v - s, "+", params) * phi(v + s, "-", params)


def t0_eval(m: int, v: ArrayLike, params: ModelParams, eps: float = POLE_EPS) -> np.ndarray:
    """T_0^(1) for m = 0, otherwise the scalar T_m^(0) of the T-system."""
    v = np.asarray(v, dtype=complex)
    if m < 0:
        raise ParameterError(f"m must be >= 0, got {m}")
    if m == 0:
        return phi(v + 0.5j, "-", params) * phi(v - 0.5j, "+", params)
    a = 0.5j * (m + 1)
    poles = np.array([1j * params.u - a, a - 1j * params.u])
    dist = np.min(np.abs(v.reshape(-1)[:, None] - poles[None, :]))
    if dist < eps:
        raise PoleProximityError(f"T0 pole within {dist:.3g} of v", complex(poles[0]))
    b, c = 0.5j * (m + 2), 0.5j * m
    return (phi(v + b, "-", params) * phi(v - b, "+", params)
            * phi(v - c, "-", params) * phi(v + c, "+", params)
            / (phi(v + a, "-", params) * phi(v - a, "+", params)))


# ---------------------------------------------------------------------------
# Dressed vacuum form
# ---------------------------------------------------------------------------

def _tableau_sum(m: int, v: np.ndarray, state: BetheState, params: ModelParams) -> np.ndarray:
    """Sum over weakly increasing tableaux by dynamic programming over the last symbol."""
    partial = None
    for x in box_arguments(m, v):
        boxes = [box_eval(a, x, state, params, eps=0.0) for a in ALPHABET]
        if partial is None:
            partial = boxes
        else:
            running = np.zeros_like(v)
            nxt = []
            for a_idx in range(len(ALPHABET)):
                running = running + partial[a_idx]
                nxt.append(running * boxes[a_idx])
            partial = nxt
    return partial[0] + partial[1] + partial[2]


def singular_points(m: int, state: BetheState, params: ModelParams) -> np.ndarray:
    """Points where the tableau sum must be evaluated through its cleared form."""
    pts = []
    u = params.u
    for k in range(1, m + 1):
        off = 0.5j * (m + 1 - 2 * k)
        pts.append(state.array - 0.5j + off)
        pts.append(state.array - 1j + off)
        pts.append(np.array([1.5j - 1j * u + off, 1j * u - 1.5j + off]))
    for j in range(1, m):
        s = 0.5j * (m + 1 - 2 * j)
        pts.append(np.array([1j * u - s, s - 1j * u]))
    s = 0.5j * (m + 2)
    pts.append(np.array([s - 1j * u, 1j * u - s]))
    return np.concatenate(pts)


def _check_index(index: FusionIndex, state: BetheState) -> None:
    if state.k and state.k != index.k:
        raise ParameterError(f"state solved for k={state.k} used with k={index.k}")


def dvf_polynomial(index: FusionIndex, v: ArrayLike, state: BetheState,
                   params: ModelParams, near: float = 1e-4) -> np.ndarray:
    """P_m(v) = T_m(v)·φ₊(v-i(m+2)/2)·φ₋(v+i(m+2)/2), an entire function of v."""
    _check_index(index, state)
    m = index.m
    v = np.asarray(v, dtype=complex)
    scalar = v.ndim == 0
    v = np.atleast_1d(v)

    def direct(z):
        if m == 0:
            return t0_eval(0, z, params) * outer_factor(0, z, params)
        return _tableau_sum(m, z, state, params) / normalization(m, z, params) * outer_factor(m, z, params)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = direct(v)
        if m > 0:
            radius = near * min(state.spacing(), 1.0)
            mask = near_apparent_pole(v, singular_points(m, state, params), radius) | ~np.isfinite(out)
            for idx in np.flatnonzero(mask):
                out[idx] = removable_value(direct, v[idx], 50 * radius)
    return out[0] if scalar else out


def dvf_eval(index: FusionIndex, v: ArrayLike, state: BetheState, params: ModelParams) -> np.ndarray:
    """
    Fusion eigenvalue T_m(v) for the state of rank ``index.k``.

    m = 0 gives T_0^(1); m = 1 coincides with t1_eval.
    """
    if index.m == 0:
        return t0_eval(0, v, params)
    v = np.asarray(v, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        return dvf_polynomial(index, v, state, params) / outer_factor(index.m, v, params)


def _t(m: int, k: int, v: np.ndarray, state: BetheState, params: ModelParams) -> np.ndarray:
    if m < 0:
        return np.zeros_like(np.asarray(v, dtype=complex))
    return dvf_eval(FusionIndex(m, k), v, state, params)


def y_eval(index: FusionIndex, v: ArrayLike, state: BetheState, params: ModelParams,
           eps: float = POLE_EPS) -> np.ndarray:
    """Y_m = T_{m-1}T_{m+1} / (T_m^(0) T_m); Y_0 is identically zero."""
    v = np.asarray(v, dtype=complex)
    if index.m == 0:
        return np.zeros_like(v)
    m, k = index.m, index.k
    num = _t(m - 1, k, v, state, params) * _t(m + 1, k, v, state, params)
    den = t0_eval(m, v, params) * _t(m, k, v, state, params)
    if np.any(np.abs(den) <= eps * np.abs(num)):
        raise PoleProximityError("Y-function evaluated at a zero of T_m^(0)·T_m",
                                 complex(np.atleast_1d(v)[np.argmin(np.abs(den))]))
    return num / den


def asymptotic_y(m: int, sigma: int) -> float:
    """Plateau of Y_m from the tableau leading coefficients."""
    if m == 0:
        return 0.0
    return (leading_coefficient(sigma, m - 1) * leading_coefficient(sigma, m + 1)
            / leading_coefficient(sigma, m))


def _relative(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    scale = np.abs(lhs) + np.abs(rhs)
    return np.abs(lhs - rhs) / np.where(scale > 0, scale, 1.0)


def verify_functional_relation(kind: str, m: int, v: ArrayLike, state: BetheState,
                               params: ModelParams, k: Optional[int] = None) -> np.ndarray:
    """|LHS - RHS| / (|LHS| + |RHS|) of the T-system or Y-system at level m."""
    if m < 1:
        raise ParameterError("functional relations need m >= 1")
    k = k or state.k or 1
    v = np.asarray(v, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "T-system":
            lhs = _t(m, k, v - 0.5j, state, params) * _t(m, k, v + 0.5j, state, params)
            rhs = (_t(m - 1, k, v, state, params) * _t(m + 1, k, v, state, params)
                   + t0_eval(m, v, params) * _t(m, k, v, state, params))
        elif kind == "Y-system":
            def y(level, z):
                if level == 0:
                    return np.zeros_like(z)
                return (_t(level - 1, k, z, state, params) * _t(level + 1, k, z, state, params)
                        / (t0_eval(level, z, params) * _t(level, k, z, state, params)))
            lhs = y(m, v - 0.5j) * y(m, v + 0.5j)
            ym = y(m, v)
            rhs = (1 + y(m - 1, v)) * (1 + y(m + 1, v)) / (1 + 1 / ym)
        else:
            raise ParameterError(f"unknown relation {kind!r}")
    res = _relative(lhs, rhs)
    if np.any(~np.isfinite(res)):
        logger.warning("[Fusion] %s residual not finite at some points (pole)", kind)
    return res


def dvf_coefficients(index: FusionIndex, state: BetheState, params: ModelParams,
                     center: complex = 0.75j, radius: Optional[float] = None,
                     samples: Optional[int] = None) -> Tuple[np.ndarray, complex, float]:
    """Taylor coefficients of P_m in w = (v - center)/radius, sampled on |w| = 1."""
    m = index.m
    if radius is None:
        spread = np.max(np.abs(state.array - center)) if state.n else 0.0
        radius = float(spread + m + 4)
    if samples is None:
        samples = 4 * params.N + 8
    w = np.exp(2j * np.pi * np.arange(samples) / samples)
    values = dvf_polynomial(index, center + radius * w, state, params)
    return np.fft.fft(values) / samples, center, radius


# ---------------------------------------------------------------------------
# Zeros by the argument principle
# ---------------------------------------------------------------------------

Rect = Tuple[float, float, float, float]


class _OnBoundary(Exception):
    pass


@dataclass
class ZeroSearch:
    """Bookkeeping for one argument-principle zero search."""
    index: FusionIndex
    state: BetheState
    params: ModelParams
    resolution: float = 1e-3
    max_refine: int = 10
    evaluations: int = 0

    def f(self, z: np.ndarray) -> np.ndarray:
        self.evaluations += np.size(z)
        return dvf_polynomial(self.index, z, self.state, self.params)

    def _edge_winding(self, a: complex, b: complex, n: int = 64) -> float:
        for _ in range(self.max_refine):
            t = np.linspace(0.0, 1.0, n + 1)
            values = self.f(a + (b - a) * t)
            if np.any(values == 0) or not np.all(np.isfinite(values)):
                raise _OnBoundary
            steps = np.angle(values[1:] / values[:-1])
            if np.max(np.abs(steps)) < np.pi / 4:
                return float(steps.sum())
            n *= 2
        raise _OnBoundary

    def winding(self, rect: Rect) -> int:
        x0, x1, y0, y1 = rect
        corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
        total = sum(self._edge_winding(corners[i], corners[(i + 1) % 4]) for i in range(4))
        return int(round(total / (2 * np.pi)))

    def newton(self, z: complex, rect: Rect, tol: float = 1e-13, max_iter: int = 60) -> Optional[complex]:
        x0, x1, y0, y1 = rect
        pad = 0.5 * max(x1 - x0, y1 - y0)
        for _ in range(max_iter):
            h = 1e-6 * max(1.0, abs(z))
            f0 = complex(self.f(np.array([z]))[0])
            df = complex((self.f(np.array([z + h]))[0] - self.f(np.array([z - h]))[0]) / (2 * h))
            if df == 0 or not np.isfinite(df):
                return None
            step = f0 / df
            z -= step
            if not (x0 - pad <= z.real <= x1 + pad and y0 - pad <= z.imag <= y1 + pad):
                return None
            if abs(step) < tol * max(1.0, abs(z)):
                return z
        return None

    def subdivide(self, rect: Rect, count: int, found: List[complex], depth: int = 0) -> None:
        if count <= 0:
            return
        x0, x1, y0, y1 = rect
        size = max(x1 - x0, y1 - y0)
        if count == 1:
            z = self.newton(complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)), rect)
            if z is not None and x0 <= z.real <= x1 and y0 <= z.imag <= y1:
                found.append(z)
                return
        if size < self.resolution:
            z = self.newton(complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)), rect)
            if z is None:
                z = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
            logger.debug("[Fusion] cluster of %d zeros at %s", count, z)
            found.extend([z] * count)
            return
        for shift in (0.0123, -0.0271, 0.0419, -0.0577, 0.0733):
            frac = 0.5 + shift
            if x1 - x0 >= y1 - y0:
                xm = x0 + frac * (x1 - x0)
                halves = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
            else:
                ym = y0 + frac * (y1 - y0)
                halves = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
            try:
                counts = [self.winding(h) for h in halves]
            except _OnBoundary:
                continue
            if sum(counts) != count:
                logger.warning("[Fusion] winding mismatch %d != %d + %d in %s",
                               count, counts[0], counts[1], rect)
                continue
            for h, c in zip(halves, counts):
                self.subdivide(h, c, found, depth + 1)
            return
        raise WindingError(f"could not split rectangle {rect} holding {count} zeros")


def default_rect(index: FusionIndex, state: BetheState) -> Rect:
    spread = float(np.max(np.abs(state.array.real))) if state.n else 0.0
    x = spread + 3.0071
    y = 0.5 * (index.m + 2) + 1.0037
    return (-x, x * 1.0013, -y, y * 1.0021)


def find_zeros(index: FusionIndex, state: BetheState, params: ModelParams,
               rect: Optional[Rect] = None, resolution: float = 1e-3,
               max_enlarge: int = 6) -> List[complex]:
    """
    Zeros of T_m (with multiplicity) inside ``rect``, by recursive winding counts.

    Without an explicit rectangle the search region grows until all 2N zeros
    of the cleared polynomial are enclosed.
    """
    search = ZeroSearch(index, state, params, resolution=resolution)
    explicit = rect is not None
    if rect is None:
        rect = default_rect(index, state)
    for attempt in range(max_enlarge + 1):
        try:
            total = search.winding(rect)
        except _OnBoundary:
            x0, x1, y0, y1 = rect
            rect = (x0 - 0.0317, x1 + 0.0291, y0 - 0.0237, y1 + 0.0213)
            continue
        if explicit or total >= 2 * params.N:
            break
        x0, x1, y0, y1 = rect
        rect = (1.5 * x0, 1.5 * x1, y0 - 1.0, y1 + 1.0)
    else:
        raise WindingError(f"winding count failed around {rect}")
    if not explicit and total != 2 * params.N:
        raise WindingError(f"found {total} zeros of P_{index.m}, expected {2 * params.N}")
    found: List[complex] = []
    search.subdivide(rect, total, found)
    found.sort(key=lambda z: (z.imag, z.real))
    logger.info("[Fusion] m=%d k=%d: %d zeros located (%d evaluations)",
                index.m, index.k, len(found), search.evaluations)
    return found


def real_zeros(zeros: Sequence[complex], tol: float = 1e-6) -> List[float]:
    return sorted(z.real for z in zeros if abs(z.imag) < tol)


def classify_zeros(zeros: Sequence[complex], m: int, tol: float = 1e-6) -> dict:
    """Count zeros on the real axis, on the imaginary axis and near each pair of curves."""
    upper, lower = 0.5 * (m + 1), 0.5 * m + 1
    counts = {"real": 0, "imaginary_axis": 0, f"near_im_{upper:g}": 0,
              f"near_im_{lower:g}": 0, "in_strip": 0}
    for z in zeros:
        if abs(z.imag) <= 0.5:
            counts["in_strip"] += 1
        if abs(z.imag) < tol:
            counts["real"] += 1
        elif abs(z.real) < tol:
            counts["imaginary_axis"] += 1
        elif abs(abs(z.imag) - upper) <= abs(abs(z.imag) - lower):
            counts[f"near_im_{upper:g}"] += 1
        else:
            counts[f"near_im_{lower:g}"] += 1
    return counts


def real_axis_zeros(index: FusionIndex, state: BetheState, params: ModelParams,
                    x_max: float = 8.0, samples: int = 801) -> List[float]:
    """Sign changes of T_m on [-x_max, x_max], refined by brentq; T_m is real there."""
    def f(x):
        return float(np.real(dvf_eval(index, x, state, params)))

    grid = np.linspace(-x_max, x_max, samples) + 1.37e-4
    values = np.real(dvf_eval(index, grid, state, params))
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb < 0:
            roots.append(brentq(f, a, b, xtol=1e-14, rtol=1e-13))
    return roots


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def zeros_to_json(index: FusionIndex, params: ModelParams, zeros: Sequence[complex]) -> dict:
    return {"m": index.m, "k": index.k, "N": params.N, "u": params.u,
            "zeros": [[z.real, z.imag] for z in zeros]}


def write_zeros_csv(path, zeros: Sequence[complex]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im"])
        for z in zeros:
            writer.writerow([repr(float(z.real)), repr(float(z.imag))])
    return path


def write_real_axis_csv(path, index: FusionIndex, state: BetheState, params: ModelParams,
                        grid: np.ndarray) -> Path:
    """Samples of |T_m| and Y_m along the real axis."""
    path = Path(path)
    t = dvf_eval(index, grid, state, params)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = y_eval(index, grid, state, params, eps=0.0)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["v", "abs_T", "re_Y", "im_Y"])
        for row in zip(grid, np.abs(t), y.real, y.imag):
            writer.writerow([repr(float(x)) for x in row])
    return path


def save_zeros_json(path, index: FusionIndex, params: ModelParams, zeros: Sequence[complex]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(zeros_to_json(index, params, zeros), indent=2))
    return path
