"""
ospqtm QTM - brute-force oracle for the quantum transfer matrix.

Builds the 9×9 Ř-matrix of the osp(1|2) chain, contracts R and its
rotated partner into the QTM on the 3^N Trotter space, and provides the
periodic Hamiltonian with an exact free energy for small chains.
"""
from __future__ import annotations

import csv
import functools
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigs

from .spectral import ALPHABET, PARITY, ModelParams, OspQtmError, ParameterError

logger = logging.getLogger(__name__)

DIM = len(ALPHABET)
DENSE_LIMIT = 6
MAX_TROTTER = 10
MAX_CHAIN = 8

#: charge of each basis state 1, 0, 1bar
CHARGE = np.array([1, 0, -1])


class QtmSizeError(OspQtmError):
    """Trotter number or chain length beyond what the oracle builds."""


class EigenSolverError(OspQtmError):
    """The eigensolver failed to deliver the requested eigenvalues."""


class TraceError(OspQtmError):
    """Partition function is not real and positive."""


# ---------------------------------------------------------------------------
# Local operators
# ---------------------------------------------------------------------------

ALPHA = np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]], dtype=float)
ALPHA_INV = np.linalg.inv(ALPHA)


@functools.lru_cache(maxsize=None)
def _local_operators() -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(P, P^g, E) as 9×9 matrices in the basis (a, b) -> 3a + b."""
    p = [PARITY[a] for a in ALPHABET]
    perm = np.zeros((DIM * DIM, DIM * DIM))
    graded = np.zeros_like(perm)
    for a in range(DIM):
        for b in range(DIM):
            perm[DIM * a + b, DIM * b + a] = 1.0
            graded[DIM * a + b, DIM * b + a] = (-1.0) ** (p[a] * p[b])
    e_op = np.outer(ALPHA.reshape(-1), ALPHA_INV.reshape(-1))
    for m in (perm, graded, e_op):
        m.setflags(write=False)
    return perm, graded, e_op


def r_check_eval(w: complex) -> np.ndarray:
    """Ř(w) = I + w P^g - w/(w - 3/2) E."""
    if abs(w - 1.5) < 1e-12:
        raise ParameterError("Ř(w) has a pole at w = 3/2")
    _, graded, e_op = _local_operators()
    return np.eye(DIM * DIM, dtype=complex) + w * graded - (w / (w - 1.5)) * e_op


def r_eval(w: complex) -> np.ndarray:
    """R(w) = P Ř(w) with the plain permutation P."""
    perm, _, _ = _local_operators()
    return perm @ r_check_eval(w)


def r_tensor(w: complex) -> np.ndarray:
    """R(w) as [first_out, second_out, first_in, second_in]."""
    return r_eval(w).reshape(DIM, DIM, DIM, DIM)


def local_hamiltonian() -> np.ndarray:
    """P^g + (2/3) E on one bond."""
    _, graded, e_op = _local_operators()
    return graded + (2.0 / 3.0) * e_op


def braid_residual(w: complex, w2: complex) -> float:
    """‖Ř₂₃(w)Ř₁₂(w+w')Ř₂₃(w') - Ř₁₂(w')Ř₂₃(w+w')Ř₁₂(w)‖ on the 27-dimensional space."""
    eye = np.eye(DIM)

    def r12(x):
        return np.kron(r_check_eval(x), eye)

    def r23(x):
        return np.kron(eye, r_check_eval(x))

    lhs = r23(w) @ r12(w + w2) @ r23(w2)
    rhs = r12(w2) @ r23(w + w2) @ r12(w)
    return float(np.linalg.norm(lhs - rhs))


# ---------------------------------------------------------------------------
# Monodromy contraction
# ---------------------------------------------------------------------------

Factor = Tuple[int, np.ndarray]


def apply_monodromy(factors: Sequence[Factor], n_sites: int, x: np.ndarray) -> np.ndarray:
    """
    Apply Tr_aux(W_1 ... W_n) to the columns of x.

    Each factor is (site, W) with W[aux_out, aux_in, site_out, site_in];
    the rightmost factor acts first.
    """
    dim = DIM ** n_sites
    batch = x.reshape(dim, -1)
    z = np.zeros((DIM, DIM, dim, batch.shape[1]), dtype=complex)
    for c in range(DIM):
        z[c, c] = batch
    for site, w in reversed(factors):
        left, right = DIM ** site, DIM ** (n_sites - site - 1)
        z = z.reshape(DIM, DIM, left, DIM, right, -1)
        z = np.einsum("Jjas,cjxsyb->cJxayb", w, z, optimize=True)
    z = z.reshape(DIM, DIM, dim, -1)
    return np.einsum("ccxb->xb", z)


class QtmOperator:
    """The QTM T(u, v) on N Trotter sites, applied without materializing 9^N tensors."""

    def __init__(self, u: float, v: complex, N: int, dense_limit: int = DENSE_LIMIT):
        if N < 2 or N % 2:
            raise ParameterError(f"Trotter number must be even, got {N}")
        self.u, self.v, self.N = float(u), complex(v), int(N)
        self.dense_limit = dense_limit
        w_r = r_tensor(self.u - 1j * self.v).transpose(1, 3, 0, 2)
        w_rt = r_tensor(self.u + 1j * self.v).transpose(2, 0, 1, 3)
        self.factors: List[Factor] = []
        for pair in range(N // 2):
            self.factors.append((2 * pair + 1, w_r))
            self.factors.append((2 * pair, w_rt))
        self._dense = None

    @property
    def dimension(self) -> int:
        return DIM ** self.N

    @property
    def is_dense(self) -> bool:
        return self.N <= self.dense_limit

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return apply_monodromy(self.factors, self.N, x)

    def dense(self) -> np.ndarray:
        if self.N > self.dense_limit:
            raise QtmSizeError(f"dense QTM limited to N <= {self.dense_limit}")
        if self._dense is None:
            self._dense = self.matvec(np.eye(self.dimension, dtype=complex))
            self._dense.setflags(write=False)
        return self._dense

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.dimension, self.dimension), dtype=complex,
                              matvec=lambda x: self.matvec(x).reshape(-1),
                              matmat=self.matvec)

    def __repr__(self) -> str:
        return f"QtmOperator(u={self.u}, v={self.v}, N={self.N})"


def build_qtm(params: ModelParams, v: complex, dense_limit: int = DENSE_LIMIT,
              max_trotter: int = MAX_TROTTER) -> QtmOperator:
    if params.N > max_trotter:
        raise QtmSizeError(f"N = {params.N} exceeds the QTM limit {max_trotter}")
    return QtmOperator(params.u, v, params.N, dense_limit=dense_limit)


def top_eigenvalues(op: QtmOperator, count: int = 2) -> np.ndarray:
    """Eigenvalues of largest modulus, sorted by decreasing modulus."""
    if not 1 <= count <= op.dimension:
        raise ParameterError(f"count must be in 1..{op.dimension}")
    try:
        if op.is_dense or count >= op.dimension - 2:
            values = np.linalg.eigvals(op.dense())
        else:
            values = eigs(op.as_linear_operator(), k=count + 2, which="LM",
                          return_eigenvectors=False, tol=1e-13, maxiter=20000)
    except (np.linalg.LinAlgError, ArpackError, ArpackNoConvergence) as exc:
        raise EigenSolverError(f"eigensolver failed for {op!r}: {exc}") from exc
    values = np.asarray(values)[np.argsort(-np.abs(values), kind="stable")][:count]
    if count >= 2:
        logger.info("[QTM] N=%d u=%.4g: |λ2/λ1| = %.6g", op.N, op.u, gap_ratio(values))
    return values


def gap_ratio(values: Sequence[complex]) -> float:
    return float(abs(values[1]) / abs(values[0]))


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a @ b - b @ a))


# ---------------------------------------------------------------------------
# Row-to-row transfer matrices
# ---------------------------------------------------------------------------

def row_transfer(v: complex, L: int) -> np.ndarray:
    """T(v) = Tr_a R_{aL}(v) ... R_{a1}(v) on L sites."""
    w = r_tensor(v).transpose(0, 2, 1, 3)
    factors = [(site, w) for site in reversed(range(L))]
    return apply_monodromy(factors, L, np.eye(DIM ** L, dtype=complex))


def row_transfer_tilde(v: complex, L: int) -> np.ndarray:
    """The rotated transfer matrix T̃(v) built from R with the auxiliary space crossed."""
    w = r_tensor(v).transpose(1, 3, 2, 0)
    factors = [(site, w) for site in reversed(range(L))]
    return apply_monodromy(factors, L, np.eye(DIM ** L, dtype=complex))


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------

def _check_chain(L: int) -> None:
    if not 2 <= L <= MAX_CHAIN:
        raise QtmSizeError(f"chain length must be in 2..{MAX_CHAIN}, got {L}")


def site_charges(L: int) -> np.ndarray:
    """Total charge (1 -> +1, 0 -> 0, 1bar -> -1) of every basis state."""
    digits = np.indices((DIM,) * L).reshape(L, -1)
    return CHARGE[digits].sum(axis=0)


def hamiltonian(L: int, J: float) -> sp.csr_matrix:
    """H = J Σ_j (P^g + 2/3 E)_{j,j+1} with periodic boundary, as a sparse matrix."""
    _check_chain(L)
    h = sp.csr_matrix(local_hamiltonian())
    H = sp.csr_matrix((DIM ** L, DIM ** L), dtype=float)
    for j in range(L - 1):
        H = H + sp.kron(sp.kron(sp.identity(DIM ** j), h), sp.identity(DIM ** (L - j - 2)))
    # wrap bond (L-1, 0): move site L-1 to the front
    order = np.moveaxis(np.arange(DIM ** L).reshape((DIM,) * L), L - 1, 0).reshape(-1)
    shift = sp.csr_matrix((np.ones(DIM ** L), (np.arange(DIM ** L), order)))
    first_bond = sp.kron(h, sp.identity(DIM ** (L - 2))) if L > 2 else h
    H = H + shift.T @ first_bond @ shift
    return (J * H).tocsr()


@functools.lru_cache(maxsize=16)
def hamiltonian_spectrum(L: int, J: float) -> np.ndarray:
    """All eigenvalues of H, diagonalized block by block in the conserved charge."""
    H = hamiltonian(L, J)
    charges = site_charges(L)
    values = []
    for q in np.unique(charges):
        idx = np.flatnonzero(charges == q)
        block = H[idx][:, idx].toarray()
        values.append(np.linalg.eigvals(block))
    spectrum = np.concatenate(values)
    spectrum.setflags(write=False)
    logger.debug("[QTM] L=%d spectrum: %d levels, ground %.6g", L, spectrum.size,
                 spectrum.real.min())
    return spectrum


def hamiltonian_free_energy(L: int, beta: float, J: float, rtol: float = 1e-8) -> float:
    """f_L = -(1/(L beta)) ln Tr exp(-beta H)."""
    if beta <= 0:
        raise ParameterError("beta must be positive")
    spectrum = hamiltonian_spectrum(L, float(J))
    shift = spectrum.real.min()
    weights = np.exp(-beta * (spectrum - shift))
    z = weights.sum()
    if abs(z.imag) > rtol * abs(z.real) or z.real <= 0:
        raise TraceError(f"partition function {z} is not real positive (L={L}, beta={beta})")
    return float(-(np.log(z.real) - beta * shift) / (L * beta))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def write_eigenvalues_csv(path, rows: Iterable[Tuple[int, float, complex, int, complex]]) -> Path:
    """Rows (N, u, v, k, λ) written as N,u,v,k,re,im."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "u", "v", "k", "re", "im"])
        for N, u, v, k, lam in rows:
            writer.writerow([N, repr(float(u)), repr(complex(v)), k,
                             repr(float(np.real(lam))), repr(float(np.imag(lam)))])
    return path
