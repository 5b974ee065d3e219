"""
Dense complex-matrix kernel for qubit registers up to dimension 64.

Basis convention for every single-qubit factor: index 0 is the excited
state |e> (sigma_z = +1), index 1 is the ground state |g> (sigma_z = -1).
Subsystem 0 is the leftmost (slowest-varying) tensor factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from cascade_errors import (
    ConfigValidationError,
    InfiniteRelativeEntropyError,
    SubsystemIndexError,
)

# =========================
# TOLERANCES
# =========================
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
ENTROPY_CUTOFF = 1e-14
SUPPORT_TOL = 1e-12
MAX_DIM = 64

ComplexMatrix = np.ndarray


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    arr.setflags(write=False)
    return arr


# Single-qubit operators in the (|e>, |g>) order.
IDENTITY = _frozen(np.eye(2))
SIGMA_X = _frozen([[0, 1], [1, 0]])
SIGMA_Y = _frozen([[0, -1j], [1j, 0]])
SIGMA_Z = _frozen([[1, 0], [0, -1]])
SIGMA_PLUS = _frozen([[0, 1], [0, 0]])  # |e><g|
SIGMA_MINUS = _frozen([[0, 0], [1, 0]])  # |g><e|
KET_E = _frozen([1, 0])
KET_G = _frozen([0, 1])


def hermiticity_error(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T)))


def unitarity_error(matrix: np.ndarray) -> float:
    eye = np.eye(matrix.shape[0])
    return float(np.max(np.abs(matrix.conj().T @ matrix - eye)))


def min_eigenvalue(matrix: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(matrix)[0])


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ConfigValidationError(f"Operator must be a non-empty square matrix, got shape {m.shape}")
        err = hermiticity_error(m)
        if err > HERMITIAN_TOL:
            raise ConfigValidationError(
                f"Operator is not Hermitian: max |H - H^dagger| = {err:.3e} exceeds {HERMITIAN_TOL:.0e}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Validated state on a labeled tensor-product space.

    Construction fails loudly (ConfigValidationError) unless the matrix is
    Hermitian within 1e-12, has unit trace within 1e-12 and no eigenvalue
    below -1e-10.
    """

    dims: tuple
    matrix: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        m = np.array(self.matrix, dtype=complex)
        size = int(np.prod(dims)) if dims else 0
        if not dims or any(d < 1 for d in dims):
            raise ConfigValidationError(f"Subsystem dimensions must be positive, got {dims}")
        if m.shape != (size, size):
            raise ConfigValidationError(f"Matrix shape {m.shape} does not match dims {dims} (expected {size}x{size})")
        if size > MAX_DIM:
            raise ConfigValidationError(f"Hilbert space dimension {size} exceeds the supported maximum {MAX_DIM}")

        err = hermiticity_error(m)
        if err > HERMITIAN_TOL:
            raise ConfigValidationError(f"Density matrix is not Hermitian: max deviation {err:.3e}")
        trace = np.trace(m)
        if abs(trace - 1.0) > TRACE_TOL:
            raise ConfigValidationError(f"Density matrix trace is {trace.real:.15f}, expected 1 within {TRACE_TOL:.0e}")
        lowest = min_eigenvalue(m)
        if lowest < -PSD_TOL:
            raise ConfigValidationError(
                f"Density matrix is not positive semidefinite: minimum eigenvalue {lowest:.6e} < {-PSD_TOL:.0e}"
            )

        m.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def expectation(self, operator: np.ndarray) -> complex:
        return complex(np.trace(self.matrix @ operator))


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


MatrixLike = Union[np.ndarray, HermitianOperator, DensityMatrix]


def as_matrix(value: MatrixLike) -> np.ndarray:
    if isinstance(value, (HermitianOperator, DensityMatrix)):
        return value.matrix
    return np.asarray(value, dtype=complex)


# =========================
# TENSOR STRUCTURE
# =========================
def tensor_product(a: MatrixLike, b: MatrixLike) -> np.ndarray:
    """Kronecker product; a's indices vary slowest."""
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(ops: Iterable[MatrixLike]) -> np.ndarray:
    return reduce(np.kron, [as_matrix(op) for op in ops])


def embed(op: MatrixLike, k: int, total: int) -> np.ndarray:
    if not 0 <= k < total:
        raise SubsystemIndexError(f"Qubit index {k} out of range for a {total}-qubit register")
    factors = [IDENTITY] * total
    factors[k] = as_matrix(op)
    return kron_all(factors)


def partial_trace_matrix(matrix: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    dims = tuple(dims)
    n = len(dims)
    kept = sorted(set(keep))
    if not kept:
        raise SubsystemIndexError("partial_trace needs at least one subsystem to keep")
    bad = [k for k in kept if not 0 <= k < n]
    if bad:
        raise SubsystemIndexError(f"Subsystem indices {bad} out of range for {n} subsystems")

    t = np.asarray(matrix).reshape(dims + dims)
    for i in reversed([i for i in range(n) if i not in kept]):
        half = t.ndim // 2
        t = np.trace(t, axis1=i, axis2=i + half)
    d = int(np.prod([dims[k] for k in kept]))
    return t.reshape(d, d)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    kept = sorted(set(keep))
    reduced = partial_trace_matrix(rho.matrix, rho.dims, kept)
    return DensityMatrix(tuple(rho.dims[k] for k in kept), reduced)


# =========================
# SPECTRAL FUNCTIONS
# =========================
def herm_eig(h: MatrixLike) -> Spectrum:
    op = h if isinstance(h, HermitianOperator) else HermitianOperator(as_matrix(h))
    vals, vecs = np.linalg.eigh(op.matrix)
    return Spectrum(eigenvalues=vals[::-1].copy(), eigenvectors=vecs[:, ::-1].copy())


def herm_function(h: MatrixLike, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    spectrum = herm_eig(h)
    v = spectrum.eigenvectors
    return (v * f(spectrum.eigenvalues)) @ v.conj().T


def unitary_exp(h: MatrixLike, theta: float) -> np.ndarray:
    """exp(-i * theta * h) through the eigendecomposition of h."""
    return herm_function(h, lambda vals: np.exp(-1j * theta * vals))


def _clipped_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    vals = np.linalg.eigvalsh(matrix)
    if vals[0] < -PSD_TOL:
        raise ConfigValidationError(f"State has eigenvalue {vals[0]:.6e} below {-PSD_TOL:.0e}")
    return np.where(vals < ENTROPY_CUTOFF, 0.0, vals)


def von_neumann_entropy(rho: MatrixLike) -> float:
    """S = -sum p ln p in nats, with 0 ln 0 = 0."""
    vals = _clipped_eigenvalues(as_matrix(rho))
    vals = vals[vals > 0]
    return float(-np.sum(vals * np.log(vals)))


def relative_entropy(rho: MatrixLike, sigma: MatrixLike) -> float:
    r = as_matrix(rho)
    s = as_matrix(sigma)
    r_vals = _clipped_eigenvalues(r)
    s_vals, s_vecs = np.linalg.eigh(s)
    if s_vals[0] < -PSD_TOL:
        raise ConfigValidationError(f"Reference state has eigenvalue {s_vals[0]:.6e} below {-PSD_TOL:.0e}")

    weights = np.real(np.einsum("ij,ik,kj->j", s_vecs.conj(), r, s_vecs))
    kernel = s_vals <= SUPPORT_TOL
    leak = float(np.sum(weights[kernel]))
    if leak > SUPPORT_TOL:
        raise InfiniteRelativeEntropyError(
            f"Support of rho is not inside the support of sigma (weight {leak:.3e} on its kernel): S(rho||sigma) = +inf"
        )

    pos = r_vals[r_vals > 0]
    neg_entropy = float(np.sum(pos * np.log(pos)))
    cross = float(np.sum(weights[~kernel] * np.log(s_vals[~kernel])))
    return neg_entropy - cross
