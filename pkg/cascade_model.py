"""
Physical objects of the spin chain: local Hamiltonians, thermal qubits,
the coherence-injected initial state, dephasing and Bohr-mode buckets.

Level labels: index 0 is the excited state |e>, index 1 the ground state
|g>, so sigma_z |e> = |e>. The injected dyad is |g_p e_q><e_p g_q|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np
from scipy.special import expit

from cascade_errors import ConfigValidationError, SubsystemIndexError
from cascade_linalg import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_Z,
    DensityMatrix,
    HermitianOperator,
    as_matrix,
    embed,
    kron_all,
    min_eigenvalue,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SpinChainSpec:
    n: int
    delta: float
    betas: Tuple[float, ...]
    beta_bath: float

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.n < 1:
            raise ConfigValidationError(f"Spin chain needs n >= 1, got {self.n}")
        if not self.delta > 0:
            raise ConfigValidationError(f"Energy gap delta must be > 0, got {self.delta}")
        if len(self.betas) != self.n:
            raise ConfigValidationError(f"Expected {self.n} inverse temperatures, got {len(self.betas)}")
        if any(not b > 0 for b in self.betas) or not self.beta_bath > 0:
            raise ConfigValidationError(f"All inverse temperatures must be > 0, got {self.betas} and bath {self.beta_bath}")

    @property
    def bath_temperature(self) -> float:
        return 1.0 / self.beta_bath

    @property
    def temperatures(self) -> Tuple[float, ...]:
        return tuple(1.0 / b for b in self.betas)

    @classmethod
    def from_temperatures(cls, temperatures, bath_temperature: float, delta: float = 1.0) -> "SpinChainSpec":
        temps = tuple(float(t) for t in temperatures)
        if any(not t > 0 for t in temps) or not bath_temperature > 0:
            raise ConfigValidationError(f"Temperatures must be > 0, got {temps} and bath {bath_temperature}")
        return cls(n=len(temps), delta=delta, betas=tuple(1.0 / t for t in temps), beta_bath=1.0 / bath_temperature)


@dataclass(frozen=True)
class CoherenceTerm:
    p: int
    q: int
    lam: float
    alpha: float

    def __post_init__(self):
        if not 0 <= self.p < self.q:
            raise ConfigValidationError(f"Coherence term needs 0 <= p < q, got p={self.p}, q={self.q}")
        if self.lam < 0:
            raise ConfigValidationError(f"Coherence strength must be >= 0, got {self.lam}")
        if not 0 <= self.alpha < TWO_PI:
            raise ConfigValidationError(f"Coherence phase must lie in [0, 2pi), got {self.alpha}")

    @property
    def amplitude(self) -> complex:
        return self.lam * complex(math.cos(self.alpha), math.sin(self.alpha))


@dataclass(frozen=True)
class CoherenceSpec:
    terms: Tuple[CoherenceTerm, ...] = ()

    def check_against(self, n: int) -> None:
        for term in self.terms:
            if term.q >= n:
                raise SubsystemIndexError(f"Coherence term ({term.p}, {term.q}) references a spin beyond n={n}")


@dataclass(frozen=True, eq=False)
class ModeDecomposition:
    modes: Dict[float, np.ndarray] = field(default_factory=dict)

    def reconstruct(self) -> np.ndarray:
        return sum(self.modes.values())


# =========================
# HAMILTONIANS AND STATES
# =========================
@lru_cache(maxsize=256)
def _ladder_cached(kind: str, k: int, total: int) -> np.ndarray:
    single = {"plus": SIGMA_PLUS, "minus": SIGMA_MINUS, "z": SIGMA_Z}[kind]
    op = embed(single, k, total)
    op.setflags(write=False)
    return op


def ladder(kind: str, k: int, total: int) -> np.ndarray:
    """Embedded sigma_+ ("plus"), sigma_- ("minus") or sigma_z ("z") on qubit k."""
    if kind not in ("plus", "minus", "z"):
        raise ValueError(f"Unknown single-qubit operator kind: {kind}")
    return _ladder_cached(kind, k, total)


def local_hamiltonian(spec: SpinChainSpec, k: int, total: int) -> HermitianOperator:
    if not 0 <= k < total:
        raise SubsystemIndexError(f"Spin index {k} out of range for {total} factors")
    return HermitianOperator(0.5 * spec.delta * ladder("z", k, total))


def system_hamiltonian(spec: SpinChainSpec, total: int | None = None) -> HermitianOperator:
    total = spec.n if total is None else total
    return HermitianOperator(sum(0.5 * spec.delta * ladder("z", k, total) for k in range(spec.n)))


def ground_population(beta: float, delta: float) -> float:
    return float(expit(beta * delta))


def excited_population(beta: float, delta: float) -> float:
    return float(expit(-beta * delta))


def thermal_qubit(beta: float, delta: float) -> DensityMatrix:
    if not beta > 0 or not delta > 0:
        raise ConfigValidationError(f"thermal_qubit needs beta > 0 and delta > 0, got {beta}, {delta}")
    return DensityMatrix((2,), np.diag([excited_population(beta, delta), ground_population(beta, delta)]))


def thermal_product(spec: SpinChainSpec) -> np.ndarray:
    return kron_all(thermal_qubit(b, spec.delta) for b in spec.betas)


def chi_pq(spec: SpinChainSpec, p: int, q: int) -> np.ndarray:
    if not 0 <= p < q < spec.n:
        raise SubsystemIndexError(f"chi_pq needs 0 <= p < q < {spec.n}, got p={p}, q={q}")
    factors = []
    for k, beta in enumerate(spec.betas):
        if k == p:
            factors.append(SIGMA_MINUS)  # |g><e| on p
        elif k == q:
            factors.append(SIGMA_PLUS)  # |e><g| on q
        else:
            factors.append(thermal_qubit(beta, spec.delta))
    weight = math.sqrt(
        ground_population(spec.betas[p], spec.delta)
        * excited_population(spec.betas[p], spec.delta)
        * ground_population(spec.betas[q], spec.delta)
        * excited_population(spec.betas[q], spec.delta)
    )
    return weight * kron_all(factors)


def initial_state(spec: SpinChainSpec, coh: CoherenceSpec) -> DensityMatrix:
    coh.check_against(spec.n)
    rho = thermal_product(spec).astype(complex)
    for term in coh.terms:
        chi = term.amplitude * chi_pq(spec, term.p, term.q)
        rho = rho + chi + chi.conj().T

    lowest = min_eigenvalue(rho)
    if lowest < -1e-10:
        raise ConfigValidationError(
            f"Injected coherence makes the state non-positive: minimum eigenvalue {lowest:.6e}; "
            f"lambda is too large for temperatures {spec.temperatures}"
        )
    return DensityMatrix((2,) * spec.n, rho)


# =========================
# DEPHASING AND MODES
# =========================
def _energy_diagonal(h) -> np.ndarray:
    m = as_matrix(h)
    off = m - np.diag(np.diag(m))
    if np.max(np.abs(off)) > 1e-12:
        raise ConfigValidationError("Hamiltonian must be diagonal in the computational basis")
    return np.real(np.diag(m))


def dephase(rho: DensityMatrix, h) -> DensityMatrix:
    """Removes every off-diagonal element in the computational (energy) basis."""
    _energy_diagonal(h)
    return DensityMatrix(rho.dims, np.diag(np.diag(rho.matrix)))


def mode_decompose(rho: DensityMatrix, h, delta: float = 1.0) -> ModeDecomposition:
    energies = _energy_diagonal(h)
    omegas = energies[:, None] - energies[None, :]
    keys = np.round(omegas / delta, 9) + 0.0

    modes: Dict[float, np.ndarray] = {}
    for key in np.unique(keys):
        mask = keys == key
        modes[float(key) * delta] = np.where(mask, rho.matrix, 0.0)
    return ModeDecomposition(modes)
