"""
Closed-form toy models of coherence-driven energy exchange, each checked
against a direct density-matrix simulation on an explicitly built block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np
from scipy.optimize import brentq

from cascade_errors import ConfigValidationError, NumericalToleranceError
from cascade_linalg import SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z, embed, kron_all, unitary_exp
from cascade_model import excited_population, ground_population, thermal_qubit
from cascade_thermo import reversal_threshold


@dataclass(frozen=True)
class ToyResult:
    label: str
    analytic: float
    simulated: float
    abs_error: float
    extras: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def of(cls, label: str, analytic: float, simulated: float, **extras: float) -> "ToyResult":
        return cls(label, float(analytic), float(simulated), abs(float(analytic) - float(simulated)), dict(extras))


def _evolve(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


def _check_unit(name: str, value: float, low: float, high: float) -> None:
    if not low <= value <= high:
        raise ConfigValidationError(f"{name} must lie in [{low}, {high}], got {value}")


# =========================
# ENERGY FROM COHERENCE
# =========================
def single_spin_rotation(c: float, delta: float = 1.0) -> ToyResult:
    """
    A qubit with populations 1/2 and coherence C, in the (|g>, |e>) order,
    rotated by pi/2 about y. All of C ends up as excited population, so the
    energy gain (the work of the rotation) is C * delta.
    """
    _check_unit("C", c, 0.0, 0.5)
    rho = np.array([[0.5, c], [c, 0.5]], dtype=complex)
    h = np.diag([-0.5 * delta, 0.5 * delta])
    u = unitary_exp(SIGMA_Y, math.pi / 4)
    gain = float(np.real(np.trace(h @ _evolve(rho, u)) - np.trace(h @ rho)))
    return ToyResult.of("single_spin_rotation", c * delta, gain, work=gain)


def two_spin_swap(c: float, delta: float = 1.0) -> ToyResult:
    """Degenerate block (|e1 g2>, |g1 e2>) = [[1/2, C], [C, 1/2]]; spin 1 hands C * delta to spin 2 for free."""
    _check_unit("C", c, 0.0, 0.5)
    # register order |ee>, |eg>, |ge>, |gg>
    rho = np.zeros((4, 4), dtype=complex)
    rho[1, 1] = rho[2, 2] = 0.5
    rho[1, 2] = rho[2, 1] = c
    generator = np.zeros((4, 4), dtype=complex)
    generator[1:3, 1:3] = SIGMA_Y
    after = _evolve(rho, unitary_exp(generator, math.pi / 4))

    h1 = 0.5 * delta * embed(SIGMA_Z, 0, 2)
    h2 = 0.5 * delta * embed(SIGMA_Z, 1, 2)
    d1 = float(np.real(np.trace(h1 @ after) - np.trace(h1 @ rho)))
    d2 = float(np.real(np.trace(h2 @ after) - np.trace(h2 @ rho)))
    return ToyResult.of("two_spin_swap", c * delta, -d1, received=d2, work=d1 + d2)


# =========================
# PHASE OF COHERENCE
# =========================
def phase_efficiency(lam: float, alpha: float, theta: float, p: float = 1.0 / 3.0) -> ToyResult:
    """
    Mediated cascade on the single-excitation block (|g g e_m>, |g e_2 g>,
    |e_1 g g>): the mediator exchanges with spin 1, then with spin 2. The
    mediator's excited population shifts by lam cos(alpha) sin(theta) sin(2 theta).
    """
    if not 0 <= lam <= p or not p > 0 or 3 * p > 1 + 1e-12:
        raise ConfigValidationError(f"Need 0 <= lam <= p and 0 < p <= 1/3, got lam={lam}, p={p}")
    rho = np.diag([p, p, p]).astype(complex)
    rho[1, 2] = lam * np.exp(1j * alpha)
    rho[2, 1] = np.conj(rho[1, 2])

    g1 = np.zeros((3, 3), dtype=complex)
    g1[0, 2] = g1[2, 0] = 1.0
    g2 = np.zeros((3, 3), dtype=complex)
    g2[0, 1] = g2[1, 0] = 1.0
    after = _evolve(_evolve(rho, unitary_exp(g1, theta)), unitary_exp(g2, theta))

    shift = float(np.real(after[0, 0] - rho[0, 0]))
    analytic = lam * math.cos(alpha) * math.sin(theta) * math.sin(2 * theta)
    return ToyResult.of("phase_efficiency", analytic, shift, efficiency=math.cos(alpha))


def coherence_efficiency(alpha: float) -> float:
    return math.cos(alpha + math.pi / 2)


def exchange_efficiency(lam: float, alpha: float, theta: float) -> ToyResult:
    """Direct exchange exp(-i theta X) on the degenerate two-spin block; |e1 g2> shifts by lam sin(2 theta) cos(alpha + pi/2)."""
    _check_unit("lam", lam, 0.0, 0.5)
    rho = np.diag([0.5, 0.5]).astype(complex)
    rho[0, 1] = lam * np.exp(1j * alpha)
    rho[1, 0] = np.conj(rho[0, 1])
    after = _evolve(rho, unitary_exp(SIGMA_X, theta))
    shift = float(np.real(after[0, 0] - rho[0, 0]))
    analytic = lam * math.sin(2 * theta) * coherence_efficiency(alpha)
    return ToyResult.of("exchange_efficiency", analytic, shift, efficiency=coherence_efficiency(alpha))


# =========================
# CONTACT AT DIFFERENT TEMPERATURES
# =========================
def temperature_gradient_threshold(beta_s: float, beta_m: float, delta: float = 1.0) -> float:
    """Critical value of 2 lam cos(alpha) for two spins at beta_s and a mediator at beta_m."""
    return reversal_threshold(beta_s, beta_m, delta)


def _second_spin_gain(beta_s: float, beta_m: float, delta: float, theta: float, x: float) -> float:
    # qubits: spin 1, spin 2, mediator
    mediator = thermal_qubit(beta_m, delta)
    rho = kron_all([thermal_qubit(beta_s, delta), thermal_qubit(beta_s, delta), mediator])
    dyad = kron_all([SIGMA_MINUS, SIGMA_PLUS, mediator])  # |g1 e2><e1 g2| (x) rho_m
    rho = rho + 0.5 * x * (dyad + dyad.conj().T)

    def exchange(a: int) -> np.ndarray:
        hop = embed(SIGMA_PLUS, a, 3) @ embed(SIGMA_MINUS, 2, 3)
        return unitary_exp(hop + hop.conj().T, theta)

    after = _evolve(_evolve(rho, exchange(0)), exchange(1))
    h2 = 0.5 * delta * embed(SIGMA_Z, 1, 3)
    return float(np.real(np.trace(h2 @ after) - np.trace(h2 @ rho)))


def scan_temperature_gradient(
    beta_s: float,
    beta_m: float,
    delta: float = 1.0,
    theta: float = 1e-3,
    tol: float = 1e-9,
) -> ToyResult:
    """
    Root-finds the one-way coherence of spin 2, x = 2 lam cos(alpha) P0 P1
    (P0 P1 the pair weight at beta_s), at which spin 2 stops gaining energy
    from the mediator, and compares it with the threshold.
    """
    reach = 2.0 * ground_population(beta_s, delta) * excited_population(beta_s, delta)

    def gain(x: float) -> float:
        return _second_spin_gain(beta_s, beta_m, delta, theta, x)

    if np.sign(gain(-reach)) == np.sign(gain(reach)):
        raise NumericalToleranceError(f"No sign change of the heat flow inside [{-reach:.6f}, {reach:.6f}]")
    root, info = brentq(gain, -reach, reach, xtol=tol, full_output=True)
    analytic = temperature_gradient_threshold(beta_s, beta_m, delta)
    return ToyResult.of("temperature_gradient", analytic, float(root), evaluations=info.function_calls)


TOYS: Dict[str, Callable[..., ToyResult]] = {
    "single_spin": single_spin_rotation,
    "two_spin_swap": two_spin_swap,
    "phase": phase_efficiency,
    "exchange": exchange_efficiency,
    "gradient": scan_temperature_gradient,
}


def run_toy(name: str, params: Dict[str, float]) -> ToyResult:
    if name not in TOYS:
        raise ConfigValidationError(f"Unknown toy '{name}', expected one of {sorted(TOYS)}")
    try:
        return TOYS[name](**params)
    except TypeError as e:
        raise ConfigValidationError(f"Bad parameters for toy '{name}': {e}") from e
