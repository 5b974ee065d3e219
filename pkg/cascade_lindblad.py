"""
Continuous-time limit of the cascade: a master equation with local
thermal dissipators for every spin plus one-directional nonlocal terms
coupling each spin to the spins that meet the bath after it.

One collision spans physical time tau, so collision boundary m sits at
t = m * tau on the master-equation clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from cascade_collision import CollisionConfig, run_trajectory
from cascade_errors import ConfigValidationError, NumericalToleranceError
from cascade_linalg import MatrixLike, as_matrix, min_eigenvalue
from cascade_model import (
    CoherenceSpec,
    SpinChainSpec,
    excited_population,
    ground_population,
    initial_state,
    ladder,
    system_hamiltonian,
)
from cascade_thermo import (
    ApparentTemperature,
    apparent_temperature,
    global_apparent_temperature,
    global_coherence,
    one_way_coherence,
    populations,
    subsystem_energy,
)

TRACE_DRIFT_TOL = 1e-9
PSD_FLOOR = -1e-8
STEPS_PER_COLLISION = 10
RATIO_FLOOR = 1e-12  # discrepancies below this are roundoff


@dataclass(frozen=True)
class DissipatorRates:
    gamma_plus: float  # excitation, g^2 tau P1_R
    gamma_minus: float  # relaxation, g^2 tau P0_R


def rates(spec: SpinChainSpec, config: CollisionConfig) -> DissipatorRates:
    if config.g < 0 or config.tau <= 0:
        raise ConfigValidationError(f"Rates need g >= 0 and tau > 0, got g={config.g}, tau={config.tau}")
    strength = config.g**2 * config.tau
    return DissipatorRates(
        gamma_plus=strength * excited_population(spec.beta_bath, spec.delta),
        gamma_minus=strength * ground_population(spec.beta_bath, spec.delta),
    )


class CascadeGenerator:
    """Right-hand side of the cascaded master equation with operators precomputed."""

    def __init__(self, spec: SpinChainSpec, config: CollisionConfig):
        config.check_against(spec.n)
        n = spec.n
        self.spec = spec
        self.order = config.order
        self.rates = rates(spec, config)
        self.h = system_hamiltonian(spec).matrix
        self.plus = [ladder("plus", k, n) for k in range(n)]
        self.minus = [ladder("minus", k, n) for k in range(n)]
        # sigma_- sigma_+ projects on |g>, sigma_+ sigma_- on |e>
        self.ground = [self.minus[k] @ self.plus[k] for k in range(n)]
        self.excited = [self.plus[k] @ self.minus[k] for k in range(n)]
        self.pairs = [(self.order[i], self.order[j]) for i in range(n) for j in range(i + 1, n)]

    def local(self, rho: np.ndarray, k: int) -> np.ndarray:
        gp, gm = self.rates.gamma_plus, self.rates.gamma_minus
        sp, sm = self.plus[k], self.minus[k]
        gain = sp @ rho @ sm - 0.5 * (self.ground[k] @ rho + rho @ self.ground[k])
        loss = sm @ rho @ sp - 0.5 * (self.excited[k] @ rho + rho @ self.excited[k])
        return gp * gain + gm * loss

    def nonlocal_(self, rho: np.ndarray, k: int, l: int) -> np.ndarray:
        """Dissipator from spin k onto spin l, where k meets the bath first."""
        gp, gm = self.rates.gamma_plus, self.rates.gamma_minus
        a = self.plus[l] @ rho @ self.minus[k] - self.plus[k] @ self.minus[l] @ rho
        b = self.minus[l] @ rho @ self.plus[k] - self.minus[k] @ self.plus[l] @ rho
        return 0.5 * (gp * (a + a.conj().T) + gm * (b + b.conj().T))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.h @ rho - rho @ self.h)
        for k in range(self.spec.n):
            out = out + self.local(rho, k)
        for k, l in self.pairs:
            out = out + 2.0 * self.nonlocal_(rho, k, l)
        return out


def master_rhs(rho_s: MatrixLike, spec: SpinChainSpec, config: CollisionConfig) -> np.ndarray:
    if config.variant != "cascade":
        raise ConfigValidationError("The cascaded master equation needs the cascade variant")
    return CascadeGenerator(spec, config)(as_matrix(rho_s))


# =========================
# INTEGRATION
# =========================
@dataclass
class LindbladTrajectory:
    times: List[float] = field(default_factory=list)
    states: List[np.ndarray] = field(default_factory=list)


def _rk4_step(rhs: CascadeGenerator, rho: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(rho)
    k2 = rhs(rho + 0.5 * dt * k1)
    k3 = rhs(rho + 0.5 * dt * k2)
    k4 = rhs(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(
    rho0: MatrixLike,
    spec: SpinChainSpec,
    config: CollisionConfig,
    t_end: float,
    dt: Optional[float] = None,
    record_every: int = 1,
) -> LindbladTrajectory:
    """Fixed-step RK4; records every `record_every` steps, always including t = 0."""
    dt = config.tau / STEPS_PER_COLLISION if dt is None else dt
    if not dt > 0 or t_end < 0 or record_every < 1:
        raise ConfigValidationError(f"Need dt > 0, t_end >= 0, record_every >= 1; got {dt}, {t_end}, {record_every}")
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ConfigValidationError(f"t_end={t_end} is not a whole number of steps dt={dt}")

    rhs = CascadeGenerator(spec, config)
    rho = np.array(as_matrix(rho0), dtype=complex)
    traj = LindbladTrajectory(times=[0.0], states=[rho.copy()])

    for step in range(1, n_steps + 1):
        rho = _rk4_step(rhs, rho, dt)
        rho = 0.5 * (rho + rho.conj().T)

        trace = float(np.real(np.trace(rho)))
        if abs(trace - 1.0) > TRACE_DRIFT_TOL:
            raise NumericalToleranceError(f"Trace drifted to {trace:.12f} at t={step * dt:.6g}; reduce dt")
        lowest = min_eigenvalue(rho)
        if lowest < PSD_FLOOR:
            raise NumericalToleranceError(f"State lost positivity (eigenvalue {lowest:.3e}) at t={step * dt:.6g}; reduce dt")
        rho = rho / trace

        if step % record_every == 0:
            traj.times.append(step * dt)
            traj.states.append(rho.copy())
    return traj


# =========================
# HEAT CURRENTS
# =========================
@dataclass(frozen=True)
class HeatCurrent:
    population_form: float
    apparent_form: Optional[float]
    apparent: ApparentTemperature


def _current(p0: float, p1: float, c: float, at: ApparentTemperature, spec: SpinChainSpec, r: DissipatorRates) -> HeatCurrent:
    population_form = spec.delta * (r.gamma_plus * (p0 + c) - r.gamma_minus * (p1 + c))
    apparent_form = None
    if at.defined:
        apparent_form = (
            spec.delta
            * r.gamma_minus
            * (p0 + c)
            * (math.exp(-spec.delta / spec.bath_temperature) - math.exp(-spec.delta / at.value))
        )
    return HeatCurrent(population_form, apparent_form, at)


def heat_current(rho_s: MatrixLike, spec: SpinChainSpec, config: CollisionConfig, k: int) -> HeatCurrent:
    """dE_k/dt of spin k; positive when spin k gains energy."""
    p0, p1 = populations(rho_s, k)
    c = one_way_coherence(rho_s, k, config.order)
    at = apparent_temperature(p0, p1, c, spec.delta)
    return _current(p0, p1, c, at, spec, rates(spec, config))


def global_heat_current(rho_s: MatrixLike, spec: SpinChainSpec, config: CollisionConfig) -> HeatCurrent:
    pops = [populations(rho_s, k) for k in range(spec.n)]
    p0 = sum(p for p, _ in pops)
    p1 = sum(p for _, p in pops)
    at = global_apparent_temperature(rho_s, spec)
    return _current(p0, p1, global_coherence(rho_s), at, spec, rates(spec, config))


# =========================
# ENGINE COMPARISON
# =========================
@dataclass(frozen=True)
class ConvergenceReport:
    coarse: Dict[str, float]
    fine: Dict[str, float]
    max_coarse: float
    max_fine: float
    ratio: Optional[float]


def _boundary_observables(spec: SpinChainSpec, order: Sequence[int], states) -> Dict[str, np.ndarray]:
    values: Dict[str, List[float]] = {}
    for rho in states:
        for k in range(spec.n):
            values.setdefault(f"E_{k + 1}", []).append(subsystem_energy(rho, spec, k))
            values.setdefault(f"Ck_{k + 1}", []).append(one_way_coherence(rho, k, order))
    return {key: np.array(v) for key, v in values.items()}


def engine_discrepancy(
    spec: SpinChainSpec,
    coh: CoherenceSpec,
    config: CollisionConfig,
    steps_per_collision: int = STEPS_PER_COLLISION,
) -> Dict[str, float]:
    """Max |collision - master equation| per observable over collision boundaries."""
    traj = run_trajectory(spec, coh, config)
    flow = integrate(
        initial_state(spec, coh),
        spec,
        config,
        t_end=config.n_collisions * config.tau,
        dt=config.tau / steps_per_collision,
        record_every=steps_per_collision,
    )
    discrete = _boundary_observables(spec, config.order, [s.matrix for s in traj.system_states])
    continuous = _boundary_observables(spec, config.order, flow.states)
    return {key: float(np.max(np.abs(discrete[key] - continuous[key]))) for key in discrete}


def compare_engines(
    spec: SpinChainSpec,
    coh: CoherenceSpec,
    config: CollisionConfig,
    n_collisions: Optional[int] = None,
    steps_per_collision: int = STEPS_PER_COLLISION,
) -> ConvergenceReport:
    """
    Runs both engines at tau and at tau/2 with g scaled by sqrt(2), so the
    rates g^2 tau stay fixed and the window N * tau is shared.
    """
    if config.variant != "cascade":
        raise ConfigValidationError("Engine comparison needs the cascade variant")
    n_collisions = config.n_collisions if n_collisions is None else n_collisions
    coarse_cfg = CollisionConfig(config.g, config.tau, config.order, "cascade", n_collisions, config.generator)
    fine_cfg = CollisionConfig(
        config.g * math.sqrt(2.0), config.tau / 2.0, config.order, "cascade", 2 * n_collisions, config.generator
    )

    coarse = engine_discrepancy(spec, coh, coarse_cfg, steps_per_collision)
    fine = engine_discrepancy(spec, coh, fine_cfg, steps_per_collision)
    max_coarse, max_fine = max(coarse.values()), max(fine.values())
    ratio = max_coarse / max_fine if max_fine > RATIO_FLOOR else None
    return ConvergenceReport(coarse, fine, max_coarse, max_fine, ratio)
