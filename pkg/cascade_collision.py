"""
Collision engine: n spins meet one fresh thermal bath qubit per collision.

Cascade collisions apply one sub-interaction per spin in the configured
order; simultaneous collisions apply a single joint unitary. The bath
qubit is appended as factor n and is discarded (refreshed) after every
collision. Snapshots keep the joint S+R state so correlation measures
can be evaluated without re-running.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cascade_errors import ConfigValidationError, NumericalToleranceError
from cascade_linalg import DensityMatrix, HermitianOperator, partial_trace, partial_trace_matrix, unitary_exp
from cascade_model import (
    CoherenceSpec,
    SpinChainSpec,
    initial_state,
    ladder,
    local_hamiltonian,
    system_hamiltonian,
    thermal_qubit,
)

VARIANTS = ("cascade", "simultaneous")
GENERATORS = ("global", "pair", "interaction")
ENERGY_DRIFT_TOL = 1e-12


@dataclass(frozen=True)
class CollisionConfig:
    g: float
    tau: float
    order: Tuple[int, ...]
    variant: str = "cascade"
    n_collisions: int = 1
    # global: H_S + H_R + H_kR, pair: H_k + H_R + H_kR, interaction: H_kR alone
    generator: str = "global"

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(k) for k in self.order))
        if not (math.isfinite(self.g) and math.isfinite(self.tau) and math.isfinite(self.g * self.tau)):
            raise ConfigValidationError(f"g and tau must be finite, got g={self.g}, tau={self.tau}")
        if self.tau < 0:
            raise ConfigValidationError(f"Interaction time must be >= 0, got {self.tau}")
        if sorted(self.order) != list(range(len(self.order))) or not self.order:
            raise ConfigValidationError(f"Interaction order must be a permutation of 0..n-1, got {self.order}")
        if self.variant not in VARIANTS:
            raise ConfigValidationError(f"Unknown collision variant '{self.variant}', expected one of {VARIANTS}")
        if self.generator not in GENERATORS:
            raise ConfigValidationError(f"Unknown generator '{self.generator}', expected one of {GENERATORS}")
        if self.n_collisions < 1:
            raise ConfigValidationError(f"n_collisions must be >= 1, got {self.n_collisions}")

    def check_against(self, n: int) -> None:
        if len(self.order) != n:
            raise ConfigValidationError(f"Interaction order {self.order} does not cover the {n} spins")

    def position(self, k: int) -> int:
        return self.order.index(k)


@dataclass(frozen=True, eq=False)
class Snapshot:
    step: int
    collision: int
    spin: Optional[int]
    joint: DensityMatrix
    bath_heat: float
    time: float


@dataclass(eq=False)
class TrajectoryRecord:
    spec: SpinChainSpec
    coherence: CoherenceSpec
    config: CollisionConfig
    bath_state: DensityMatrix
    snapshots: List[Snapshot] = field(default_factory=list)
    # post-refresh reduced states, index 0 is the initial state
    system_states: List[DensityMatrix] = field(default_factory=list)

    def system_state(self, snapshot: Snapshot) -> DensityMatrix:
        return partial_trace(snapshot.joint, range(self.spec.n))

    def snapshots_of(self, collision: int) -> List[Snapshot]:
        return [s for s in self.snapshots if s.collision == collision]

    def collision_start(self, collision: int) -> DensityMatrix:
        if not 1 <= collision < len(self.system_states):
            raise ConfigValidationError(f"Collision {collision} is not part of this trajectory")
        before = self.system_states[collision - 1]
        return DensityMatrix(before.dims + (2,), np.kron(before.matrix, self.bath_state.matrix))

    @property
    def n_collisions(self) -> int:
        return len(self.system_states) - 1


# =========================
# OPERATORS
# =========================
def bath_hamiltonian(spec: SpinChainSpec) -> HermitianOperator:
    return HermitianOperator(0.5 * spec.delta * ladder("z", spec.n, spec.n + 1))


def interaction_hamiltonian(k: int, n: int, g: float) -> HermitianOperator:
    """Exchange coupling g(s+^k s-^R + s-^k s+^R); the bath is factor n."""
    total = n + 1
    if not 0 <= k < n:
        raise ConfigValidationError(f"Spin index {k} out of range for {n} spins")
    hop = ladder("plus", k, total) @ ladder("minus", n, total)
    return HermitianOperator(g * (hop + hop.conj().T))


def interaction_unitary(spec: SpinChainSpec, k: int, config: CollisionConfig) -> np.ndarray:
    """exp(-i tau (H_k + H_R + H_kR)) on the n+1 qubit register."""
    total = spec.n + 1
    generator = (
        local_hamiltonian(spec, k, total).matrix
        + bath_hamiltonian(spec).matrix
        + interaction_hamiltonian(k, spec.n, config.g).matrix
    )
    return unitary_exp(generator, config.tau)


def step_unitary(spec: SpinChainSpec, k: int, config: CollisionConfig) -> np.ndarray:
    if config.generator == "pair":
        return interaction_unitary(spec, k, config)
    coupling = interaction_hamiltonian(k, spec.n, config.g).matrix
    if config.generator == "interaction":
        return unitary_exp(coupling, config.tau)
    free = system_hamiltonian(spec, spec.n + 1).matrix + bath_hamiltonian(spec).matrix
    return unitary_exp(free + coupling, config.tau)


def simultaneous_unitary(spec: SpinChainSpec, config: CollisionConfig) -> np.ndarray:
    coupling = sum(interaction_hamiltonian(k, spec.n, config.g).matrix for k in range(spec.n))
    if config.generator == "interaction":
        return unitary_exp(coupling, config.tau)
    free = system_hamiltonian(spec, spec.n + 1).matrix + bath_hamiltonian(spec).matrix
    return unitary_exp(free + coupling, config.tau)


def collision_unitaries(spec: SpinChainSpec, config: CollisionConfig) -> Dict[Optional[int], np.ndarray]:
    if config.variant == "simultaneous":
        return {None: simultaneous_unitary(spec, config)}
    return {k: step_unitary(spec, k, config) for k in config.order}


# =========================
# DYNAMICS
# =========================
def _energy(h: np.ndarray, rho: np.ndarray) -> float:
    return float(np.real(np.trace(h @ rho)))


def _evolved_state(dims: Tuple[int, ...], matrix: np.ndarray, collision: int) -> DensityMatrix:
    # an input that validated and then stopped being a state is a numerical failure
    try:
        return DensityMatrix(dims, matrix)
    except ConfigValidationError as e:
        raise NumericalToleranceError(f"Collision {collision} produced an invalid state: {e}") from e


def run_collision(
    state_s: DensityMatrix,
    spec: SpinChainSpec,
    config: CollisionConfig,
    *,
    collision: int = 1,
    step_offset: int = 0,
    heat_offset: float = 0.0,
    unitaries: Optional[Dict[Optional[int], np.ndarray]] = None,
) -> Tuple[DensityMatrix, List[Snapshot]]:
    n = spec.n
    if state_s.dims != (2,) * n:
        raise ConfigValidationError(f"System state dims {state_s.dims} do not match a {n}-spin chain")
    config.check_against(n)
    unitaries = unitaries if unitaries is not None else collision_unitaries(spec, config)

    bath = thermal_qubit(spec.beta_bath, spec.delta)
    joint = np.kron(state_s.matrix, bath.matrix)
    dims = (2,) * (n + 1)
    h_bath = bath_hamiltonian(spec).matrix
    heat = heat_offset
    snapshots: List[Snapshot] = []

    if config.variant == "cascade":
        steps = [(k, unitaries[k], local_hamiltonian(spec, k, n + 1).matrix + h_bath) for k in config.order]
    else:
        steps = [(None, unitaries[None], system_hamiltonian(spec, n + 1).matrix + h_bath)]

    for j, (k, u, conserved) in enumerate(steps, start=1):
        energy_before = _energy(conserved, joint)
        bath_before = _energy(h_bath, joint)
        joint = u @ joint @ u.conj().T

        drift = abs(_energy(conserved, joint) - energy_before)
        if drift > ENERGY_DRIFT_TOL:
            raise NumericalToleranceError(
                f"Sub-interaction of spin {k} in collision {collision} changed the conserved energy by {drift:.3e}"
            )
        heat += _energy(h_bath, joint) - bath_before

        if config.variant == "cascade":
            step = step_offset + j
            time = step * config.tau / n
        else:
            step = collision
            time = collision * config.tau
        snapshots.append(Snapshot(step, collision, k, _evolved_state(dims, joint, collision), heat, time))

    reduced = _evolved_state((2,) * n, partial_trace_matrix(joint, dims, range(n)), collision)
    return reduced, snapshots


def run_trajectory(
    spec: SpinChainSpec,
    coh: CoherenceSpec,
    config: CollisionConfig,
    initial: Optional[DensityMatrix] = None,
) -> TrajectoryRecord:
    config.check_against(spec.n)
    rho0 = initial if initial is not None else initial_state(spec, coh)
    bath = thermal_qubit(spec.beta_bath, spec.delta)
    unitaries = collision_unitaries(spec, config)

    first = Snapshot(0, 0, None, DensityMatrix(rho0.dims + (2,), np.kron(rho0.matrix, bath.matrix)), 0.0, 0.0)
    record = TrajectoryRecord(spec, coh, config, bath, snapshots=[first], system_states=[rho0])

    step, heat = 0, 0.0
    for m in range(1, config.n_collisions + 1):
        rho, snaps = run_collision(
            record.system_states[-1],
            spec,
            config,
            collision=m,
            step_offset=step,
            heat_offset=heat,
            unitaries=unitaries,
        )
        record.snapshots.extend(snaps)
        record.system_states.append(rho)
        step, heat = snaps[-1].step, snaps[-1].bath_heat
    return record


def with_order(config: CollisionConfig, order: Sequence[int]) -> CollisionConfig:
    return CollisionConfig(config.g, config.tau, tuple(order), config.variant, config.n_collisions, config.generator)
