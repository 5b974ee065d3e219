"""
Thermodynamic observables, apparent temperatures and resource audits.

Conventions: k_B = 1, entropies in nats, populations P0 (ground) and
P1 (excited). Heat Q is the cumulative bath energy change, positive when
energy flows from the system to the bath.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from cascade_collision import CollisionConfig, TrajectoryRecord, run_collision
from cascade_errors import (
    ConfigValidationError,
    InfiniteRelativeEntropyError,
    NumericalToleranceError,
    SubsystemIndexError,
)
from cascade_linalg import (
    DensityMatrix,
    MatrixLike,
    as_matrix,
    partial_trace,
    partial_trace_matrix,
    von_neumann_entropy,
)
from cascade_model import (
    CoherenceSpec,
    CoherenceTerm,
    SpinChainSpec,
    excited_population,
    ground_population,
    initial_state,
    ladder,
    system_hamiltonian,
)

AUDIT_TOL = 1e-9
IMAG_TOL = 1e-10
LOG_ONE_TOL = 1e-14
FINITE_COUPLING_BAND = 1.0  # in units of (g tau)^2 T_R


class ATStatus(str, Enum):
    DEFINED = "defined"
    NON_POSITIVE = "non_positive"  # P0 + C <= 0 or P1 + C <= 0
    INFINITE = "infinite"  # log argument is 1


@dataclass(frozen=True)
class ApparentTemperature:
    status: ATStatus
    value: Optional[float] = None

    @property
    def defined(self) -> bool:
        return self.status is ATStatus.DEFINED


@dataclass(frozen=True)
class ObservableSet:
    energies: Tuple[float, ...]
    bath_heat: float
    free_energy: float
    mutual_information: Optional[float]
    coherence: float
    one_way: Tuple[float, ...]
    apparent: Tuple[ApparentTemperature, ...]
    global_apparent: ApparentTemperature


@dataclass(frozen=True)
class InequalityAudit:
    label: str
    lhs: float
    rhs: float
    slack: float
    satisfied: bool

    @classmethod
    def of(cls, label: str, lhs: float, rhs: float) -> "InequalityAudit":
        slack = float(lhs - rhs)
        return cls(label=label, lhs=float(lhs), rhs=float(rhs), slack=slack, satisfied=slack >= -AUDIT_TOL)


# =========================
# BASIC OBSERVABLES
# =========================
def _n_qubits(rho: MatrixLike) -> int:
    if isinstance(rho, DensityMatrix):
        return rho.n_subsystems
    dim = as_matrix(rho).shape[0]
    n = int(round(math.log2(dim)))
    if 2**n != dim:
        raise ConfigValidationError(f"Expected a qubit register, got dimension {dim}")
    return n


def _expect(rho: MatrixLike, op: np.ndarray) -> complex:
    return complex(np.trace(as_matrix(rho) @ op))


def subsystem_energy(rho_s: MatrixLike, spec: SpinChainSpec, k: int) -> float:
    n = _n_qubits(rho_s)
    if not 0 <= k < n:
        raise SubsystemIndexError(f"Spin index {k} out of range for {n} spins")
    return float(np.real(_expect(rho_s, 0.5 * spec.delta * ladder("z", k, n))))


def populations(rho_s: MatrixLike, k: int) -> Tuple[float, float]:
    """(P0, P1) of spin k: ground and excited populations of its marginal."""
    n = _n_qubits(rho_s)
    if not 0 <= k < n:
        raise SubsystemIndexError(f"Spin index {k} out of range for {n} spins")
    marginal = partial_trace_matrix(as_matrix(rho_s), (2,) * n, [k])
    return float(np.real(marginal[1, 1])), float(np.real(marginal[0, 0]))


def heat_to_bath(traj: TrajectoryRecord) -> np.ndarray:
    return np.array([s.bath_heat for s in traj.snapshots])


def free_energy(rho_s: MatrixLike, h_s: MatrixLike, t_ref: float) -> float:
    if not t_ref > 0:
        raise ConfigValidationError(f"Reference temperature must be > 0, got {t_ref}")
    rho = as_matrix(rho_s)
    energy = float(np.real(np.trace(rho @ as_matrix(h_s))))
    return energy - t_ref * von_neumann_entropy(rho)


def mutual_information(rho_joint: DensityMatrix, cut: Sequence[int]) -> float:
    """I(A:B) with A the subsystems listed in cut and B the rest."""
    a = sorted(set(cut))
    b = [i for i in range(rho_joint.n_subsystems) if i not in a]
    if not a or not b:
        raise SubsystemIndexError(f"Cut {list(cut)} must split the {rho_joint.n_subsystems} subsystems in two")
    rho_a = partial_trace_matrix(rho_joint.matrix, rho_joint.dims, a)
    rho_b = partial_trace_matrix(rho_joint.matrix, rho_joint.dims, b)
    return von_neumann_entropy(rho_a) + von_neumann_entropy(rho_b) - von_neumann_entropy(rho_joint.matrix)


def coherence_measure(rho_s: MatrixLike, h_s: MatrixLike) -> float:
    """Relative entropy of coherence in the eigenbasis of the (diagonal) h_s."""
    h = as_matrix(h_s)
    if np.max(np.abs(h - np.diag(np.diag(h)))) > 1e-12:
        raise ConfigValidationError("coherence_measure needs a Hamiltonian diagonal in the computational basis")
    rho = as_matrix(rho_s)
    return von_neumann_entropy(np.diag(np.diag(rho))) - von_neumann_entropy(rho)


def _pair_coherence(rho: MatrixLike, p: int, k: int, n: int) -> complex:
    return _expect(rho, ladder("minus", p, n) @ ladder("plus", k, n)) + _expect(
        rho, ladder("plus", p, n) @ ladder("minus", k, n)
    )


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > IMAG_TOL:
        raise NumericalToleranceError(f"{what} has imaginary part {value.imag:.3e}, expected a real expectation")
    return float(value.real)


def one_way_coherence(rho_s: MatrixLike, k: int, order: Sequence[int]) -> float:
    """Coherence of spin k with every spin that interacts before it in `order`."""
    order = list(order)
    if k not in order:
        raise SubsystemIndexError(f"Spin {k} is not part of the interaction order {order}")
    n = _n_qubits(rho_s)
    total = sum((_pair_coherence(rho_s, p, k, n) for p in order[: order.index(k)]), 0j)
    return _real(total, f"One-way coherence of spin {k}")


def global_coherence(rho_s: MatrixLike) -> float:
    """Sum of the one-way coherences, i.e. every unordered pair counted once."""
    n = _n_qubits(rho_s)
    total = sum((_pair_coherence(rho_s, p, k, n) for k in range(n) for p in range(k)), 0j)
    return _real(total, "Global coherence")


# =========================
# APPARENT TEMPERATURE
# =========================
def _from_weights(upper: float, lower: float, delta: float) -> ApparentTemperature:
    if upper <= 0 or lower <= 0:
        return ApparentTemperature(ATStatus.NON_POSITIVE)
    log_ratio = math.log(upper / lower)
    if abs(log_ratio) <= LOG_ONE_TOL:
        return ApparentTemperature(ATStatus.INFINITE)
    return ApparentTemperature(ATStatus.DEFINED, delta / log_ratio)


def apparent_temperature(p0: float, p1: float, c_k: float, delta: float) -> ApparentTemperature:
    if p0 + p1 > 1 + 1e-10:
        raise ConfigValidationError(f"Populations P0={p0}, P1={p1} sum above 1")
    return _from_weights(p0 + c_k, p1 + c_k, delta)


def population_temperature(p0: float, p1: float, delta: float) -> ApparentTemperature:
    return apparent_temperature(p0, p1, 0.0, delta)


def spin_apparent_temperature(rho_s: MatrixLike, spec: SpinChainSpec, k: int, order: Sequence[int]) -> ApparentTemperature:
    p0, p1 = populations(rho_s, k)
    return apparent_temperature(p0, p1, one_way_coherence(rho_s, k, order), spec.delta)


def global_apparent_temperature(rho_s: MatrixLike, spec: SpinChainSpec) -> ApparentTemperature:
    n = _n_qubits(rho_s)
    pops = [populations(rho_s, k) for k in range(n)]
    p0 = sum(p for p, _ in pops)
    p1 = sum(p for _, p in pops)
    c = global_coherence(rho_s)
    return _from_weights(p0 + c, p1 + c, spec.delta)


def reversal_threshold(beta_k: float, beta_r: float, delta: float) -> float:
    """
    One-way coherence below which heat flows into a spin hotter than the
    bath (above which, for a colder spin, heat leaves it).
    """
    if not beta_k > 0 or not beta_r > 0:
        raise ConfigValidationError(f"Inverse temperatures must be > 0, got {beta_k}, {beta_r}")
    ek, er = math.exp(beta_k * delta), math.exp(beta_r * delta)
    return (ek - er) / ((ek + 1.0) * (er - 1.0))


def predicted_heat_sign(at: ApparentTemperature, bath_temperature: float, delta: float) -> int:
    """Sign of dE_k: +1 into the spin, -1 out of it."""
    if not at.defined:
        raise ConfigValidationError(f"Heat direction needs a defined apparent temperature, got {at.status.value}")
    return int(np.sign(math.exp(-delta / bath_temperature) - math.exp(-delta / at.value)))


# =========================
# TRAJECTORY OBSERVABLES
# =========================
def observables(
    rho_s: DensityMatrix,
    spec: SpinChainSpec,
    order: Sequence[int],
    bath_heat: float = 0.0,
    joint: Optional[DensityMatrix] = None,
) -> ObservableSet:
    h_s = system_hamiltonian(spec).matrix
    n = spec.n
    return ObservableSet(
        energies=tuple(subsystem_energy(rho_s, spec, k) for k in range(n)),
        bath_heat=float(bath_heat),
        free_energy=free_energy(rho_s, h_s, spec.bath_temperature),
        mutual_information=mutual_information(joint, range(n)) if joint is not None else None,
        coherence=coherence_measure(rho_s, h_s),
        one_way=tuple(one_way_coherence(rho_s, k, order) for k in range(n)),
        apparent=tuple(spin_apparent_temperature(rho_s, spec, k, order) for k in range(n)),
        global_apparent=global_apparent_temperature(rho_s, spec),
    )


def trajectory_observables(traj: TrajectoryRecord) -> List[ObservableSet]:
    order = traj.config.order
    return [
        observables(traj.system_state(s), traj.spec, order, s.bath_heat, s.joint) for s in traj.snapshots
    ]


# =========================
# RESOURCE AUDITS
# =========================
def _collision_joints(traj: TrajectoryRecord, collision: int) -> List[DensityMatrix]:
    snaps = traj.snapshots_of(collision)
    expected = traj.spec.n if traj.config.variant == "cascade" else 1
    if len(snaps) != expected:
        raise ConfigValidationError(
            f"Collision {collision} has {len(snaps)} snapshots, expected {expected}; run the trajectory further"
        )
    return [traj.collision_start(collision)] + [s.joint for s in snaps]


def _bath_energy(joint: DensityMatrix, spec: SpinChainSpec) -> float:
    return float(np.real(_expect(joint, 0.5 * spec.delta * ladder("z", spec.n, spec.n + 1))))


def _effective_beta(marginal: np.ndarray, delta: float) -> float:
    p0, p1 = float(np.real(marginal[1, 1])), float(np.real(marginal[0, 0]))
    if p0 <= 0 or p1 <= 0:
        raise InfiniteRelativeEntropyError(f"Marginal populations ({p0:.3e}, {p1:.3e}) leave the Gibbs family")
    return math.log(p0 / p1) / delta


def _global_audit(start: DensityMatrix, end: DensityMatrix, spec: SpinChainSpec) -> InequalityAudit:
    n = spec.n
    system = list(range(n))
    rho_before = partial_trace_matrix(start.matrix, start.dims, system)
    rho_after = partial_trace_matrix(end.matrix, end.dims, system)
    d_before = np.real(np.diag(rho_before))
    d_after = np.real(np.diag(rho_after))

    support = d_before > 1e-14
    if np.any(np.abs(d_after[~support]) > 1e-14):
        raise InfiniteRelativeEntropyError("Dephased state gained weight outside its initial support")
    dephased_work = float(np.sum((d_after - d_before)[support] * np.log(d_before[support])))

    h_s = system_hamiltonian(spec).matrix
    bath_gain = _bath_energy(end, spec) - _bath_energy(start, spec)
    lhs = spec.beta_bath * bath_gain - dephased_work
    rhs = (mutual_information(end, system) - mutual_information(start, system)) + (
        coherence_measure(rho_after, h_s) - coherence_measure(rho_before, h_s)
    )
    return InequalityAudit.of("global: beta_R dE_R - tr[dD ln D] >= dI(S:R) + dC", lhs, rhs)


def audit_resource_chain(traj: TrajectoryRecord, spec: SpinChainSpec, collision_index: int = 1) -> List[InequalityAudit]:
    """
    Resource inequalities of one collision.

    Cascade collisions report, for every interaction j but the last, the
    free-energy bound -beta_R dF(rho_S) >= I(S_next:R); for every
    interaction j >= 1 the mutual-information consumption
    dI(S_k:R) >= (beta_k - beta_R) dE_R with the Gibbs inverse temperatures
    of the pre-interaction marginals; and finally the global bound.
    Simultaneous collisions report the global bound only.
    """
    joints = _collision_joints(traj, collision_index)
    n = spec.n
    h_s = system_hamiltonian(spec).matrix
    audits: List[InequalityAudit] = []

    if traj.config.variant == "cascade":
        order = traj.config.order
        start_state = partial_trace(joints[0], range(n))
        f_start = free_energy(start_state, h_s, spec.bath_temperature)
        bath = n

        for j, k in enumerate(order):
            before, after = joints[j], joints[j + 1]

            if j >= 1:
                pair = [k, bath]
                mi_before = mutual_information(DensityMatrix((2, 2), partial_trace_matrix(before.matrix, before.dims, pair)), [0])
                mi_after = mutual_information(DensityMatrix((2, 2), partial_trace_matrix(after.matrix, after.dims, pair)), [0])
                beta_k = _effective_beta(partial_trace_matrix(before.matrix, before.dims, [k]), spec.delta)
                beta_r = _effective_beta(partial_trace_matrix(before.matrix, before.dims, [bath]), spec.delta)
                bath_gain = _bath_energy(after, spec) - _bath_energy(before, spec)
                audits.append(
                    InequalityAudit.of(
                        f"mi_consumption[{j + 1}]: -dI(S{k + 1}:R) >= (beta_{k + 1} - beta_R) dE_R",
                        mi_before - mi_after,
                        (beta_k - beta_r) * bath_gain,
                    )
                )

            if j < n - 1:
                nxt = order[j + 1]
                f_after = free_energy(partial_trace(after, range(n)), h_s, spec.bath_temperature)
                pair = [nxt, bath]
                mi_next = mutual_information(DensityMatrix((2, 2), partial_trace_matrix(after.matrix, after.dims, pair)), [0])
                audits.append(
                    InequalityAudit.of(
                        f"free_energy_bound[{j + 1}]: -beta_R dF(S) >= I(S{nxt + 1}:R)",
                        -spec.beta_bath * (f_after - f_start),
                        mi_next,
                    )
                )

    audits.append(_global_audit(joints[0], joints[-1], spec))
    return audits


@dataclass(frozen=True)
class ResourceRow:
    stage: int
    spin: Optional[int]
    bath_gain: float
    mutual_information: float
    spin_bath_information: Tuple[float, ...]
    coherence: float


def resource_trajectory(traj: TrajectoryRecord, collision: int = 1) -> List[ResourceRow]:
    """Stage 0 is the collision start; stage j follows the j-th sub-interaction."""
    joints = _collision_joints(traj, collision)
    spec = traj.spec
    n = spec.n
    h_s = system_hamiltonian(spec).matrix
    spins: List[Optional[int]] = [None] + [s.spin for s in traj.snapshots_of(collision)]
    e0 = _bath_energy(joints[0], spec)

    rows = []
    for stage, (joint, spin) in enumerate(zip(joints, spins)):
        local = tuple(
            mutual_information(DensityMatrix((2, 2), partial_trace_matrix(joint.matrix, joint.dims, [k, n])), [0])
            for k in range(n)
        )
        rows.append(
            ResourceRow(
                stage=stage,
                spin=spin,
                bath_gain=_bath_energy(joint, spec) - e0,
                mutual_information=mutual_information(joint, range(n)),
                spin_bath_information=local,
                coherence=coherence_measure(partial_trace_matrix(joint.matrix, joint.dims, range(n)), h_s),
            )
        )
    return rows


# =========================
# HEAT-DIRECTION LAW
# =========================
@dataclass(frozen=True)
class HeatLawViolation:
    step: int
    collision: int
    spin: Optional[int]
    apparent: float
    energy_change: float
    predicted: int


@dataclass
class HeatLawReport:
    checked: int = 0
    skipped: int = 0
    violations: List[HeatLawViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def heat_law_band(spec: SpinChainSpec, config: CollisionConfig, margin: float = 1e-6) -> float:
    """
    Half-width of the window around T_R where the heat-direction law is not
    checked. The law holds at leading order in g tau; near the crossing the
    (g tau)^2 corrections decide the sign, so the window is the larger of
    margin * delta and FINITE_COUPLING_BAND * (g tau)^2 * T_R.
    """
    return max(margin * spec.delta, FINITE_COUPLING_BAND * (config.g * config.tau) ** 2 * spec.bath_temperature)


def _check(report: HeatLawReport, at: ApparentTemperature, change: float, spec: SpinChainSpec, band: float, where) -> None:
    if not at.defined or abs(at.value - spec.bath_temperature) <= band:
        report.skipped += 1
        return
    report.checked += 1
    predicted = predicted_heat_sign(at, spec.bath_temperature, spec.delta)
    if int(np.sign(change)) != predicted:
        step, collision, spin = where
        report.violations.append(HeatLawViolation(step, collision, spin, at.value, change, predicted))


def heat_direction_violations(traj: TrajectoryRecord, margin: float = 1e-6) -> HeatLawReport:
    """Per cascade sub-interaction: heat enters spin k iff its apparent temperature sits below T_R."""
    if traj.config.variant != "cascade":
        raise ConfigValidationError("The per-spin heat-direction law applies to cascade trajectories")
    spec, order = traj.spec, traj.config.order
    band = heat_law_band(spec, traj.config, margin)
    report = HeatLawReport()
    for m in range(1, traj.n_collisions + 1):
        before = traj.system_states[m - 1]
        for snap in traj.snapshots_of(m):
            after = traj.system_state(snap)
            k = snap.spin
            at = spin_apparent_temperature(before, spec, k, order)
            change = subsystem_energy(after, spec, k) - subsystem_energy(before, spec, k)
            _check(report, at, change, spec, band, (snap.step, m, k))
            before = after
    return report


def global_heat_direction_violations(traj: TrajectoryRecord, margin: float = 1e-6) -> HeatLawReport:
    """Per collision: the whole system gains energy iff its global apparent temperature is below T_R."""
    spec = traj.spec
    band = heat_law_band(spec, traj.config, margin)
    report = HeatLawReport()
    for m in range(1, traj.n_collisions + 1):
        before, after = traj.system_states[m - 1], traj.system_states[m]
        at = global_apparent_temperature(before, spec)
        change = sum(subsystem_energy(after, spec, k) - subsystem_energy(before, spec, k) for k in range(spec.n))
        _check(report, at, change, spec, band, (traj.snapshots_of(m)[-1].step, m, None))
    return report


# =========================
# REVERSAL SCAN
# =========================
@dataclass(frozen=True)
class ReversalScan:
    root: float
    analytic: float
    evaluations: int

    @property
    def error(self) -> float:
        return abs(self.root - self.analytic)


def _second_spin_gain(spec: SpinChainSpec, config: CollisionConfig, c: float) -> float:
    weight = ground_population(spec.betas[1], spec.delta) * excited_population(spec.betas[1], spec.delta)
    lam = abs(c) / (2.0 * weight)
    terms = (CoherenceTerm(0, 1, lam, 0.0 if c >= 0 else math.pi),) if lam > 0 else ()
    rho0 = initial_state(spec, CoherenceSpec(terms))
    rho1, _ = run_collision(rho0, spec, config)
    return subsystem_energy(rho1, spec, 1) - subsystem_energy(rho0, spec, 1)


def locate_reversal(
    beta_k: float,
    beta_r: float,
    delta: float = 1.0,
    g: float = 20.0,
    tau: float = 1e-4,
    tol: float = 1e-9,
) -> ReversalScan:
    """
    Finds, over the one-way coherence of the second spin of a two-spin
    cascade, the point where its energy change over one collision flips sign.
    """
    spec = SpinChainSpec(n=2, delta=delta, betas=(beta_k, beta_k), beta_bath=beta_r)
    config = CollisionConfig(g=g, tau=tau, order=(0, 1))
    reach = 2.0 * ground_population(beta_k, delta) * excited_population(beta_k, delta)

    def gain(c: float) -> float:
        return _second_spin_gain(spec, config, c)

    if np.sign(gain(-reach)) == np.sign(gain(reach)):
        raise NumericalToleranceError(f"No heat-flow reversal inside the coherence range [{-reach:.6f}, {reach:.6f}]")
    root, info = brentq(gain, -reach, reach, xtol=tol, full_output=True)
    return ReversalScan(float(root), reversal_threshold(beta_k, beta_r, delta), info.function_calls)
