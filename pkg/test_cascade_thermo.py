import itertools
import math

import numpy as np
import pytest

from cascade_collision import CollisionConfig, run_trajectory
from cascade_errors import ConfigValidationError, SubsystemIndexError
from cascade_linalg import DensityMatrix, relative_entropy
from cascade_model import (
    CoherenceSpec,
    CoherenceTerm,
    SpinChainSpec,
    initial_state,
    system_hamiltonian,
    thermal_product,
)
from cascade_thermo import (
    ATStatus,
    InequalityAudit,
    apparent_temperature,
    audit_resource_chain,
    coherence_measure,
    free_energy,
    global_apparent_temperature,
    global_coherence,
    heat_direction_violations,
    heat_law_band,
    heat_to_bath,
    locate_reversal,
    mutual_information,
    observables,
    one_way_coherence,
    populations,
    predicted_heat_sign,
    resource_trajectory,
    reversal_threshold,
    spin_apparent_temperature,
    subsystem_energy,
)

# =========================
# CONFIG
# =========================
G = 20.0
TAU = 0.01
T_BATH = 0.9
P0 = 0.7310585786300049
P1 = 0.2689414213699951
W = P0 * P1


def chain(temps=(1.0, 1.0), bath=T_BATH):
    return SpinChainSpec.from_temperatures(list(temps), bath)


def pair_state(lam=0.5, alpha=math.pi, temps=(1.0, 1.0)):
    spec = chain(temps)
    return spec, initial_state(spec, CoherenceSpec((CoherenceTerm(0, 1, lam, alpha),)))


def random_state(n, rng):
    dim = 2**n
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = a @ a.conj().T
    return DensityMatrix((2,) * n, m / np.trace(m))


# =========================
# BASIC OBSERVABLES
# =========================
def test_subsystem_energy_and_populations():
    spec, rho = pair_state()
    assert subsystem_energy(rho, spec, 0) == pytest.approx(-0.231059, abs=1e-6)
    assert populations(rho, 1) == pytest.approx((P0, P1), abs=1e-12)
    assert subsystem_energy(np.eye(4) / 4, spec, 1) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(SubsystemIndexError):
        subsystem_energy(rho, spec, 2)


def test_free_energy_of_thermal_state_and_relative_entropy_identity():
    spec = chain((T_BATH, T_BATH))
    h = system_hamiltonian(spec).matrix
    gibbs = thermal_product(spec)
    z = 2.0 * math.cosh(0.5 / T_BATH)
    assert free_energy(gibbs, h, T_BATH) == pytest.approx(-2.0 * T_BATH * math.log(z), abs=1e-12)

    rho = random_state(2, np.random.default_rng(1))
    gap = free_energy(rho, h, T_BATH) - free_energy(gibbs, h, T_BATH)
    assert gap == pytest.approx(T_BATH * relative_entropy(rho, gibbs), abs=1e-10)

    with pytest.raises(ConfigValidationError):
        free_energy(rho, h, 0.0)


def test_mutual_information():
    product = DensityMatrix((2, 2), np.kron(np.diag([0.3, 0.7]), np.diag([0.6, 0.4])))
    assert mutual_information(product, [0]) == pytest.approx(0.0, abs=1e-12)

    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1 / math.sqrt(2)
    assert mutual_information(DensityMatrix((2, 2), np.outer(bell, bell.conj())), [0]) == pytest.approx(
        2 * math.log(2), abs=1e-12
    )

    rng = np.random.default_rng(2)
    for _ in range(5):
        assert mutual_information(random_state(3, rng), [0, 2]) >= -1e-12

    with pytest.raises(SubsystemIndexError):
        mutual_information(product, [0, 1])


def test_coherence_measure():
    h = np.diag([0.5, -0.5])
    assert coherence_measure(np.diag([0.4, 0.6]), h) == pytest.approx(0.0, abs=1e-12)
    plus = np.array([[0.5, 0.5], [0.5, 0.5]])
    assert coherence_measure(plus, h) == pytest.approx(math.log(2), abs=1e-12)
    with pytest.raises(ConfigValidationError):
        coherence_measure(plus, np.array([[0.5, 0.1], [0.1, -0.5]]))


def test_one_way_and_global_coherence():
    spec, rho = pair_state()
    assert one_way_coherence(rho, 0, (0, 1)) == pytest.approx(0.0, abs=1e-15)
    assert one_way_coherence(rho, 1, (0, 1)) == pytest.approx(-W, abs=1e-9)
    assert one_way_coherence(rho, 0, (1, 0)) == pytest.approx(-W, abs=1e-9)
    assert global_coherence(rho) == pytest.approx(-W, abs=1e-9)
    with pytest.raises(SubsystemIndexError):
        one_way_coherence(rho, 1, (0,))

    spec3 = chain((1.0, 1.0, 1.0))
    coh = CoherenceSpec(tuple(CoherenceTerm(p, q, 0.5, 0.0) for q in range(3) for p in range(q)))
    rho3 = initial_state(spec3, coh)
    assert [one_way_coherence(rho3, k, (0, 1, 2)) for k in range(3)] == pytest.approx([0.0, W, 2 * W], abs=1e-9)
    assert global_coherence(rho3) == pytest.approx(3 * W, abs=1e-9)


def test_global_coherence_counts_each_pair_once():
    spec = chain((1.0, 0.8, 1.2))
    coh = CoherenceSpec(
        (CoherenceTerm(0, 1, 0.3, 0.0), CoherenceTerm(0, 2, 0.2, math.pi), CoherenceTerm(1, 2, 0.25, math.pi / 3))
    )
    rho = initial_state(spec, coh)
    for order in itertools.permutations(range(3)):
        total = sum(one_way_coherence(rho, k, order) for k in range(3))
        assert total == pytest.approx(global_coherence(rho), abs=1e-12)


# =========================
# APPARENT TEMPERATURE
# =========================
def test_apparent_temperature_cases():
    at = apparent_temperature(P0, P1, 0.0, 1.0)
    assert at.status is ATStatus.DEFINED
    assert at.value == pytest.approx(1.0, abs=1e-12)

    spec, rho = pair_state()
    coherent = spin_apparent_temperature(rho, spec, 1, (0, 1))
    assert coherent.value == pytest.approx(0.5, abs=1e-9)

    assert apparent_temperature(0.5, 0.5, 0.0, 1.0).status is ATStatus.INFINITE
    assert apparent_temperature(0.8, 0.2, -0.3, 1.0).status is ATStatus.NON_POSITIVE
    with pytest.raises(ConfigValidationError):
        apparent_temperature(0.8, 0.4, 0.0, 1.0)


def test_global_apparent_temperature_of_uniform_thermal_chain():
    spec = chain((1.3, 1.3, 1.3))
    rho = initial_state(spec, CoherenceSpec())
    at = global_apparent_temperature(rho, spec)
    assert at.value == pytest.approx(1.3, abs=1e-12)


def test_reversal_threshold():
    assert reversal_threshold(1.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    hot = reversal_threshold(1.0, 1.0 / T_BATH, 1.0)
    assert hot == pytest.approx(-0.042161, abs=1e-5)
    assert reversal_threshold(1.0 / T_BATH, 1.0, 1.0) > 0
    with pytest.raises(ConfigValidationError):
        reversal_threshold(0.0, 1.0, 1.0)


def test_predicted_heat_sign():
    cold = apparent_temperature(P0, P1, -W, 1.0)  # AT = 0.5
    assert predicted_heat_sign(cold, T_BATH, 1.0) == 1
    hot = apparent_temperature(P0, P1, 0.0, 1.0)
    assert predicted_heat_sign(hot, T_BATH, 1.0) == -1
    with pytest.raises(ConfigValidationError):
        predicted_heat_sign(apparent_temperature(0.5, 0.5, 0.0, 1.0), T_BATH, 1.0)


def test_observables_bundle():
    spec, rho = pair_state()
    obs = observables(rho, spec, (0, 1))
    assert obs.mutual_information is None
    assert obs.one_way[1] == pytest.approx(-W, abs=1e-9)
    assert obs.apparent[1].value == pytest.approx(0.5, abs=1e-9)
    assert obs.coherence > 0


# =========================
# TRAJECTORY AUDITS
# =========================
def test_first_law_of_bath_heat():
    spec = chain((1.0, 1.0, 1.0))
    coh = CoherenceSpec((CoherenceTerm(0, 1, 0.5, math.pi), CoherenceTerm(1, 2, 0.3, 0.0)))
    traj = run_trajectory(spec, coh, CollisionConfig(G, TAU, (2, 0, 1), n_collisions=5))
    heat = heat_to_bath(traj)
    assert heat[0] == 0.0
    gain = sum(
        subsystem_energy(traj.system_states[-1], spec, k) - subsystem_energy(traj.system_states[0], spec, k)
        for k in range(3)
    )
    assert heat[-1] == pytest.approx(-gain, abs=1e-10)


def test_inequality_audit_of():
    ok = InequalityAudit.of("x", 1.0, 1.0 + 5e-10)
    assert ok.satisfied
    assert not InequalityAudit.of("x", 1.0, 1.1).satisfied


@pytest.mark.parametrize("alpha", [0.0, math.pi])
def test_cascade_audits_hold(alpha):
    spec = chain((1.0, 1.0, 1.0))
    coh = CoherenceSpec(tuple(CoherenceTerm(p, q, 0.5, alpha) for q in range(3) for p in range(q)))
    traj = run_trajectory(spec, coh, CollisionConfig(G, TAU, (0, 1, 2), n_collisions=3))
    for m in (1, 2, 3):
        audits = audit_resource_chain(traj, spec, m)
        labels = [a.label.split("[")[0].split(":")[0] for a in audits]
        assert labels.count("mi_consumption") == 2
        assert labels.count("free_energy_bound") == 2
        assert labels[-1] == "global"
        assert all(a.satisfied for a in audits), [a for a in audits if not a.satisfied]


def test_simultaneous_reports_only_the_global_audit():
    spec, _ = pair_state()
    coh = CoherenceSpec((CoherenceTerm(0, 1, 1.0, math.pi),))
    traj = run_trajectory(spec, coh, CollisionConfig(G, 0.03, (0, 1), "simultaneous"))
    audits = audit_resource_chain(traj, spec)
    assert len(audits) == 1
    assert audits[0].satisfied


def test_resource_trajectory_of_cascade_and_simultaneous():
    spec, _ = pair_state()
    coh = CoherenceSpec((CoherenceTerm(0, 1, 1.0, math.pi),))

    cascade = resource_trajectory(run_trajectory(spec, coh, CollisionConfig(G, 0.03, (0, 1))))
    assert [r.spin for r in cascade] == [None, 0, 1]
    assert cascade[0].mutual_information == pytest.approx(0.0, abs=1e-12)
    assert cascade[1].mutual_information > 0
    assert cascade[2].coherence < cascade[0].coherence

    joint = resource_trajectory(run_trajectory(spec, coh, CollisionConfig(G, 0.03, (0, 1), "simultaneous")))
    assert len(joint) == 2
    assert joint[1].bath_gain < 0
    assert joint[1].mutual_information > 0
    assert joint[1].coherence < joint[0].coherence


def test_heat_law_needs_cascade():
    spec, _ = pair_state()
    traj = run_trajectory(spec, CoherenceSpec(), CollisionConfig(G, TAU, (0, 1), "simultaneous"))
    with pytest.raises(ConfigValidationError):
        heat_direction_violations(traj)


def test_heat_law_band_scales_with_coupling():
    spec = chain()
    assert heat_law_band(spec, CollisionConfig(0.0, TAU, (0, 1))) == pytest.approx(1e-6)
    assert heat_law_band(spec, CollisionConfig(G, TAU, (0, 1))) == pytest.approx(0.04 * T_BATH)
    assert heat_law_band(spec, CollisionConfig(G, 0.002, (0, 1))) == pytest.approx(0.0016 * T_BATH)


def test_heat_law_in_weak_coupling():
    spec, _ = pair_state()
    coh = CoherenceSpec((CoherenceTerm(0, 1, 0.5, math.pi),))
    traj = run_trajectory(spec, coh, CollisionConfig(G, 0.002, (0, 1), n_collisions=5))
    report = heat_direction_violations(traj)
    assert report.checked == 10
    assert report.ok, report.violations


@pytest.mark.parametrize("beta_k, beta_r", [(1.0, 1.0 / T_BATH), (1.0 / T_BATH, 1.0)])
def test_locate_reversal_matches_threshold(beta_k, beta_r):
    scan = locate_reversal(beta_k, beta_r)
    assert scan.evaluations > 2
    assert scan.error < 1e-4
