import math

import numpy as np
import pytest

from cascade_collision import CollisionConfig
from cascade_errors import ConfigValidationError
from cascade_lindblad import (
    CascadeGenerator,
    compare_engines,
    engine_discrepancy,
    global_heat_current,
    heat_current,
    integrate,
    master_rhs,
    rates,
)
from cascade_linalg import DensityMatrix
from cascade_model import CoherenceSpec, CoherenceTerm, SpinChainSpec, initial_state, local_hamiltonian, system_hamiltonian
from cascade_thermo import reversal_threshold, subsystem_energy

# =========================
# CONFIG
# =========================
G = 20.0
TAU = 0.01
T_BATH = 0.9
FIG3C = CoherenceSpec(tuple(CoherenceTerm(p, q, 0.5, math.pi) for q in range(3) for p in range(q)))


def chain(temps=(1.0, 1.0, 1.0), bath=T_BATH):
    return SpinChainSpec.from_temperatures(list(temps), bath)


def cfg(n=3, **kw):
    return CollisionConfig(kw.pop("g", G), kw.pop("tau", TAU), tuple(range(n)), **kw)


def random_state(n, rng):
    dim = 2**n
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = a @ a.conj().T
    return DensityMatrix((2,) * n, m / np.trace(m))


def test_rates():
    r = rates(chain(), cfg())
    assert r.gamma_minus == pytest.approx(3.009872, abs=1e-5)
    assert r.gamma_plus == pytest.approx(0.990128, abs=1e-5)
    assert r.gamma_plus / r.gamma_minus == pytest.approx(math.exp(-1 / T_BATH), rel=1e-12)

    frozen = rates(chain(bath=1.0 / 50.0), cfg())
    assert frozen.gamma_plus / frozen.gamma_minus < 1e-20

    with pytest.raises(ConfigValidationError):
        rates(chain(), cfg(tau=0.0))


def test_thermal_state_at_bath_temperature_is_stationary():
    spec = chain((T_BATH,) * 3)
    rho = initial_state(spec, CoherenceSpec())
    assert np.max(np.abs(master_rhs(rho, spec, cfg()))) < 1e-10


def test_generator_is_trace_free_and_hermitian():
    spec = chain()
    generator = CascadeGenerator(spec, cfg())
    rng = np.random.default_rng(4)
    for _ in range(5):
        out = generator(random_state(3, rng).matrix)
        assert abs(np.trace(out)) < 1e-12
        assert np.max(np.abs(out - out.conj().T)) < 1e-12


def test_master_rhs_needs_cascade():
    with pytest.raises(ConfigValidationError):
        master_rhs(np.eye(8) / 8, chain(), cfg(variant="simultaneous"))


def test_heat_current_matches_generator():
    spec = chain()
    config = cfg()
    rho = initial_state(spec, FIG3C)
    drho = master_rhs(rho, spec, config)
    for k in range(3):
        current = heat_current(rho, spec, config, k)
        direct = np.real(np.trace(local_hamiltonian(spec, k, 3).matrix @ drho))
        assert current.population_form == pytest.approx(direct, abs=1e-10)
        if current.apparent.defined:
            assert current.apparent_form == pytest.approx(current.population_form, abs=1e-10)

    total = global_heat_current(rho, spec, config)
    direct = np.real(np.trace(system_hamiltonian(spec).matrix @ drho))
    assert total.population_form == pytest.approx(direct, abs=1e-10)


def test_heat_current_flips_at_the_threshold():
    spec = chain((1.0, 1.0))
    config = cfg(2)
    w = 0.7310585786300049 * 0.2689414213699951
    threshold = reversal_threshold(1.0, 1.0 / T_BATH, 1.0)
    signs = []
    for c in (threshold - 1e-7, threshold + 1e-7):
        term = CoherenceTerm(0, 1, abs(c) / (2 * w), math.pi)
        signs.append(np.sign(heat_current(initial_state(spec, CoherenceSpec((term,))), spec, config, 1).population_form))
    assert signs == [1, -1]


def test_integrate_zero_time_and_relaxation_rate():
    spec = chain((1.0,))
    config = cfg(1)
    rho0 = initial_state(spec, CoherenceSpec())
    assert np.allclose(integrate(rho0, spec, config, 0.0).states[-1], rho0.matrix)

    flow = integrate(rho0, spec, config, 0.5, dt=0.001, record_every=50)
    assert len(flow.times) == 11
    p1_bath = 1.0 / (1.0 + math.exp(1.0 / T_BATH))
    e_inf = p1_bath - 0.5
    e0 = subsystem_energy(flow.states[0], spec, 0)
    e1 = subsystem_energy(flow.states[-1], spec, 0)
    rate = -math.log((e1 - e_inf) / (e0 - e_inf)) / 0.5
    assert rate == pytest.approx(G**2 * TAU, rel=0.01)

    with pytest.raises(ConfigValidationError):
        integrate(rho0, spec, config, 0.0105, dt=0.001)


def test_engines_agree_without_coupling():
    spec = chain()
    report = compare_engines(spec, FIG3C, cfg(g=0.0, n_collisions=5))
    assert report.max_coarse < 1e-12
    assert report.ratio is None


def test_engine_discrepancy_is_small():
    spec = chain()
    errors = engine_discrepancy(spec, FIG3C, cfg(n_collisions=20))
    assert set(errors) == {f"{name}_{k}" for name in ("E", "Ck") for k in (1, 2, 3)}
    assert errors["E_1"] < 0.05


def test_halving_tau_halves_the_discrepancy():
    report = compare_engines(chain(), FIG3C, cfg(n_collisions=100))
    assert report.max_fine < report.max_coarse
    assert report.ratio == pytest.approx(2.0, rel=0.2)
