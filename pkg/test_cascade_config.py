import json
import math
from pathlib import Path

import pytest

from cascade_config import OUTPUT_GROUPS, load_scenario, load_settings, parse_scenario
from cascade_errors import ConfigParseError, ConfigValidationError

# =========================
# CONFIG
# =========================
SCENARIOS = Path(__file__).parent / "scenarios"


def minimal(**overrides):
    data = {
        "name": "pair",
        "spin_chain": {"n": 2, "temperatures": [1.0, 1.0], "bath_temperature": 0.9},
        "coherence": [{"p": 0, "q": 1, "lam": 0.5, "alpha": math.pi}],
        "collision": {"g": 20.0, "tau": 0.01, "n_collisions": 3},
    }
    data.update(overrides)
    return data


def test_bundled_anti_phase_loads():
    cfg = load_scenario(SCENARIOS / "fig3c.cfg")
    spec, coh, collision = cfg.to_spec(), cfg.to_coherence(), cfg.to_collision()
    assert spec.n == 3
    assert spec.bath_temperature == pytest.approx(0.9)
    assert len(coh.terms) == 3
    assert collision.order == (0, 1, 2)
    assert collision.n_collisions == 100
    assert cfg.engine == "both"


def test_defaults_are_filled():
    cfg = parse_scenario(minimal())
    assert cfg.collision.order == [0, 1]
    assert cfg.collision.variant == "cascade"
    assert cfg.collision.generator == "global"
    assert cfg.outputs == list(OUTPUT_GROUPS)
    assert cfg.lindblad.steps_per_collision == 10
    assert cfg.spin_chain.delta == 1.0


@pytest.mark.parametrize(
    "overrides",
    [
        {"colour": "blue"},  # unknown top-level key
        {"collision": {"g": 20.0, "tau": 0.01, "extra": 1}},  # unknown nested key
        {"collision": {"g": 20.0, "tau": 0.01, "order": [0, 0]}},
        {"coherence": [{"p": 0, "q": 2, "lam": 0.1}]},
        {"coherence": [{"p": 1, "q": 1, "lam": 0.1}]},
        {"coherence": [{"p": 0, "q": 1, "lam": 0.1, "alpha": 7.0}]},
        {"spin_chain": {"n": 2, "temperatures": [1.0], "bath_temperature": 0.9}},
        {"spin_chain": {"n": 6, "temperatures": [1.0] * 6, "bath_temperature": 0.9}},
        {"outputs": ["energies", "entropy"]},
        {"engine": "lindblad", "collision": {"g": 20.0, "tau": 0.01, "variant": "simultaneous"}},
        {"name": "bad name/with slash"},
    ],
)
def test_invalid_scenarios_are_rejected(overrides):
    with pytest.raises(ConfigValidationError):
        parse_scenario(minimal(**overrides))


def test_parse_errors(tmp_path):
    broken = tmp_path / "broken.cfg"
    broken.write_text("{ not json", encoding="utf-8")
    with pytest.raises(ConfigParseError):
        load_scenario(broken)
    with pytest.raises(ConfigParseError):
        load_scenario(tmp_path / "missing.cfg")


def test_roundtrip_through_a_file(tmp_path):
    path = tmp_path / "pair.cfg"
    path.write_text(json.dumps(minimal()), encoding="utf-8")
    cfg = load_scenario(path)
    assert cfg.to_coherence().terms[0].alpha == pytest.approx(math.pi)


def test_settings_defaults_and_overrides(monkeypatch):
    for key in ("CASCADE_OUT_DIR", "CASCADE_SWEEP_WORKERS", "CASCADE_BRIDGE_MAX_COLLISIONS"):
        monkeypatch.delenv(key, raising=False)
    settings = load_settings()
    assert settings.out_dir == Path("out")
    assert settings.sweep_workers == 4
    assert settings.bridge_max_collisions == 200

    monkeypatch.setenv("CASCADE_SWEEP_WORKERS", "2")
    assert load_settings().sweep_workers == 2

    monkeypatch.setenv("CASCADE_SWEEP_WORKERS", "zero")
    with pytest.raises(ValueError):
        load_settings()
