"""
Scenario schema and environment settings.

Scenario files are JSON documents validated by strict pydantic models:
unknown keys are rejected before any simulation starts. Spin indices are
0-based; temperatures are in units of delta.
"""

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from cascade_collision import CollisionConfig
from cascade_errors import ConfigParseError, ConfigValidationError
from cascade_model import CoherenceSpec, CoherenceTerm, SpinChainSpec

OUTPUT_GROUPS = (
    "energies",
    "bath_heat",
    "free_energy",
    "mutual_information",
    "coherence",
    "one_way",
    "apparent",
    "global_apparent",
)


class SpinChainModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=1, le=5)
    delta: float = Field(default=1.0, gt=0)
    temperatures: List[float]
    bath_temperature: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_temperatures(self):
        if len(self.temperatures) != self.n:
            raise ValueError(f"Expected {self.n} temperatures, got {len(self.temperatures)}")
        if any(not (t > 0 and math.isfinite(t)) for t in self.temperatures):
            raise ValueError(f"Temperatures must be finite and > 0, got {self.temperatures}")
        return self


class CoherenceModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    p: int = Field(ge=0)
    q: int = Field(ge=1)
    lam: float = Field(ge=0)
    alpha: float = Field(default=0.0, ge=0, lt=2 * math.pi)

    @model_validator(mode="after")
    def _check_pair(self):
        if self.p >= self.q:
            raise ValueError(f"Coherence pair needs p < q, got p={self.p}, q={self.q}")
        return self


class CollisionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    g: float = Field(ge=0)
    tau: float = Field(ge=0)
    order: Optional[List[int]] = None
    variant: Literal["cascade", "simultaneous"] = "cascade"
    n_collisions: int = Field(default=1, ge=1, le=100000)
    generator: Literal["global", "pair", "interaction"] = "global"


class LindbladModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps_per_collision: int = Field(default=10, ge=1, le=1000)


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    spin_chain: SpinChainModel
    coherence: List[CoherenceModel] = Field(default_factory=list)
    collision: CollisionModel
    outputs: List[str] = Field(default_factory=lambda: list(OUTPUT_GROUPS))
    engine: Literal["collision", "lindblad", "both"] = "collision"
    lindblad: LindbladModel = Field(default_factory=LindbladModel)

    @model_validator(mode="after")
    def _cross_checks(self):
        n = self.spin_chain.n
        if self.collision.order is None:
            self.collision.order = list(range(n))
        if sorted(self.collision.order) != list(range(n)):
            raise ValueError(f"collision.order must be a permutation of 0..{n - 1}, got {self.collision.order}")
        for term in self.coherence:
            if term.q >= n:
                raise ValueError(f"Coherence pair ({term.p}, {term.q}) references a spin beyond n={n}")
        unknown = [o for o in self.outputs if o not in OUTPUT_GROUPS]
        if unknown:
            raise ValueError(f"Unknown outputs {unknown}, expected a subset of {list(OUTPUT_GROUPS)}")
        if self.engine != "collision" and self.collision.variant != "cascade":
            raise ValueError("The master-equation engine needs collision.variant = 'cascade'")
        return self

    def to_spec(self) -> SpinChainSpec:
        chain = self.spin_chain
        return SpinChainSpec.from_temperatures(chain.temperatures, chain.bath_temperature, chain.delta)

    def to_coherence(self) -> CoherenceSpec:
        return CoherenceSpec(tuple(CoherenceTerm(t.p, t.q, t.lam, t.alpha) for t in self.coherence))

    def to_collision(self) -> CollisionConfig:
        c = self.collision
        return CollisionConfig(c.g, c.tau, tuple(c.order), c.variant, c.n_collisions, c.generator)


def _summarize(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        where = ".".join(str(x) for x in err.get("loc", ())) or "<root>"
        parts.append(f"{where}: {err.get('msg')}")
    return "; ".join(parts)


def parse_scenario(data) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError(f"Invalid scenario: {_summarize(e)}") from e


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigParseError(f"Cannot read scenario file {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"Scenario file {path} is not valid JSON: {e}") from e
    return parse_scenario(data)


# =========================
# ENVIRONMENT
# =========================
@dataclass(frozen=True)
class Settings:
    out_dir: Path
    sweep_workers: int
    bridge_max_collisions: int


def _positive_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise ValueError(f"{name} must be a positive integer, got '{raw}'. Set {name} or unset it.")
    return value


def load_settings() -> Settings:
    # Local .env only if it exists; deployed services set the variables directly.
    env_path = Path(__file__).parent / ".env"
    if env_path.exists():
        load_dotenv(dotenv_path=env_path)

    return Settings(
        out_dir=Path(os.environ.get("CASCADE_OUT_DIR") or "out"),
        sweep_workers=_positive_int("CASCADE_SWEEP_WORKERS", 4),
        bridge_max_collisions=_positive_int("CASCADE_BRIDGE_MAX_COLLISIONS", 200),
    )
