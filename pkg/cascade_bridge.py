from typing import Dict

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from cascade_collision import run_trajectory
from cascade_config import ScenarioConfig, load_settings
from cascade_errors import ConfigValidationError, NumericalToleranceError, error_detail
from cascade_thermo import audit_resource_chain, global_heat_direction_violations, heat_direction_violations
from cascade_toys import TOYS, run_toy

app = FastAPI(title="Cascade Heat Bridge")

SETTINGS = load_settings()


class ToyRequest(BaseModel):
    params: Dict[str, float] = Field(default_factory=dict)


def _raise_http(e: Exception):
    if isinstance(e, ConfigValidationError):
        raise HTTPException(status_code=422, detail=error_detail(e))
    raise HTTPException(status_code=500, detail=error_detail(e))


@app.get("/")
def health_check():
    return {"status": "online", "message": "Cascade bridge is active"}


@app.get("/toys")
def list_toys():
    return {"toys": sorted(TOYS)}


@app.post("/toy/{name}")
def toy(name: str, request: ToyRequest):
    try:
        result = run_toy(name, request.params)
    except (ConfigValidationError, NumericalToleranceError) as e:
        _raise_http(e)

    print(f"BRIDGE: toy {name} abs_error={result.abs_error:.3e}", flush=True)
    return {
        "label": result.label,
        "analytic": result.analytic,
        "simulated": result.simulated,
        "abs_error": result.abs_error,
        "extras": result.extras,
    }


@app.post("/audit")
def audit(scenario: ScenarioConfig):
    limit = SETTINGS.bridge_max_collisions
    if scenario.collision.n_collisions > limit:
        raise HTTPException(
            status_code=422,
            detail={
                "error_type": "ConfigValidationError",
                "message": f"n_collisions={scenario.collision.n_collisions} exceeds the bridge limit {limit}",
            },
        )

    try:
        spec, coh, cfg = scenario.to_spec(), scenario.to_coherence(), scenario.to_collision()
        traj = run_trajectory(spec, coh, cfg)
        audits = [
            {"collision": m, "label": a.label, "lhs": a.lhs, "rhs": a.rhs, "slack": a.slack, "satisfied": a.satisfied}
            for m in range(1, cfg.n_collisions + 1)
            for a in audit_resource_chain(traj, spec, m)
        ]
        law = heat_direction_violations(traj) if cfg.variant == "cascade" else global_heat_direction_violations(traj)
    except (ConfigValidationError, NumericalToleranceError) as e:
        _raise_http(e)

    all_ok = all(a["satisfied"] for a in audits)
    print(f"BRIDGE: audit {scenario.name} N={cfg.n_collisions} ok={all_ok}", flush=True)
    return {
        "name": scenario.name,
        "collisions": cfg.n_collisions,
        "audits": audits,
        "all_satisfied": all_ok,
        "heat_law": {"checked": law.checked, "skipped": law.skipped, "violations": len(law.violations)},
    }
