"""HTTP facade over the simulator: presets, sweeps, and the estimates table.

The service owns all rendering.  A client posts a config (flat key=value
text plus typed flag overrides) and receives the same file bundle the
batch runner would have written, keyed by filename.  Clients therefore
never need the simulator installed; the command-line front end is a thin
wrapper around these routes.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .presets import PRESETS, ConfigError, analytics_csv, parse_config, render_preset

app = FastAPI(title="betdag", version=__version__)


class PresetInfo(BaseModel):
    name: str
    coalition_class: str
    coalition_sizes: List[int]
    description: str


class RenderRequest(BaseModel):
    config_text: Optional[str] = None
    overrides: Dict[str, str] = Field(default_factory=dict)


class RenderResponse(BaseModel):
    preset: str
    files: Dict[str, str]


class AnalyticsRequest(BaseModel):
    n: int = 150
    sizes: List[float] = Field(default_factory=lambda: [37.5, 50.0])
    k: int = 3
    pun: float = 6.0
    c: float = 1.0


class AnalyticsResponse(BaseModel):
    csv: str


@app.get("/health")
def health() -> Dict[str, str]:
    return {"status": "ok", "version": __version__}


@app.get("/presets", response_model=List[PresetInfo])
def list_presets() -> List[PresetInfo]:
    return [
        PresetInfo(
            name=p.name,
            coalition_class=p.coalition_class,
            coalition_sizes=list(p.coalition_sizes),
            description=p.description,
        )
        for p in PRESETS.values()
    ]


@app.post("/presets/{name}", response_model=RenderResponse)
def render(name: str, req: RenderRequest) -> RenderResponse:
    if name not in PRESETS:
        raise HTTPException(status_code=404, detail=f"unknown preset {name!r}")
    try:
        cfg = parse_config(text=req.config_text, overrides=req.overrides)
        files = render_preset(name, cfg=cfg)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return RenderResponse(preset=name, files=files)


@app.post("/analytics", response_model=AnalyticsResponse)
def analytics(req: AnalyticsRequest) -> AnalyticsResponse:
    if req.n <= 0 or req.k < 1 or any(s <= 0 or s >= req.n for s in req.sizes):
        raise HTTPException(
            status_code=400,
            detail="constraint-violation: need n > 0, k >= 1, 0 < size < n",
        )
    return AnalyticsResponse(csv=analytics_csv(n=req.n, sizes=tuple(req.sizes), k=req.k, pun=req.pun, c=req.c))
