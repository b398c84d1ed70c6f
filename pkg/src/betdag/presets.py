"""Experiment presets, flat config files, and CSV artifact bundles.

A preset names one of the stock experiments: the three Byzantine-sweep
panels (fork length, chain quality, immunity), the rational-coalition
payoff sweep, the all-altruistic baseline, and the closed-form analytics
table.  ``run_preset`` renders each experiment to a deterministic bundle
of CSV files plus a manifest echoing every effective config value, the
seed, and the package version, so re-running a bundle's manifest
reproduces it byte for byte.

Config files are flat ``key=value`` text with ``#`` comments; keys mirror
:class:`betdag.netsim.SimConfig` field names, and explicit flag overrides
win over file values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import __version__
from .analytics import CoalitionParams, estimates_table
from .netsim import (
    RunOutput,
    SimConfig,
    finality_events_to_csv,
    metrics_to_csv,
    payoffs_to_csv,
    sweep_detailed,
)

__all__ = [
    "ConfigError",
    "ExperimentPreset",
    "PRESETS",
    "analytics_csv",
    "parse_config",
    "preset_names",
    "render_preset",
    "run_preset",
]


class ConfigError(ValueError):
    """Raised for unparseable config text or constraint-violating values."""


@dataclass(frozen=True)
class ExperimentPreset:
    """One stock experiment: a coalition sweep or the analytics table."""

    name: str
    coalition_class: str
    coalition_sizes: Tuple[int, ...]
    description: str


_BYZ_SIZES = (0, 12, 25, 37, 49)
_RAT_SIZES = (1, 12, 25, 37, 50)

PRESETS: Dict[str, ExperimentPreset] = {
    p.name: p
    for p in (
        ExperimentPreset(
            "baseline",
            "byzantine",
            (0,),
            "all-altruistic network; reference payoffs and fork lengths",
        ),
        ExperimentPreset(
            "fork_length",
            "byzantine",
            _BYZ_SIZES,
            "longest-fork curve over the Byzantine coalition sweep",
        ),
        ExperimentPreset(
            "chain_quality",
            "byzantine",
            _BYZ_SIZES,
            "main-chain block fractions by class over the Byzantine sweep",
        ),
        ExperimentPreset(
            "immunity",
            "byzantine",
            _BYZ_SIZES,
            "altruistic vs Byzantine mean payoffs over the Byzantine sweep",
        ),
        ExperimentPreset(
            "rational_payoff",
            "rational",
            _RAT_SIZES,
            "rational-coalition payoff sweep against the altruistic baseline",
        ),
        ExperimentPreset(
            "analytics_table",
            "analytics",
            (),
            "closed-form chain-quality, grinding, harm, and immunity estimates",
        ),
    )
}


def preset_names() -> List[str]:
    return list(PRESETS)


# ---------------------------------------------------------------------------
# config parsing


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SimConfig)}

# Friendlier spellings accepted in config files, flags, and overrides.
FIELD_ALIASES = {"players": "n_players"}


def _coerce(key: str, text: str, where: str) -> object:
    kind = _FIELD_TYPES[key]
    try:
        if key == "fractions":
            parts = [p.strip() for p in text.split(",")]
            return tuple(float(p) for p in parts)
        if kind == "int":
            return int(text, 0)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"parse-error: {where}: bad value for {key}: {text!r}") from None
    raise ConfigError(f"parse-error: {where}: unsupported key {key!r}")


def parse_config(
    text: Optional[str] = None,
    overrides: Optional[Mapping[str, object]] = None,
    source: str = "<config>",
) -> SimConfig:
    """Build a SimConfig from flat key=value text plus explicit overrides.

    Every non-blank, non-comment line must read ``key=value`` with a key
    naming a SimConfig field.  Overrides are already-typed values (flag
    input) and win over file values.  Parse failures identify the line or
    flag; constraint failures surface the config rule that was violated.
    """
    data: Dict[str, object] = {}
    if text is not None:
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(
                    f"parse-error: {source}:{lineno}: expected key=value, got {raw.strip()!r}"
                )
            key, _, value = line.partition("=")
            key = key.strip()
            key = FIELD_ALIASES.get(key, key)
            if key not in _FIELD_TYPES:
                raise ConfigError(f"parse-error: {source}:{lineno}: unknown key {key!r}")
            data[key] = _coerce(key, value.strip(), f"{source}:{lineno}")
    for key, value in (overrides or {}).items():
        key = FIELD_ALIASES.get(key, key)
        if key not in _FIELD_TYPES:
            raise ConfigError(f"parse-error: flag {key!r} names no config field")
        data[key] = _coerce(key, str(value), f"flag {key}") if isinstance(value, str) else value
    try:
        return SimConfig(**data)
    except ValueError as exc:
        raise ConfigError(f"constraint-violation: {exc}") from exc


# ---------------------------------------------------------------------------
# rendering


def _manifest(preset: ExperimentPreset, cfg: SimConfig) -> str:
    lines = [
        f"preset={preset.name}",
        f"class={preset.coalition_class}",
        "sizes=" + ",".join(str(s) for s in preset.coalition_sizes),
        f"version=betdag-{__version__}",
    ]
    for field in dataclasses.fields(SimConfig):
        value = getattr(cfg, field.name)
        if field.name == "fractions":
            value = ",".join(f"{v:g}" for v in value)
        lines.append(f"{field.name}={value}")
    return "\n".join(lines) + "\n"


def analytics_csv(
    n: int = 150,
    sizes: Optional[Sequence[float]] = None,
    k: int = 3,
    pun: float = 6.0,
    c: float = 1.0,
) -> str:
    """The four closed-form estimates per coalition size, as CSV text.

    With no explicit sizes the table covers a quarter and a third of the
    player count — the fair-share reference points a coalition would have
    to beat.
    """
    if sizes is None:
        sizes = (n / 4, n / 3)
    lines = [
        "n,n_c,k,expected_consecutive,grinding_expectation,"
        "harm_subdag_probability,immunity_ratio"
    ]
    for n_c in sizes:
        try:
            params = CoalitionParams(n=n, n_c=n_c)
        except ValueError as exc:
            raise ConfigError(f"constraint-violation: {exc}") from exc
        row = estimates_table(params, pun=pun, c=c, k=k)
        lines.append(
            f"{n},{n_c:g},{k},{row['expected_consecutive']:.6f},"
            f"{row['grinding_expectation']:.6f},{row['harm_subdag_probability']:.6f},"
            f"{row['immunity_ratio']:.6f}"
        )
    return "\n".join(lines) + "\n"


def render_preset(name: str, cfg: Optional[SimConfig] = None) -> Dict[str, str]:
    """Run a preset and return its artifact bundle as {filename: text}.

    Simulation presets produce ``metrics.csv``, ``payoffs.csv`` and
    ``finality_events.csv``; the analytics preset produces
    ``analytics.csv``.  Every bundle carries ``manifest.txt``.  The bundle
    is a pure function of the preset and config, so identical inputs give
    byte-identical artifacts.
    """
    if name not in PRESETS:
        raise ConfigError(
            f"parse-error: unknown preset {name!r}; expected one of {', '.join(PRESETS)}"
        )
    preset = PRESETS[name]
    cfg = cfg if cfg is not None else SimConfig()
    files: Dict[str, str] = {"manifest.txt": _manifest(preset, cfg)}
    if preset.coalition_class == "analytics":
        files["analytics.csv"] = analytics_csv(
            n=cfg.n_players, k=cfg.k, pun=cfg.pun, c=cfg.c
        )
        return files
    try:
        outs: List[RunOutput] = sweep_detailed(
            cfg, preset.coalition_sizes, preset.coalition_class
        )
    except ValueError as exc:
        raise ConfigError(f"constraint-violation: {exc}") from exc
    files["metrics.csv"] = metrics_to_csv([o.metrics for o in outs])
    files["payoffs.csv"] = payoffs_to_csv(
        [row for o in outs for row in o.payoff_rows]
    )
    files["finality_events.csv"] = finality_events_to_csv(
        [row for o in outs for row in o.event_rows]
    )
    return files


def run_preset(name: str, out_dir, cfg: Optional[SimConfig] = None) -> List[Path]:
    """Render a preset into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    for filename, body in sorted(render_preset(name, cfg).items()):
        path = out / filename
        path.write_text(body)
        written.append(path)
    return written
