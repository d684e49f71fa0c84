"""Scenario configuration: defaults, JSON config files, CLI overlays."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .engine import REVEAL_KINDS, ScenarioBounds

DEFAULT_BOUNDS = ScenarioBounds(
    max_sessions=1,
    max_epochs=3,
    max_reports=2,
    deduction_depth=6,
    injection_bound=4,
)

JOBS_ENV_VAR = "FINDMY_VERIF_JOBS"

_BOUND_KEYS = (
    "max_sessions",
    "max_epochs",
    "max_reports",
    "deduction_depth",
    "injection_bound",
)


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    backend: str = "symbolic"
    bounds: ScenarioBounds = DEFAULT_BOUNDS
    # None means each built-in lemma runs with its own reveal rules; a set
    # forces that reveal configuration onto every selected lemma.
    reveals: Optional[frozenset[str]] = None
    lemmas: Optional[list[str]] = None  # None selects all built-ins + controls
    # Per-lemma expectation overrides, e.g. {"d0_sec_weakened": "holds"} to
    # treat a control's counterexample as a regression.
    expect_overrides: dict[str, str] = field(default_factory=dict)
    seed: int = 0
    out: Optional[Path] = None
    jobs: int = 1
    symmetry_reduction: bool = True
    step_fusion: bool = True
    timing: bool = True

    def validate(self) -> "ScenarioConfig":
        if self.backend not in ("symbolic", "concrete"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.reveals is not None:
            bad = set(self.reveals) - set(REVEAL_KINDS)
            if bad:
                raise ConfigError(f"unknown reveal kinds: {sorted(bad)}")
        for name, expect in self.expect_overrides.items():
            if expect not in ("holds", "fails"):
                raise ConfigError(
                    f"expectation for {name!r} must be 'holds' or 'fails'"
                )
        return self


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV_VAR)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{JOBS_ENV_VAR} must be an integer, got {raw!r}")


def load_config_file(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def parse_bound_overrides(pairs: list[str]) -> dict[str, int]:
    out: dict[str, int] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"bounds override must look like KEY=VAL, got {pair!r}")
        key, _, raw = pair.partition("=")
        key = key.strip()
        if key not in _BOUND_KEYS:
            raise ConfigError(
                f"unknown bound {key!r}; expected one of {', '.join(_BOUND_KEYS)}"
            )
        try:
            out[key] = int(raw)
        except ValueError:
            raise ConfigError(f"bound {key!r} needs an integer value, got {raw!r}")
    return out


def build_config(
    file_data: Optional[dict] = None,
    *,
    bound_overrides: Optional[dict[str, int]] = None,
    **cli_overrides,
) -> ScenarioConfig:
    """Defaults, then the config file, then CLI flags, strongest last."""
    cfg = ScenarioConfig()
    data = dict(file_data or {})

    bounds_data = data.pop("bounds", {})
    if not isinstance(bounds_data, dict):
        raise ConfigError("bounds must be an object")
    unknown_bounds = set(bounds_data) - set(_BOUND_KEYS)
    if unknown_bounds:
        raise ConfigError(f"unknown bounds: {sorted(unknown_bounds)}")

    if "reveals" in data and data["reveals"] is not None:
        data["reveals"] = frozenset(data["reveals"])
    if "out" in data and data["out"] is not None:
        data["out"] = Path(data["out"])

    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = dataclasses.replace(cfg, **data)

    merged_bounds = {key: getattr(DEFAULT_BOUNDS, key) for key in _BOUND_KEYS}
    merged_bounds.update(bounds_data)
    if bound_overrides:
        merged_bounds.update(bound_overrides)
    try:
        cfg.bounds = ScenarioBounds(**merged_bounds)
    except ValueError as exc:
        raise ConfigError(str(exc))

    cli_clean = {k: v for k, v in cli_overrides.items() if v is not None}
    if "reveals" in cli_clean:
        cli_clean["reveals"] = frozenset(cli_clean["reveals"])
    if "out" in cli_clean:
        cli_clean["out"] = Path(cli_clean["out"])
    cfg = dataclasses.replace(cfg, **cli_clean)
    return cfg.validate()
