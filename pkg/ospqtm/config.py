"""
ospqtm Config - run configuration from TOML files and command-line overrides.

Precedence: built-in defaults < config file < command-line flags.
"""
from __future__ import annotations

import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from .spectral import OspQtmError
from .tba import TbaConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)


class ConfigError(OspQtmError, ValueError):
    """Invalid or unreadable run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI run needs; serialized verbatim into run.json."""
    command: str = "scan"
    J: float = -1.0
    betas: Tuple[float, ...] = (1.0,)
    trotter: Tuple[int, ...] = (4,)
    u: Optional[float] = None
    k: int = 1
    tba: TbaConfig = field(default_factory=TbaConfig)
    bae_tol: float = 1e-12
    bae_max_iter: int = 200
    out: Path = Path("runs/latest")
    seed: int = 0
    workers: int = 1
    excited: bool = False
    figure: Optional[str] = None

    def __post_init__(self):
        if not self.betas:
            raise ConfigError("beta list is empty")
        if any(b <= 0 for b in self.betas):
            raise ConfigError(f"beta values must be positive: {self.betas}")
        if any(b2 <= b1 for b1, b2 in zip(self.betas, self.betas[1:])):
            raise ConfigError(f"beta list must be strictly increasing: {self.betas}")
        if any(n < 2 or n % 2 for n in self.trotter):
            raise ConfigError(f"Trotter numbers must be even and >= 2: {self.trotter}")
        if self.k not in (1, 2):
            raise ConfigError(f"k must be 1 or 2, got {self.k}")
        if self.J == 0:
            raise ConfigError("J must be nonzero")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_json(self) -> Dict[str, Any]:
        doc = asdict(self)
        doc["out"] = str(self.out)
        doc["betas"] = list(self.betas)
        doc["trotter"] = list(self.trotter)
        doc["tba"]["deltas"] = list(self.tba.deltas)
        return doc


# TOML table -> RunConfig field names
_SECTIONS = {
    "model": {"J": "J", "betas": "betas", "trotter": "trotter", "u": "u", "k": "k"},
    "bae": {"tol": "bae_tol", "max_iter": "bae_max_iter"},
    "run": {"out": "out", "seed": "seed", "workers": "workers", "excited": "excited",
            "figure": "figure"},
}
_TBA_KEYS = {f.name for f in fields(TbaConfig)}


def load_config(path) -> Dict[str, Any]:
    """Read a TOML file into flat RunConfig keyword arguments (plus a ``tba`` dict)."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    values: Dict[str, Any] = {}
    for section, table in doc.items():
        if section == "tba":
            unknown = set(table) - _TBA_KEYS
            if unknown:
                raise ConfigError(f"unknown [tba] keys: {sorted(unknown)}")
            values["tba"] = dict(table)
            continue
        mapping = _SECTIONS.get(section)
        if mapping is None:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in table.items():
            if key not in mapping:
                raise ConfigError(f"unknown key {section}.{key}")
            values[mapping[key]] = value
    logger.debug("[Config] loaded %s: %s", path, sorted(values))
    return values


def build_config(file_values: Optional[Mapping[str, Any]] = None,
                 overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Merge defaults, file values and overrides; ``None`` overrides are ignored."""
    merged: Dict[str, Any] = {}
    tba: Dict[str, Any] = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key == "tba":
                tba.update({k: v for k, v in value.items() if v is not None})
            else:
                merged[key] = value
    if "deltas" in tba:
        tba["deltas"] = tuple(tba["deltas"])
    for key in ("betas", "trotter"):
        if key in merged:
            value = merged[key]
            merged[key] = tuple(value) if isinstance(value, (list, tuple)) else (value,)
    if "out" in merged:
        merged["out"] = Path(merged["out"])
    try:
        return RunConfig(tba=TbaConfig(**tba), **merged)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
