"""Experiment specifications and their plain-text ``key = value`` config files."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from pathlib import Path
from typing import Optional

EXPERIMENT_IDS = ("E1", "E2", "E3", "E4", "E5", "E6", "E7")
DEFAULT_LADDER = (1e-2, 5e-3, 2e-3, 1e-3, 5e-4)


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str = "E1"
    field: str = "random_besov"
    field_params: dict = dc_field(default_factory=lambda: {"s": 0.5})
    n: int = 256
    dt: float = 2.5e-3
    t_end: float = 2.0
    nus: tuple = DEFAULT_LADDER
    ps: tuple = (1.0, 2.0, 4.0)
    seed: int = 0
    snapshot_interval: float = 0.1
    out: Optional[Path] = None
    resolution_guard: bool = True
    convergence_only: bool = False
    jobs: int = 1
    extra: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_IDS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        nus = tuple(float(v) for v in self.nus)
        if any(a <= b for a, b in zip(nus, nus[1:])):
            raise ValueError(f"viscosity ladder must be strictly decreasing: {nus}")
        if any(v <= 0 for v in nus):
            raise ValueError("ladder viscosities must be positive (nu = 0 is the reference run)")
        object.__setattr__(self, "nus", nus)
        object.__setattr__(self, "ps", tuple(float(p) for p in self.ps))

    @property
    def snapshot_stride(self) -> int:
        return max(1, int(round(self.snapshot_interval / self.dt)))

    def seed_for(self, label: str) -> int:
        return derive_seed(self.seed, f"{self.experiment}/{label}")

    def with_(self, **changes) -> "ExperimentSpec":
        return replace(self, **changes)


def derive_seed(seed: int, label: str) -> int:
    """Stable 63-bit child seed for ``label`` under the top-level ``seed``."""
    digest = hashlib.sha256(f"{int(seed)}|{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _parse_value(text: str):
    text = text.strip()
    if "," in text:
        return tuple(_parse_value(t) for t in text.split(",") if t.strip())
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


_TOP_KEYS = {
    "id": "experiment", "experiment": "experiment", "n": "n", "dt": "dt", "t_end": "t_end",
    "nus": "nus", "ps": "ps", "seed": "seed", "snapshot_interval": "snapshot_interval",
    "out": "out", "resolution_guard": "resolution_guard", "convergence_only": "convergence_only",
    "jobs": "jobs",
}


def parse_config(text: str) -> ExperimentSpec:
    """Parse ``[experiment]``, ``[field]`` and optional ``[extra]`` sections."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    kwargs = {}
    if cp.has_section("experiment"):
        for key, raw in cp.items("experiment"):
            if key not in _TOP_KEYS:
                raise ValueError(f"unknown [experiment] key {key!r}")
            value = _parse_value(raw)
            if key in ("nus", "ps") and not isinstance(value, tuple):
                value = (value,)
            if key == "out":
                value = Path(raw.strip())
            if key == "experiment" or key == "id":
                value = raw.strip()
            kwargs[_TOP_KEYS[key]] = value
    if cp.has_section("field"):
        params = {k: _parse_value(v) for k, v in cp.items("field")}
        kwargs["field"] = str(params.pop("name", "random_besov"))
        kwargs["field_params"] = params
    if cp.has_section("extra"):
        kwargs["extra"] = {k: _parse_value(v) for k, v in cp.items("extra")}
    return ExperimentSpec(**kwargs)


def load_config(path) -> ExperimentSpec:
    return parse_config(Path(path).read_text())


def format_config(spec: ExperimentSpec) -> str:
    def fmt(v):
        if isinstance(v, tuple):
            return ", ".join(repr(x) for x in v)
        return str(v)

    lines = ["[experiment]", f"id = {spec.experiment}"]
    for key in ("n", "dt", "t_end", "nus", "ps", "seed", "snapshot_interval",
                "resolution_guard", "convergence_only", "jobs"):
        lines.append(f"{key} = {fmt(getattr(spec, key))}")
    if spec.out is not None:
        lines.append(f"out = {spec.out}")
    lines += ["", "[field]", f"name = {spec.field}"]
    lines += [f"{k} = {fmt(v)}" for k, v in spec.field_params.items()]
    if spec.extra:
        lines += ["", "[extra]"] + [f"{k} = {fmt(v)}" for k, v in spec.extra.items()]
    return "\n".join(lines) + "\n"
