"""TOML run configuration shared by all CLI commands."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

__all__ = ["RunConfig", "load_config", "SCHEMA_VERSION"]

SCHEMA_VERSION = "levelcg-v1"


@dataclass(frozen=True)
class PotentialSection:
    #: polynomial coefficients, low to high degree
    coefficients: tuple = (0.25, 0.0, -0.5, 0.0, 0.25)


@dataclass(frozen=True)
class SdeSection:
    epsilons: tuple = (0.5, 0.2, 0.1, 0.05)
    n: int = 10_000
    dt: float = 1e-3
    t_final: float = 1.0
    snapshot_dt: float = 0.01
    x0: tuple = (1.2, 0.0)
    seed: int = 0


@dataclass(frozen=True)
class TablesSection:
    points_per_edge: int = 256
    delta_sing: float = 5e-5
    h_table_max: float = 12.0


@dataclass(frozen=True)
class BinningSection:
    bins_well: int = 128
    bins_above: int = 256
    h_max: float = 8.0


@dataclass(frozen=True)
class FpSection:
    cells_per_edge: int = 512
    h_max: float = 8.0


@dataclass(frozen=True)
class GraphMcSection:
    dt_h: float = 2.5e-6
    vertex_shell: float = 0.005
    n: int = 20_000


@dataclass(frozen=True)
class DualitySection:
    family_size: int = 64
    n: int = 4_000  # ensemble size for the dual functionals


@dataclass(frozen=True)
class RunConfig:
    potential: PotentialSection = field(default_factory=PotentialSection)
    sde: SdeSection = field(default_factory=SdeSection)
    tables: TablesSection = field(default_factory=TablesSection)
    binning: BinningSection = field(default_factory=BinningSection)
    fp: FpSection = field(default_factory=FpSection)
    graph_mc: GraphMcSection = field(default_factory=GraphMcSection)
    duality: DualitySection = field(default_factory=DualitySection)

    def validate(self) -> None:
        for eps in self.sde.epsilons:
            if not eps > 0:
                raise ConfigError(f"sde.epsilons: every entry must be > 0, got {eps}")
        for name, val in (("sde.dt", self.sde.dt), ("sde.t_final", self.sde.t_final),
                          ("sde.snapshot_dt", self.sde.snapshot_dt),
                          ("graph_mc.dt_h", self.graph_mc.dt_h),
                          ("graph_mc.vertex_shell", self.graph_mc.vertex_shell),
                          ("binning.h_max", self.binning.h_max),
                          ("fp.h_max", self.fp.h_max),
                          ("tables.delta_sing", self.tables.delta_sing),
                          ("tables.h_table_max", self.tables.h_table_max)):
            if not val > 0:
                raise ConfigError(f"{name} must be > 0, got {val}")
        for name, val in (("sde.n", self.sde.n), ("graph_mc.n", self.graph_mc.n),
                          ("duality.n", self.duality.n),
                          ("tables.points_per_edge", self.tables.points_per_edge),
                          ("fp.cells_per_edge", self.fp.cells_per_edge),
                          ("binning.bins_well", self.binning.bins_well),
                          ("binning.bins_above", self.binning.bins_above),
                          ("duality.family_size", self.duality.family_size)):
            if val < 1:
                raise ConfigError(f"{name} must be >= 1, got {val}")
        if len(self.x0) != 2:
            raise ConfigError(f"sde.x0 must be a (q, p) pair, got {self.sde.x0}")
        rem = self.sde.snapshot_dt / self.sde.dt
        if abs(rem - round(rem)) > 1e-9:
            raise ConfigError("sde.snapshot_dt must be a multiple of sde.dt")

    @property
    def x0(self) -> tuple:
        return tuple(self.sde.x0)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


_SECTIONS = {
    "potential": PotentialSection,
    "sde": SdeSection,
    "tables": TablesSection,
    "binning": BinningSection,
    "fp": FpSection,
    "graph_mc": GraphMcSection,
    "duality": DualitySection,
}


def _build_section(name: str, cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, val in data.items():
        kwargs[key] = tuple(val) if isinstance(val, list) else val
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"[{name}] invalid value: {exc}") from exc


def load_config(path: str | None) -> RunConfig:
    """Load and validate a RunConfig; None gives all defaults."""
    if path is None:
        cfg = RunConfig()
        cfg.validate()
        return cfg
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(doc) - set(_SECTIONS) - {"schema"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in doc:
            if not isinstance(doc[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            kwargs[name] = _build_section(name, cls, doc[name])
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg
