"""Dataclass configuration for the pipeline, loadable from a flat TOML file.

Every tunable constant of the pipeline lives here under a namespaced key so
that runs are auditable and sweepable:

    [filters]      smooth_sigma, num_orientations, half_length, sigma_perp
    [graph]        beta_source, tangent_window
    [priors]       node_sigma_deg, edge_norm_percentile
    [weights]      e_on, e_off, n_on, n_off, r_on, r_off
    [solver]       method, time_limit, log_period
    polarity       "high" | "low"  (input polarity of the probability map)
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

try:  # stdlib on 3.11+
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml


@dataclass(frozen=True)
class FilterConfig:
    smooth_sigma: float = 1.4
    num_orientations: int = 36
    half_length: int = 4
    sigma_perp: float = 1.0


@dataclass(frozen=True)
class GraphConfig:
    # "geometry": turning angles from ridge-chain tangents.
    # "filter":   turning angles from the winning filter orientations.
    beta_source: str = "geometry"
    tangent_window: int = 5


@dataclass(frozen=True)
class PriorConfig:
    node_sigma_deg: float = 45.0
    edge_norm_percentile: float = 99.0


@dataclass(frozen=True)
class Weights:
    """Linear weights of the objective, one on/off pair per variable family.

    Activation terms are costs; negative values reward activation.
    """

    e_on: float = -1.0
    e_off: float = -0.5
    n_on: float = -0.3
    n_off: float = -0.3
    r_on: float = -2.0
    r_off: float = -2.0

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.e_on, self.e_off, self.n_on, self.n_off, self.r_on, self.r_off)

    @staticmethod
    def names() -> tuple[str, ...]:
        return ("e_on", "e_off", "n_on", "n_off", "r_on", "r_off")

    @staticmethod
    def from_tuple(values) -> "Weights":
        return Weights(*[float(v) for v in values])


@dataclass(frozen=True)
class SolverConfig:
    method: str = "bnb"  # "bnb" | "exhaustive"
    time_limit: float = 60.0
    log_period: int = 0  # log every N explored nodes; 0 = silent


@dataclass(frozen=True)
class PipelineConfig:
    filters: FilterConfig = field(default_factory=FilterConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    priors: PriorConfig = field(default_factory=PriorConfig)
    weights: Weights = field(default_factory=Weights)
    solver: SolverConfig = field(default_factory=SolverConfig)
    polarity: str = "high"  # input maps: membrane-is-high vs membrane-is-low

    def replace(self, **kwargs) -> "PipelineConfig":
        return dataclasses.replace(self, **kwargs)


_SECTIONS = {
    "filters": FilterConfig,
    "graph": GraphConfig,
    "priors": PriorConfig,
    "weights": Weights,
    "solver": SolverConfig,
}


def config_from_dict(data: dict) -> PipelineConfig:
    kwargs = {}
    for section, cls in _SECTIONS.items():
        if section in data:
            known = {f.name for f in dataclasses.fields(cls)}
            extra = set(data[section]) - known
            if extra:
                raise ValueError(f"unknown config keys in [{section}]: {sorted(extra)}")
            kwargs[section] = cls(**data[section])
    if "polarity" in data:
        if data["polarity"] not in ("high", "low"):
            raise ValueError(f"polarity must be 'high' or 'low', got {data['polarity']!r}")
        kwargs["polarity"] = data["polarity"]
    return PipelineConfig(**kwargs)


def load_config(path) -> PipelineConfig:
    with open(path, "rb") as fh:
        return config_from_dict(_toml.load(fh))


def config_to_toml(cfg: PipelineConfig) -> str:
    """Serialize a config back to TOML text (flat sections, stable order)."""
    lines = [f'polarity = "{cfg.polarity}"', ""]
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        lines.append(f"[{section}]")
        for f in dataclasses.fields(obj):
            val = getattr(obj, f.name)
            if isinstance(val, str):
                lines.append(f'{f.name} = "{val}"')
            else:
                lines.append(f"{f.name} = {val}")
        lines.append("")
    return "\n".join(lines)
