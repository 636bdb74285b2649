"""Experiment configuration, read from TOML.

A minimal file::

    seed = 0
    methods = ["sigma_dps", "zeta_dps", "pgdm", "tmpd"]

    [schedule]
    beta0 = 0.1
    beta1 = 20.0

    [[targets]]
    prior = "bi_asym"
    operator = "identity_lownoise"
    sigma = 0.2
    y = [-1.7, 0.3]

``targets`` may also be one of the preset strings ``"panels"``,
``"convergence"`` or ``"all"``.  Every other key has a default; see
:class:`ExperimentConfig`.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..samplers import ABLATIONS, METHODS
from ..schedule import NoiseSchedule
from .targets import CONVERGENCE_TARGETS, PANEL_TARGETS, TARGETS, HAND_ZETA, ZETA_GRID, Target

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PRESETS = {"panels": PANEL_TARGETS, "convergence": CONVERGENCE_TARGETS, "all": TARGETS}


@dataclass(frozen=True)
class ExperimentConfig:
    targets: tuple = tuple(PANEL_TARGETS)
    methods: tuple = METHODS
    beta0: float = 0.1
    beta1: float = 20.0
    n_t: int = 400
    n_x: int = 600
    t_min: float = 1e-3
    span: tuple | None = None
    fsr_n: int = 4096
    K: int = 20_000
    zeta: float | None = None
    zeta_grid: tuple = ZETA_GRID
    zeta_window: float = 0.05
    pgdm_r2: float | None = None
    smooth: bool = False
    repeats: int = 20
    sizes: tuple = (16, 64, 256, 1024, 4096)
    times: tuple = (0.05, 0.3, 0.8)
    seed: int = 0
    out_dir: str = "out"
    spans: dict = field(default_factory=dict)
    zetas: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.targets:
            raise ValueError("config lists no targets")
        for m in self.methods:
            if m not in METHODS + ABLATIONS:
                raise ValueError(f"unknown method {m!r}")
        for t in self.targets:
            t.build_prior()
            t.build_measurement()
        if self.n_t < 2 or self.n_x < 2:
            raise ValueError("grids need at least two nodes")
        if not (0 < self.t_min < 1):
            raise ValueError("t_min must lie in (0, 1)")
        if len(self.zeta_grid) == 0:
            raise ValueError("zeta grid is empty")
        if any(not z > 0 for z in self.zeta_grid):
            raise ValueError("zeta values must be positive")
        if self.repeats < 1 or self.K < 1 or self.fsr_n < 1:
            raise ValueError("repeats, K and fsr_n must be positive")

    @property
    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule(self.beta0, self.beta1)

    def t_grid(self) -> np.ndarray:
        return np.linspace(self.t_min, 1.0, self.n_t)

    def x_grid(self, target: Target) -> np.ndarray:
        span = self.spans.get(target.name, self.span)
        return target.space_grid(self.n_x, span)

    def zeta_for(self, target: Target) -> float:
        if target.name in self.zetas:
            return float(self.zetas[target.name])
        if self.zeta is not None:
            return float(self.zeta)
        return HAND_ZETA.get(target.name, 0.1)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["targets"] = [
            {
                "prior": t.prior,
                "operator": t.operator,
                "sigma": t.noise_std,
                "y": t.y,
                **({"prior_params": dict(t.prior_params)} if t.prior_params else {}),
                **({"operator_params": dict(t.operator_params)} if t.operator_params else {}),
            }
            for t in self.targets
        ]
        return _jsonable(d)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _parse_targets(raw) -> tuple:
    if isinstance(raw, str):
        if raw not in PRESETS:
            raise ValueError(f"unknown target preset {raw!r}; choose from {sorted(PRESETS)}")
        return tuple(PRESETS[raw]), {}, {}
    spans, zetas, out = {}, {}, []
    for entry in raw:
        ys = entry["y"]
        for y in ys if isinstance(ys, list) else [ys]:
            t = Target(
                entry["prior"],
                entry["operator"],
                float(entry["sigma"]),
                float(y),
                dict(entry.get("prior_params", {})),
                dict(entry.get("operator_params", {})),
            )
            if "span" in entry:
                spans[t.name] = tuple(float(v) for v in entry["span"])
            if "zeta" in entry:
                zetas[t.name] = float(entry["zeta"])
            out.append(t)
    return tuple(out), spans, zetas


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    kw = {}
    if "targets" in d:
        kw["targets"], kw["spans"], kw["zetas"] = _parse_targets(d.pop("targets"))
    sections = {
        "schedule": {"beta0": "beta0", "beta1": "beta1"},
        "grid": {"n_t": "n_t", "n_x": "n_x", "t_min": "t_min", "span": "span"},
        "fsr": {"n": "fsr_n", "repeats": "repeats", "sizes": "sizes", "times": "times"},
        "sampler": {
            "K": "K",
            "zeta": "zeta",
            "zeta_grid": "zeta_grid",
            "zeta_window": "zeta_window",
            "pgdm_r2": "pgdm_r2",
            "smooth": "smooth",
        },
    }
    for sec, keys in sections.items():
        body = d.pop(sec, {})
        for k, v in body.items():
            if k not in keys:
                raise ValueError(f"unknown key [{sec}].{k}")
            kw[keys[k]] = v
    for k in ("methods", "seed", "out_dir"):
        if k in d:
            kw[k] = d.pop(k)
    if d:
        raise ValueError(f"unknown config keys: {sorted(d)}")
    for k in ("methods", "sizes", "times", "zeta_grid", "span"):
        if k in kw and kw[k] is not None:
            kw[k] = tuple(kw[k])
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with path.open("rb") as fh:
        return config_from_dict(tomllib.load(fh))
