"""Experiment orchestration: panels, convergence in N, zeta sweeps, TV curves.

Every random draw is keyed off ``cfg.seed`` and a stable label (target name,
method, dataset size, repeat index), so reruns reproduce outputs exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import platform
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..exceptions import FsrDiagError, IntractableError
from ..fields import DensityField
from ..fsr import FsrModel
from ..metrics import ensemble_density, mc_rate_fit, tv_curve, tv_rows
from ..samplers import AFFINE_ONLY, SamplerSpec, run_sampler
from .config import ExperimentConfig
from .render import render_heatmap, render_marker
from .targets import Target

log = logging.getLogger(__name__)

INTRACTABLE = "intractable"


class ExperimentError(FsrDiagError):
    """A numerical failure inside an experiment, tagged with its target."""

    def __init__(self, target: str, cause: Exception):
        self.target = target
        self.cause = cause
        super().__init__(f"[{target}] {type(cause).__name__}: {cause}")


def sub_seed(seed: int, *labels) -> int:
    """Deterministic 63-bit seed derived from ``seed`` and string/int labels."""
    keys = [int(seed)] + [zlib.crc32(str(x).encode()) for x in labels]
    return int(np.random.SeedSequence(keys).generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


def fsr_dataset(target: Target, n: int, seed: int, repeat: int = 0) -> np.ndarray:
    return target.build_prior().sample(n, seed=sub_seed(seed, "dataset", target.name, n, repeat))


def _spec(cfg: ExperimentConfig, target: Target, method: str, zeta: float | None = None, label="") -> SamplerSpec:
    r2 = cfg.pgdm_r2
    return SamplerSpec(
        method=method,
        zeta=cfg.zeta_for(target) if zeta is None else zeta,
        r_schedule=(lambda t, r2=r2: r2) if r2 is not None else None,
        n_steps=cfg.n_t - 1,
        t_start=1.0,
        t_end=cfg.t_min,
        K=cfg.K,
        seed=sub_seed(cfg.seed, "sampler", target.name, method, label),
    )


def sampler_field(cfg: ExperimentConfig, target: Target, method: str, zeta=None, label="") -> DensityField:
    """Run one sampler and histogram it on the target grids (times ascending)."""
    spec = _spec(cfg, target, method, zeta, label)
    ens = run_sampler(spec, target.build_prior(), target.build_measurement(), target.y, cfg.schedule)
    if ens.n_diverged:
        log.warning("%s/%s: %d of %d trajectories diverged", target.name, method, ens.n_diverged, ens.K)
    ens.times = ens.times[::-1]
    ens.states = ens.states[:, ::-1]
    f = ensemble_density(ens, cfg.x_grid(target), smooth=cfg.smooth, label=method)
    f.t_grid = cfg.t_grid()
    return f


def reference_field(cfg: ExperimentConfig, target: Target, fsr: DensityField | None = None):
    """Analytic posterior field when tractable, otherwise the FSR field."""
    cp = target.problem(cfg.schedule)
    if cp.tractable:
        return cp.posterior_field(cfg.t_grid(), cfg.x_grid(target), "analytic"), "analytic"
    if fsr is None:
        fsr = fsr_field(cfg, target)
    return fsr, "fsr"


def fsr_field(cfg: ExperimentConfig, target: Target, n: int | None = None) -> DensityField:
    n = cfg.fsr_n if n is None else n
    f = FsrModel(fsr_dataset(target, n, cfg.seed), cfg.schedule, target.build_measurement(), target.y)
    return f.posterior_field(cfg.t_grid(), cfg.x_grid(target), "fsr")


# -- outputs ------------------------------------------------------------------
def _write_rows(path: Path, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in rows:
            w.writerow([repr(float(v)) if not isinstance(v, str) else v for v in r])
    return path


def read_rows(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_manifest(out_dir: Path, command: str, cfg: ExperimentConfig, outputs, extra=None) -> Path:
    import matplotlib
    import scipy

    man = {
        "command": command,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "versions": {
            "fsrdiag": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
        },
        "outputs": sorted(str(Path(p).relative_to(out_dir)) for p in outputs),
    }
    if extra:
        man.update(extra)
    path = out_dir / "manifest.json"
    out_dir.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return path


@dataclass
class PanelOutput:
    target: str
    reference: str
    fields: dict = field(default_factory=dict)
    intractable: list = field(default_factory=list)
    tv: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def tv_table(self) -> tuple[list, np.ndarray]:
        cols = list(self.tv)
        t = next(iter(self.tv.values())).x if cols else np.zeros(0)
        return cols, np.column_stack([t] + [self.tv[c].tv for c in cols]) if cols else np.zeros((0, 1))


def _guard(target: Target, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except IntractableError:
        raise
    except FsrDiagError as exc:
        raise ExperimentError(target.name, exc) from exc


def run_panel(cfg: ExperimentConfig, target: Target, out_dir=None, render: bool = True) -> PanelOutput:
    """Analytic (or marker), FSR and one sampler field per method, with TV curves.

    TV columns are measured against the analytic field when it exists and
    against the FSR field otherwise (the FSR column is then omitted).
    """
    cp = target.problem(cfg.schedule)
    fsr = _guard(target, fsr_field, cfg, target)
    ref, ref_name = _guard(target, reference_field, cfg, target, fsr)
    out = PanelOutput(target.name, ref_name)
    if cp.tractable:
        out.fields["analytic"] = ref
    else:
        out.intractable.append("analytic")
    out.fields["fsr"] = fsr
    for m in cfg.methods:
        if m in AFFINE_ONLY and not cp.measurement.is_affine:
            out.intractable.append(m)
            continue
        out.fields[m] = _guard(target, sampler_field, cfg, target, m)
    for name, f in out.fields.items():
        if name == ref_name or name == "analytic":
            continue
        out.tv[name] = tv_curve(f, ref, name)

    if out_dir is not None:
        d = Path(out_dir) / target.name
        d.mkdir(parents=True, exist_ok=True)
        for name, f in out.fields.items():
            p = d / f"{name}.npz"
            np.savez_compressed(p, t_grid=f.t_grid, x_grid=f.x_grid, values=f.values, flagged=f.flagged,
                                label=np.array(f.label))
            out.files.append(p)
            if render:
                out.files.append(render_heatmap(f, ref, d / f"{name}.png", title=f"{target.name} {name}"))
        if render:
            for name in out.intractable:
                out.files.append(render_marker(d / f"{name}.png"))
        cols, table = out.tv_table()
        out.files.append(_write_rows(d / "tv.csv", table))
        meta = {"target": target.name, "reference": ref_name, "tv_columns": ["t"] + cols,
                "intractable": out.intractable}
        (d / "panel.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        out.files.append(d / "panel.json")
    return out


# -- convergence in N -----------------------------------------------------------
@dataclass
class ConvergenceResult:
    target: str
    rows: np.ndarray  # (len(sizes), 1 + len(times)): N, median TV per time
    times: tuple
    slopes: tuple
    all_tv: np.ndarray  # (len(sizes), repeats, len(times))


def convergence_rows(cfg: ExperimentConfig, target: Target) -> ConvergenceResult:
    """Median over dataset repeats of TV(FSR, analytic) at ``cfg.times``."""
    cp = target.problem(cfg.schedule)
    if not cp.tractable:
        raise IntractableError(f"convergence needs an analytic posterior; {target.name} has none")
    ts = np.asarray(cfg.times, dtype=float)
    xg = cfg.x_grid(target)
    ref = cp.posterior_field(ts, xg, "analytic")
    m = target.build_measurement()
    all_tv = np.empty((len(cfg.sizes), cfg.repeats, ts.size))
    for i, n in enumerate(cfg.sizes):
        for r in range(cfg.repeats):
            f = FsrModel(fsr_dataset(target, int(n), cfg.seed, r), cfg.schedule, m, target.y)
            all_tv[i, r] = _guard(target, tv_rows, f.posterior_field(ts, xg), ref)
    med = np.median(all_tv, axis=1)
    rows = np.column_stack([np.asarray(cfg.sizes, dtype=float), med])
    slopes = tuple(mc_rate_fit(rows[:, [0, k + 1]])[0] for k in range(ts.size))
    return ConvergenceResult(target.name, rows, tuple(cfg.times), slopes, all_tv)


def run_convergence(cfg: ExperimentConfig, out_dir=None) -> list[ConvergenceResult]:
    results = []
    for target in cfg.targets:
        res = convergence_rows(cfg, target)
        results.append(res)
        if out_dir is not None:
            _write_rows(Path(out_dir) / "convergence" / f"{target.name}__tv.csv", res.rows)
            _write_rows(
                Path(out_dir) / "convergence" / f"{target.name}__slopes.csv",
                [[t, s] for t, s in zip(res.times, res.slopes)],
            )
    return results


# -- zeta sweep ----------------------------------------------------------------
@dataclass
class SweepReport:
    target: str
    zetas: np.ndarray
    window_tv: np.ndarray
    zeta_star: float
    curves: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def table(self) -> np.ndarray:
        return np.column_stack([self.zetas, self.window_tv])


def select_zeta(zetas, scores) -> float:
    """Grid value with the smallest score; ties go to the smaller zeta."""
    z = np.asarray(zetas, dtype=float)
    s = np.asarray(scores, dtype=float)
    best = s.min()
    return float(z[s == best].min())


def run_zeta_sweep(cfg: ExperimentConfig, target: Target, out_dir=None) -> SweepReport:
    """One zeta-DPS run per grid value, scored by mean TV over ``t <= cfg.zeta_window``."""
    ref, _ = _guard(target, reference_field, cfg, target)
    zetas = np.asarray(cfg.zeta_grid, dtype=float)
    scores, curves, files = [], {}, []
    d = Path(out_dir) / target.name / "zeta_sweep" if out_dir is not None else None
    for z in zetas:
        f = _guard(target, sampler_field, cfg, target, "zeta_dps", float(z), f"zeta={z:.4f}")
        c = tv_curve(f, ref, f"zeta={z:.2f}")
        curves[float(z)] = c
        scores.append(c.window_mean(cfg.t_min, cfg.zeta_window))
        if d is not None:
            p = d / f"zeta={z:.2f}.npz"
            d.mkdir(parents=True, exist_ok=True)
            np.savez_compressed(p, t_grid=f.t_grid, x_grid=f.x_grid, values=f.values, flagged=f.flagged,
                                tv=c.tv, zeta=z)
            files.append(p)
    rep = SweepReport(target.name, zetas, np.asarray(scores), select_zeta(zetas, scores), curves, files)
    if d is not None:
        files.append(_write_rows(d / "sweep.csv", rep.table()))
        (d / "zeta_star.txt").write_text(f"{rep.zeta_star:.2f}\n")
        files.append(d / "zeta_star.txt")
    return rep


# -- TV vs time -----------------------------------------------------------------
def run_tv_curve(cfg: ExperimentConfig, target: Target, out_dir=None) -> PanelOutput:
    """TV-versus-time of FSR and each method (no images)."""
    out = run_panel(cfg, target, None, render=False)
    if out_dir is not None:
        cols, table = out.tv_table()
        p = _write_rows(Path(out_dir) / f"{target.name}__tv_curve.csv", table)
        (Path(out_dir) / f"{target.name}__tv_curve.json").write_text(
            json.dumps({"tv_columns": ["t"] + cols, "reference": out.reference}, indent=2) + "\n"
        )
        out.files += [p, Path(out_dir) / f"{target.name}__tv_curve.json"]
    return out


def load_field(path) -> DensityField:
    with np.load(path) as d:
        label = str(d["label"]) if "label" in d else ""
        return DensityField(d["t_grid"], d["x_grid"], d["values"], label, d["flagged"])
