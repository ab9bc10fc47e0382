"""Run configuration, single runs, sweeps and analytic-vs-oracle validation."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import (
    FockSpace,
    SystemParams,
    check_dispersive_validity,
    default_fock_dim,
    derive_coefficients,
)
from .analytic import analytic_block, initial_block
from .errors import InvalidParams, MissingBareCouplings, NumericalFailure, StepTooLarge, TruncationTooSmall
from .observables import (
    OBSERVABLE_GROUPS,
    SERIES_COLUMNS,
    ObservableSeries,
    audit_closed_forms,
    compute_series,
    resolved_Fy_minimum,
    state_diagnostics,
)
from .oracle import IntegratorConfig, integrate
from .presets import PRESETS

log = logging.getLogger(__name__)

ENGINES = ("analytic", "oracle", "both")
FORMATS = ("csv", "json")
SWEEP_AXES = {"N_total": "N_total", "n_excited": "n_excited", "k_field": "k", "k_mol": "kprime", "alpha": "alpha"}

# validation thresholds
BLOCK_TOL = 1e-6
OBSERVABLE_TOL = 1e-6
TRACE_TOL_ANALYTIC = 1e-10
TRACE_TOL_ORACLE = 1e-8
HERMITICITY_TOL = 1e-8
MIN_EIG_TOL = -1e-9


@dataclass
class RunConfig:
    """Fully resolved run settings. Rates and frequencies are in units of omega."""

    N_total: int | None = None
    n_excited: int | None = None
    alpha: complex = 1.0
    k: float = 0.0
    kprime: float = 0.0
    omega0: float | None = None
    omega_eg: float | None = None
    g: float | None = None
    delta: float | None = None
    t_max: float = 3.0
    n_steps: int = 3000
    fock_dim: int | None = None
    engine: str = "analytic"
    observables: tuple = tuple(OBSERVABLE_GROUPS)
    format: str = "csv"
    out: str | None = None
    preset: str | None = None
    step: float = 1e-3
    frame: str = "interaction"
    notes: list = field(default_factory=list)

    def validate(self):
        if self.N_total is None or self.n_excited is None:
            raise InvalidParams("invalid config: N_total and n_excited are required (or use --preset)")
        if self.engine not in ENGINES:
            raise InvalidParams(f"invalid config: engine must be one of {ENGINES}")
        if self.format not in FORMATS:
            raise InvalidParams(f"invalid config: format must be one of {FORMATS}")
        if not (self.t_max > 0 and self.n_steps >= 1):
            raise InvalidParams("invalid config: t_max must be > 0 and steps >= 1")
        unknown = set(self.observables) - set(OBSERVABLE_GROUPS)
        if unknown:
            raise InvalidParams(f"invalid config: unknown observables {sorted(unknown)}")
        if self.fock_dim is not None and self.fock_dim < 2:
            raise InvalidParams("invalid config: fock_dim must be >= 2")
        self.system_params()

    def system_params(self) -> SystemParams:
        omega = 1.0
        if self.g is not None and self.delta is not None:
            if self.delta == 0:
                raise InvalidParams("invalid config: delta must be nonzero")
            omega = self.g**2 / self.delta
        return SystemParams(
            N_total=self.N_total,
            n_excited=self.n_excited,
            omega_disp=omega,
            k_field=self.k * omega,
            k_mol=self.kprime * omega,
            alpha=self.alpha,
            omega_0=None if self.omega0 is None else self.omega0 * omega,
            omega_eg=None if self.omega_eg is None else self.omega_eg * omega,
            g_coupling=self.g,
            delta_detuning=self.delta,
        )

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["alpha"] = [float(np.real(self.alpha)), float(np.imag(self.alpha))]
        d["observables"] = list(self.observables)
        d.pop("out")
        d.pop("notes")
        return d


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)} - {"notes"}


def resolve_config(preset: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a config from a preset plus explicit overrides (overrides win, with a warning)."""
    cfg = RunConfig()
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if preset is not None:
        if preset not in PRESETS:
            raise InvalidParams(f"invalid config: unknown preset {preset!r}")
        cfg.preset = preset
        for key, val in PRESETS[preset].items():
            if key == "note":
                cfg.notes.append(f"{preset}: {val}")
            else:
                setattr(cfg, key, val)
    for key, val in overrides.items():
        if key not in _CONFIG_FIELDS:
            raise InvalidParams(f"invalid config: unknown key {key!r}")
        if preset is not None and key in PRESETS[preset] and PRESETS[preset][key] != val:
            msg = f"override of preset {preset} value {key}={PRESETS[preset][key]!r} -> {val!r}"
            log.warning(msg)
            cfg.notes.append(msg)
        setattr(cfg, key, val)
    if isinstance(cfg.observables, str):
        cfg.observables = tuple(s.strip() for s in cfg.observables.split(",") if s.strip())
    cfg.observables = tuple(cfg.observables)
    cfg.alpha = complex(cfg.alpha)
    cfg.validate()
    if cfg.step > cfg.t_max / cfg.n_steps * (1 + 1e-12):
        # the oracle cannot emit between steps: coarsen the output grid instead of the step
        n = math.ceil(cfg.t_max / cfg.step - 1e-9)
        msg = f"oracle step {cfg.step:g} exceeds grid spacing; grid coarsened from {cfg.n_steps} to {n} intervals"
        log.warning(msg)
        cfg.notes.append(msg)
        cfg.n_steps = n
    return cfg


@dataclass
class RunResult:
    config: RunConfig
    series: list[ObservableSeries]
    metadata: dict
    analytic_blocks: list | None = None
    oracle_blocks: list | None = None


def _time_grid(cfg: RunConfig):
    return np.linspace(0.0, cfg.t_max, cfg.n_steps + 1)


def _dispersive_report(params):
    try:
        v = check_dispersive_validity(params)
    except MissingBareCouplings:
        return "unchecked"
    return {"ratio": v.ratio, "bound": v.bound, "factor": v.factor, "valid": v.valid}


def _max_dev(a: np.ndarray, b: np.ndarray) -> float:
    d = np.abs(a - b)
    return float(np.nanmax(d)) if np.isfinite(d).any() else float("nan")


def run(cfg: RunConfig, keep_blocks: bool = False) -> RunResult:
    """Evaluate the requested engines on the uniform ``omega t`` grid."""
    params = cfg.system_params()
    coeffs = derive_coefficients(params)
    dim = cfg.fock_dim or default_fock_dim(params.alpha)
    space = FockSpace(dim)
    omega_t = _time_grid(cfg)
    times = omega_t / params.omega_disp

    meta = {
        "version": __version__,
        "config": cfg.as_dict(),
        "system": {
            "omega_disp": params.omega_disp,
            "omega_0": params.omega_0,
            "omega_eg": params.omega_eg,
            "k_field": params.k_field,
            "k_mol": params.k_mol,
            "q": coeffs.q_param,
            "A": coeffs.A_coeff,
            "B": coeffs.B_coeff,
            "m_ground": params.m_ground,
        },
        "fock_dim": dim,
        "dispersive_validity": _dispersive_report(params),
        "notes": list(cfg.notes),
    }
    series = []
    a_blocks = o_blocks = None
    if cfg.engine in ("analytic", "both"):
        a_blocks = [analytic_block(params, coeffs, space, t) for t in times]
        series.append(compute_series(a_blocks, params, coeffs, "analytic", cfg.observables))
    if cfg.engine in ("oracle", "both"):
        icfg = IntegratorConfig(step=cfg.step / params.omega_disp, t_max=times[-1], fock_dim=dim, n_out=cfg.n_steps, frame=cfg.frame)
        res = integrate(initial_block(params, space, tol=None), params, coeffs, icfg)
        o_blocks = res.blocks
        series.append(compute_series(o_blocks, params, coeffs, "oracle", cfg.observables))
        meta["oracle"] = {
            "step": res.step,
            "frame": res.frame,
            "certificate": res.certificate.as_dict() if res.certificate else None,
            "max_top_level_population": res.max_leak,
            "warnings": res.warnings,
        }
    if a_blocks is not None and o_blocks is not None:
        meta["comparison"] = {
            "max_block_deviation": max(
                float(np.abs(a.as_stack() - o.as_stack()).max()) for a, o in zip(a_blocks, o_blocks)
            ),
            "observables": {
                name: _max_dev(series[0].columns[name], series[1].columns[name]) for name in SERIES_COLUMNS[1:-1]
            },
        }

    ref = series[0]
    if set(cfg.observables) == set(OBSERVABLE_GROUPS):
        audit = audit_closed_forms(ref, params, coeffs)
        meta["closed_form_audit"] = [e.as_dict() for e in audit]
        meta["discrepancies"] = [e.as_dict() for e in audit if e.status != "match"]
    summary = {}
    for s in series:
        for name in ("Fy_eq30", "Fy_eq31", "s1"):
            col = s.columns[name]
            if np.isfinite(col).any():
                summary[f"min_{name}_{s.source}"] = float(np.nanmin(col))
        summary[f"max_trace_err_{s.source}"] = float(np.nanmax(s.columns["trace_err"]))
    if "fy" in cfg.observables:
        # the output grid can alias the narrow revival windows at large A
        for name, with_sz in (("Fy_eq30", True), ("Fy_eq31", False)):
            val, where = resolved_Fy_minimum(params, coeffs, space, float(times[-1]), include_sigma_z=with_sz)
            summary[f"min_{name}_resolved"] = val
            summary[f"argmin_{name}_resolved"] = where
    meta["summary"] = summary
    return RunResult(cfg, series, meta, a_blocks if keep_blocks else None, o_blocks if keep_blocks else None)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None or not math.isfinite(x):
        return ""
    return repr(float(x))


def table_text(series: list[ObservableSeries], fmt: str = "csv") -> str:
    rows = [row for s in series for row in s.rows()]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SERIES_COLUMNS])
        return buf.getvalue()
    clean = [[(r[c] if isinstance(r[c], str) or math.isfinite(r[c]) else None) for c in SERIES_COLUMNS] for r in rows]
    return json.dumps({"columns": list(SERIES_COLUMNS), "rows": clean}, indent=1) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def metadata_text(meta: dict) -> str:
    return json.dumps(meta, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def metadata_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".meta.json")


def write_outputs(result: RunResult, out: str | Path, fmt: str = "csv") -> tuple[Path, Path]:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(table_text(result.series, fmt))
    meta_p = metadata_path(out)
    meta_p.write_text(metadata_text(result.metadata))
    return out, meta_p


def summary_lines(result: RunResult) -> list[str]:
    lines = []
    comp = result.metadata.get("comparison")
    if comp:
        lines.append(f"oracle/analytic max block deviation: {comp['max_block_deviation']:.3e}")
    for key, val in sorted(result.metadata["summary"].items()):
        if key.startswith("min_Fy"):
            lines.append(f"{key}: {val:.6g} ({'squeezing' if val < 0 else 'no squeezing'})")
    cert = result.metadata.get("oracle", {}).get("certificate")
    if cert:
        lines.append(f"step-halving deviation: {cert['max_deviation']:.3e}")
    n_disc = len(result.metadata.get("discrepancies", []))
    if "discrepancies" in result.metadata:
        lines.append(f"closed-form discrepancies: {n_disc}")
    return lines


# ---------------------------------------------------------------------------
# sweeps


def _sweep_point(args):
    base, axis, value, half_filling, out_dir, idx = args
    entry = {"index": idx, "axis": axis, "value": value}
    try:
        overrides = {SWEEP_AXES[axis]: value}
        if half_filling and axis == "N_total":
            overrides["n_excited"] = max(1, int(value) // 2)
        cfg = dataclasses.replace(base, notes=list(base.notes), **overrides)
        if isinstance(cfg.alpha, (int, float)):
            cfg.alpha = complex(cfg.alpha)
        cfg.validate()
        result = run(cfg)
        name = f"point_{idx:03d}.{cfg.format}"
        write_outputs(result, Path(out_dir) / name, cfg.format)
        entry.update(status="ok", file=name, summary=result.metadata["summary"])
    except (InvalidParams, NumericalFailure, TruncationTooSmall) as exc:
        entry.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return entry


def sweep(base: RunConfig, axis: str, values: list, out_dir: str | Path, half_filling: bool = False, jobs: int = 1) -> dict:
    """Run ``base`` once per value of ``axis``; failures are recorded, not fatal."""
    if axis not in SWEEP_AXES:
        raise InvalidParams(f"invalid config: sweep axis must be one of {sorted(SWEEP_AXES)}")
    if not values:
        raise InvalidParams("empty sweep")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(base, axis, v, half_filling, str(out_dir), i) for i, v in enumerate(values)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_sweep_point, tasks))
    else:
        entries = [_sweep_point(t) for t in tasks]
    index = {"axis": axis, "values": [_jsonable(v) for v in values], "base": base.as_dict(), "points": entries}
    for e in entries:
        e["value"] = _jsonable(e["value"])
    (out_dir / "index.json").write_text(metadata_text(index))
    return index


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


# ---------------------------------------------------------------------------
# validation


def validate(cfg: RunConfig) -> dict:
    """Run both engines and check every sanity and agreement threshold."""
    cfg = dataclasses.replace(cfg, engine="both", notes=list(cfg.notes))
    params = cfg.system_params()
    coeffs = derive_coefficients(params)
    dim = cfg.fock_dim or default_fock_dim(params.alpha)
    space = FockSpace(dim)
    times = _time_grid(cfg) / params.omega_disp
    failures = []
    report = {"config": cfg.as_dict(), "fock_dim": dim, "thresholds": {
        "block_deviation": BLOCK_TOL,
        "observable_deviation": OBSERVABLE_TOL,
        "trace_analytic": TRACE_TOL_ANALYTIC,
        "trace_oracle": TRACE_TOL_ORACLE,
        "hermiticity": HERMITICITY_TOL,
        "min_eigenvalue": MIN_EIG_TOL,
        "step_halving": IntegratorConfig.step_tolerance,
    }}

    a_blocks = o_blocks = None
    try:
        a_blocks = [analytic_block(params, coeffs, space, t) for t in times]
    except TruncationTooSmall as exc:
        failures.append({"check": "TruncationTooSmall", "engine": "analytic", "detail": str(exc)})

    icfg = IntegratorConfig(step=cfg.step / params.omega_disp, t_max=times[-1], fock_dim=dim, n_out=cfg.n_steps, frame=cfg.frame)
    try:
        res = integrate(initial_block(params, space, tol=None), params, coeffs, icfg)
        o_blocks = res.blocks
        report["certificate"] = res.certificate.as_dict()
    except StepTooLarge as exc:
        report["certificate"] = exc.certificate.as_dict()
        failures.append({"check": "StepTooLarge", "engine": "oracle", "detail": str(exc)})
        o_blocks = exc.result.blocks
    except NumericalFailure as exc:
        failures.append({"check": type(exc).__name__, "engine": "oracle", "detail": str(exc)})

    for name, blocks, trace_tol in (("analytic", a_blocks, TRACE_TOL_ANALYTIC), ("oracle", o_blocks, TRACE_TOL_ORACLE)):
        if blocks is None:
            continue
        diags = [state_diagnostics(b) for b in blocks]
        sanity = {
            "max_trace_err": max(d["trace_err"] for d in diags),
            "max_hermiticity": max(d["hermiticity"] for d in diags),
            "min_eigenvalue": min(d["min_eig"] for d in diags),
        }
        report[f"{name}_sanity"] = sanity
        if sanity["max_trace_err"] > trace_tol:
            failures.append({"check": "trace", "engine": name, "detail": sanity["max_trace_err"]})
        if sanity["max_hermiticity"] > HERMITICITY_TOL:
            failures.append({"check": "hermiticity", "engine": name, "detail": sanity["max_hermiticity"]})
        if sanity["min_eigenvalue"] < MIN_EIG_TOL:
            failures.append({"check": "positivity", "engine": name, "detail": sanity["min_eigenvalue"]})

    if a_blocks is not None and o_blocks is not None:
        block_dev = max(float(np.abs(a.as_stack() - o.as_stack()).max()) for a, o in zip(a_blocks, o_blocks))
        sa = compute_series(a_blocks, params, coeffs, "analytic")
        so = compute_series(o_blocks, params, coeffs, "oracle")
        obs_dev = {n: _max_dev(sa.columns[n], so.columns[n]) for n in SERIES_COLUMNS[1:-1]}
        report["max_block_deviation"] = block_dev
        report["observable_deviation"] = obs_dev
        if block_dev > BLOCK_TOL:
            failures.append({"check": "block_deviation", "detail": block_dev})
        for n, v in obs_dev.items():
            if n not in ("trace_err",) and v > OBSERVABLE_TOL:
                failures.append({"check": "observable_deviation", "observable": n, "detail": v})

    report["failures"] = failures
    report["status"] = "PASS" if not failures else "FAIL"
    return report
