"""Command-line front end.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import InvalidParams, NumericalFailure, TruncationTooSmall
from .presets import PRESETS
from .runner import (
    RunConfig,
    SWEEP_AXES,
    metadata_text,
    resolve_config,
    run,
    summary_lines,
    sweep,
    table_text,
    validate,
    write_outputs,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3

# flag dest -> RunConfig field
_FLAG_FIELDS = {
    "n_total": "N_total",
    "n_excited": "n_excited",
    "k": "k",
    "kprime": "kprime",
    "omega0": "omega0",
    "omega_eg": "omega_eg",
    "g": "g",
    "delta": "delta",
    "tmax": "t_max",
    "steps": "n_steps",
    "fock_dim": "fock_dim",
    "engine": "engine",
    "observables": "observables",
    "format": "format",
    "out": "out",
    "step": "step",
    "frame": "frame",
}


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat JSON key-value file; flags override it")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--engine", choices=("analytic", "oracle", "both"))
    p.add_argument("--n-total", type=int)
    p.add_argument("--n-excited", type=int)
    p.add_argument("--alpha-re", type=float)
    p.add_argument("--alpha-im", type=float)
    p.add_argument("--k", type=float, help="cavity damping in units of omega")
    p.add_argument("--kprime", type=float, help="molecular damping in units of omega")
    p.add_argument("--omega0", type=float, help="cavity frequency in units of omega")
    p.add_argument("--omega-eg", type=float, help="molecular splitting in units of omega")
    p.add_argument("--g", type=float, help="bare coupling (validity check; sets omega = g^2/delta)")
    p.add_argument("--delta", type=float, help="detuning omega_eg - omega_0")
    p.add_argument("--tmax", type=float, help="final omega t")
    p.add_argument("--steps", type=int, help="number of grid intervals in omega t")
    p.add_argument("--fock-dim", type=int)
    p.add_argument("--observables", help="comma list from: entropy,s1,fy,n_photon")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out", help="output table path; metadata goes to <stem>.meta.json")
    p.add_argument("--step", type=float, help="oracle RK4 step in units of 1/omega (default 1e-3)")
    p.add_argument("--frame", choices=("interaction", "lab"), help="oracle integration frame")


def _load_config_file(path: str) -> dict:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict) or any(isinstance(v, (dict, list)) for v in raw.values()):
        raise InvalidParams("invalid config: config file must be a flat key-value object")
    return {k.replace("-", "_"): v for k, v in raw.items()}


def _config_from_args(args) -> RunConfig:
    values = {}
    preset = args.preset
    if args.config:
        file_vals = _load_config_file(args.config)
        preset = preset or file_vals.pop("preset", None)
        file_vals.pop("preset", None)
        values.update(file_vals)
    for dest, field_name in _FLAG_FIELDS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values.pop(dest, None)
            values[field_name] = v
    # file keys may use either flag spelling or field names
    values = {_FLAG_FIELDS.get(k, k): v for k, v in values.items()}
    re_ = values.pop("alpha_re", None)
    im_ = values.pop("alpha_im", None)
    if args.alpha_re is not None:
        re_ = args.alpha_re
    if args.alpha_im is not None:
        im_ = args.alpha_im
    if re_ is not None or im_ is not None:
        base = complex(PRESETS[preset]["alpha"]) if preset else 1.0 + 0j
        values["alpha"] = complex(base.real if re_ is None else re_, base.imag if im_ is None else im_)
    return resolve_config(preset, values)


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    result = run(cfg)
    if cfg.out:
        write_outputs(result, cfg.out, cfg.format)
    else:
        sys.stdout.write(table_text(result.series, cfg.format))
    for line in summary_lines(result):
        print(line, file=sys.stderr)
    return EXIT_OK


def _parse_value(axis: str, text: str):
    if axis in ("N_total", "n_excited"):
        return int(text)
    if axis == "alpha":
        return complex(text.replace(" ", ""))
    return float(text)


def _cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    if args.axis not in SWEEP_AXES:
        raise InvalidParams(f"invalid config: sweep axis must be one of {sorted(SWEEP_AXES)}")
    try:
        values = [_parse_value(args.axis, v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidParams(f"invalid config: bad sweep value ({exc})") from exc
    index = sweep(cfg, args.axis, values, args.out_dir, half_filling=args.half_filling, jobs=args.jobs)
    for p in index["points"]:
        summ = p.get("summary", {})
        key = "min_Fy_eq30_resolved" if "min_Fy_eq30_resolved" in summ else None
        extra = f" {key}={summ[key]:.6g}" if key else ""
        print(f"{args.axis}={p['value']}: {p['status']}{extra}", file=sys.stderr)
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = _config_from_args(args)
    report = validate(cfg)
    text = metadata_text(report)
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"validation {report['status']}", file=sys.stderr)
    for f in report["failures"]:
        what = f"{f['check']}[{f['observable']}]" if "observable" in f else f["check"]
        print(f"  FAIL {what}: {f.get('detail')}", file=sys.stderr)
    return EXIT_OK if report["status"] == "PASS" else EXIT_VALIDATION


def _cmd_audit(args) -> int:
    cfg = _config_from_args(args)
    cfg.engine = "analytic"
    result = run(cfg)
    audit = result.metadata["closed_form_audit"]
    doc = {"config": cfg.as_dict(), "entries": audit}
    text = metadata_text(doc)
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    for e in audit:
        where = "" if e["first_divergent_omega_t"] is None else f" from omega_t={e['first_divergent_omega_t']:g}"
        match = ",".join(e["matched_readings"]) or "none"
        print(f"{e['equation']} {e['status']} max|dev|={e['max_abs_dev']:.3g}{where}; matching readings: {match}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="excitonqed", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run: observable table + metadata")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="one run per value of a parameter axis")
    _add_run_flags(p)
    p.add_argument("--axis", required=True, help=f"one of {', '.join(SWEEP_AXES)}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--half-filling", action="store_true", help="with axis N_total, set n_excited = N_total // 2")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate", help="analytic vs oracle agreement and state sanity")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("audit", help="compare printed closed forms with the generic pipeline")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_audit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidParams as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, TruncationTooSmall) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
