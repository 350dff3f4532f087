"""Command-line front end.

Subcommands ``integrate``, ``sweep``, ``certify``, ``limit`` and ``plotdata``
all read one config file and write their results below ``--out``. Exit
codes: 0 success, 2 config error, 3 numerical failure, 4 certificate
violation. ``IMPGEOD_WORKERS`` caps the process pool used for ladders.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis
from ._jit import backend_name
from .background import BackgroundGeodesic, seed_family_data
from .config import RunConfig, load_config
from .core import validate_seed
from .errors import CertificateViolation, ConfigError, ImpgeodError
from .integrator import IntegrationConfig, integrate_global, integrate_through_wave, write_trajectory_csv

log = logging.getLogger("impgeod")

PLOT_SERIES = ("U", "V", "Z2", "Z3", "Z4", "dU", "dV", "dZ2", "dZ3", "dZ4",
               "F_residual", "norm_residual")


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings "inf", "-inf", "nan"."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return obj


def write_json(path: Path, payload: dict) -> None:
    # float repr round-trips, i.e. at most 17 significant digits
    path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=False) + "\n")


def _inputs(cfg: RunConfig) -> dict:
    return cfg.to_dict()


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.outputs.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _objects(cfg: RunConfig):
    bg = cfg.background()
    validate_seed(cfg.seed, bg).raise_for_failure()
    return bg, cfg.make_profile(), cfg.make_mollifier()


def cmd_integrate(cfg: RunConfig) -> dict:
    bg, profile, moll = _objects(cfg)
    out = _out_dir(cfg)
    traj = integrate_global(cfg.seed, cfg.run.eps, profile, moll, bg, cfg.integration,
                            t_span=cfg.run.t_span)
    times = traj.sample_times(cfg.outputs.sample_dt)
    write_trajectory_csv(traj, out / "trajectory.csv", times)
    _, _, f, df, nr = traj.diagnostics(times)
    report = {
        "command": "integrate", "inputs": _inputs(cfg), "eps": cfg.run.eps,
        "crossings": [{"index": c.index, "alpha": c.alpha, "beta": c.beta, "direction": c.direction,
                       "crossed": c.crossed, "n_steps": c.n_steps,
                       "exit_state": c.exit_state.vector().tolist()} for c in traj.crossings],
        "segments": [{"kind": s.kind, "t0": s.t0, "t1": s.t1} for s in traj.segments],
        "diagnostics": {"max_abs_F": float(np.max(np.abs(f))), "max_abs_dF": float(np.max(np.abs(df))),
                        "max_abs_norm_residual": float(np.max(np.abs(nr)))},
        "flags": list(traj.flags),
    }
    write_json(out / "integrate_report.json", report)
    return report


def cmd_sweep(cfg: RunConfig, workers: int = 1) -> dict:
    bg, profile, moll = _objects(cfg)
    out = _out_dir(cfg)
    ladder = cfg.ladder.values()
    rungs = analysis.ladder_observables(cfg.seed, profile, moll, bg, cfg.integration, ladder, workers)
    report = {"command": "sweep", "inputs": _inputs(cfg), "ladder": ladder.tolist(), "rungs": rungs}
    if len(rungs) >= 3:
        values, fits, confident, notes = analysis.extrapolate_rungs(rungs)
        report.update({"fits": {k: f.to_dict() for k, f in fits.items()},
                       "confident": confident, "notes": notes})
    else:
        report.update({"fits": None, "confident": False,
                       "notes": ["fewer than 3 rungs: no extrapolation"]})
    write_json(out / "sweep_report.json", report)
    return report


def cmd_certify(cfg: RunConfig) -> dict:
    bg, profile, moll = _objects(cfg)
    out = _out_dir(cfg)
    cert = analysis.seed_certificate(cfg.seed, profile, moll, bg, cfg.C1)
    geo = BackgroundGeodesic.from_seed(cfg.seed, bg)
    checks = []
    for k in range(cfg.ladder.count):
        eps = cert.eps0 * 2.0 ** -k
        entry = seed_family_data(geo, eps)
        row = {"eps": eps, "alpha": entry.t}
        try:
            _, rec = integrate_through_wave(entry, eps, profile, moll, bg, cfg.seed.e,
                                            cfg.integration, certificate=cert)
            row.update({"beta": rec.beta, "exit_by_eta": rec.beta <= entry.t + cert.eta,
                        "margin": entry.t + cert.eta - rec.beta})
        except CertificateViolation as exc:
            row.update({"beta": None, "exit_by_eta": False, "error": str(exc)})
        checks.append(row)
    failures = sum(not r["exit_by_eta"] for r in checks)
    report = {"command": "certify", "inputs": _inputs(cfg), "certificate": cert.to_dict(),
              "ladder_checks": checks, "certified_failures": failures}
    write_json(out / "certificate.json", report)
    if failures:
        raise CertificateViolation(f"{failures} certified rung(s) did not exit by alpha + eta")
    return report


def cmd_limit(cfg: RunConfig, workers: int = 1) -> dict:
    bg, profile, moll = _objects(cfg)
    out = _out_dir(cfg)
    ladder = cfg.ladder.values()
    jd = analysis.jump_extrapolate(cfg.seed, profile, moll, bg, cfg.integration, ladder,
                                   moll_alt=cfg.make_mollifier_alt(), workers=workers)
    lim = analysis.limiting_geodesic(cfg.seed, jd, bg)
    assoc = analysis.association_verdict(cfg.seed, profile, moll, bg, lim, cfg.integration,
                                         ladder, workers=workers)
    seed_plus = lim.raw_plus_seed
    s = np.array([1.0, 1.0, bg.sigma])
    norm = float(-2 * seed_plus.U0dot * seed_plus.V0dot + np.sum(s * seed_plus.Z0dot ** 2))
    report = {"command": "limit", "inputs": _inputs(cfg), "ladder": ladder.tolist(),
              "jump": jd.to_dict(), "rates": jd.rates, "confident": jd.confident,
              "limiting_geodesic": lim.to_dict(), "exit_tangent_norm": norm,
              "association": assoc.to_dict()}
    if jd.spread is not None:
        report["mollifier_independence"] = analysis.mollifier_independence(jd)
    write_json(out / "limit_report.json", report)
    return report


def cmd_plotdata(cfg: RunConfig) -> list:
    bg, profile, moll = _objects(cfg)
    out = _out_dir(cfg)
    paths = []
    for k, eps in enumerate(cfg.ladder.values()):
        traj = integrate_global(cfg.seed, float(eps), profile, moll, bg, cfg.integration,
                                t_span=cfg.run.t_span)
        times = traj.sample_times(cfg.outputs.sample_dt)
        pos, vel, f, _, nr = traj.diagnostics(times)
        cols = np.column_stack([pos, vel, f, nr])
        path = out / f"plotdata_rung{k}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "t", "series", "value"])
            for j, name in enumerate(PLOT_SERIES):
                for t, v in zip(times, cols[:, j]):
                    w.writerow([f"{eps:.17g}", f"{t:.17g}", name, f"{v:.17g}"])
        paths.append(str(path))
    return paths


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="impgeod", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (("integrate", "one global trajectory: CSV plus report"),
                            ("sweep", "exit observables along the eps ladder"),
                            ("certify", "certificate constants and certified exit checks"),
                            ("limit", "jump data, limiting geodesic and association report"),
                            ("plotdata", "long-format CSV per ladder rung")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="YAML or JSON run config")
        sp.add_argument("--out", help="output directory (overrides outputs.dir)")
        sp.add_argument("--eps", type=float, help="override run.eps")
        sp.add_argument("--crossings", type=int, help="override integration.max_crossings")
        sp.add_argument("--ladder", type=int, help="override ladder.count")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    from dataclasses import replace

    if args.out:
        cfg = cfg.replace(outputs=replace(cfg.outputs, dir=args.out))
    if args.eps is not None:
        if not args.eps > 0:
            raise ConfigError("--eps must be positive")
        cfg = cfg.replace(run=replace(cfg.run, eps=args.eps))
    if args.crossings is not None:
        cfg = cfg.replace(integration=IntegrationConfig(
            **{**cfg.integration.__dict__, "max_crossings": args.crossings}))
    if args.ladder is not None:
        lad = replace(cfg.ladder, count=args.ladder)
        lad.values()
        cfg = cfg.replace(ladder=lad)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    workers = analysis.workers_from_env()
    try:
        cfg = apply_overrides(load_config(args.config), args)
        log.info("backend: %s, workers: %d", backend_name(), workers)
        if args.command == "integrate":
            cmd_integrate(cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg, workers)
        elif args.command == "certify":
            cmd_certify(cfg)
        elif args.command == "limit":
            cmd_limit(cfg, workers)
        else:
            cmd_plotdata(cfg)
    except ImpgeodError as exc:
        print(f"impgeod {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
