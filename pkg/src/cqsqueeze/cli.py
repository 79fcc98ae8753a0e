"""``cqsqueeze`` command-line experiment runner.

Every subcommand reads one YAML config (``--config``), applies ``--set key=value``
overrides, checks all pulses before computing anything, writes CSV/JSON into
``output`` and finishes with a ``manifest.json`` describing the run.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from cqsqueeze import __version__
from cqsqueeze.config import (
    PERIOD_CONVENTION,
    REFERENCE_BETA,
    ConfigError,
    ExperimentConfig,
    Pulse,
    build_pulses,
    length_for,
    load_config,
    period_unit,
    step_config,
)
from cqsqueeze.propagator import DivergenceError, propagate
from cqsqueeze.pulses import CqParams, DomainError, beta_from_amplitude, family_curve, min_width, soliton_period
from cqsqueeze.pulses import solve_bistable_amplitudes
from cqsqueeze.squeezing import curve_from_trajectory, minimize_form, theta_scan
from cqsqueeze.validation import run_suite

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_VALIDATION = 0, 2, 3, 4


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]+", "_", label).strip("_") or "pulse"


def _fmt(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) if not isinstance(v, str) else v for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


class Run:
    """Output directory plus the manifest being assembled for one command."""

    def __init__(self, command: str, cfg: ExperimentConfig):
        self.cfg = cfg
        self.outdir = Path(cfg.output)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "tool": "cqsqueeze",
            "version": __version__,
            "command": command,
            "name": cfg.name,
            "config_hash": cfg.config_hash(),
            "soliton_period_convention": PERIOD_CONVENTION,
            "z_unit": {
                "mode": cfg.analysis.period,
                "reference_beta": REFERENCE_BETA,
                "reference_period": soliton_period(REFERENCE_BETA),
            },
            "config": cfg.to_dict(),
            "files": [],
            "results": [],
        }
        (self.outdir / "config.yaml").write_text(cfg.dump())

    def add_file(self, path: Path, kind: str, **meta) -> None:
        self.manifest["files"].append({"file": str(path.relative_to(self.outdir)), "kind": kind, **meta})
        print(f"[cqsqueeze] wrote {path}", file=sys.stderr)

    def finish(self, status: str) -> Path:
        self.manifest["status"] = status
        path = self.outdir / "manifest.json"
        path.write_text(json.dumps(self.manifest, indent=2) + "\n")
        return path


def _pulse_meta(cfg: ExperimentConfig, pulse: Pulse, L: float) -> dict:
    return {
        "pulse": pulse.label,
        "params": {"chi": pulse.params.chi, "gamma": pulse.params.gamma},
        "input": pulse.description,
        "own_soliton_period": pulse.own_period,
        "period_unit": period_unit(cfg, pulse),
        "length": L,
    }


def _map(cfg: ExperimentConfig, fn, jobs):
    if cfg.workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _squeeze_job(job):
    cfg, pulse, L = job
    traj = propagate(pulse.field, pulse.params, L, step_config(cfg))
    curve = curve_from_trajectory(
        traj,
        cfg.analysis.n_samples,
        soliton_period=period_unit(cfg, pulse),
        conjugate_coupling=cfg.analysis.conjugate_coupling,
        seed=cfg.analysis.seed,
    )
    return curve, traj.photon_drift(), traj.hamiltonian_drift()


def _scan_job(job):
    cfg, pulse, L = job
    thetas = np.linspace(0.0, 2.0 * np.pi, cfg.analysis.theta_points, endpoint=False)
    return theta_scan(pulse.field, pulse.params, L, thetas, step_config(cfg),
                      conjugate_coupling=cfg.analysis.conjugate_coupling)


def cmd_family(cfg: ExperimentConfig, run: Run) -> int:
    fam = cfg.family
    amps = np.linspace(fam.a_max / fam.n_points, fam.a_max, fam.n_points)
    turning = []
    for g in fam.gammas:
        params = CqParams(cfg.params.chi, g)
        path = run.outdir / f"family_gamma_{g:+.4f}.csv"
        _write_rows(path, ["amplitude", "tau"], family_curve(params, amps))
        run.add_file(path, "family_curve", gamma=g)
        try:
            tau_min, a_min = min_width(params)
            turning.append({"gamma": g, "tau_min": tau_min, "amplitude_at_min": a_min})
        except DomainError:
            turning.append({"gamma": g, "tau_min": None, "amplitude_at_min": None})
    path = run.outdir / "turning_points.json"
    path.write_text(json.dumps(turning, indent=2) + "\n")
    run.add_file(path, "turning_points")
    rows = []
    for m in fam.markers:
        params = CqParams(cfg.params.chi, m.gamma)
        for branch, a in zip(("lower", "upper"), solve_bistable_amplitudes(params, m.tau)):
            rows.append([m.label, branch, m.gamma, m.tau, a, beta_from_amplitude(params, a)])
    path = run.outdir / "markers.csv"
    _write_rows(path, ["label", "branch", "gamma", "tau", "amplitude", "beta"], rows)
    run.add_file(path, "markers")
    run.manifest["results"] = turning
    return EXIT_OK


def cmd_propagate(cfg: ExperimentConfig, run: Run) -> int:
    for pulse in build_pulses(cfg):
        L = length_for(cfg, pulse)
        traj = propagate(pulse.field, pulse.params, L, step_config(cfg))
        every = cfg.analysis.export_every or max(1, (len(traj.steps) - 1) // max(cfg.analysis.n_samples - 1, 1))
        path = traj.export(run.outdir / _slug(pulse.label), every=every)
        meta = _pulse_meta(cfg, pulse, L)
        meta.update(photon_number_drift=traj.photon_drift(), hamiltonian_drift=traj.hamiltonian_drift())
        run.add_file(path, "trajectory", pulse=pulse.label)
        run.manifest["results"].append(meta)
    return EXIT_OK


def cmd_squeeze(cfg: ExperimentConfig, run: Run) -> int:
    pulses = build_pulses(cfg)
    jobs = [(cfg, p, length_for(cfg, p)) for p in pulses]
    for (_, pulse, L), (curve, dn, dh) in zip(jobs, _map(cfg, _squeeze_job, jobs)):
        path = curve.to_csv(run.outdir / f"curve_{_slug(pulse.label)}.csv")
        run.add_file(path, "squeezing_curve", pulse=pulse.label)
        meta = _pulse_meta(cfg, pulse, L)
        meta.update(
            photon_number_drift=dn,
            hamiltonian_drift=dh,
            crosscheck_error=curve.crosscheck_error,
            final_R_opt=float(curve.R_opt[-1]),
            final_R_opt_dB=float(curve.R_opt_dB[-1]),
            min_R_opt_dB=float(np.min(curve.R_opt_dB)),
        )
        run.manifest["results"].append(meta)
    return EXIT_OK


def cmd_theta_scan(cfg: ExperimentConfig, run: Run) -> int:
    pulses = build_pulses(cfg)
    jobs = [(cfg, p, length_for(cfg, p)) for p in pulses]
    for (_, pulse, L), scan in zip(jobs, _map(cfg, _scan_job, jobs)):
        path = scan.to_csv(run.outdir / f"scan_{_slug(pulse.label)}.csv")
        run.add_file(path, "theta_scan", pulse=pulse.label)
        r_opt, th = minimize_form(*scan.form)
        meta = _pulse_meta(cfg, pulse, L)
        meta.update(R_opt=r_opt, theta_opt=th, R_max=float(np.max(scan.R)), form=list(scan.form))
        run.manifest["results"].append(meta)
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig, run: Run) -> int:
    v = cfg.validate
    report = {"passed": True, "pulses": []}
    for pulse in build_pulses(cfg):
        L = length_for(cfg, pulse, v.length)
        checks = run_suite(
            pulse.field, pulse.params, L, step_config(cfg),
            n_pairs=v.n_pairs, seed=cfg.analysis.seed,
            pairing_tolerance=v.pairing_tolerance, continuum_tolerance=v.continuum_tolerance,
        )
        ok = all(c.passed for c in checks)
        report["passed"] &= ok
        report["pulses"].append({"pulse": pulse.label, "length": L, "passed": ok,
                                 "checks": [c.as_dict() for c in checks]})
        for c in checks:
            print(f"[cqsqueeze] {pulse.label}: {c.name} {'PASS' if c.passed else 'FAIL'} "
                  f"measured={c.measured:.3e} tol={c.tolerance:.1e}", file=sys.stderr)
    path = run.outdir / "validation.json"
    path.write_text(json.dumps(report, indent=2) + "\n")
    run.add_file(path, "validation_report")
    run.manifest["results"] = [{"pulse": p["pulse"], "passed": p["passed"]} for p in report["pulses"]]
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


COMMANDS = {
    "family": cmd_family,
    "propagate": cmd_propagate,
    "squeeze": cmd_squeeze,
    "theta-scan": cmd_theta_scan,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cqsqueeze", description="Quantum squeezing of cubic-quintic NLS pulses")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="YAML experiment config")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config entry, e.g. analysis.length=2 or pulses.0.amplitude=1.2")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"cqsqueeze: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(args.command, cfg)
    try:
        code = COMMANDS[args.command](cfg, run)
    except DivergenceError as exc:
        run.manifest["error"] = str(exc)
        run.finish("diverged")
        print(f"cqsqueeze: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ConfigError as exc:
        run.manifest["error"] = str(exc)
        run.finish("config_error")
        print(f"cqsqueeze: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run.finish("ok" if code == EXIT_OK else "validation_failed")
    return code


if __name__ == "__main__":
    sys.exit(main())
