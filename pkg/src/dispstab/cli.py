"""Command-line front end: scenario file in, run directory with report and CSVs out.

Exit codes: 0 success, 2 configuration error, 3 convergence failure,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .config import ALL_STAGES, Scenario, build_scenario, bundled_path, load_config, load_schema
from .direction import Bump, DirectionSpec, decay_slope, direction_demo, momentum_gradient, norm_decay_curve, save_curve
from .errors import (
    ConfigError,
    ConvergenceError,
    DispStabError,
    IndeterminateError,
    InsufficientDataError,
)
from .evolution import measure_growth_rate
from .growing import (
    count_left_half_plane,
    empirical_lambda_bound,
    find_growing_mode,
    min_real_part,
    moving_kernel_limit,
    moving_kernel_prediction,
    track_k_lambda,
)
from .linearized import (
    criterion_verdict,
    linearize,
    momentum,
    momentum_branch,
    momentum_derivative,
)
from .profile import continue_branch, save_profile, solve_profile

log = logging.getLogger("dispstab")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_NUMERICAL = 0, 2, 3, 4

SUBCOMMAND_STAGES = {
    "solve": ["solve"],
    "spectrum": ["solve", "spectrum"],
    "criterion": ["solve", "spectrum", "criterion"],
    "growing-mode": ["solve", "growing_mode"],
    "moving-kernel": ["solve", "moving_kernel"],
    "evolve": ["solve", "growing_mode", "evolve"],
    "direction-demo": ["solve", "direction"],
}

# stage -> stages whose results it needs
REQUIRES = {
    "solve": [],
    "spectrum": ["solve"],
    "criterion": ["solve", "spectrum"],
    "growing_mode": ["solve"],
    "moving_kernel": ["solve"],
    "evolve": ["solve"],
    "direction": ["solve"],
}


def jsonable(obj):
    """Recursively convert numpy types to plain Python; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def order_stages(requested) -> list[str]:
    """Requested stages plus their prerequisites, in pipeline order."""
    need = set()

    def add(s):
        if s not in need:
            need.add(s)
            for d in REQUIRES[s]:
                add(d)

    for s in requested:
        add(s)
    return [s for s in ALL_STAGES if s in need]


def _exit_code_for(exc) -> int:
    if isinstance(exc, (ConfigError, InsufficientDataError)):
        return EXIT_CONFIG
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    return EXIT_NUMERICAL


class Pipeline:
    """Runs the stages of one scenario and collects a JSON-compatible report."""

    def __init__(self, scenario: Scenario, out_dir: Path | None = None, threads: int = 1):
        self.sc = scenario
        self.cfg = scenario.config
        self.out = out_dir
        self.threads = max(1, threads)
        self.report: dict = {
            "version": __version__,
            "command": "run",
            "scenario": dict(self.cfg),
            "stages": {},
            "timing": {},
            "resolution": {"half_length": scenario.grid.half_length, "n_points": scenario.grid.n_points},
            "exit_code": 0,
        }
        self.files: list[str] = []
        self.profile = None
        self.dP = None
        self.mode = None

    # -- helpers ---------------------------------------------------------
    def _path(self, name):
        if self.out is None:
            return None
        self.files.append(name)
        return self.out / name

    def _solver_kw(self):
        return {"tol": self.cfg["tolerance"], "max_iters": self.cfg["max_iters"]}

    def _dP_dc(self):
        if self.dP is None:
            sc = self.sc
            est, err = momentum_derivative(
                sc.model, sc.spec, sc.nl, sc.speed, sc.grid, self.cfg["dp_rel_step"], self.profile.samples, **self._solver_kw()
            )
            p = momentum(sc.model, sc.spec, self.profile)
            floor = self.cfg["dp_noise_rel"] * abs(p) / abs(sc.speed)
            self.dP = {
                "P": p,
                "dP_dc": est,
                "dP_dc_error_estimate": err,
                "noise_floor": max(floor, 10 * err),
                "rel_step": self.cfg["dp_rel_step"],
                "method": "Richardson over steps h, h/2",
            }
            self.report["momentum"] = self.dP
        return self.dP

    # -- stages ----------------------------------------------------------
    def stage_solve(self):
        sc = self.sc
        self.profile = solve_profile(sc.model, sc.spec, sc.nl, sc.speed, sc.grid, **self._solver_kw())
        self.report["profile"] = self.profile.summary()
        self.report["profile"]["decayed"] = self.profile.decayed
        path = self._path("profile.txt")
        if path:
            save_profile(path, self.profile)

    def stage_spectrum(self):
        sc = self.sc
        rep = linearize(sc.model, sc.spec, sc.nl, self.profile, self.cfg["kernel_tol"])
        self.linearized = rep
        self.report["linearized"] = rep.to_dict()

    def stage_criterion(self):
        rep = self.linearized
        d = self._dP_dc()
        out = {"n_minus": rep.n_minus, "dP_dc": d["dP_dc"], "noise_floor": d["noise_floor"]}
        try:
            out["verdict"] = criterion_verdict(
                rep.n_minus, d["dP_dc"], d["noise_floor"], rep.kernel_multiplicity_estimate
            ).value
        except IndeterminateError as exc:
            out["verdict"] = "Indeterminate"
            out["note"] = str(exc)
        self.report["criterion"] = out

    def stage_growing_mode(self):
        sc = self.sc
        lam_max = self.cfg["lambda_max"] or empirical_lambda_bound(sc.model, sc.spec, sc.nl, self.profile)
        grid = np.geomspace(5e-4, lam_max, self.cfg["lambda_points"])
        res = find_growing_mode(sc.model, sc.spec, sc.nl, self.profile, lam_max, grid)
        self.mode = res
        trace = res.trace
        summary = res.summary()
        summary.pop("trace", None)
        summary["lambda_max"] = lam_max
        summary["min_re_at_lambda_max"] = min_real_part(sc.model, sc.spec, sc.nl, self.profile, lam_max)
        summary["left_half_plane_count_at_1e-2"] = count_left_half_plane(sc.model, sc.spec, sc.nl, self.profile, 1e-2)
        self.report["growing_mode"] = summary
        self.report["k_lambda_trace"] = trace.summary()
        path = self._path("k_lambda_trace.csv")
        if path:
            trace.to_csv(path)
        if res.found:
            path = self._path("eigenfunction.csv")
            if path:
                res.save_eigenfunction(path, sc.grid)

    def stage_moving_kernel(self):
        sc = self.sc
        lo, hi = self.cfg["fit_window"]
        trace = track_k_lambda(sc.model, sc.spec, sc.nl, self.profile, np.geomspace(lo, hi, self.cfg["fit_points"]))
        fit = moving_kernel_limit(trace, (lo, hi))
        d = self._dP_dc()
        pred = moving_kernel_prediction(sc.model, d["dP_dc"], self.profile)
        out = fit.summary()
        out["predicted"] = pred
        out["relative_error"] = abs(fit.quadratic - pred) / abs(pred) if pred else None
        self.report["moving_kernel"] = out
        path = self._path("moving_kernel_trace.csv")
        if path:
            trace.to_csv(path)

    def stage_evolve(self):
        sc = self.sc
        amp = self.cfg["evolve_amplitude"] * self.profile.amplitude
        mode = self.mode if self.mode is not None and self.mode.found else None
        if mode is not None:
            pert = mode.eigenfunction.real
            vel = None
            if sc.model.value == "RBOU":
                from .evolution import velocity_of_mode

                vel = velocity_of_mode(sc.grid, mode.lambda_star, sc.speed, mode.eigenfunction).real
            source = "growing mode"
        else:
            rng = np.random.default_rng(self.cfg["seed"])
            noise = rng.standard_normal(sc.grid.n_points)
            # smooth the noise so the perturbation is resolved
            pert = np.fft.ifft(np.fft.fft(noise) * np.exp(-(sc.grid.wavenumbers**2))).real
            vel = None
            source = f"smoothed random (seed {self.cfg['seed']})"
        meas = measure_growth_rate(
            sc.model, sc.spec, sc.nl, self.profile, pert, amp, self.cfg["evolve_t_final"],
            dt=self.cfg["evolve_dt"], velocity_perturbation=vel,
        )
        out = meas.summary()
        out["perturbation"] = source
        q = np.asarray(meas.momentum)
        out["momentum_drift"] = float(np.ptp(q) / abs(q[0])) if q.size and q[0] else None
        if mode is not None:
            out["lambda_star"] = mode.lambda_star
            rel = abs(meas.rate - mode.lambda_star) / mode.lambda_star if meas.found else None
            out["relative_error"] = rel
            out["match"] = bool(rel is not None and rel < self.cfg["rate_rel_tol"])
        self.report["evolution"] = out
        path = self._path("deviation.csv")
        if path:
            meas.to_csv(path)

    def stage_direction(self):
        sc = self.sc
        g = sc.grid
        n_values = self.cfg["direction_n_values"]
        phi, psi = Bump(), Bump(radius=4.0, center=3.0)
        if n_values is None:
            n_values = [2**j for j in range(12) if 2**j * phi.reach() < g.half_length]
        demo = direction_demo(sc.model, sc.spec, sc.nl, self.profile, n_values, phi, psi)
        curve = norm_decay_curve(DirectionSpec(momentum_gradient(sc.model, sc.spec, self.profile), 1, 1.0, phi, psi), g, n_values)
        self.report["direction"] = {
            **{k: v.summary() for k, v in demo.items()},
            "decay_slope": decay_slope(curve),
        }
        path = self._path("decay_curve.csv")
        if path:
            save_curve(path, curve)

    # -- driver ----------------------------------------------------------
    def run(self, stages) -> int:
        code = EXIT_OK
        for stage in order_stages(stages):
            t0 = time.perf_counter()
            try:
                getattr(self, f"stage_{stage}")()
                self.report["stages"][stage] = {"status": "ok"}
            except DispStabError as exc:
                log.error("stage %s failed: %s", stage, exc)
                self.report["stages"][stage] = {"status": "failed", "error": str(exc), "error_type": type(exc).__name__}
                code = _exit_code_for(exc)
            except (np.linalg.LinAlgError, FloatingPointError) as exc:
                self.report["stages"][stage] = {"status": "failed", "error": str(exc), "error_type": type(exc).__name__}
                code = EXIT_NUMERICAL
            self.report["timing"][stage] = time.perf_counter() - t0
            if code != EXIT_OK:
                break
        self.report["exit_code"] = code
        return code

    # -- scan ------------------------------------------------------------
    def scan(self) -> int:
        sc = self.sc
        cfg = self.cfg
        if "speed_range" not in cfg:
            raise InsufficientDataError("scan needs 'speed_range'")
        lo, hi = cfg["speed_range"]
        n = cfg["n_speeds"]
        if n < 5 or not hi > lo:
            raise InsufficientDataError(f"scan needs at least 5 distinct speeds, got n_speeds={n} over [{lo}, {hi}]")
        speeds = np.linspace(lo, hi, n)
        t0 = time.perf_counter()
        profiles = continue_branch(sc.model, sc.spec, sc.nl, speeds, sc.grid, **self._solver_kw())

        def lin(p):
            return linearize(sc.model, sc.spec, sc.nl, p, cfg["kernel_tol"])

        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            reps = list(pool.map(lin, profiles))
        branch = momentum_branch(sc.model, sc.spec, sc.nl, profiles, cfg["dp_noise_rel"])
        rows = []
        for c, p, d, low, floor, rep in zip(
            branch.speeds, branch.momenta, branch.dP_dc, branch.lower_accuracy, branch.noise_floor, reps
        ):
            try:
                verdict = criterion_verdict(rep.n_minus, d, floor, rep.kernel_multiplicity_estimate).value
            except IndeterminateError:
                verdict = "Indeterminate"
            except DispStabError as exc:
                verdict = type(exc).__name__
            rows.append(
                {
                    "c": c,
                    "P": p,
                    "dP_dc": d,
                    "lower_accuracy": bool(low),
                    "n_minus": rep.n_minus,
                    "kernel_multiplicity": rep.kernel_multiplicity_estimate,
                    "kernel_residual": rep.kernel_residual,
                    "verdict": verdict,
                    "transition_candidate": bool(abs(d) <= floor),
                }
            )
        self.report["command"] = "scan"
        self.report["scan"] = {"rows": rows, "branch": branch.to_dict()}
        self.report["stages"]["scan"] = {"status": "ok"}
        self.report["timing"]["scan"] = time.perf_counter() - t0
        path = self._path("branch.csv")
        if path:
            import csv

            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                keys = list(rows[0])
                w.writerow(keys)
                for r in rows:
                    w.writerow([repr(float(r[k])) if isinstance(r[k], (float, np.floating)) else r[k] for k in keys])
        return EXIT_OK


def validate_report(report: dict) -> None:
    jsonschema.validate(jsonable(report), load_schema("run_report"))


def make_run_dir(base: Path, name: str) -> Path:
    stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S")
    path = base / f"{name}_{stamp}"
    i = 1
    while path.exists():
        path = base / f"{name}_{stamp}_{i}"
        i += 1
    path.mkdir(parents=True)
    return path


def write_outputs(pipe: Pipeline, out: Path) -> None:
    report = jsonable(pipe.report)
    validate_report(report)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    files = []
    for name in pipe.files + ["report.json"]:
        data = (out / name).read_bytes()
        files.append({"path": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
    manifest = {
        "scenario": pipe.sc.name,
        "version": __version__,
        "created": _dt.datetime.now().isoformat(timespec="seconds"),
        "exit_code": report["exit_code"],
        "files": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))


def run(config_path, out_base=None, stages=None, threads: int = 1, command: str = "run"):
    """Load a scenario, run its stages and write the run directory.

    Returns ``(report, exit_code, run_dir)``; ``run_dir`` is None when
    ``out_base`` is None.
    """
    cfg = load_config(config_path)
    sc = build_scenario(cfg)
    out = make_run_dir(Path(out_base), sc.name) if out_base is not None else None
    pipe = Pipeline(sc, out, threads)
    pipe.report["command"] = command
    if command == "scan":
        try:
            code = pipe.scan()
        except DispStabError as exc:
            pipe.report["stages"]["scan"] = {"status": "failed", "error": str(exc), "error_type": type(exc).__name__}
            code = _exit_code_for(exc)
        pipe.report["exit_code"] = code
    else:
        code = pipe.run(sc.stages if stages is None else stages)
    if out is not None:
        write_outputs(pipe, out)
    return jsonable(pipe.report), code, out


def _resolve_config(value: str) -> Path:
    p = Path(value)
    if p.exists():
        return p
    b = bundled_path(value)
    if b.exists():
        return b
    raise ConfigError(f"config {value!r} not found (also not a bundled scenario)", "config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dispstab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ["run", "scan", *SUBCOMMAND_STAGES]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario file, or the name of a bundled scenario")
        p.add_argument("--out", default="out", help="base directory for run directories")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--verbose", action="store_true")
    sub.add_parser("list-scenarios")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        from .config import bundled_scenarios

        print("\n".join(bundled_scenarios()))
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        path = _resolve_config(args.config)
        stages = SUBCOMMAND_STAGES.get(args.command)
        report, code, out = run(path, args.out, stages, args.threads, args.command)
    except ConfigError as exc:
        print(f"config error [{exc.key}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    failed = [s for s, v in report["stages"].items() if v["status"] == "failed"]
    for s in failed:
        print(f"stage {s} failed: {report['stages'][s]['error']}", file=sys.stderr)
    print(out)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
