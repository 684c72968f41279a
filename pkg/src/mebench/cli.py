"""Batch driver: parameter sweeps in parallel, reproducible CSV/JSON output.

Four verbs mirror the stock analyses:

* ``landscape``  - error bounds, relative errors and positivity flags on an
  (eta, gamma) grid, one CSV row per method and grid point,
* ``trajectory`` - observable dynamics at a single grid point,
* ``scaling``    - relative error versus coupling strength at fixed gamma,
  with fitted log-log slopes in a JSON sidecar,
* ``positivity`` - minimum-eigenvalue tracking for the relaxation variants
  along a gamma sweep.

Experiments are described by an INI config (sections: system, bath,
methods, analysis, run); command-line flags override file values. Every
output directory receives the resolved config echoed back, outputs are
sorted and printed in full double precision, and grid points run in
separate processes with a hard per-point timeout, so reruns are
byte-identical regardless of worker count.
"""

import argparse
import configparser
import json
import sys
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import multiprocessing as mp

import numpy as np

from . import analysis
from .analysis import POSITIVITY_THRESHOLD, UPUP
from .bath import BathParams
from .engine import Trajectory
from .masters import GeneratorSpec, Method, propagate
from .pseudomode import PseudoModeConfig
from .system import SystemParams

_FLOAT_FMT = "{:.17e}"


class ConfigError(ValueError):
    """The experiment configuration is invalid."""


@dataclass
class ExperimentConfig:
    omega_a: float = 1.0
    omega_b: float = 0.95
    etas: tuple = (0.1,)
    gammas: tuple = (10.0,)
    omega0: float = 1.0
    methods: tuple = ("rfe_tdc", "qome")
    tau_cg: float = 1.0
    cluster_tol: float = 0.1
    mode: str = "landscape"
    initial_state: str = "upup"
    time_points: int = 400
    trajectory_points: int = 1000
    workers: int = 1
    out: str = "out"
    timeout: float = 600.0

    def generator_specs(self):
        specs = []
        for name in self.methods:
            try:
                method = Method(name)
            except ValueError:
                raise ConfigError(f"unknown method {name!r}; valid: "
                                  + ", ".join(m.value for m in Method)) from None
            if method is Method.CGME:
                specs.append(GeneratorSpec(method, tau_cg=self.tau_cg,
                                           cluster_tol=self.cluster_tol))
            else:
                specs.append(GeneratorSpec(method, cluster_tol=self.cluster_tol))
        return specs

    def validate(self):
        if not self.methods:
            raise ConfigError("method list must not be empty")
        if not self.etas or not self.gammas:
            raise ConfigError("eta and gamma grids must not be empty")
        if any(g <= 0 for g in self.gammas):
            raise ConfigError("gamma values must be positive")
        if any(e < 0 for e in self.etas):
            raise ConfigError("eta values must be non-negative")
        if self.mode not in ("landscape", "trajectory", "scaling", "positivity"):
            raise ConfigError(f"unknown analysis mode {self.mode!r}")
        if self.time_points < 2 or self.trajectory_points < 2:
            raise ConfigError("time grids need at least 2 points")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.initial_state != "upup":
            raise ConfigError("only the 'upup' initial state is supported")
        self.generator_specs()

    def echo_ini(self):
        cp = configparser.ConfigParser()
        cp["system"] = {"omega_a": repr(self.omega_a), "omega_b": repr(self.omega_b)}
        cp["bath"] = {
            "eta": ", ".join(repr(e) for e in self.etas),
            "gamma": ", ".join(repr(g) for g in self.gammas),
            "omega0": repr(self.omega0),
        }
        cp["methods"] = {
            "list": ", ".join(self.methods),
            "tau_cg": repr(self.tau_cg),
            "cluster_tol": repr(self.cluster_tol),
        }
        cp["analysis"] = {
            "mode": self.mode,
            "initial_state": self.initial_state,
            "time_points": str(self.time_points),
            "trajectory_points": str(self.trajectory_points),
        }
        cp["run"] = {
            "workers": str(self.workers),
            "out": self.out,
            "timeout": repr(self.timeout),
        }
        return cp


def _parse_floats(text):
    items = [s for chunk in text.split(",") for s in chunk.split()]
    return tuple(float(s) for s in items)


def load_config(path):
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = ExperimentConfig()
    try:
        if cp.has_section("system"):
            cfg.omega_a = cp.getfloat("system", "omega_a", fallback=cfg.omega_a)
            cfg.omega_b = cp.getfloat("system", "omega_b", fallback=cfg.omega_b)
        if cp.has_section("bath"):
            if cp.has_option("bath", "eta"):
                cfg.etas = _parse_floats(cp.get("bath", "eta"))
            if cp.has_option("bath", "gamma"):
                cfg.gammas = _parse_floats(cp.get("bath", "gamma"))
            cfg.omega0 = cp.getfloat("bath", "omega0", fallback=cfg.omega0)
        if cp.has_section("methods"):
            if cp.has_option("methods", "list"):
                cfg.methods = tuple(
                    s.strip() for s in cp.get("methods", "list").replace(",", " ").split()
                )
            cfg.tau_cg = cp.getfloat("methods", "tau_cg", fallback=cfg.tau_cg)
            cfg.cluster_tol = cp.getfloat("methods", "cluster_tol", fallback=cfg.cluster_tol)
        if cp.has_section("analysis"):
            cfg.mode = cp.get("analysis", "mode", fallback=cfg.mode)
            cfg.initial_state = cp.get("analysis", "initial_state", fallback=cfg.initial_state)
            cfg.time_points = cp.getint("analysis", "time_points", fallback=cfg.time_points)
            cfg.trajectory_points = cp.getint("analysis", "trajectory_points",
                                              fallback=cfg.trajectory_points)
        if cp.has_section("run"):
            cfg.workers = cp.getint("run", "workers", fallback=cfg.workers)
            cfg.out = cp.get("run", "out", fallback=cfg.out)
            cfg.timeout = cp.getfloat("run", "timeout", fallback=cfg.timeout)
    except ValueError as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc
    return cfg


# ---------------------------------------------------------------------------
# point workers (run in separate processes)
# ---------------------------------------------------------------------------

def _sanitize(msg):
    return str(msg).replace(",", ";").replace("\n", " ")


def _landscape_point(task):
    cfg_dict, eta, gamma = task
    cfg = ExperimentConfig(**cfg_dict)
    bath = BathParams(eta=eta, gamma=gamma, omega0=cfg.omega0)
    records, bundle = analysis.assess_point(
        SystemParams(cfg.omega_a, cfg.omega_b), bath, cfg.generator_specs(),
        n_times=cfg.time_points, early_window=10.0 / gamma,
    )
    return [
        {"method": r.method, "eta": r.eta, "gamma": r.gamma,
         "epsilon_bound": r.epsilon_bound, "rel_err_max": r.rel_err_max,
         "min_eig": r.min_eig, "t_max": r.t_max, "d": r.d}
        for r in records
    ]


def _lean_point(task):
    """Relative errors and eigenvalue tracks only (no Pauli-basis bound)."""
    cfg_dict, eta, gamma = task
    cfg = ExperimentConfig(**cfg_dict)
    bath = BathParams(eta=eta, gamma=gamma, omega0=cfg.omega0)
    bundle = analysis.prepare_reference(SystemParams(cfg.omega_a, cfg.omega_b), bath)
    times = analysis.default_time_grid(bundle.t_max, cfg.time_points,
                                       early_window=10.0 / gamma)
    ref = analysis.reference_states(bundle, [UPUP], times)[0]
    ref_traj = Trajectory(times=times, states=ref)
    out = {"eta": eta, "gamma": gamma, "t_max": bundle.t_max, "d": bundle.d,
           "methods": {}}
    for gspec in cfg.generator_specs():
        traj = propagate(gspec, bundle.model, bath, UPUP, times)
        _, rel_max = analysis.relative_error(ref_traj, traj)
        _, min_eig, flag = analysis.min_eigenvalue_track(traj)
        out["methods"][gspec.label()] = {
            "rel_err_max": rel_max, "min_eig": min_eig, "flag": flag,
        }
    return out


def _trajectory_point(task):
    cfg_dict, eta, gamma = task
    cfg = ExperimentConfig(**cfg_dict)
    bath = BathParams(eta=eta, gamma=gamma, omega0=cfg.omega0)
    bundle = analysis.prepare_reference(SystemParams(cfg.omega_a, cfg.omega_b), bath)
    times = np.linspace(0.0, bundle.t_max, cfg.trajectory_points)
    ref = analysis.reference_states(bundle, [UPUP], times)[0]
    loc, corr = analysis.observables(Trajectory(times=times, states=ref))
    out = {"times": times.tolist(), "ref": (loc.tolist(), corr.tolist()),
           "methods": {}, "t_max": bundle.t_max, "d": bundle.d}
    for gspec in cfg.generator_specs():
        traj = propagate(gspec, bundle.model, bath, UPUP, times)
        mloc, mcorr = analysis.observables(traj)
        out["methods"][gspec.label()] = (mloc.tolist(), mcorr.tolist())
    return out


_POINT_RUNNERS = {
    "landscape": _landscape_point,
    "scaling": _lean_point,
    "positivity": _lean_point,
    "trajectory": _trajectory_point,
}


def _point_entry(queue, mode, task):
    try:
        queue.put(("ok", _POINT_RUNNERS[mode](task)))
    except Exception as exc:  # report, do not kill the sweep
        queue.put(("error", f"{type(exc).__name__}: {_sanitize(exc)}"))


def _run_points(mode, tasks, workers, timeout):
    """Run point tasks in worker processes with a hard per-point timeout.

    Queues are drained eagerly while workers run; otherwise a payload larger
    than the pipe buffer would block the child in put() forever.
    """
    ctx = mp.get_context("spawn")
    pending = deque(enumerate(tasks))
    live = {}
    results = {}
    while pending or live:
        while pending and len(live) < workers:
            idx, task = pending.popleft()
            queue = ctx.SimpleQueue()
            proc = ctx.Process(target=_point_entry, args=(queue, mode, task), daemon=True)
            proc.start()
            live[proc] = (idx, queue, time.monotonic() + timeout)
        finished = []
        for proc, (idx, queue, deadline) in live.items():
            if idx not in results and not queue.empty():
                results[idx] = queue.get()
            if not proc.is_alive():
                if idx not in results and not queue.empty():
                    results[idx] = queue.get()
                if idx not in results:
                    results[idx] = ("error",
                                    f"worker exited with code {proc.exitcode} and no result")
                finished.append(proc)
            elif time.monotonic() > deadline:
                proc.terminate()
                if idx not in results:
                    results[idx] = ("error", f"hard timeout after {timeout:g} s")
                finished.append(proc)
        for proc in finished:
            proc.join()
            del live[proc]
        if live:
            time.sleep(0.02)
    return [results[i] for i in range(len(tasks))]


# ---------------------------------------------------------------------------
# output assembly
# ---------------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(value)
    return _FLOAT_FMT.format(float(value))


def _write_csv(path, header_lines, columns, rows):
    lines = [f"# {h}" for h in header_lines]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _grid_tasks(cfg):
    cfg_dict = {k: getattr(cfg, k) for k in (
        "omega_a", "omega_b", "etas", "gammas", "omega0", "methods", "tau_cg",
        "cluster_tol", "mode", "initial_state", "time_points",
        "trajectory_points", "workers", "out", "timeout")}
    points = [(eta, gamma) for eta in cfg.etas for gamma in cfg.gammas]
    return points, [(cfg_dict, eta, gamma) for eta, gamma in points]


def _common_header(cfg):
    return [
        f"mebench {cfg.mode}",
        f"system: omega_a={cfg.omega_a!r} omega_b={cfg.omega_b!r}",
        f"bath: omega0={cfg.omega0!r}",
    ]


def run_landscape(cfg, out_dir):
    points, tasks = _grid_tasks(cfg)
    outcomes = _run_points(cfg.mode, tasks, cfg.workers, cfg.timeout)
    columns = ["method", "eta", "inv_gamma", "epsilon_bound", "rel_err_max",
               "min_eig", "t_max", "d", "error"]
    rows = []
    failures = 0
    for (eta, gamma), (status, payload) in zip(points, outcomes):
        if status == "ok":
            for rec in payload:
                rows.append((rec["method"],
                             [_fmt(rec["eta"]), _fmt(1.0 / rec["gamma"]),
                              _fmt(rec["epsilon_bound"]), _fmt(rec["rel_err_max"]),
                              _fmt(rec["min_eig"]), _fmt(rec["t_max"]),
                              _fmt(rec["d"]), ""]))
        else:
            failures += 1
            for name in cfg.methods:
                rows.append((name, [_fmt(eta), _fmt(1.0 / gamma),
                                    "", "", "", "", "", payload]))
    rows.sort(key=lambda r: (r[0], float(r[1][0]), -float(r[1][1])))
    _write_csv(out_dir / "landscape.csv", _common_header(cfg),
               columns, [[m] + rest for m, rest in rows])
    return failures, len(points)


def run_positivity(cfg, out_dir):
    points, tasks = _grid_tasks(cfg)
    outcomes = _run_points(cfg.mode, tasks, cfg.workers, cfg.timeout)
    labels = [gs.label() for gs in cfg.generator_specs()]
    columns = ["eta", "inv_gamma"]
    for lab in labels:
        columns += [f"{lab}_min_eig", f"{lab}_rel_err_max", f"{lab}_flag"]
    columns += ["threshold", "error"]
    rows = []
    failures = 0
    for (eta, gamma), (status, payload) in zip(points, outcomes):
        row = [_fmt(eta), _fmt(1.0 / gamma)]
        if status == "ok":
            for lab in labels:
                m = payload["methods"][lab]
                row += [_fmt(m["min_eig"]), _fmt(m["rel_err_max"]), _fmt(m["flag"])]
            row += [_fmt(POSITIVITY_THRESHOLD), ""]
        else:
            failures += 1
            row += ["", "", ""] * len(labels) + [_fmt(POSITIVITY_THRESHOLD), payload]
        rows.append(row)
    rows.sort(key=lambda r: (float(r[0]), -float(r[1])))
    _write_csv(out_dir / "positivity.csv", _common_header(cfg), columns, rows)
    return failures, len(points)


def run_scaling(cfg, out_dir):
    if len(cfg.gammas) != 1:
        raise ConfigError("scaling mode expects exactly one gamma value")
    points, tasks = _grid_tasks(cfg)
    outcomes = _run_points(cfg.mode, tasks, cfg.workers, cfg.timeout)
    labels = [gs.label() for gs in cfg.generator_specs()]
    columns = ["eta", "inv_gamma"] + [f"{lab}_rel_err_max" for lab in labels] + ["error"]
    rows = []
    series = {lab: [] for lab in labels}
    etas_ok = []
    failures = 0
    for (eta, gamma), (status, payload) in zip(points, outcomes):
        row = [_fmt(eta), _fmt(1.0 / gamma)]
        if status == "ok":
            etas_ok.append(eta)
            for lab in labels:
                val = payload["methods"][lab]["rel_err_max"]
                series[lab].append(val)
                row.append(_fmt(val))
            row.append("")
        else:
            failures += 1
            row += [""] * len(labels) + [payload]
        rows.append(row)
    rows.sort(key=lambda r: float(r[0]))
    _write_csv(out_dir / "scaling.csv", _common_header(cfg), columns, rows)

    slopes = {}
    warnings = []
    for lab in labels:
        vals = np.array(series[lab])
        try:
            slopes[lab] = analysis.fit_scaling(np.array(etas_ok), vals)
        except ValueError as exc:
            warnings.append(f"{lab}: slope omitted ({_sanitize(exc)})")
    sidecar = {"gamma": cfg.gammas[0], "slopes": slopes, "warnings": warnings}
    (out_dir / "scaling_fits.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return failures, len(points)


def run_trajectory(cfg, out_dir):
    if len(cfg.etas) != 1 or len(cfg.gammas) != 1:
        raise ConfigError("trajectory mode expects exactly one eta and one gamma")
    points, tasks = _grid_tasks(cfg)
    outcomes = _run_points(cfg.mode, tasks, cfg.workers, cfg.timeout)
    status, payload = outcomes[0]
    if status != "ok":
        raise RuntimeError(f"trajectory point failed: {payload}")
    labels = [gs.label() for gs in cfg.generator_specs()]
    columns = ["t", "ref_local_sz", "ref_corr_zz"]
    for lab in labels:
        columns += [f"{lab}_local_sz", f"{lab}_corr_zz"]
    rows = []
    times = payload["times"]
    ref_loc, ref_corr = payload["ref"]
    for k, t in enumerate(times):
        row = [_fmt(t), _fmt(ref_loc[k]), _fmt(ref_corr[k])]
        for lab in labels:
            mloc, mcorr = payload["methods"][lab]
            row += [_fmt(mloc[k]), _fmt(mcorr[k])]
        rows.append(row)
    header = _common_header(cfg) + [
        f"point: eta={cfg.etas[0]!r} gamma={cfg.gammas[0]!r} "
        f"t_max={payload['t_max']!r} d={payload['d']}",
    ]
    _write_csv(out_dir / "trajectory.csv", header, columns, rows)
    return 0, 1


_MODE_RUNNERS = {
    "landscape": run_landscape,
    "trajectory": run_trajectory,
    "scaling": run_scaling,
    "positivity": run_positivity,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="mebench",
        description="Benchmark perturbative master equations against the exact "
                    "pseudo-mode reference for two qubits in a Lorentzian environment.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("landscape", "trajectory", "scaling", "positivity"):
        p = sub.add_parser(verb, help=f"run a {verb} analysis")
        p.add_argument("--config", required=True, help="experiment config (INI)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel point workers (overrides config)")
        p.add_argument("--methods", default=None,
                       help="comma-separated method list (overrides config)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg.mode = args.verb
        if args.out is not None:
            cfg.out = args.out
        if args.workers is not None:
            cfg.workers = args.workers
        if args.methods is not None:
            cfg.methods = tuple(s.strip() for s in args.methods.split(",") if s.strip())
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "resolved_config.ini", "w", encoding="utf-8") as fh:
        cfg.echo_ini().write(fh)

    try:
        failures, total = _MODE_RUNNERS[cfg.mode](cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if failures:
        print(f"{failures}/{total} grid points failed (see error column)",
              file=sys.stderr)
    return 1 if failures == total and total > 0 else 0


if __name__ == "__main__":
    sys.exit(main())
