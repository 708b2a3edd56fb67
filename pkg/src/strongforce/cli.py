"""Command-line experiment driver.

Usage: ``strongforce SUBCOMMAND --config PATH [--seed N] [--out DIR]
[--workers N] [--horizon T] [--omega W]``.  Exit status is 0 on success,
2 when a solver fails to converge or every verdict is undecided, and 1 on
any other error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import itertools
import json
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import core, equilibria, kepler, macmillan, sampling, schemas
from .core import AlphaSystem, PhaseState
from .errors import ConfigError, NoConvergence, StrongForceError
from .experiments import twobody_trial
from .integrate import IntegratorConfig, classify_trajectory, integrate
from .threshold import classify_state

WORKERS_ENV = "STRONGFORCE_WORKERS"
SUBCOMMANDS = (
    "simulate", "classify", "excited-energy", "kepler-portrait",
    "twobody-dichotomy", "macmillan", "sweep",
)
EXIT_OK, EXIT_ERROR, EXIT_UNDECIDED = 0, 1, 2


class _Loader(yaml.SafeLoader):
    pass


# YAML 1.1 reads 1e-3 as a string; accept exponent floats without a dot
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def _line_of(node, path):
    line = node.start_mark.line + 1 if node is not None else None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == str(key)), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


def load_config(path) -> dict:
    """Parse and validate a YAML experiment config.

    Raises
    ------
    ConfigError
        With the offending field and line for syntax and schema errors.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        node = yaml.compose(text, Loader=_Loader)
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {exc}", line=mark.line + 1 if mark else None) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", line=1)
    errors = sorted(
        jsonschema.Draft7Validator(schemas.CONFIG).iter_errors(data),
        key=lambda e: [str(p) for p in e.absolute_path],
    )
    if errors:
        err = errors[0]
        where = list(err.absolute_path)
        raise ConfigError(err.message, field=".".join(map(str, where)) or None,
                          line=_line_of(node, where))
    return data


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _clean(obj):
    """Make a report JSON-safe: numpy scalars to Python, non-finite floats to markers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_report(path: Path, kind: str, report: dict) -> dict:
    report = _clean(report)
    jsonschema.validate(report, schemas.REPORTS[kind])
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _fmt(v) -> str:
    return repr(float(v))


def trajectory_rows(record):
    """Header and rows of the trajectory CSV."""
    n = record.system.n
    header = ["t"]
    for i in range(1, n + 1):
        header += [f"x{i}", f"y{i}", f"z{i}", f"xdot{i}", f"ydot{i}", f"zdot{i}"]
    header += ["E", "A1", "A2", "A3", "I", "Idot", "K_omega", "set_label"]
    rows = []
    for s in record.samples:
        row = [_fmt(s.t)]
        for i in range(n):
            row += [_fmt(v) for v in s.state.positions[i]]
            row += [_fmt(v) for v in s.state.velocities[i]]
        inv = s.invariants
        row += [_fmt(inv.energy), *(_fmt(v) for v in inv.angular_momentum)]
        row += [_fmt(inv.inertia), _fmt(inv.inertia_rate), _fmt(s.k_omega), str(s.label)]
        rows.append(row)
    return header, rows


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def save_svg(fig, path: Path, digest: str) -> None:
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = digest
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    text = buf.getvalue()
    comment = f"<!-- config-sha256: {digest} -->\n"
    head, sep, rest = text.partition("?>\n")
    path.write_text(head + sep + comment + rest if sep else comment + text)


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


# ---------------------------------------------------------------- builders


def _system(cfg) -> AlphaSystem:
    if "system" not in cfg:
        raise ConfigError("missing required section", field="system")
    return AlphaSystem(tuple(cfg["system"]["masses"]), cfg["system"]["alpha"])


def _omega(cfg, default=1.0) -> float:
    return float(cfg.get("omega", default))


def _initial_state(cfg, system) -> PhaseState:
    if "initial_state" in cfg:
        st = cfg["initial_state"]
        if len(st["positions"]) != system.n or len(st["velocities"]) != system.n:
            raise ConfigError("initial_state must list one row per mass", field="initial_state")
        return PhaseState(st["positions"], st["velocities"])
    gen = cfg.get("generator")
    if gen is None:
        raise ConfigError("need initial_state or generator", field="initial_state")
    rng = sampling.rng_from_seed(cfg.get("seed", 0))
    if gen["kind"] == "homothetic":
        if system.n != 3:
            raise ConfigError("homothetic generator needs three bodies", field="generator.kind")
        _, st = sampling.homothetic_triangle(
            system.alpha, gen.get("circumradius", 1.0), gen.get("spin", 0.0)
        )
        return st
    if gen["kind"] == "dispersing":
        return sampling.dispersing_state(system, rng)
    return sampling.rotating_state(
        system, rng, _omega(cfg), gen.get("spin", 1.0), gen.get("radial", 0.0), gen.get("size", 1.0)
    )


def _integrator(cfg) -> IntegratorConfig:
    try:
        return IntegratorConfig(**cfg.get("integrator", {}))
    except ValueError as exc:
        raise ConfigError(str(exc), field="integrator") from exc


def _e_star(cfg, system, omega) -> float:
    if "e_star" in cfg:
        return float(cfg["e_star"])
    if system.alpha <= 2:
        return float("inf")
    restarts = cfg.get("excited_energy", {}).get("restarts", 32)
    return equilibria.excited_energy(system, omega, restarts, seed=cfg.get("seed", 0)).e_star


# ------------------------------------------------------------ subcommands


def run_simulate(cfg, out: Path):
    system = _system(cfg)
    omega = _omega(cfg)
    state = _initial_state(cfg, system)
    rec = integrate(system, state, omega, _integrator(cfg), e_star=cfg.get("e_star", np.inf))
    write_csv(out / "trajectory.csv", *trajectory_rows(rec))
    report = {
        "outcome": {"kind": rec.outcome.kind, "time": rec.outcome.time, "reason": rec.outcome.reason},
        "events": [{"t": e.t, "kind": e.kind.value, "detail": e.detail} for e in rec.events],
        "energy0": rec.samples[0].invariants.energy,
        "max_energy_drift": rec.max_energy_drift,
        "low_accuracy": rec.low_accuracy,
        "nsteps": rec.nsteps,
    }
    write_report(out / "simulate.json", "simulate", report)
    return EXIT_OK, report


def run_classify(cfg, out: Path):
    system = _system(cfg)
    omega = _omega(cfg)
    state = _initial_state(cfg, system)
    e_star = _e_star(cfg, system, omega)
    res = classify_trajectory(system, omega, state, e_star, _integrator(cfg))
    write_csv(out / "trajectory.csv", *trajectory_rows(res.record))
    report = {
        "outcome": {"kind": res.outcome.kind, "time": res.outcome.time, "reason": res.outcome.reason},
        "set_history": [
            {"label": str(lab), "t_start": t0, "t_end": t1} for lab, t0, t1 in res.set_history
        ],
        "transition_count": res.transition_count,
        "theory_applies": res.theory_applies,
        "initial_label": str(classify_state(system, omega, state, e_star)),
        "e_star": e_star,
        "omega": omega,
        "events": [{"t": e.t, "kind": e.kind.value, "detail": e.detail} for e in res.record.events],
    }
    report = write_report(out / "classify.json", "classify", report)
    code = EXIT_UNDECIDED if res.outcome.kind == "Undecided" else EXIT_OK
    return code, report


def run_excited_energy(cfg, out: Path):
    system = _system(cfg)
    omega = _omega(cfg)
    restarts = cfg.get("excited_energy", {}).get("restarts", 32)
    try:
        res = equilibria.excited_energy(system, omega, restarts, seed=cfg.get("seed", 0))
    except NoConvergence as exc:
        write_report(out / "excited_energy.json", "excited-energy", {
            "e_star": float("nan"), "u_star": float("nan"), "multiplier": float("nan"),
            "degenerate": False, "minimizer": None, "error": str(exc),
        })
        return EXIT_UNDECIDED, None
    mini = None
    if res.minimizer is not None:
        mini = {
            "positions": res.minimizer.positions,
            "residual": res.minimizer.residual,
            "planar": res.minimizer.is_planar,
            "collinear": res.minimizer.is_collinear,
        }
    report = {
        "e_star": res.e_star,
        "u_star": res.u_star,
        "multiplier": res.multiplier,
        "expected_multiplier": res.expected_multiplier,
        "degenerate": res.degenerate,
        "minimizer": mini,
        "candidate_energies": list(res.candidates),
        "omega": omega,
        "alpha": system.alpha,
    }
    return EXIT_OK, write_report(out / "excited_energy.json", "excited-energy", report)


def portrait_rows(alpha: float, c: float, r_min: float, r_max: float, points: int, orbits: int):
    """Rows ``(curve, r, rdot, energy)`` of the reduced phase portrait.

    Curves are the critical point, the two separatrix branches at the
    critical level, and level sets at energies spread around it.
    """
    params = kepler.KeplerParams(alpha, c)
    rows = []
    r = np.geomspace(r_min, r_max, points)
    v = kepler.effective_potential(params, r)
    levels = []
    if c != 0:
        crit = kepler.critical_point(params)
        rows.append(("critical", crit.r0, 0.0, crit.v_star))
        levels.append(("separatrix", crit.v_star))
        span = abs(crit.v_star) if crit.v_star != 0 else 1.0
        for k in range(orbits):
            frac = (k + 1) / (orbits + 1)
            levels.append((f"orbit{k + 1}", crit.v_star + span * (2 * frac - 1)))
    else:
        for k in range(orbits):
            levels.append((f"orbit{k + 1}", (k - orbits / 2) / max(orbits, 1)))
    for name, e in levels:
        ok = v <= e
        rdot = np.sqrt(np.maximum(2 * (e - v), 0.0))
        for ri, vi in zip(r[ok], rdot[ok]):
            rows.append((f"{name}_upper", ri, vi, e))
        for ri, vi in zip(r[ok], rdot[ok]):
            rows.append((f"{name}_lower", ri, -vi, e))
    return rows


def run_kepler_portrait(cfg, out: Path, digest: str):
    kc = cfg.get("kepler")
    if kc is None:
        raise ConfigError("missing required section", field="kepler")
    alpha, c = float(kc["alpha"]), float(kc["c"])
    try:
        params = kepler.KeplerParams(alpha, c)
    except StrongForceError as exc:
        raise ConfigError(str(exc), field="kepler.alpha") from exc
    crit = kepler.critical_point(params) if c != 0 else None
    r0 = crit.r0 if crit else 1.0
    rows = portrait_rows(alpha, c, kc.get("r_min", 0.2 * r0), kc.get("r_max", 4.0 * r0),
                         kc.get("points", 400), kc.get("orbits", 4))
    write_csv(out / "portrait.csv", ["curve", "r", "rdot", "energy"],
              [(name, _fmt(r), _fmt(rd), _fmt(e)) for name, r, rd, e in rows])
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    curves = {}
    for name, r, rd, _ in rows:
        curves.setdefault(name, []).append((r, rd))
    for name, pts in curves.items():
        pts = np.array(pts)
        if name == "critical":
            ax.plot(pts[:, 0], pts[:, 1], "ko")
        else:
            style = "k-" if name.startswith("separatrix") else "C0-"
            ax.plot(pts[:, 0], pts[:, 1], style, lw=1.0 if style == "k-" else 0.6)
    ax.set_xlabel("r")
    ax.set_ylabel("dr/dt")
    ax.set_title(f"alpha={alpha:g}, c={c:g}")
    save_svg(fig, out / "portrait.svg", digest)
    plt.close(fig)
    report = {"alpha": alpha, "c": c, "r0": crit.r0 if crit else float("nan"),
              "v_star": crit.v_star if crit else float("nan")}
    return EXIT_OK, write_report(out / "kepler.json", "kepler-portrait", report)


def run_twobody_dichotomy(cfg, out: Path):
    tb = cfg.get("twobody", {})
    m1, m2 = tb.get("m1", 0.5), tb.get("m2", 0.5)
    alpha = tb.get("alpha", 4.0)
    omega = _omega(cfg, 2.0)
    integ = _integrator(cfg)
    rng = sampling.rng_from_seed(cfg.get("seed", 0))
    try:
        th = kepler.twobody_thresholds(m1, m2, alpha, omega)
    except StrongForceError as exc:
        raise ConfigError(str(exc), field="twobody") from exc
    header = ["index", "r", "rdot", "c", "side", "predicted", "outcome",
              "t_collision", "t_bound", "min_separation", "agree"]
    rows, bad = [], 0
    for i in range(tb.get("samples", 100)):
        r, rdot, c = sampling.twobody_sample(rng, alpha, omega)
        trial = twobody_trial(r, rdot, c, m1, m2, alpha, omega, integ)
        bad += not trial.agrees
        rows.append([i, _fmt(r), _fmt(rdot), _fmt(c), trial.side, trial.predicted, trial.outcome,
                     "" if trial.t_collision is None else _fmt(trial.t_collision),
                     "" if trial.t_bound is None else _fmt(trial.t_bound),
                     _fmt(trial.min_separation), str(trial.agrees)])
    write_csv(out / "dichotomy.csv", header, rows)
    report = {"samples": len(rows), "misclassified": bad, "e_star": th.e_star,
              "a_star": th.a_star, "r0": th.r0, "omega": omega, "alpha": alpha}
    return EXIT_OK, write_report(out / "dichotomy.json", "twobody-dichotomy", report)


def run_macmillan(cfg, out: Path, digest: str):
    mc = cfg.get("macmillan", {})
    try:
        params = macmillan.MacParams(mc.get("alpha", 3.0), mc.get("epsilon", 1e-3))
    except StrongForceError as exc:
        raise ConfigError(str(exc), field="macmillan.alpha") from exc
    t_max = mc.get("t_max", cfg.get("integrator", {}).get("t_max", 110.0))
    exp_cfg = macmillan.ExperimentConfig(t_max=t_max, rho0=mc.get("rho0"))
    res = macmillan.transition_experiment(params, mc.get("z3_amplitude", 5.0), exp_cfg)
    write_csv(out / "transitions.csv", ["t", "direction", "z3"],
              [(_fmt(t), d, _fmt(z)) for t, d, z in res.transitions])
    plt = _figure()
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    ax1.plot(res.times, res.k_values, "C0-", lw=0.8)
    ax1.axhline(0.0, color="k", lw=0.5)
    ax1.set_ylabel("K_omega")
    ax2.plot(res.times, res.samples[:, 2], "C1-", lw=0.8)
    ax2.set_ylabel("z3")
    ax2.set_xlabel("t")
    for t, _, _ in res.transitions:
        ax1.axvline(t, color="C3", lw=0.5, ls="--")
        ax2.axvline(t, color="C3", lw=0.5, ls="--")
    save_svg(fig, out / "timeline.svg", digest)
    plt.close(fig)
    prof = macmillan.reference_profile(params)
    report = {
        "alpha": params.alpha,
        "epsilon": params.epsilon,
        "z3_amplitude": res.z3_amplitude,
        "rho0": res.rho0,
        "count": res.count,
        "transitions": [{"t": t, "direction": d, "z3": z} for t, d, z in res.transitions],
        "pattern_ok": res.pattern_ok,
        "max_abs_k": res.max_abs_k,
        "end_time": res.end_time,
        "stop_reason": res.stop_reason,
        "energy_drift": res.energy_drift,
        "excited_energy": macmillan.eps_excited_energy(params),
        "reference": {"r0_ref": prof.r0_ref, "r_inf": prof.r_inf,
                      "v0_4omega": prof.v0_4omega, "v_inf_4omega": prof.v_inf_4omega},
    }
    return EXIT_OK, write_report(out / "macmillan.json", "macmillan", report)


_GRID_KEYS = {"omega", "alpha", "epsilon", "z3_amplitude", "seed"}


def _apply_override(cfg, key, value):
    if key == "omega":
        cfg["omega"] = value
    elif key == "seed":
        cfg["seed"] = int(value)
    elif key == "alpha":
        cfg.setdefault("system", {})["alpha"] = value
        if "macmillan" in cfg:
            cfg["macmillan"]["alpha"] = value
    else:
        cfg.setdefault("macmillan", {})[key] = value


def _sweep_job(args):
    index, base, run_cfg, out = args
    out.mkdir(parents=True, exist_ok=True)
    try:
        code = run_experiment(base, run_cfg, out)[0]
    except (StrongForceError, ValueError) as exc:
        return index, "error", str(exc)
    return index, "ok" if code == EXIT_OK else "undecided", ""


def run_sweep(cfg, out: Path, workers: int):
    sw = cfg.get("sweep")
    if sw is None:
        raise ConfigError("missing required section", field="sweep")
    keys = sorted(sw["grid"])
    for k in keys:
        if k not in _GRID_KEYS:
            raise ConfigError(f"cannot sweep over {k!r}", field=f"sweep.grid.{k}")
    jobs = []
    for index, values in enumerate(itertools.product(*(sw["grid"][k] for k in keys))):
        run_cfg = copy.deepcopy(cfg)
        run_cfg.pop("sweep")
        for k, v in zip(keys, values):
            _apply_override(run_cfg, k, v)
        jobs.append((index, sw["base"], run_cfg, out / f"run_{index:04d}"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    runs = []
    for (index, _, run_cfg, _), (_, status, msg) in zip(jobs, sorted(results)):
        params = {k: v for k, v in zip(keys, [_lookup(run_cfg, k) for k in keys])}
        runs.append({"index": index, "params": params, "status": status, "message": msg})
    write_csv(out / "sweep.csv", ["index", *keys, "status"],
              [[r["index"], *(repr(r["params"][k]) for k in keys), r["status"]] for r in runs])
    report = write_report(out / "sweep.json", "sweep", {"base": sw["base"], "runs": runs})
    if any(r["status"] == "error" for r in runs):
        return EXIT_ERROR, report
    if all(r["status"] == "undecided" for r in runs):
        return EXIT_UNDECIDED, report
    return EXIT_OK, report


def _lookup(cfg, key):
    if key in ("omega", "seed"):
        return cfg.get(key)
    if key == "alpha":
        return cfg.get("system", cfg.get("macmillan", {})).get("alpha")
    return cfg.get("macmillan", {}).get(key)


def run_experiment(name: str, cfg: dict, out: Path, workers: int = 1):
    """Dispatch one experiment; returns ``(exit_code, report)``."""
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash({"experiment": name, **cfg})
    if name == "simulate":
        return run_simulate(cfg, out)
    if name == "classify":
        return run_classify(cfg, out)
    if name == "excited-energy":
        return run_excited_energy(cfg, out)
    if name == "kepler-portrait":
        return run_kepler_portrait(cfg, out, digest)
    if name == "twobody-dichotomy":
        return run_twobody_dichotomy(cfg, out)
    if name == "macmillan":
        return run_macmillan(cfg, out, digest)
    if name == "sweep":
        return run_sweep(cfg, out, workers)
    raise ConfigError(f"unknown experiment {name!r}", field="experiment")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="strongforce", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, type=Path, help="YAML experiment config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.add_argument("--horizon", type=float, help="override the integration horizon t_max")
    p.add_argument("--omega", type=float, help="override the frequency omega")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if "experiment" in cfg and cfg["experiment"] != args.subcommand:
            raise ConfigError(
                f"config is for {cfg['experiment']!r}, not {args.subcommand!r}", field="experiment"
            )
        cfg.pop("experiment", None)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be a 64-bit unsigned integer", field="seed")
            cfg["seed"] = args.seed
        if args.omega is not None:
            if args.omega <= 0:
                raise ConfigError("omega must be positive", field="omega")
            cfg["omega"] = args.omega
        if args.horizon is not None:
            if args.horizon <= 0:
                raise ConfigError("horizon must be positive", field="integrator.t_max")
            cfg.setdefault("integrator", {})["t_max"] = args.horizon
            if "macmillan" in cfg:
                cfg["macmillan"]["t_max"] = args.horizon
        workers = args.workers
        if workers is None:
            workers = cfg.get("workers") or int(os.environ.get(WORKERS_ENV, "1"))
        if workers < 1:
            raise ConfigError("workers must be at least 1", field="workers")
        code, _ = run_experiment(args.subcommand, cfg, args.out, workers)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED
    except (StrongForceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
