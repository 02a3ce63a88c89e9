"""Experiment harness: JSON configs, seeded sweeps, CSV/JSON persistence.

A config fully determines an experiment.  Runs are bit-reproducible:
identical config and seed produce identical CSV bytes on a platform, so
the per-row wall-clock column is left empty in the files (timing stays
available on the in-memory trajectories and as per-seed totals in
``summary.json``; it is never asserted on).

CSV format: header ``n,gamma,dist_sq,resid,draw_err_sq,ergodic_gap,wall_ns``,
UTF-8, LF line endings, absent metrics as empty fields.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import aggregate_expectation, fit_rate
from .oracles import NOISE_KINDS
from .problems import (
    make_affine_inclusion,
    make_lasso,
    make_matrix_game,
    make_smoothed_saddle,
)
from .schedules import StepSchedule
from .solvers import SOLVER_KINDS, run

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "parse_config",
    "load_config",
    "execute",
    "report",
    "sweep",
    "CSV_HEADER",
]

CSV_HEADER = "n,gamma,dist_sq,resid,draw_err_sq,ergodic_gap,wall_ns"

_TOP_KEYS = {"problem", "solver", "schedule", "oracle", "seeds", "budget",
             "record_every", "stop_tol", "init", "fit_window", "output_dir"}
_PROBLEM_KEYS = {
    "affine": {"kind", "dim", "nu", "skew_scale", "seed"},
    "lasso": {"kind", "design", "targets", "lambda"},
    "matrix_game": {"kind", "payoff"},
    "smoothed_game": {"kind", "payoff", "beta"},
}
_SCHEDULE_KEYS = {
    "constant": {"kind", "gamma"},
    "band": {"kind", "c", "gamma"},
    "strongly_monotone": {"kind", "nu"},
    "power_decay": {"kind", "gamma0", "p"},
}
_ORACLE_KEYS = {"noise", "variance", "batch_size"}
_VARIANCE_KEYS = {"kind", "c", "p"}
_INIT_KEYS = {"x0", "x_prev", "v0", "v_prev"}

_SADDLE_PROBLEMS = {"matrix_game", "smoothed_game"}
_COMPAT = {
    "spd": _SADDLE_PROBLEMS,
    "srpg": {"lasso"},
    "srfb": {"affine", "lasso"},
    "rfb": {"affine", "lasso"},
    "frb": {"affine", "lasso"},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _reject_unknown(d, allowed, where):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in {where}")


@dataclass
class ExperimentConfig:
    """A validated, normalised experiment description."""

    data: dict
    base_dir: Path

    @property
    def digest(self):
        """Hex digest of the canonical JSON form (key order independent)."""
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def to_json(self):
        return json.dumps(self.data, sort_keys=True, indent=2)

    def build_problem(self):
        p = self.data["problem"]
        kind = p["kind"]
        if kind == "affine":
            return make_affine_inclusion(p["dim"], p["nu"], p["skew_scale"],
                                         seed=p["seed"])
        if kind == "lasso":
            design = self._matrix(p["design"], "design")
            targets = self._matrix(p["targets"], "targets").ravel()
            return make_lasso(design, targets, p["lambda"])
        if kind == "matrix_game":
            return make_matrix_game(self._matrix(p["payoff"], "payoff"))
        return make_smoothed_saddle(self._matrix(p["payoff"], "payoff"),
                                    p["beta"])

    def build_schedule(self):
        s = dict(self.data["schedule"])
        return StepSchedule(s.pop("kind"), **s)

    def _matrix(self, value, name):
        if isinstance(value, dict):
            path = self.base_dir / value["csv"]
            if not path.exists():
                raise ConfigError(f"{name} CSV not found: {path}")
            return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))
        return np.atleast_2d(np.asarray(value, dtype=float))


def parse_config(text, base_dir="."):
    """Parse and validate a JSON config, applying defaults.

    Unknown keys are rejected by name; solver/problem/noise compatibility
    is enforced here so a bad combination never reaches a run.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    for key in ("problem", "solver", "schedule", "budget"):
        if key not in raw:
            raise ConfigError(f"config is missing required key {key!r}")

    problem = dict(raw["problem"])
    kind = problem.get("kind")
    if kind not in _PROBLEM_KEYS:
        raise ConfigError(f"unknown problem kind {kind!r}")
    _reject_unknown(problem, _PROBLEM_KEYS[kind], f"problem({kind})")
    if kind == "affine":
        problem.setdefault("seed", 0)
        for k in ("dim", "nu", "skew_scale"):
            if k not in problem:
                raise ConfigError(f"affine problem is missing {k!r}")

    solver = raw["solver"]
    if solver not in SOLVER_KINDS:
        raise ConfigError(f"unknown solver {solver!r}")
    if kind not in _COMPAT[solver]:
        raise ConfigError(
            f"solver {solver!r} is incompatible with problem kind {kind!r}: "
            f"it requires one of {sorted(_COMPAT[solver])}")

    schedule = dict(raw["schedule"])
    skind = schedule.get("kind")
    if skind not in _SCHEDULE_KEYS:
        raise ConfigError(f"unknown schedule kind {skind!r}")
    _reject_unknown(schedule, _SCHEDULE_KEYS[skind], f"schedule({skind})")

    oracle = dict(raw.get("oracle", {"noise": "exact"}))
    _reject_unknown(oracle, _ORACLE_KEYS, "oracle")
    noise = oracle.setdefault("noise", "exact")
    if noise not in NOISE_KINDS:
        raise ConfigError(f"unknown noise model {noise!r}")
    if noise == "gaussian":
        if "variance" not in oracle:
            raise ConfigError("gaussian noise needs a variance schedule")
        _reject_unknown(oracle["variance"], _VARIANCE_KEYS, "oracle.variance")
    if noise == "minibatch":
        if kind != "lasso":
            raise ConfigError("minibatch noise requires a finite-sum (lasso) problem")
        oracle.setdefault("batch_size", 1)

    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds must be a nonempty list of integers")
    budget = raw["budget"]
    if not isinstance(budget, int) or budget < 0:
        raise ConfigError("budget must be a nonnegative integer")
    record_every = raw.get("record_every", 1)
    if not isinstance(record_every, int) or record_every < 1:
        raise ConfigError("record_every must be an integer >= 1")
    stop_tol = float(raw.get("stop_tol", 0.0))

    init = dict(raw.get("init", {}))
    _reject_unknown(init, _INIT_KEYS, "init")
    if init and solver != "spd" and ("v0" in init or "v_prev" in init)\
            and kind not in _SADDLE_PROBLEMS:
        raise ConfigError("v0/v_prev only apply to saddle problems")

    data = {
        "problem": problem,
        "solver": solver,
        "schedule": schedule,
        "oracle": oracle,
        "seeds": [int(s) for s in seeds],
        "budget": budget,
        "record_every": record_every,
        "stop_tol": stop_tol,
        "init": init,
        "output_dir": raw.get("output_dir", "runs"),
    }
    if "fit_window" in raw:
        lo, hi = raw["fit_window"]
        data["fit_window"] = [float(lo), float(hi)]
    return ExperimentConfig(data=data, base_dir=Path(base_dir))


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text(), base_dir=path.parent)


def _fmt(x):
    return "" if x is None or (isinstance(x, float) and not np.isfinite(x)) else repr(x)


def write_csv(path, trajectory):
    """One CSV per seed; wall_ns is left empty to keep bytes reproducible."""
    lines = [CSV_HEADER]
    dist = trajectory.dist_sq
    gap = trajectory.ergodic_gap
    for i in range(trajectory.ns.shape[0]):
        lines.append(",".join([
            str(int(trajectory.ns[i])),
            repr(float(trajectory.gammas[i])),
            _fmt(None if dist is None else float(dist[i])),
            repr(float(trajectory.resid[i])),
            repr(float(trajectory.draw_err_sq[i])),
            _fmt(None if gap is None else float(gap[i])),
            "",
        ]))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode())


def _admissibility_verdicts(config, problem, schedule):
    from .solvers import _check_admissibility
    return _check_admissibility(problem, config.data["solver"], schedule,
                                config.data["oracle"], force=True)


def execute(config, force=False, backend="auto", out_dir=None):
    """Run every seed of a config, persist artifacts, return the summary.

    Writes ``seed_<s>.csv`` per seed, ``summary.json``, and
    ``mean_curve.csv`` (per-iteration mean and standard error) when at
    least two seeds share an aligned grid.  Refuses inadmissible
    schedules unless ``force``.
    """
    data = config.data
    problem = config.build_problem()
    schedule = config.build_schedule()
    out = Path(out_dir) if out_dir is not None else config.base_dir / data["output_dir"]
    out.mkdir(parents=True, exist_ok=True)
    init = data["init"]
    t_start = time.perf_counter()
    trajectories = []
    per_seed = []
    for seed in data["seeds"]:
        t0 = time.perf_counter()
        traj = run(problem, data["solver"], schedule, data["budget"],
                   noise=data["oracle"], record_every=data["record_every"],
                   stop_tol=data["stop_tol"], seed=seed,
                   x0=init.get("x0"), x_prev=init.get("x_prev"),
                   v0=init.get("v0"), v_prev=init.get("v_prev"),
                   force=force, backend=backend)
        wall = time.perf_counter() - t0
        write_csv(out / f"seed_{seed}.csv", traj)
        trajectories.append(traj)
        entry = {
            "seed": seed,
            "steps": traj.steps,
            "stopped_early": traj.stopped_early,
            "diverged": traj.diverged,
            "wall_s": wall,
            "final_resid": float(traj.resid[-1]) if traj.resid.size else None,
            "min_resid": float(traj.resid.min()) if traj.resid.size else None,
            "final_dist_sq": (float(traj.dist_sq[-1])
                              if traj.dist_sq is not None and traj.dist_sq.size
                              else None),
            "final_gap": (float(traj.ergodic_gap[-1])
                          if traj.ergodic_gap is not None and traj.ergodic_gap.size
                          else None),
        }
        per_seed.append(entry)

    metric = "ergodic_gap" if data["solver"] == "spd" else "dist_sq"
    if trajectories and getattr(trajectories[0], metric) is None:
        metric = "resid"
    mean_curve = None
    curve = None
    if len(trajectories) >= 2:
        try:
            ns, mean, stderr = aggregate_expectation(trajectories, metric)
            mean_curve = "mean_curve.csv"
            lines = ["n,mean,stderr"]
            lines += [f"{int(n)},{repr(float(m))},{repr(float(s))}"
                      for n, m, s in zip(ns, mean, stderr)]
            (out / mean_curve).write_bytes(("\n".join(lines) + "\n").encode())
            curve = (ns, mean)
        except ValueError:
            mean_curve = None  # misaligned grids (early stops); noted below
    if curve is None and trajectories and trajectories[0].ns.size:
        col = getattr(trajectories[0], metric)
        if col is not None:
            curve = (trajectories[0].ns, col)

    rate = {"metric": metric, "slope": None, "intercept": None,
            "window": None, "target": _rate_target(data)}
    if curve is not None and curve[0].size >= 2:
        n_hi = float(curve[0][-1])
        window = data.get("fit_window") or [max(10.0, n_hi / 100.0), n_hi]
        rate["window"] = list(window)
        try:
            slope, intercept = fit_rate((curve[0], curve[1]), window)
            rate.update(slope=slope, intercept=intercept)
        except ValueError:
            pass  # nonpositive or too few values in the window

    verdicts = _admissibility_verdicts(config, problem, schedule)
    summary = {
        "config_digest": config.digest,
        "config": data,
        "backend": trajectories[0].backend if trajectories else None,
        "admissibility": {k: v.to_dict() for k, v in verdicts.items()},
        "per_seed": per_seed,
        "rate": rate,
        "mean_curve": mean_curve,
        "total_wall_s": time.perf_counter() - t_start,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary, trajectories


def _rate_target(data):
    # -1 is the iteration-indexed target both for the strongly monotone
    # distance rate (up to the log factor) and the ergodic gap rate
    if data["solver"] == "spd" or data["schedule"]["kind"] == "strongly_monotone":
        return -1.0
    return None


def report(summary_paths, out_stream=None):
    """Tabulate summaries and emit gnuplot-ready ``n value`` data files."""
    import sys
    out_stream = out_stream or sys.stdout
    missing = [str(p) for p in summary_paths if not Path(p).exists()]
    if missing:
        raise FileNotFoundError("missing summary files: " + ", ".join(missing))
    if not summary_paths:
        raise ValueError("no summary files given")
    rows = []
    for path in summary_paths:
        path = Path(path)
        s = json.loads(path.read_text())
        rate = s["rate"]
        rows.append((
            path.parent.name or ".",
            s["config"]["solver"],
            len(s["per_seed"]),
            max(e["steps"] for e in s["per_seed"]),
            "yes" if any(e["diverged"] for e in s["per_seed"]) else "no",
            "-" if rate["slope"] is None else f"{rate['slope']:.4f}",
            "-" if rate["target"] is None else f"{rate['target']:.1f}",
        ))
        _emit_curves(path.parent, s, out_stream)
    widths = [max(len(str(r[i])) for r in rows + [_HDR]) for i in range(len(_HDR))]
    for r in [_HDR] + rows:
        out_stream.write("  ".join(str(c).ljust(w) for c, w in zip(r, widths))
                         .rstrip() + "\n")


_HDR = ("run", "solver", "seeds", "steps", "diverged", "slope", "target")


def _emit_curves(run_dir, summary, out_stream):
    metric = summary["rate"]["metric"]
    src = run_dir / (summary["mean_curve"] or "")
    if summary["mean_curve"] and src.exists():
        body = src.read_text().splitlines()[1:]
        pairs = [line.split(",")[:2] for line in body]
    else:
        seed = summary["config"]["seeds"][0]
        src = run_dir / f"seed_{seed}.csv"
        if not src.exists():
            return
        idx = CSV_HEADER.split(",").index(metric)
        pairs = []
        for line in src.read_text().splitlines()[1:]:
            cells = line.split(",")
            if cells[idx]:
                pairs.append((cells[0], cells[idx]))
    dat = run_dir / f"curve_{metric}.dat"
    dat.write_text("".join(f"{n} {v}\n" for n, v in pairs))
    out_stream.write(f"wrote {dat}\n")


def sweep(config, param, values, force=False, backend="auto"):
    """Re-run a config for each value of one (dotted) parameter key."""
    results = []
    for value in values:
        data = json.loads(json.dumps(config.data))  # deep copy
        node = data
        *parents, leaf = param.split(".")
        for p in parents:
            if p not in node:
                raise ConfigError(f"sweep parameter path {param!r} not found")
            node = node[p]
        if leaf not in node:
            raise ConfigError(f"sweep parameter path {param!r} not found")
        node[leaf] = value
        node_dir = f"{data['output_dir']}/{param.replace('.', '_')}={value}"
        data["output_dir"] = node_dir
        sub = parse_config(json.dumps(data), base_dir=config.base_dir)
        summary, _ = execute(sub, force=force, backend=backend)
        results.append((value, summary))
    return results
