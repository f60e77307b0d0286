"""Experiment configs, trial fan-out, trace/summary files and comparisons."""

from __future__ import annotations

import ast
import csv
import io
import math
import operator
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import tomli

from . import problems as P
from . import schedules as S
from .solvers import BASELINE_KINDS, Trace, run_baseline, run_gda

SUMMARY_COLUMNS = (
    "cum_grad_evals",
    "mean_grad_norm_sq",
    "se_grad_norm_sq",
    "mean_dist_sq",
    "se_dist_sq",
    "trials",
    "diverged",
)


class ConfigError(ValueError):
    pass


# -- tiny arithmetic evaluator for config values like "2/(9*L)" ---------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sqrt": math.sqrt}


def eval_expr(text: str, env: dict) -> float:
    """Evaluate arithmetic over numbers and the names in ``env`` (plus ``sqrt``)."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ConfigError(f"unknown name {node.id!r} in expression {text!r}")
            return float(env[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {text!r}") from exc
    return ev(tree)


def _num(value, env: dict) -> float:
    if isinstance(value, str):
        return eval_expr(value, env)
    return float(value)


# -- config ---------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    problem: dict
    algorithm: dict
    init: dict = field(default_factory=lambda: {"kind": "ones"})
    seed: int = 0
    trials: int = 1
    record_every: int = 1
    output: str = "out"
    name: str = "experiment"
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "ExperimentConfig":
        data = dict(data)
        for key in ("problem", "algorithm"):
            if not isinstance(data.get(key), dict) or "kind" not in data[key]:
                raise ConfigError(f"config needs a [{key}] table with a 'kind'")
        known = {"problem", "algorithm", "init", "seed", "trials", "record_every", "output", "name"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
        cfg = cls(
            problem=dict(data["problem"]),
            algorithm=dict(data["algorithm"]),
            init=dict(data.get("init", {"kind": "ones"})),
            seed=int(data.get("seed", 0)),
            trials=int(data.get("trials", 1)),
            record_every=int(data.get("record_every", 1)),
            output=str(data.get("output", "out")),
            name=str(data.get("name", "experiment")),
            base_dir=Path(base_dir) if base_dir is not None else Path.cwd(),
        )
        if cfg.trials < 1:
            raise ConfigError("trials must be >= 1")
        if cfg.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path, "rb") as fh:
            try:
                data = tomli.load(fh)
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    @property
    def problem_seed(self) -> int:
        return int(self.problem.get("seed", 0))

    def trial_seed(self, trial: int) -> int:
        return int(np.random.SeedSequence([self.seed, trial]).generate_state(1)[0])


# -- builders -------------------------------------------------------------------


def build_problem(pcfg: dict, base_dir: Path = Path(".")) -> P.Problem:
    kind = pcfg["kind"]
    if kind == "bilinear_random":
        return P.random_bilinear(int(pcfg["d"]), pcfg.get("M"), seed=int(pcfg.get("seed", 0)))
    if kind == "bilinear_diag":
        return P.diagonal_bilinear(int(pcfg["d"]), float(pcfg.get("ratio", 0.5)))
    if kind == "bilinear_matrix":
        B = P.load_matrix_csv(base_dir / pcfg["path"])
        return P.BilinearProblem(B, m=pcfg.get("m"), M=pcfg.get("M"))
    if kind == "quadratic_random":
        return P.random_convex_concave_quadratic(
            int(pcfg["dx"]), int(pcfg.get("dy", pcfg["dx"])), float(pcfg.get("L", 1.0)), seed=int(pcfg.get("seed", 0))
        )
    if kind == "scsc_random":
        return P.random_scsc_quadratic(int(pcfg["d"]), float(pcfg["mu"]), seed=int(pcfg.get("seed", 0)))
    if kind == "huber":
        return P.make_huber_coupling()
    if kind == "logcosh":
        return P.make_log_cosh()
    if kind == "xy":
        return P.scalar_bilinear(float(pcfg.get("b", 1.0)))
    raise ConfigError(f"unknown problem kind {kind!r}")


def problem_env(problem: P.Problem) -> dict:
    env = {"L": problem.L, "mu": problem.mu}
    for name in ("m", "M", "kappa"):
        if hasattr(problem, name):
            env[name] = getattr(problem, name)
    return env


def build_init(pcfg: dict, problem: P.Problem, trial_seed: int) -> np.ndarray:
    kind = pcfg.get("kind", "ones")
    scale = float(pcfg.get("scale", 1.0))
    if kind == "ones":
        z = np.ones(problem.dim)
    elif kind == "unit":
        z = np.zeros(problem.dim)
        z[int(pcfg.get("index", 0))] = 1.0
    elif kind == "random":
        z = np.random.default_rng(trial_seed).normal(size=problem.dim)
    elif kind == "vector":
        z = np.asarray(pcfg["values"], dtype=float)
    else:
        raise ConfigError(f"unknown init kind {kind!r}")
    return P.as_vector(problem, scale * z)


def build_schedule(pcfg: dict, problem: P.Problem, trial_seed: int) -> S.StepPairSchedule:
    env = problem_env(problem)
    kind = pcfg["kind"]
    T = int(pcfg["T"])
    if T == 0:
        return S.StepPairSchedule(np.empty(0), np.empty(0), kind, {"T": 0})

    def get(name, default=None):
        if name in pcfg:
            return _num(pcfg[name], env)
        if default is not None:
            return float(default)
        if name in env:
            return float(env[name])
        raise ConfigError(f"schedule {kind!r} needs {name!r}")

    seed = int(pcfg["seed"]) if "seed" in pcfg else trial_seed
    if kind == "slingshot_bilinear":
        return S.slingshot_bilinear(T, get("m"), get("M"), pcfg.get("ordering"))
    if kind == "slingshot_quadratic":
        return S.slingshot_quadratic(T, get("L"), pcfg.get("ordering"))
    if kind == "slingshot_cc":
        return S.slingshot_cc(T, get("h"), seed)
    if kind == "arcsine_random":
        return S.arcsine_random(T, get("m"), get("M"), seed)
    if kind in ("constant", "alternating", "two-timescale"):
        params = {"alpha": get("alpha")}
        if "beta" in pcfg:
            params["beta"] = get("beta")
        return S.classical(kind, T, **params)
    raise ConfigError(f"unknown schedule kind {kind!r}")


# -- running ----------------------------------------------------------------------


def run_trial(cfg: ExperimentConfig, trial: int, problem: Optional[P.Problem] = None) -> Trace:
    problem = problem if problem is not None else build_problem(cfg.problem, cfg.base_dir)
    seed = cfg.trial_seed(trial)
    z0 = build_init(cfg.init, problem, seed)
    algo = cfg.algorithm
    if algo["kind"] == "gda":
        if "schedule" not in algo:
            raise ConfigError("gda needs an [algorithm.schedule] table")
        sched = build_schedule(algo["schedule"], problem, seed)
        return run_gda(problem, sched, z0, record_every=cfg.record_every)
    if algo["kind"] in BASELINE_KINDS:
        env = problem_env(problem)
        params = {k: (v if isinstance(v, bool) else _num(v, env)) for k, v in algo.get("params", {}).items()}
        return run_baseline(problem, algo["kind"], int(algo["T"]), z0, params, record_every=cfg.record_every)
    raise ConfigError(f"unknown algorithm kind {algo['kind']!r}")


def max_workers(n_tasks: int) -> int:
    cap = os.environ.get("MMX_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_tasks, limit))


def run_trials(cfg: ExperimentConfig) -> list[Trace]:
    problem = build_problem(cfg.problem, cfg.base_dir)
    workers = max_workers(cfg.trials)
    if workers == 1:
        return [run_trial(cfg, i, problem) for i in range(cfg.trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map preserves trial order, so the merge is deterministic
        return list(pool.map(lambda i: run_trial(cfg, i, problem), range(cfg.trials)))


@dataclass
class Series:
    cum_grad_evals: np.ndarray
    mean_grad_norm_sq: np.ndarray
    se_grad_norm_sq: np.ndarray
    mean_dist_sq: np.ndarray
    se_dist_sq: np.ndarray
    trials: int
    diverged: np.ndarray

    def rows(self):
        for i, k in enumerate(self.cum_grad_evals):
            yield (
                int(k),
                float(self.mean_grad_norm_sq[i]),
                float(self.se_grad_norm_sq[i]),
                float(self.mean_dist_sq[i]),
                float(self.se_dist_sq[i]),
                self.trials,
                int(self.diverged[i]),
            )


def _step_lookup(evals: np.ndarray, values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Value of the last record with ``evals <= k`` for each ``k`` in ``grid``.

    Grid points before a trace's first record get ``nan``.
    """
    idx = np.searchsorted(evals, grid, side="right") - 1
    out = np.where(idx >= 0, values[np.clip(idx, 0, None)], np.nan)
    return out


def _mean_se(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = stack.shape[0]
    with np.errstate(invalid="ignore"):
        mean = stack.mean(axis=0)
        se = stack.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(stack.shape[1])
    return mean, se


def aggregate(traces: Sequence[Trace]) -> Series:
    """Mean and standard error over trials, aligned by cumulative gradient evaluations."""
    grid = np.unique(np.concatenate([np.asarray(t.cum_grad_evals, dtype=np.int64) for t in traces]))
    G, D, div = [], [], np.zeros(grid.size, dtype=int)
    for tr in traces:
        ev = np.asarray(tr.cum_grad_evals, dtype=np.int64)
        G.append(_step_lookup(ev, tr.column("grad_norm_sq"), grid))
        D.append(_step_lookup(ev, tr.column("dist_sq"), grid))
        if tr.status == "diverged":
            div += grid >= ev[-1]
    mg, sg = _mean_se(np.array(G))
    md, sd = _mean_se(np.array(D))
    return Series(grid, mg, sg, md, sd, len(traces), div)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


GNUPLOT_STUB = """\
# plot-ready stub; run with: gnuplot -p {name}
set datafile separator ','
set key autotitle columnhead
set logscale y
set xlabel 'gradient evaluations'
set ylabel '{ylabel}'
plot {plots}
"""


def write_gnuplot_stub(path: Path, csv_files: Sequence[str], ycol: int = 2, ylabel: str = "mean grad norm^2"):
    plots = ", \\\n     ".join(f"'{f}' using 1:{ycol} with lines title '{Path(f).stem}'" for f in csv_files)
    path.write_text(GNUPLOT_STUB.format(name=path.name, ylabel=ylabel, plots=plots))


def run_experiment(cfg: ExperimentConfig, output: Optional[Path] = None, gnuplot_stub: bool = False) -> Path:
    """Run every trial and write ``trace_NNNN.csv``, ``final_NNNN.json`` and ``summary.csv``."""
    out = Path(output) if output is not None else Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    traces = run_trials(cfg)
    for i, tr in enumerate(traces):
        (out / f"trace_{i:04}.csv").write_text(tr.to_csv())
        (out / f"final_{i:04}.json").write_text(tr.final_state_json() + "\n")
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, aggregate(traces).rows())
    if gnuplot_stub:
        write_gnuplot_stub(out / "plot.gp", ["summary.csv"])
    return out


# -- comparison -------------------------------------------------------------------


COMPARE_COLUMNS = ("algorithm",) + SUMMARY_COLUMNS


@dataclass
class ComparisonSummary:
    series: dict  # label -> Series

    def rows(self):
        for label, s in self.series.items():
            for row in s.rows():
                yield (label,) + row

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COMPARE_COLUMNS)
        for row in self.rows():
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()


def _label(cfg: ExperimentConfig, used: set) -> str:
    algo = cfg.algorithm
    base = algo["schedule"]["kind"] if algo["kind"] == "gda" and "schedule" in algo else algo["kind"]
    label = cfg.name if cfg.name != "experiment" else base
    out, k = label, 2
    while out in used:
        out, k = f"{label}_{k}", k + 1
    used.add(out)
    return out


def compare(configs: Sequence[ExperimentConfig]) -> ComparisonSummary:
    """Run each config and align their series on cumulative gradient evaluations."""
    if not configs:
        raise ConfigError("compare needs at least one config")
    seeds = {c.problem_seed for c in configs}
    kinds = {c.problem["kind"] for c in configs}
    if len(seeds) > 1 or len(kinds) > 1:
        raise ConfigError(f"configs do not share a problem instance (kinds {sorted(kinds)}, seeds {sorted(seeds)})")
    used: set = set()
    return ComparisonSummary({_label(c, used): aggregate(run_trials(c)) for c in configs})
