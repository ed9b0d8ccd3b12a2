"""Experiment harness: sweeps over seeding schemes and simulation budgets.

Every experiment is a grid of (scheme, n, run) units.  Run ``r`` uses the
salt ``salt + SEP + "run" + r`` under every scheme and budget, so results are
paired across schemes: the same run index sees the same real-environment
noise, and differences between schemes come from the planning seeds alone.

Results are written as CSV with one row per (scheme, n); rows follow the
scheme order of the config and ascending n, whatever order the units finish
in.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigurationError
from .seeding import SEP, SeedScheme

CSV_HEADER = ("experiment", "scheme", "n_simulations", "mean", "std_error", "num_runs", "salt")
SCHEMES = ("independent", "dependent", "depth-dependent")
OUTPUT_DIR_ENV = "CRNPLAN_OUTPUT_DIR"

# per experiment: default budgets, default runs, parameters with defaults
DEFAULTS = {
    "synthetic-fixed": dict(
        sims=(1, 2, 4, 8, 16, 32), runs=200,
        params=dict(states=7, actions=4, horizon=20, policies=100, d=2,
                    generator_seed=0, mdp_file="")),
    "synthetic-uct": dict(
        sims=(4, 8, 16, 32, 64), runs=200,
        params=dict(states=7, actions=4, horizon=20, generator_seed=0,
                    depth_limit=2, exploration=math.sqrt(2), mdp_file="")),
    "counterexample": dict(
        sims=tuple(range(1, 17)), runs=200,
        params=dict(r0=2.0, r1=4.0, r2=3.0, r3=2.0)),
    "ftvaf": dict(
        sims=(1, 2, 4, 8), runs=200,
        params=dict(drift=0.15, volatility=0.2, horizon=20, population=1000,
                    c1=5.0, c2=0.03, grid=101, rollout_fraction=0.11)),
    "ludo": dict(
        sims=(4, 8, 16), runs=500,
        params=dict(depth_limit=2, exploration=math.sqrt(2), move_cap=300)),
}
EXPERIMENTS = tuple(DEFAULTS)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    schemes: tuple = SCHEMES
    sims: tuple = ()
    num_runs: int = 0
    salt: str = "crn"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in DEFAULTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; "
                                     f"choose from {', '.join(EXPERIMENTS)}")
        defaults = DEFAULTS[self.experiment]
        unknown = set(self.params) - set(defaults["params"])
        if unknown:
            raise ConfigurationError(f"{self.experiment} has no parameter(s) {sorted(unknown)}")
        params = dict(defaults["params"])
        for key, value in self.params.items():
            params[key] = type(defaults["params"][key])(value)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "sims", tuple(int(n) for n in (self.sims or defaults["sims"])))
        object.__setattr__(self, "num_runs", int(self.num_runs or defaults["runs"]))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if not self.sims or min(self.sims) < 1:
            raise ConfigurationError("need a non-empty sweep of positive simulation counts")
        if self.num_runs < 1:
            raise ConfigurationError("num_runs must be at least 1")
        if not self.schemes:
            raise ConfigurationError("need at least one scheme")
        for name in self.schemes:
            SeedScheme.parse(name)

    def scheme(self, name: str) -> SeedScheme:
        return SeedScheme.parse(name, depth=_dd_depth(self))

    def run_salt(self, run: int) -> str:
        return f"{self.salt}{SEP}run{run}"

    def params_key(self) -> str:
        return json.dumps(self.params, sort_keys=True)


def _dd_depth(config: ExperimentConfig) -> int:
    p = config.params
    if config.experiment == "synthetic-fixed":
        return p["d"]
    if config.experiment == "counterexample":
        return 2
    if config.experiment == "ftvaf":
        return 1
    return p["depth_limit"]


# -- per-experiment setup and single runs ----------------------------------------


@lru_cache(maxsize=8)
def _synthetic_mdp(params_key: str):
    from .mdp import load_mdp
    from .synthetic import SyntheticSpec, generate_mdp

    p = json.loads(params_key)
    if p["mdp_file"]:
        mdp = load_mdp(p["mdp_file"])
        spec = SyntheticSpec(mdp.num_states, mdp.num_actions, mdp.horizon, p["generator_seed"])
        return spec, mdp
    spec = SyntheticSpec(p["states"], p["actions"], p["horizon"], p["generator_seed"])
    return spec, generate_mdp(spec)


@lru_cache(maxsize=8)
def _fixed_setup(params_key: str):
    from .mdp import utility
    from .synthetic import generate_agreeing_policies

    p = json.loads(params_key)
    spec, mdp = _synthetic_mdp(params_key)
    policies = generate_agreeing_policies(spec, p["policies"], p["d"], p["generator_seed"])
    true = np.array([utility(mdp, pi) for pi in policies])
    return mdp, policies, true


@lru_cache(maxsize=8)
def _counterexample_setup(params_key: str):
    from .estimators import counterexample_mdp
    from .mdp import utility

    p = json.loads(params_key)
    mdp, p1, p2 = counterexample_mdp(p["r0"], p["r1"], p["r2"], p["r3"])
    return mdp, [p1, p2], np.array([utility(mdp, p1), utility(mdp, p2)])


def _ftvaf_params(p: dict):
    from .ftvaf import FtvafParams

    return FtvafParams(drift=p["drift"], volatility=p["volatility"], horizon=p["horizon"],
                       population_size=p["population"], penalty_scale=p["c1"],
                       terminal_scale=p["c2"], grid_size=p["grid"],
                       rollout_fraction=p["rollout_fraction"])


def run_once(config: ExperimentConfig, scheme_name: str, n: int, run: int) -> float:
    """Metric of one run: true value of the chosen policy (fixed sets) or
    the realised return (planning experiments, win = 1 for Ludo)."""
    scheme = config.scheme(scheme_name)
    salt = config.run_salt(run)
    p = config.params
    name = config.experiment
    if name in ("synthetic-fixed", "counterexample"):
        from .planner import select_best_policy

        setup = _fixed_setup if name == "synthetic-fixed" else _counterexample_setup
        mdp, policies, true = setup(config.params_key())
        report = select_best_policy(mdp, policies, _dd_depth(config), n, scheme, salt, true)
        return report.true_utility_of_chosen
    if name == "synthetic-uct":
        from .planner import PlanningConfig, TabularEnv, run_episode_with_planner

        _, mdp = _synthetic_mdp(config.params_key())
        plan = PlanningConfig(p["depth_limit"], n, p["exploration"], scheme)
        return run_episode_with_planner(TabularEnv(mdp), plan, salt).total_return
    if name == "ftvaf":
        from .ftvaf import run_ftvaf_episode

        return run_ftvaf_episode(n, scheme, salt, _ftvaf_params(p)).total_return
    if name == "ludo":
        from .ludo import BOARD, play_game, uct_agent
        from .planner import PlanningConfig

        plan = PlanningConfig(p["depth_limit"], n, p["exploration"], scheme)
        return play_game(uct_agent(plan, salt, BOARD, p["move_cap"]), salt,
                         BOARD, p["move_cap"]).reward
    raise ConfigurationError(f"unknown experiment {name!r}")


def _run_unit(args):
    return run_once(*args)


# -- results --------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    n_simulations: int
    mean: float
    std_error: float
    num_runs: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    values: dict  # (scheme, n) -> per-run metric array, indexed by run

    @property
    def rows(self) -> list:
        out = []
        for scheme in self.config.schemes:
            for n in sorted(self.config.sims):
                v = self.values[scheme, n]
                se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else float("nan")
                out.append(SweepRow(scheme, n, float(v.mean()), se, len(v)))
        return out

    def row(self, scheme: str, n: int) -> SweepRow:
        return next(r for r in self.rows if r.scheme == scheme and r.n_simulations == n)

    def paired_difference(self, scheme_a: str, scheme_b: str, n: int) -> tuple[float, float]:
        """Mean and standard error of run-wise ``a - b`` at budget ``n``."""
        diff = self.values[scheme_a, n] - self.values[scheme_b, n]
        se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else float("nan")
        return float(diff.mean()), se

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            se = "" if r.num_runs == 1 else repr(r.std_error)
            writer.writerow((self.config.experiment, r.scheme, r.n_simulations,
                             repr(r.mean), se, r.num_runs, self.config.salt))
        return buf.getvalue()


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Run every (scheme, n, run) unit, across ``jobs`` processes if > 1."""
    units = [(config, s, n, r) for s in config.schemes for n in config.sims
             for r in range(config.num_runs)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            flat = list(pool.map(_run_unit, units, chunksize=max(1, len(units) // (8 * jobs))))
    else:
        flat = [_run_unit(u) for u in units]
    values = {}
    k = 0
    for s in config.schemes:
        for n in config.sims:
            values[s, n] = np.array(flat[k:k + config.num_runs], dtype=np.float64)
            k += config.num_runs
    return ExperimentResult(config, values)


def default_output(experiment: str, out: Optional[str] = None) -> Path:
    if out:
        return Path(out)
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"{experiment}.csv"


def write_csv(result: ExperimentResult, path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(result.to_csv())
    return path


def read_csv(path) -> list:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def gnuplot_script(csv_path, schemes: Sequence[str] = SCHEMES, title: str = "") -> str:
    """gnuplot commands plotting mean +- one standard error per scheme."""
    csv_path = str(csv_path)
    words = " ".join(schemes)
    lines = [
        'set datafile separator ","',
        "set key top left",
        "set logscale x 2",
        'set xlabel "number of simulations"',
        'set ylabel "mean"',
    ]
    if title:
        lines.append(f'set title "{title}"')
    lines.append(
        f'plot for [s in "{words}"] '
        f"'< awk -F, -v s='.s.' \"\\$2 == s\" {csv_path}' "
        "using 3:4:5 with yerrorlines title s"
    )
    return "\n".join(lines) + "\n"
