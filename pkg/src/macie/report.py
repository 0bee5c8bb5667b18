"""End-to-end pipeline and report artifacts.

``run_pipeline`` wires the stages together: fit the structural model,
replay counterfactuals, aggregate individual effects, compute collective
metrics, optionally replace the naive effects with Shapley values,
normalise and rank, bootstrap confidence intervals, and render the
explanation. Each stage is timed in nanoseconds and the stage times are
reported next to the measured total.

The report is a versioned JSON document; readers reject unknown top-level
fields so stale tooling fails loudly instead of silently ignoring data.
Everything except the timing block is deterministic for a given config, no
matter how many worker threads run the replays.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .attribution import (
    EXACT_SHAPLEY_LIMIT,
    BootstrapResult,
    CoalitionValues,
    agent_ranks,
    bootstrap_ci,
    bootstrap_indices,
    contribution_percentages,
    effects_from_interventions,
    efficiency_gap,
    normalize_contributions,
    run_interventions,
    sample_permutations,
    shapley_exact,
    shapley_mc,
)
from .collective import DEFAULT_N_BINS, EmergenceMetrics, emergence_metrics
from .core import (
    CUMULATIVE_TEAM_REWARD,
    ConfigError,
    History,
    MacieError,
    OUTCOME_KINDS,
    OutcomeSpec,
)
from .counterfactual import (
    DEFAULT_EPSILON_FRAC,
    MODES,
    CounterfactualEngine,
)
from .envs import list_envs, make_env
from .explain import (
    DEFAULT_TAU_SI,
    DEFAULT_TAU_SYNERGY,
    VERBOSITY_LEVELS,
    build_explanation,
)
from .policies import default_alphas, default_policies, policy_arrays
from .rng import SeedTree
from .scm import DEFAULT_CORR_THRESHOLD, MODEL_NAMES, StructuralCausalModel
from .trees import TreeEnsemble

REPORT_FORMAT = "macie-report"
REPORT_VERSION = 1
METHODS = ("naive_cf", "shapley_exact", "shapley_mc")
DEFAULT_EPISODES = {
    "gridworld": 25,
    "coopnav": 20,
    "predatorprey": 20,
    "traffic": 25,
    "additive": 25,
}
THREADS_ENV_VAR = "MACIE_THREADS"

KNOWN_REPORT_KEYS = {
    "format",
    "version",
    "config",
    "n_agents",
    "n_episodes",
    "horizon",
    "outcome",
    "y_fact",
    "phi",
    "phi_naive",
    "phi_hat",
    "percent",
    "ranks",
    "y_cf",
    "critical_timesteps",
    "ci",
    "emergence",
    "efficiency",
    "model",
    "explanation",
    "timings_ns",
    "traces",
}

PLOTDATA_LABELS = {
    "1": "fit_scm",
    "2": "counterfactuals",
    "3": "individual_effects",
    "4": "shapley",
    "5": "normalize",
    "6": "bootstrap",
    "7": "explain",
}


def default_permutations(n_agents):
    """Default Monte Carlo permutation budget per team size."""
    if n_agents == 2:
        return 15
    if n_agents == 3:
        return 12
    if n_agents <= 7:
        import math

        return 2 * math.factorial(n_agents)
    return 200


def resolve_threads(explicit=None):
    """Worker count: explicit flag wins over MACIE_THREADS, else 1."""
    value = explicit
    if value is None:
        raw = os.environ.get(THREADS_ENV_VAR)
        if raw is None:
            return 1
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(
                f"{THREADS_ENV_VAR} must be an integer, got {raw!r}"
            ) from None
    value = int(value)
    if value < 1:
        raise ConfigError(f"thread count must be >= 1, got {value}")
    return value


@dataclass
class RunConfig:
    env: str = "gridworld"
    episodes: int | None = None
    horizon: int | None = None
    k: int = 5
    m: int | None = None
    b: int = 100
    alpha: float = 0.05
    method: str = "shapley_mc"
    model: str = "tree_ensemble"
    mode: str = "env_resim"
    seed: int = 42
    threads: int | None = None
    verbosity: str = "detailed"
    outcome: str = CUMULATIVE_TEAM_REWARD
    alphas: dict[int, float] = field(default_factory=dict)
    env_config: dict = field(default_factory=dict)
    epsilon_frac: float = DEFAULT_EPSILON_FRAC
    tau_synergy: float = DEFAULT_TAU_SYNERGY
    tau_si: float = DEFAULT_TAU_SI
    ii_bins: int = DEFAULT_N_BINS
    corr_threshold: float = DEFAULT_CORR_THRESHOLD

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}; choose from {', '.join(METHODS)}"
            )
        if self.model not in MODEL_NAMES:
            raise ConfigError(
                f"unknown model {self.model!r}; choose from {', '.join(MODEL_NAMES)}"
            )
        if self.mode not in MODES:
            raise ConfigError(
                f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}"
            )
        if self.verbosity not in VERBOSITY_LEVELS:
            raise ConfigError(
                f"unknown verbosity {self.verbosity!r}; "
                f"choose from {', '.join(VERBOSITY_LEVELS)}"
            )
        if self.outcome not in OUTCOME_KINDS:
            raise ConfigError(
                f"unknown outcome {self.outcome!r}; "
                f"choose from {', '.join(OUTCOME_KINDS)}"
            )
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.m is not None and self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.b < 2:
            raise ConfigError(f"b must be >= 2, got {self.b}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.episodes is not None and self.episodes < 1:
            raise ConfigError(f"episodes must be >= 1, got {self.episodes}")
        for i, a in self.alphas.items():
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"alpha for agent {i} must be in [0, 1], got {a}")
        return self


def _setup(config, history):
    """Build engine and history; none of this is part of the timed run."""
    outcome = OutcomeSpec(config.outcome)
    tree = SeedTree(config.seed)
    if history is not None:
        if config.mode != "scm_rollout":
            raise ConfigError(
                "ingested histories have no simulator; use mode scm_rollout"
            )
        episodes = config.episodes or len(history.episodes)
        if episodes > len(history.episodes):
            raise ConfigError(
                f"asked for {episodes} episodes but the log has "
                f"{len(history.episodes)}"
            )
        hist = History(
            episodes=history.episodes[:episodes],
            feature_names=history.feature_names,
        )
        engine = CounterfactualEngine(
            tree,
            outcome,
            history=hist,
            mode="scm_rollout",
            epsilon_frac=config.epsilon_frac,
        )
        return engine, hist, episodes

    env = make_env(config.env, config.env_config, horizon=config.horizon)
    alphas = default_alphas(env.n_agents)
    for i, a in config.alphas.items():
        if not 0 <= int(i) < env.n_agents:
            raise ConfigError(
                f"alpha override for agent {i} out of range "
                f"(env has {env.n_agents} agents)"
            )
        alphas[int(i)] = a
    policies = default_policies(env.n_agents, alphas)
    episodes = config.episodes or DEFAULT_EPISODES.get(config.env, 20)
    engine = CounterfactualEngine(
        tree,
        outcome,
        env=env,
        policies=policies,
        mode=config.mode,
        epsilon_frac=config.epsilon_frac,
    )
    hist = engine.generate_history(episodes)
    return engine, hist, episodes


def run_pipeline(config: RunConfig, history: History | None = None):
    """Run the full analysis; returns the report as a plain dict."""
    config.validate()
    threads = resolve_threads(config.threads)
    engine, hist, episodes = _setup(config, history)
    n = engine.n_agents
    tree = engine.tree

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    mapper = pool.map if pool is not None else map
    timings = {}
    try:
        t_start = time.perf_counter_ns()

        t0 = time.perf_counter_ns()
        scm = StructuralCausalModel().fit(
            hist,
            engine.outcome,
            model=config.model,
            corr_threshold=config.corr_threshold,
            rng=tree.stream("scm"),
        )
        engine.scm = scm
        timings["1"] = time.perf_counter_ns() - t0

        t0 = time.perf_counter_ns()
        grid = run_interventions(engine, episodes, config.k, mapper)
        values = CoalitionValues(engine, episodes)
        if (
            config.method in ("shapley_exact", "shapley_mc")
            and n <= EXACT_SHAPLEY_LIMIT
        ):
            # coalition replays are interventional rollouts too; running
            # them here leaves the later steps as arithmetic on cached values
            values.precompute(mapper)
        timings["2"] = time.perf_counter_ns() - t0

        t0 = time.perf_counter_ns()
        effects = effects_from_interventions(engine, grid)
        timings["3"] = time.perf_counter_ns() - t0

        t0 = time.perf_counter_ns()
        emerg = emergence_metrics(hist, values, effects.phi, config.ii_bins)
        timings["3.5"] = time.perf_counter_ns() - t0

        t0 = time.perf_counter_ns()
        m_used = None
        if config.method == "naive_cf":
            phi, phi_pe = effects.phi, effects.phi_pe
        elif config.method == "shapley_exact":
            phi, phi_pe = shapley_exact(values)
        else:
            m_used = config.m or default_permutations(n)
            perms = sample_permutations(n, m_used, tree.stream("perm"))
            phi, phi_pe = shapley_mc(values, perms)
        timings["4"] = time.perf_counter_ns() - t0

        t0 = time.perf_counter_ns()
        phi_hat = normalize_contributions(phi)
        percent = contribution_percentages(phi)
        ranks = agent_ranks(phi)
        timings["5"] = time.perf_counter_ns() - t0

        t0 = time.perf_counter_ns()
        indices = bootstrap_indices(episodes, config.b, tree.stream("bootstrap"))
        boot = bootstrap_ci(phi_pe, indices, config.alpha)
        timings["6"] = time.perf_counter_ns() - t0

        t0 = time.perf_counter_ns()
        explanation = build_explanation(
            phi,
            effects.y_fact,
            effects.y_cf,
            critical=effects.critical,
            bootstrap=boot,
            emergence=emerg,
            verbosity=config.verbosity,
            tau_synergy=config.tau_synergy,
            tau_si=config.tau_si,
            alpha=config.alpha,
        )
        timings["7"] = time.perf_counter_ns() - t0

        timings["total"] = time.perf_counter_ns() - t_start
    finally:
        if pool is not None:
            pool.shutdown()

    report = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "config": {
            "env": engine.env.name if engine.env is not None else None,
            "episodes": episodes,
            "horizon": engine.horizon,
            "k": config.k,
            "m": m_used,
            "b": config.b,
            "alpha": config.alpha,
            "method": config.method,
            "model": config.model,
            "mode": config.mode,
            "seed": config.seed,
            "threads": threads,
            "verbosity": config.verbosity,
            "outcome": config.outcome,
            "alphas": {str(i): float(a) for i, a in sorted(config.alphas.items())},
            "env_config": dict(config.env_config),
            "epsilon_frac": config.epsilon_frac,
            "tau_synergy": config.tau_synergy,
            "tau_si": config.tau_si,
            "ii_bins": config.ii_bins,
            "corr_threshold": config.corr_threshold,
        },
        "n_agents": n,
        "n_episodes": episodes,
        "horizon": engine.horizon,
        "outcome": config.outcome,
        "y_fact": float(effects.y_fact),
        "phi": [float(v) for v in phi],
        "phi_naive": [float(v) for v in effects.phi],
        "phi_hat": [float(v) for v in phi_hat],
        "percent": [float(v) for v in percent],
        "ranks": [int(v) for v in ranks],
        "y_cf": [float(v) for v in effects.y_cf],
        "critical_timesteps": [list(map(int, c)) for c in effects.critical],
        "ci": {
            "alpha": config.alpha,
            "lows": [float(v) for v in boot.lows],
            "highs": [float(v) for v in boot.highs],
            "se": [float(v) for v in boot.se],
        },
        "emergence": {
            "si": float(emerg.si),
            "cs": float(emerg.cs),
            "ii": float(emerg.ii),
            "synergy": [[float(v) for v in row] for row in emerg.synergy],
            "ii_pairs": [[float(v) for v in row] for row in emerg.ii_pairs],
        },
        "model": {
            "name": config.model,
            "inter_agent_edges": [list(e) for e in scm.inter_agent_edges()],
        },
        "explanation": {
            "text": explanation.text,
            "lines": list(explanation.lines),
            "structured": explanation.structured,
        },
        "timings_ns": {k: int(v) for k, v in timings.items()},
        "traces": {
            "factual": [float(v) for v in effects.fact_trace],
            "counterfactual": [
                [float(v) for v in row] for row in effects.cf_traces
            ],
        },
    }
    if config.method in ("shapley_exact", "shapley_mc"):
        gap, rel = efficiency_gap(phi, values)
        report["efficiency"] = {
            "gap": float(gap),
            "relative": float(rel),
            "holds": bool(rel <= 1e-6),
        }
    return report


# -- artifacts ------------------------------------------------------------------


def write_report(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def read_report(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or data.get("format") != REPORT_FORMAT:
        raise MacieError(f"{path} is not an attribution report")
    if data.get("version") != REPORT_VERSION:
        raise MacieError(f"unsupported report version {data.get('version')!r}")
    unknown = sorted(set(data) - KNOWN_REPORT_KEYS)
    if unknown:
        raise MacieError(
            f"report has unknown fields: {', '.join(unknown)}"
        )
    return data


def write_csv(report, path):
    """Two tables: one-line dataset summary, then per-agent attributions."""
    lines = [
        "env,n_agents,n_episodes,horizon,method,model,seed,y_fact,si,cs,ii"
    ]
    cfg = report["config"]
    em = report["emergence"]
    lines.append(
        ",".join(
            str(v)
            for v in [
                cfg["env"],
                report["n_agents"],
                report["n_episodes"],
                report["horizon"],
                cfg["method"],
                cfg["model"],
                cfg["seed"],
                repr(report["y_fact"]),
                repr(em["si"]),
                repr(em["cs"]),
                repr(em["ii"]),
            ]
        )
    )
    lines.append("")
    lines.append("agent,phi,phi_hat,ci_low,ci_high,rank")
    ci = report["ci"]
    for i in range(report["n_agents"]):
        lines.append(
            ",".join(
                [
                    str(i + 1),
                    repr(report["phi"][i]),
                    repr(report["phi_hat"][i]),
                    repr(ci["lows"][i]),
                    repr(ci["highs"][i]),
                    str(report["ranks"][i]),
                ]
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_plotdata(report, path):
    """Runtime breakdown, one row per displayed stage (collective metrics
    fold into the individual-effects row)."""
    t = report["timings_ns"]
    lines = ["step,label,ns"]
    for step in ("1", "2", "3", "4", "5", "6", "7"):
        ns = t[step] + (t["3.5"] if step == "3" else 0)
        lines.append(f"{step},{PLOTDATA_LABELS[step]},{ns}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def explanation_from_report(report, verbosity=None):
    """Re-render the explanation of a stored report, any verbosity."""
    n = report["n_agents"]
    ci = report["ci"]
    boot = BootstrapResult(
        lows=np.asarray(ci["lows"], dtype=np.float64),
        highs=np.asarray(ci["highs"], dtype=np.float64),
        samples=np.empty((0, n)),
        se=np.asarray(ci["se"], dtype=np.float64),
        alpha=ci["alpha"],
    )
    em = report["emergence"]
    emerg = EmergenceMetrics(
        synergy=np.asarray(em["synergy"], dtype=np.float64),
        si=em["si"],
        cs=em["cs"],
        ii=em["ii"],
        ii_pairs=np.asarray(em["ii_pairs"], dtype=np.float64),
    )
    cfg = report["config"]
    return build_explanation(
        np.asarray(report["phi"], dtype=np.float64),
        report["y_fact"],
        np.asarray(report["y_cf"], dtype=np.float64),
        critical=report["critical_timesteps"],
        bootstrap=boot,
        emergence=emerg,
        verbosity=verbosity or cfg["verbosity"],
        tau_synergy=cfg["tau_synergy"],
        tau_si=cfg["tau_si"],
        alpha=cfg["alpha"],
    )


# -- warmup and benchmarks -----------------------------------------------------------


def warmup(env_names=None):
    """Run every kernel once on tiny inputs so compilation happens up front."""
    rng = np.random.default_rng(0)
    for name in env_names or list_envs():
        env = make_env(name)
        s0 = env.initial_state(rng)
        kinds, alphas, consts = policy_arrays(default_policies(env.n_agents))
        act_u = rng.random((2, env.n_agents, 2))
        env_u = env.env_draws(rng, 2)
        env.rollout(s0, 2, kinds, alphas, consts, act_u, env_u)
        env.greedy_action(s0, 0)
    X = rng.random((20, 3))
    TreeEnsemble(n_trees=2, max_depth=2).fit(X, rng.random(20), rng).predict(X)


def bench_rollouts(n_rollouts=200, seed=0):
    """Episode throughput per environment for both execution paths."""
    rows = []
    for name in list_envs():
        env = make_env(name)
        rng = np.random.default_rng(seed)
        s0 = env.initial_state(rng)
        kinds, alphas, consts = policy_arrays(default_policies(env.n_agents))
        act_u = rng.random((env.horizon, env.n_agents, 2))
        env_u = env.env_draws(rng, env.horizon)

        def run_batch():
            t0 = time.perf_counter()
            for _ in range(n_rollouts):
                env.rollout(s0, env.horizon, kinds, alphas, consts, act_u, env_u)
            return time.perf_counter() - t0

        row = {"env": name, "rollouts": n_rollouts}
        if _accel.HAVE_NUMBA:
            _accel.set_enabled(True)
            run_batch()  # compile before timing
            row["accel_s"] = run_batch()
        else:
            row["accel_s"] = None
        _accel.set_enabled(False)
        row["python_s"] = run_batch()
        if _accel.HAVE_NUMBA:
            _accel.set_enabled(True)
            row["speedup"] = row["python_s"] / row["accel_s"]
        else:
            row["speedup"] = None
        rows.append(row)
    return rows


def bench_k_convergence(ks=(3, 5, 10, 20), seed=42, env="gridworld", b=100):
    """Bootstrap standard error of the naive effects as K grows."""
    rows = []
    for k in ks:
        config = RunConfig(env=env, method="naive_cf", k=k, b=b, seed=seed)
        report = run_pipeline(config)
        se = report["ci"]["se"]
        rows.append({"k": k, "se": se, "mean_se": float(np.mean(se))})
    return rows
