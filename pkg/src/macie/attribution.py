"""Per-agent credit assignment over episode histories.

Two estimators share one coalition-value abstraction: the naive
counterfactual effect (factual outcome minus the mean outcome with one
agent swapped to baseline) and Shapley values over the coalition game
v(S) = outcome when exactly the agents in S keep their policies. Values
are cached per coalition as per-episode vectors, so Shapley enumeration,
Monte Carlo permutations, and bootstrap resampling all reuse the same
simulations instead of re-running them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial

import numpy as np

from .core import ConfigError, MacieError

EXACT_SHAPLEY_LIMIT = 12


class CoalitionValues:
    """Per-episode coalition outcomes from an engine, memoized."""

    def __init__(self, engine, n_episodes):
        if n_episodes < 1:
            raise ConfigError(f"need at least one episode, got {n_episodes}")
        self.engine = engine
        self.n_agents = engine.n_agents
        self.n_episodes = n_episodes
        self._cache = {}

    def per_episode(self, members):
        key = tuple(sorted(set(members)))
        if key not in self._cache:
            self._cache[key] = np.array(
                [
                    self.engine.coalition_outcome(e, key)
                    for e in range(self.n_episodes)
                ]
            )
        return self._cache[key]

    def value(self, members):
        return float(np.mean(self.per_episode(members)))

    def precompute(self, mapper=map):
        """Evaluate every coalition of every episode up front.

        Runs the interventional rollouts behind all 2**n coalition values,
        optionally through a thread pool ``mapper``; afterwards Shapley
        computation is pure arithmetic on cached arrays.
        """
        subsets = [
            tuple(i for i in range(self.n_agents) if mask >> i & 1)
            for mask in range(2 ** self.n_agents)
        ]
        jobs = [
            (e, key) for key in subsets for e in range(self.n_episodes)
        ]
        list(mapper(lambda job: self.engine.coalition_outcome(*job), jobs))
        for key in subsets:
            self.per_episode(key)
        return self


class GameValues:
    """Adapter for synthetic games given as a plain value function."""

    def __init__(self, n_agents, fn):
        self.n_agents = n_agents
        self.n_episodes = 1
        self._fn = fn
        self._cache = {}

    def per_episode(self, members):
        key = tuple(sorted(set(members)))
        if key not in self._cache:
            self._cache[key] = np.array([float(self._fn(key))], dtype=np.float64)
        return self._cache[key]

    def value(self, members):
        return float(self.per_episode(members)[0])


@dataclass
class EffectResult:
    """Naive counterfactual effects plus the traces behind them."""

    phi: np.ndarray            # (N,)
    phi_pe: np.ndarray         # (N, E)
    y_fact: float
    y_fact_pe: np.ndarray      # (E,)
    y_cf: np.ndarray           # (N,)
    y_cf_pe: np.ndarray        # (N, E)
    fact_trace: np.ndarray     # (T,) mean factual cumulative trace
    cf_traces: np.ndarray      # (N, T) mean counterfactual traces
    critical: list[list[int]]  # per agent, 1-based


def run_interventions(engine, n_episodes, n_samples, mapper=map):
    """Counterfactual replays for every (agent, episode) cell.

    ``mapper`` may be a thread pool's map; results come back as an
    agent-by-episode grid, so the outcome never depends on completion
    order.
    """
    n = engine.n_agents
    for e in range(n_episodes):
        engine.factual(e)
    jobs = [(i, e) for i in range(n) for e in range(n_episodes)]
    results = list(
        mapper(
            lambda job: engine.intervene_and_rollout(job[1], job[0], n_samples),
            jobs,
        )
    )
    grid = [[None] * n_episodes for _ in range(n)]
    for (i, e), agent_cf in zip(jobs, results):
        grid[i][e] = agent_cf
    return grid


def effects_from_interventions(engine, grid):
    """Aggregate a replay grid into naive effects and averaged traces.

    phi_i = Y_fact - mean_k Y_cf, averaged over episodes. Critical
    timesteps are read off the episode-averaged traces: a step counts when
    the mean counterfactual trace is further from the mean factual trace
    than the epsilon implied by the mean factual outcome.
    """
    from .counterfactual import critical_timesteps

    n = len(grid)
    n_episodes = len(grid[0])
    y_fact_pe = np.array([engine.factual_outcome(e) for e in range(n_episodes)])
    fact_trace = np.mean(
        [
            np.asarray(_padded_fact_trace(engine, e), dtype=np.float64)
            for e in range(n_episodes)
        ],
        axis=0,
    )
    y_cf_pe = np.zeros((n, n_episodes))
    cf_traces = np.zeros((n, len(fact_trace)))
    for i in range(n):
        for e in range(n_episodes):
            agent_cf = grid[i][e]
            y_cf_pe[i, e] = agent_cf.y_cf_mean
            cf_traces[i] += np.mean([s.trace for s in agent_cf.samples], axis=0)
    cf_traces /= n_episodes
    phi_pe = y_fact_pe[None, :] - y_cf_pe
    y_fact = float(np.mean(y_fact_pe))
    eps = engine.epsilon(y_fact)
    critical = [
        critical_timesteps(fact_trace, cf_traces[i], eps) for i in range(n)
    ]
    return EffectResult(
        phi=phi_pe.mean(axis=1),
        phi_pe=phi_pe,
        y_fact=y_fact,
        y_fact_pe=y_fact_pe,
        y_cf=y_cf_pe.mean(axis=1),
        y_cf_pe=y_cf_pe,
        fact_trace=fact_trace,
        cf_traces=cf_traces,
        critical=critical,
    )


def causal_effects(engine, n_episodes, n_samples, mapper=map):
    """Naive counterfactual effects in one call; see the two halves above."""
    grid = run_interventions(engine, n_episodes, n_samples, mapper)
    return effects_from_interventions(engine, grid)


def _padded_fact_trace(engine, e):
    from .core import padded_trace

    return padded_trace(engine.factual(e), engine.outcome)


# -- Shapley ------------------------------------------------------------------


def shapley_exact(values, n_agents=None):
    """Exact Shapley values by full coalition enumeration.

    Returns (phi, phi_pe); phi_pe holds one Shapley vector per episode so
    callers can bootstrap over episodes.
    """
    n = values.n_agents if n_agents is None else n_agents
    if n > EXACT_SHAPLEY_LIMIT:
        raise ConfigError(
            f"exact Shapley enumerates 2^n coalitions and is capped at "
            f"n={EXACT_SHAPLEY_LIMIT}; got n={n}, use method shapley_mc"
        )
    E = values.n_episodes
    phi_pe = np.zeros((n, E))
    members_of = {
        mask: tuple(j for j in range(n) if mask >> j & 1)
        for mask in range(1 << n)
    }
    fact = [factorial(k) for k in range(n + 1)]
    denom = fact[n]
    for i in range(n):
        for mask in range(1 << n):
            if mask >> i & 1:
                continue
            s = bin(mask).count("1")
            w = fact[s] * fact[n - 1 - s] / denom
            gain = values.per_episode(members_of[mask | (1 << i)]) - (
                values.per_episode(members_of[mask])
            )
            phi_pe[i] += w * gain
    return phi_pe.mean(axis=1), phi_pe


def sample_permutations(n_agents, n_permutations, rng):
    """Permutation schedule for Monte Carlo Shapley.

    For small n the schedule is drawn as shuffled full blocks of all n!
    permutations (plus a shuffled partial block), so every agent ordering
    appears as evenly as possible; beyond that block sampling is pointless
    and permutations are drawn independently. Either way each row is
    uniform over orderings, so the estimator stays unbiased.
    """
    if n_permutations < 1:
        raise ConfigError(f"need at least one permutation, got {n_permutations}")
    out = np.empty((n_permutations, n_agents), dtype=np.int64)
    if n_agents <= 7:
        block = np.array(
            list(itertools.permutations(range(n_agents))), dtype=np.int64
        )
        filled = 0
        while filled < n_permutations:
            take = min(n_permutations - filled, len(block))
            shuffled = block[rng.permutation(len(block))]
            out[filled : filled + take] = shuffled[:take]
            filled += take
    else:
        for m in range(n_permutations):
            out[m] = rng.permutation(n_agents)
    return out


def shapley_mc(values, permutations):
    """Monte Carlo Shapley from an explicit permutation schedule."""
    perms = np.asarray(permutations)
    m, n = perms.shape
    E = values.n_episodes
    phi_pe = np.zeros((n, E))
    for row in perms:
        prev = values.per_episode(())
        members = []
        for agent in row:
            members.append(int(agent))
            cur = values.per_episode(tuple(sorted(members)))
            phi_pe[agent] += cur - prev
            prev = cur
    phi_pe /= m
    return phi_pe.mean(axis=1), phi_pe


def efficiency_gap(phi, values):
    """|sum(phi) - (v(all) - v(empty))| and its relative size."""
    n = values.n_agents
    span = values.value(tuple(range(n))) - values.value(())
    gap = abs(float(np.sum(phi)) - span)
    return gap, gap / max(abs(span), 1e-9)


# -- normalisation and ranking ---------------------------------------------------


def normalize_contributions(phi):
    """phi / sum|phi|; all-zero attributions fall back to equal shares."""
    phi = np.asarray(phi, dtype=np.float64)
    z = float(np.sum(np.abs(phi)))
    if z > 0.0:
        return phi / z
    return np.full(len(phi), 1.0 / len(phi))


def contribution_percentages(phi):
    return 100.0 * np.abs(normalize_contributions(phi))


def rank_agents(phi):
    """Agents ordered by |phi| descending, ties to the lower index."""
    phi = np.asarray(phi, dtype=np.float64)
    return sorted(range(len(phi)), key=lambda i: (-abs(phi[i]), i))


def agent_ranks(phi):
    """1-based rank per agent under ``rank_agents`` ordering."""
    ranks = np.zeros(len(phi), dtype=np.int64)
    for pos, agent in enumerate(rank_agents(phi)):
        ranks[agent] = pos + 1
    return ranks


# -- bootstrap ---------------------------------------------------------------------


@dataclass
class BootstrapResult:
    lows: np.ndarray     # (N,)
    highs: np.ndarray    # (N,)
    samples: np.ndarray  # (B, N) resampled means
    se: np.ndarray       # (N,)
    alpha: float


def bootstrap_indices(n_episodes, n_resamples, rng):
    """Shared episode-resampling schedule: one (B, E) index matrix."""
    if n_episodes < 2:
        raise MacieError(
            f"bootstrap needs at least 2 episodes, got {n_episodes}"
        )
    if n_resamples < 2:
        raise ConfigError(f"need at least 2 resamples, got {n_resamples}")
    return rng.integers(0, n_episodes, size=(n_resamples, n_episodes))


def bootstrap_ci(phi_pe, indices, alpha=0.05):
    """Percentile intervals for per-agent means under episode resampling."""
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    phi_pe = np.asarray(phi_pe, dtype=np.float64)
    if phi_pe.shape[1] != indices.shape[1]:
        raise MacieError(
            f"resample indices cover {indices.shape[1]} episodes but "
            f"attributions have {phi_pe.shape[1]}"
        )
    samples = phi_pe[:, indices].mean(axis=2).T  # (B, N)
    lows = np.quantile(samples, alpha / 2.0, axis=0, method="linear")
    highs = np.quantile(samples, 1.0 - alpha / 2.0, axis=0, method="linear")
    return BootstrapResult(
        lows=lows,
        highs=highs,
        samples=samples,
        se=samples.std(axis=0, ddof=1),
        alpha=alpha,
    )


def compare_agents(phi, samples, i, j):
    """Bootstrap sign test for phi_i - phi_j; returns (difference, p)."""
    diff = float(phi[i] - phi[j])
    if diff == 0.0:
        return 0.0, 1.0
    d = samples[:, i] - samples[:, j]
    opposite = float(np.mean(np.sign(d) == -np.sign(diff)))
    return diff, min(1.0, 2.0 * opposite)
