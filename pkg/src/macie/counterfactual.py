"""Interventional rollouts against factual episodes.

Every simulation draws from named substreams of one master seed:

- ``reset``/episode: initial conditions, shared by factual, counterfactual,
  and coalition runs (interventions never change where an episode starts);
- ``env``/episode/replicate: environment noise;
- ``act``/episode/agent/replicate: that agent's action uniforms.

Replicate 0 is the factual draw. Counterfactual sample k for agent i swaps
in the baseline policy for i and moves only agent i's stream and the
environment stream to replicate k, so the other agents keep their factual
randomness (common random numbers). Because replicate 0 is shared, an
"intervention" that installs a policy identical to the factual one
reproduces the factual episode bit for bit, and the grand coalition
evaluates exactly to the factual outcome.

Two propagation modes: ``env_resim`` replays through the real simulator;
``scm_rollout`` replays through the fitted structural model, which also
works for ingested histories with no simulator attached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigError,
    Episode,
    History,
    MacieError,
    OutcomeSpec,
    Step,
    episode_outcome,
    padded_trace,
)
from .policies import BaselinePolicy, policy_arrays
from .rng import SeedTree

MODES = ("env_resim", "scm_rollout")
DEFAULT_EPSILON_FRAC = 0.1


def critical_timesteps(fact_trace, cf_trace, epsilon):
    """1-based steps where the counterfactual trace leaves the factual one."""
    diff = np.abs(np.asarray(cf_trace) - np.asarray(fact_trace))
    return [int(t) + 1 for t in np.nonzero(diff > epsilon)[0]]


@dataclass
class CFSample:
    """One counterfactual replay for one intervened agent."""

    agent: int
    k: int
    y_cf: float
    trace: np.ndarray
    critical: list[int] = field(default_factory=list)


@dataclass
class AgentCF:
    """Counterfactual summary for one agent on one episode."""

    agent: int
    y_fact: float
    y_cf_mean: float
    samples: list[CFSample]
    critical: list[int]


class CounterfactualEngine:
    """Simulates factual, intervened, and coalition episodes on demand."""

    def __init__(
        self,
        seed_tree: SeedTree,
        outcome: OutcomeSpec,
        env=None,
        policies=None,
        history: History | None = None,
        mode="env_resim",
        scm=None,
        baseline=None,
        epsilon_frac=DEFAULT_EPSILON_FRAC,
    ):
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
        if env is None and history is None:
            raise ConfigError("need an environment or an ingested history")
        if env is None and mode == "env_resim":
            raise ConfigError(
                "env_resim mode needs an environment; ingested histories "
                "can only use scm_rollout"
            )
        if env is not None and policies is None:
            raise ConfigError("simulating an environment needs policies")
        if env is not None and policies is not None and len(policies) != env.n_agents:
            raise ConfigError(
                f"{env.name} has {env.n_agents} agents, got {len(policies)} policies"
            )
        if epsilon_frac <= 0:
            raise ConfigError(f"epsilon_frac must be > 0, got {epsilon_frac}")
        if history is not None and env is None:
            horizons = {ep.horizon for ep in history.episodes}
            if len(horizons) > 1:
                raise MacieError(
                    f"ingested episodes disagree on horizon: {sorted(horizons)}"
                )
        self.tree = seed_tree
        self.outcome = outcome
        self.env = env
        self.policies = list(policies) if policies is not None else None
        self.history = history
        self.mode = mode
        self.scm = scm
        self.baseline = baseline if baseline is not None else BaselinePolicy()
        self.epsilon_frac = epsilon_frac
        self._factual: dict[int, Episode] = {}
        self._coalitions: dict[tuple, float] = {}

    # -- basic dimensions ----------------------------------------------------

    @property
    def n_agents(self):
        if self.env is not None:
            return self.env.n_agents
        return self.history.n_agents

    @property
    def horizon(self):
        if self.env is not None:
            return self.env.horizon
        return self.history.episodes[0].horizon

    @property
    def n_actions(self):
        if self.env is not None:
            return self.env.n_actions
        return self.scm.n_actions

    # -- factual episodes ------------------------------------------------------

    def factual(self, e):
        if e not in self._factual:
            if self.history is not None:
                self._factual[e] = self.history.episodes[e]
            else:
                self._factual[e] = self._simulate(
                    e, self.policies, [0] * self.n_agents, 0
                )
        return self._factual[e]

    def factual_outcome(self, e):
        return episode_outcome(self.factual(e), self.outcome)

    def generate_history(self, n_episodes):
        if self.env is None:
            raise MacieError("no environment attached; cannot generate episodes")
        eps = [self.factual(e) for e in range(n_episodes)]
        return History(
            episodes=eps, feature_names=list(self.env.feature_names)
        )

    # -- simulation --------------------------------------------------------------

    def _simulate(self, e, policies, agent_reps, env_rep):
        env = self.env
        T = env.horizon
        n = env.n_agents
        s0 = env.initial_state(self.tree.stream("reset", e))
        act_u = np.empty((T, n, 2))
        for j in range(n):
            act_u[:, j, :] = self.tree.stream("act", e, j, agent_reps[j]).random(
                (T, 2)
            )
        env_u = env.env_draws(self.tree.stream("env", e, env_rep), T)
        kinds, alphas, consts = policy_arrays(policies)
        states, actions, rewards, team, length = env.rollout(
            s0, T, kinds, alphas, consts, act_u, env_u
        )
        steps = [
            Step(
                state=states[t].copy(),
                joint_action=actions[t].copy(),
                rewards=rewards[t].copy(),
                team_reward=float(team[t]),
            )
            for t in range(length)
        ]
        return Episode(
            steps=steps,
            env_name=env.name,
            seed=e,
            horizon=T,
            final_state=states[length].copy(),
        )

    # -- counterfactuals -----------------------------------------------------------

    def epsilon(self, y_fact):
        return self.epsilon_frac * max(abs(y_fact), 1e-9)

    def intervene_and_rollout(self, e, agent, n_samples):
        """Replace one agent's policy with the baseline, K times."""
        if not 0 <= agent < self.n_agents:
            raise ConfigError(f"agent {agent} out of range (n={self.n_agents})")
        if n_samples < 1:
            raise ConfigError(f"need at least one sample, got {n_samples}")
        fact = self.factual(e)
        y_fact = episode_outcome(fact, self.outcome)
        fact_trace = padded_trace(fact, self.outcome)
        eps = self.epsilon(y_fact)
        samples = []
        for k in range(n_samples):
            if self.mode == "env_resim":
                trace, y_cf = self._cf_env(e, agent, k)
            else:
                trace, y_cf = self._cf_scm(e, agent, k)
            samples.append(
                CFSample(
                    agent=agent,
                    k=k,
                    y_cf=y_cf,
                    trace=trace,
                    critical=critical_timesteps(fact_trace, trace, eps),
                )
            )
        mean_trace = np.mean([s.trace for s in samples], axis=0)
        return AgentCF(
            agent=agent,
            y_fact=y_fact,
            y_cf_mean=float(np.mean([s.y_cf for s in samples])),
            samples=samples,
            critical=critical_timesteps(fact_trace, mean_trace, eps),
        )

    def _cf_env(self, e, agent, k):
        policies = list(self.policies)
        policies[agent] = self.baseline
        reps = [0] * self.n_agents
        reps[agent] = k
        ep = self._simulate(e, policies, reps, k)
        return padded_trace(ep, self.outcome), episode_outcome(ep, self.outcome)

    # -- coalitions --------------------------------------------------------------

    def coalition_outcome(self, e, members):
        """Outcome with non-members swapped to the baseline policy."""
        key = (e, tuple(sorted(members)))
        if key not in self._coalitions:
            bad = [i for i in key[1] if not 0 <= i < self.n_agents]
            if bad:
                raise ConfigError(f"coalition members out of range: {bad}")
            if self.mode == "env_resim":
                members_set = set(key[1])
                policies = [
                    self.policies[i] if i in members_set else self.baseline
                    for i in range(self.n_agents)
                ]
                ep = self._simulate(e, policies, [0] * self.n_agents, 0)
                self._coalitions[key] = episode_outcome(ep, self.outcome)
            else:
                self._coalitions[key] = self._coalition_scm(e, set(key[1]))
        return self._coalitions[key]

    # -- structural-model propagation ------------------------------------------------

    def _scm_steps(self, e, uniform_agents, k):
        """Roll the fitted model forward; listed agents draw uniform actions."""
        scm = self.scm
        if scm is None:
            raise MacieError("scm_rollout mode needs a fitted structural model")
        fact = self.factual(e)
        T = fact.horizon
        n = self.n_agents
        draws = {
            j: self.tree.stream("act", e, j, k).random((T, 2))
            for j in uniform_agents
        }
        s = np.asarray(fact.steps[0].state, dtype=np.float64)
        prev_a = np.asarray(fact.steps[0].joint_action, dtype=np.int64)
        rewards = np.zeros(T)
        for t in range(T):
            a = np.empty(n, dtype=np.int64)
            for j in range(n):
                if j in uniform_agents:
                    a[j] = int(draws[j][t, 1] * scm.n_actions)
                else:
                    a[j] = scm.predict_action(j, s, prev_a)
            ns = scm.predict_next_state(s, a)
            rewards[t] = scm.predict_reward(a, ns)
            s = ns
            prev_a = a
        return rewards

    def _cf_scm(self, e, agent, k):
        rewards = self._scm_steps(e, {agent}, k)
        y_cf = self.scm.predict_outcome(float(rewards.sum()))
        return np.cumsum(rewards), y_cf

    def _coalition_scm(self, e, members):
        outsiders = {j for j in range(self.n_agents) if j not in members}
        rewards = self._scm_steps(e, outsiders, 0)
        return self.scm.predict_outcome(float(rewards.sum()))
