"""Agent policies used by the built-in simulators.

A policy is described to the rollout kernels by three scalars per agent:
a kind (0 skill-mix, 1 uniform, 2 constant), a greedy probability, and a
fixed action. ``choose_action`` restates the selection rule in Python for
callers that want a single decision outside a rollout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError

KIND_SKILL = 0
KIND_UNIFORM = 1
KIND_CONSTANT = 2


@dataclass(frozen=True)
class SkillPolicy:
    """Greedy with probability ``alpha``, uniform random otherwise."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")

    kind = KIND_SKILL


@dataclass(frozen=True)
class BaselinePolicy:
    """Uniform random over the action space; the default intervention."""

    kind = KIND_UNIFORM


@dataclass(frozen=True)
class ConstantPolicy:
    """Always plays one fixed action; handy for deterministic checks."""

    action: int

    def __post_init__(self):
        if self.action < 0:
            raise ConfigError(f"action must be >= 0, got {self.action}")

    kind = KIND_CONSTANT


def default_alphas(n_agents):
    """Skill spread 0.70..0.80: agent i gets 0.70 + 0.10 * i / (n - 1)."""
    if n_agents < 1:
        raise ConfigError(f"n_agents must be >= 1, got {n_agents}")
    if n_agents == 1:
        return np.array([0.70])
    i = np.arange(n_agents, dtype=np.float64)
    return 0.70 + 0.10 * i / (n_agents - 1)


def default_policies(n_agents, alphas=None):
    if alphas is None:
        alphas = default_alphas(n_agents)
    if len(alphas) != n_agents:
        raise ConfigError(
            f"expected {n_agents} alphas, got {len(alphas)}"
        )
    return [SkillPolicy(float(a)) for a in alphas]


def policy_arrays(policies):
    """Pack policies into the (kinds, alphas, consts) arrays kernels expect."""
    n = len(policies)
    kinds = np.zeros(n, dtype=np.int64)
    alphas = np.zeros(n)
    consts = np.zeros(n, dtype=np.int64)
    for i, p in enumerate(policies):
        kinds[i] = p.kind
        if p.kind == KIND_SKILL:
            alphas[i] = p.alpha
        elif p.kind == KIND_CONSTANT:
            consts[i] = p.action
    return kinds, alphas, consts


def choose_action(policy, env, state, agent, u1, u2):
    """One action draw from two uniforms; mirrors the in-kernel rule."""
    if policy.kind == KIND_CONSTANT:
        if policy.action >= env.n_actions:
            raise ConfigError(
                f"constant action {policy.action} out of range for {env.name}"
            )
        return policy.action
    if policy.kind == KIND_SKILL and u1 < policy.alpha:
        return env.greedy_action(state, agent)
    return int(u2 * env.n_actions)
