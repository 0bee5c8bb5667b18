"""Built-in multi-agent environments.

Every environment exposes the same surface: a fixed agent count and action
space, named state features, deterministic greedy actions, and a batch
``rollout`` that simulates a whole episode from pre-drawn uniforms (see
``kernels``). ``step`` is implemented on top of the same rollout kernel with
a one-step horizon and constant actions, so single-step and batch paths can
never drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Any

import numpy as np

from ..core import ConfigError
from . import kernels


def _const_arrays(actions):
    n = len(actions)
    kinds = np.full(n, 2, dtype=np.int64)
    alphas = np.zeros(n)
    consts = np.asarray(actions, dtype=np.int64)
    return kinds, alphas, consts


class Environment:
    """Common interface for the built-in simulators."""

    name: str
    n_agents: int
    n_actions: int
    state_dim: int
    feature_names: list[str]
    uses_env_draws = False

    def __init__(self, horizon):
        if horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {horizon}")
        self.horizon = int(horizon)

    def initial_state(self, rng):
        raise NotImplementedError

    def greedy_action(self, state, agent):
        raise NotImplementedError

    def rollout(self, state0, horizon, kinds, alphas, consts, act_u, env_u):
        raise NotImplementedError

    def env_draws(self, rng, horizon):
        """Pre-draw environment noise for a rollout (empty unless needed)."""
        if self.uses_env_draws:
            return rng.random((horizon, self.n_agents, 2))
        return np.zeros((horizon, self.n_agents, 2))

    def step(self, state, actions, rng=None):
        """Apply one joint action; returns (next_state, rewards, team, done)."""
        if len(actions) != self.n_agents:
            raise ConfigError(
                f"{self.name} expects {self.n_agents} actions, got {len(actions)}"
            )
        for a in actions:
            if not 0 <= int(a) < self.n_actions:
                raise ConfigError(
                    f"action {a} out of range for {self.name} "
                    f"(0..{self.n_actions - 1})"
                )
        kinds, alphas, consts = _const_arrays(actions)
        act_u = np.zeros((1, self.n_agents, 2))
        if self.uses_env_draws:
            if rng is None:
                raise ConfigError(f"{self.name}.step needs an rng for arrivals")
            env_u = rng.random((1, self.n_agents, 2))
        else:
            env_u = np.zeros((1, self.n_agents, 2))
        state0 = np.asarray(state, dtype=np.float64)
        states, _, rewards, team, _ = self.rollout(
            state0, 1, kinds, alphas, consts, act_u, env_u
        )
        ns = states[1]
        return ns, rewards[0], float(team[0]), self._done(ns)

    def _done(self, state):
        return False


@dataclass(frozen=True)
class GridWorldConfig:
    width: int = 5
    step_cost: float = 0.01
    goal_reward: float = 1.0
    team_bonus: float = 5.0
    horizon: int = 18


class GridWorld(Environment):
    """Two agents walk a square grid to their own goals.

    Start/goal placements are drawn from a fixed family: agent 0 starts on a
    corner (or a cell next to the opposite corner) with its goal at the other
    end, and agent 1 gets the point-reflected copy. Every placement has the
    same optimal path length of ``2 * width - 3``, which keeps episode
    difficulty constant across seeds.

    Each agent earns ``goal_reward`` on first arrival at its own goal and
    pays ``step_cost`` per step; when both agents occupy their goals at the
    same step the team earns ``team_bonus`` and the episode ends.
    """

    name = "gridworld"
    n_agents = 2
    n_actions = 5
    state_dim = 10
    feature_names = [
        "agent0_x",
        "agent0_y",
        "agent1_x",
        "agent1_y",
        "goal0_x",
        "goal0_y",
        "goal1_x",
        "goal1_y",
        "reached0",
        "reached1",
    ]

    def __init__(self, config: GridWorldConfig):
        super().__init__(config.horizon)
        if config.width < 3:
            raise ConfigError(f"gridworld width must be >= 3, got {config.width}")
        self.config = config
        self.width = int(config.width)
        self._placements = self._build_placements(self.width)

    @staticmethod
    def _build_placements(width):
        w = width - 1
        corners = [(0, 0), (0, w), (w, 0), (w, w)]
        pairs = []
        for cx, cy in corners:
            ox, oy = w - cx, w - cy
            nbrs = [
                ((ox - 1) if ox > 0 else (ox + 1), oy),
                (ox, (oy - 1) if oy > 0 else (oy + 1)),
            ]
            for n in nbrs:
                pairs.append(((cx, cy), n))
                pairs.append((n, (cx, cy)))
        return pairs

    def initial_state(self, rng):
        idx = int(rng.integers(0, len(self._placements)))
        (ax, ay), (gx, gy) = self._placements[idx]
        w = self.width - 1
        return np.array(
            [ax, ay, w - ax, w - ay, gx, gy, w - gx, w - gy, 0.0, 0.0],
            dtype=np.float64,
        )

    def greedy_action(self, state, agent):
        return int(kernels.gridworld_greedy(np.asarray(state, dtype=np.float64),
                                            self.width, agent))

    def rollout(self, state0, horizon, kinds, alphas, consts, act_u, env_u):
        c = self.config
        return kernels.gridworld_rollout(
            state0, self.width, horizon, c.step_cost, c.goal_reward,
            c.team_bonus, kinds, alphas, consts, act_u,
        )

    def _done(self, state):
        return bool(
            state[0] == state[4] and state[1] == state[5]
            and state[2] == state[6] and state[3] == state[7]
        )


@dataclass(frozen=True)
class CoopNavConfig:
    horizon: int = 18


class CoopNav(Environment):
    """Three agents cover three landmarks on the unit square.

    The team pays the summed distance from each landmark to its closest
    agent, plus 1 per colliding agent pair (centers closer than 0.1), every
    step; the per-agent reward is the team reward split three ways. Moves
    are 0.1 long and positions are clipped to the square.
    """

    name = "coopnav"
    n_agents = 3
    n_actions = 5
    state_dim = 12
    feature_names = [
        "agent0_x",
        "agent0_y",
        "agent1_x",
        "agent1_y",
        "agent2_x",
        "agent2_y",
        "landmark0_x",
        "landmark0_y",
        "landmark1_x",
        "landmark1_y",
        "landmark2_x",
        "landmark2_y",
    ]

    def __init__(self, config: CoopNavConfig):
        super().__init__(config.horizon)
        self.config = config

    def initial_state(self, rng):
        return rng.random(12)

    def greedy_action(self, state, agent):
        return int(kernels.coopnav_greedy(np.asarray(state, dtype=np.float64), agent))

    def rollout(self, state0, horizon, kinds, alphas, consts, act_u, env_u):
        return kernels.coopnav_rollout(state0, horizon, kinds, alphas, consts, act_u)


@dataclass(frozen=True)
class PredatorPreyConfig:
    width: int = 7
    step_cost: float = 0.05
    capture_reward: float = 10.0
    collision_penalty: float = 0.0
    horizon: int = 18


class PredatorPrey(Environment):
    """Two predators chase a scripted, evading prey on a grid.

    Predators start on opposite corners, the prey starts on a random inner
    cell. Each step the prey moves first, maximising its minimum distance
    to the predators (ties broken by lowest action index); the predators
    then move, and landing on the prey captures it (both earn
    ``capture_reward`` and the episode ends). Predators pay ``step_cost``
    per step and ``collision_penalty`` each while crowding (within L1
    distance 2 of each other). A lone pursuer can never capture: the prey
    regains distance before the pursuer moves, so capture takes both
    predators boxing it in.
    """

    name = "predatorprey"
    n_agents = 2
    n_actions = 5
    state_dim = 6
    feature_names = ["pred0_x", "pred0_y", "pred1_x", "pred1_y", "prey_x", "prey_y"]

    def __init__(self, config: PredatorPreyConfig):
        super().__init__(config.horizon)
        if config.width < 5:
            raise ConfigError(
                f"predatorprey width must be >= 5, got {config.width}"
            )
        self.config = config
        self.width = int(config.width)

    def initial_state(self, rng):
        w = self.width - 1
        px = float(rng.integers(2, self.width - 2))
        py = float(rng.integers(2, self.width - 2))
        return np.array([0.0, 0.0, w, w, px, py], dtype=np.float64)

    def greedy_action(self, state, agent):
        return int(kernels.predator_greedy(np.asarray(state, dtype=np.float64),
                                           self.width, agent))

    def rollout(self, state0, horizon, kinds, alphas, consts, act_u, env_u):
        c = self.config
        return kernels.predator_rollout(
            state0, self.width, horizon, c.step_cost, c.capture_reward,
            c.collision_penalty, kinds, alphas, consts, act_u,
        )

    def _done(self, state):
        return bool(
            (state[0] == state[4] and state[1] == state[5])
            or (state[2] == state[4] and state[3] == state[5])
        )


@dataclass(frozen=True)
class TrafficConfig:
    arrival_p: float = 0.3
    service: int = 2
    max_init_queue: int = 4
    horizon: int = 18


class Traffic(Environment):
    """Three signalised intersections, each holding NS and EW queues.

    Action 0 gives NS the green, 1 gives EW the green; the green queue
    releases up to ``service`` cars, then the agent is charged a tenth of
    the cars still queued at its intersection, then Bernoulli arrivals join
    both queues. Arrival noise is pre-drawn, so rollouts are reproducible.
    """

    name = "traffic"
    n_agents = 3
    n_actions = 2
    state_dim = 6
    feature_names = [
        "ns_queue0",
        "ew_queue0",
        "ns_queue1",
        "ew_queue1",
        "ns_queue2",
        "ew_queue2",
    ]
    uses_env_draws = True

    def __init__(self, config: TrafficConfig):
        super().__init__(config.horizon)
        if not 0.0 <= config.arrival_p <= 1.0:
            raise ConfigError(
                f"arrival_p must be in [0, 1], got {config.arrival_p}"
            )
        self.config = config

    def initial_state(self, rng):
        return rng.integers(0, self.config.max_init_queue + 1, 6).astype(np.float64)

    def greedy_action(self, state, agent):
        return int(kernels.traffic_greedy(np.asarray(state, dtype=np.float64), agent))

    def rollout(self, state0, horizon, kinds, alphas, consts, act_u, env_u):
        c = self.config
        return kernels.traffic_rollout(
            state0, horizon, c.arrival_p, c.service, kinds, alphas, consts,
            act_u, env_u,
        )


@dataclass(frozen=True)
class AdditiveConfig:
    limit: int = 12
    horizon: int = 18


class AdditiveLine(Environment):
    """Two agents on a line whose rewards depend only on their own action.

    Moving right earns +1, moving left earns -1, anything else earns 0, so
    the team outcome decomposes exactly across agents. Useful as a control:
    any interaction or synergy a method reports here is an artifact.
    """

    name = "additive"
    n_agents = 2
    n_actions = 5
    state_dim = 2
    feature_names = ["agent0_pos", "agent1_pos"]

    def __init__(self, config: AdditiveConfig):
        super().__init__(config.horizon)
        self.config = config
        self.limit = int(config.limit)

    def initial_state(self, rng):
        return rng.integers(0, self.limit + 1, 2).astype(np.float64)

    def greedy_action(self, state, agent):
        return 3

    def rollout(self, state0, horizon, kinds, alphas, consts, act_u, env_u):
        return kernels.additive_rollout(
            state0, self.limit, horizon, kinds, alphas, consts, act_u
        )


_REGISTRY = {
    "gridworld": (GridWorld, GridWorldConfig),
    "coopnav": (CoopNav, CoopNavConfig),
    "predatorprey": (PredatorPrey, PredatorPreyConfig),
    "traffic": (Traffic, TrafficConfig),
    "additive": (AdditiveLine, AdditiveConfig),
}


def list_envs():
    """Names of the built-in environments, sorted."""
    return sorted(_REGISTRY)


def env_description(name):
    cls, _ = _lookup(name)
    return (cls.__doc__ or "").strip().splitlines()[0]


def _lookup(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown environment {name!r}; choose from {', '.join(list_envs())}"
        ) from None


def make_env(name, overrides: dict[str, Any] | None = None, horizon=None):
    """Build a registered environment, applying config overrides by name."""
    cls, config_cls = _lookup(name)
    kwargs = dict(overrides or {})
    if horizon is not None:
        kwargs["horizon"] = horizon
    valid = {f.name for f in fields(config_cls)}
    unknown = sorted(set(kwargs) - valid)
    if unknown:
        raise ConfigError(
            f"unknown {name} config keys: {', '.join(unknown)} "
            f"(valid: {', '.join(sorted(valid))})"
        )
    return cls(config_cls(**kwargs))
