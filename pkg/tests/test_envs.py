import numpy as np
import pytest

from macie import (
    ConfigError,
    CounterfactualEngine,
    OutcomeSpec,
    SeedTree,
    default_policies,
    env_description,
    list_envs,
    make_env,
)
from macie.envs import GridWorld, GridWorldConfig
from macie.policies import BaselinePolicy, policy_arrays


def rollout(env, state0, horizon, kinds, alphas, seed=0):
    rng = np.random.default_rng(seed)
    act_u = rng.random((horizon, env.n_agents, 2))
    env_u = env.env_draws(rng, horizon)
    return env.rollout(
        np.asarray(state0, dtype=np.float64),
        horizon,
        np.asarray(kinds, dtype=np.int64),
        np.asarray(alphas, dtype=np.float64),
        np.zeros(env.n_agents, dtype=np.int64),
        act_u,
        env_u,
    )


def test_registry_lists_the_builtin_environments():
    assert list_envs() == [
        "additive",
        "coopnav",
        "gridworld",
        "predatorprey",
        "traffic",
    ]
    for name in list_envs():
        env = make_env(name)
        assert env.name == name
        assert env.n_agents >= 2
        assert len(env.feature_names) == env.state_dim
        assert env_description(name)


def test_make_env_validates_names_and_overrides():
    with pytest.raises(ConfigError):
        make_env("lunarlander")
    with pytest.raises(ConfigError):
        make_env("gridworld", {"gravity": 1.0})
    env = make_env("gridworld", {"team_bonus": 50.0}, horizon=9)
    assert env.config.team_bonus == 50.0
    assert env.horizon == 9
    with pytest.raises(ConfigError):
        make_env("gridworld", {"width": 2})
    with pytest.raises(ConfigError):
        make_env("predatorprey", {"width": 4})
    with pytest.raises(ConfigError):
        make_env("traffic", horizon=0)


@pytest.mark.parametrize("name", ["additive", "coopnav", "gridworld", "predatorprey", "traffic"])
def test_rollouts_are_deterministic(name):
    env = make_env(name)
    s0 = env.initial_state(np.random.default_rng(3))
    n = env.n_agents
    kinds, alphas = [0] * n, [0.75] * n
    a = rollout(env, s0, env.horizon, kinds, alphas, seed=11)
    b = rollout(env, s0, env.horizon, kinds, alphas, seed=11)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("name", ["additive", "coopnav", "gridworld", "predatorprey"])
def test_step_replays_rollout(name):
    # feeding the recorded joint actions back through step() reproduces the
    # rollout exactly, so both entry points share one set of dynamics
    env = make_env(name)
    s0 = env.initial_state(np.random.default_rng(5))
    states, actions, rewards, team, length = rollout(
        env, s0, env.horizon, [0] * env.n_agents, [0.8] * env.n_agents, seed=2
    )
    s = states[0]
    for t in range(length):
        ns, r, tr, done = env.step(s, actions[t])
        assert np.array_equal(ns, states[t + 1])
        assert np.allclose(r, rewards[t])
        assert tr == pytest.approx(float(team[t]), abs=1e-12)
        s = ns
    assert done == (length < env.horizon)


def test_gridworld_pays_team_bonus_when_both_goals_held():
    env = make_env("gridworld")
    # both agents one move from their goals, nothing reached yet
    state = np.array([1.0, 0.0, 3.0, 4.0, 0.0, 0.0, 4.0, 4.0, 0.0, 0.0])
    ns, rewards, team, done = env.step(state, np.array([2, 3]))
    assert done
    assert np.allclose(rewards, [0.99, 0.99])
    assert team == pytest.approx(0.99 * 2 + 5.0)
    assert ns[8] == 1.0 and ns[9] == 1.0


def test_gridworld_goal_reward_paid_once():
    env = make_env("gridworld")
    state = np.array([0.0, 0.0, 4.0, 4.0, 0.0, 0.0, 0.0, 4.0, 1.0, 0.0])
    # agent 0 sits on its already-reached goal: step cost only
    ns, rewards, team, done = env.step(state, np.array([4, 4]))
    assert not done
    assert np.allclose(rewards, [-0.01, -0.01])


def test_gridworld_placements_share_optimal_path_length():
    for width in (3, 5, 7):
        env = GridWorld(GridWorldConfig(width=width))
        want = 2 * width - 3
        for seed in range(60):
            s = env.initial_state(np.random.default_rng(seed))
            for i in range(2):
                d = abs(s[2 * i] - s[4 + 2 * i]) + abs(s[2 * i + 1] - s[5 + 2 * i])
                assert d == want
            assert s[8] == 0.0 and s[9] == 0.0


def test_gridworld_cooperation_beats_any_single_agent():
    # exhaustive depth-limited search on a 3x3 grid: the optimal joint
    # return must beat the best return achievable when only one agent moves
    env = make_env("gridworld", {"width": 3}, horizon=4)
    start = (0.0, 0.0, 2.0, 2.0, 2.0, 0.0, 0.0, 2.0, 0.0, 0.0)
    joint = [(a, b) for a in range(5) for b in range(5)]
    solo = [[(a, 4) for a in range(5)], [(4, b) for b in range(5)]]

    def best_return(state, depth, menu, memo):
        if depth == 0:
            return 0.0
        key = (state, depth)
        if key not in memo:
            best = -1e18
            for acts in menu:
                ns, _, tr, done = env.step(np.array(state), np.array(acts))
                total = float(tr)
                if not done:
                    total += best_return(tuple(ns), depth - 1, menu, memo)
                best = max(best, total)
            memo[key] = best
        return memo[key]

    coop = best_return(start, 4, joint, {})
    lone = max(best_return(start, 4, menu, {}) for menu in solo)
    assert coop == pytest.approx(6.96)
    assert lone == pytest.approx(0.92)
    assert coop > lone


def test_gridworld_bonus_rate_drops_under_intervention():
    env = make_env("gridworld")
    pols = default_policies(2)
    eng = CounterfactualEngine(
        SeedTree(42), OutcomeSpec(), env=env, policies=pols
    )
    base = BaselinePolicy()

    def bonus_rate(policy_list, episodes):
        hits = 0
        for e in range(episodes):
            ep = eng._simulate(e, policy_list, [0] * 2, 0)
            hits += any(s.team_reward > 3 for s in ep.steps)
        return hits / episodes

    factual = bonus_rate(pols, 100)
    assert bonus_rate([base, pols[1]], 100) < factual
    assert bonus_rate([pols[0], base], 100) < factual
    # two untrained agents almost never finish together by luck
    assert bonus_rate([base, base], 200) < 0.05


def test_coopnav_collisions_penalize_each_pair():
    env = make_env("coopnav")
    stay = np.array([4, 4, 4])
    spread = np.array(
        [0.5, 0.5, 0.5, 0.5, 0.9, 0.9, 0.5, 0.5, 0.9, 0.9, 0.1, 0.1]
    )
    cost = np.hypot(0.4, 0.4)
    assert float(env.step(spread, stay)[2]) == pytest.approx(-cost - 1.0)
    piled = np.array(
        [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.9, 0.9, 0.1, 0.1]
    )
    lmcost = np.hypot(0.4, 0.4) * 2
    assert float(env.step(piled, stay)[2]) == pytest.approx(-lmcost - 3.0)


def test_coopnav_landmarks_hold_still():
    env = make_env("coopnav")
    s = env.initial_state(np.random.default_rng(0))
    states, _, _, _, length = rollout(env, s, env.horizon, [0] * 3, [0.8] * 3)
    assert np.array_equal(states[0][6:], states[length][6:])


def test_predator_prey_moves_before_predators():
    env = make_env("predatorprey")
    # lone mover adjacent to the prey: the prey slips away first
    state = np.array([0.0, 0.0, 6.0, 6.0, 0.0, 1.0])
    ns, _, _, done = env.step(state, np.array([0, 4]))
    assert not done
    assert np.array_equal(ns, [0.0, 1.0, 6.0, 6.0, 0.0, 2.0])


def test_predator_prey_breaks_evasion_ties_by_lowest_action():
    env = make_env("predatorprey")
    state = np.array([0.0, 3.0, 6.0, 3.0, 3.0, 3.0])
    ns, _, _, _ = env.step(state, np.array([4, 4]))
    # up and down both reach distance 4; up has the lower action index
    assert ns[4] == 3.0 and ns[5] == 4.0


def test_predator_capture_requires_boxing_in():
    env = make_env("predatorprey")
    state = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    ns, rewards, team, done = env.step(state, np.array([2, 1]))
    assert done
    assert np.allclose(rewards, [9.95, 9.95])
    assert float(team) == pytest.approx(19.9)
    assert np.array_equal(ns[:4], [0.0, 0.0, 0.0, 0.0])


def test_lone_pursuer_never_captures_an_evading_prey():
    # with one predator parked in its corner, every prey start survives
    env = make_env("predatorprey")
    width, horizon = 7, 60
    kinds = np.array([0, 2], dtype=np.int64)
    alphas = np.array([1.0, 0.0])
    consts = np.array([0, 4], dtype=np.int64)
    act_u = np.zeros((horizon, 2, 2))
    env_u = np.zeros((horizon, 2, 2))
    for px in range(width):
        for py in range(width):
            if (px, py) in ((0, 0), (6, 6)):
                continue
            s0 = np.array([0.0, 0.0, 6.0, 6.0, float(px), float(py)])
            _, _, _, team, length = env.rollout(
                s0, horizon, kinds, alphas, consts, act_u, env_u
            )
            assert length == horizon
            assert not (team > 5).any()


def test_predators_pay_collision_penalty_while_crowding():
    env = make_env("predatorprey", {"collision_penalty": 4.0})
    state = np.array([2.0, 2.0, 3.0, 2.0, 6.0, 6.0])
    _, rewards, _, _ = env.step(state, np.array([4, 4]))
    assert np.allclose(rewards, [-4.05, -4.05])
    apart = np.array([0.0, 0.0, 6.0, 6.0, 3.0, 3.0])
    _, rewards, _, _ = env.step(apart, np.array([4, 4]))
    assert np.allclose(rewards, [-0.05, -0.05])


def test_traffic_empty_queues_give_zero_reward():
    env = make_env("traffic")
    zeros = np.zeros(6)
    for acts in ([0, 0, 0], [1, 0, 1]):
        _, rewards, team, done = env.step(
            zeros, np.array(acts), np.random.default_rng(0)
        )
        assert np.allclose(rewards, 0.0)
        assert team == 0.0
        assert not done


def test_traffic_service_caps_departures():
    env = make_env("traffic")
    state = np.array([5.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    rng = np.random.default_rng(0)
    ns, rewards, _, _ = env.step(state, np.array([0, 0, 0]), rng)
    # two cars leave the green NS queue before arrivals land on top
    assert rewards[0] == pytest.approx(-(3.0 + 1.0) / 10.0)


def test_traffic_needs_env_randomness():
    env = make_env("traffic")
    assert env.uses_env_draws
    with pytest.raises(ConfigError):
        env.step(np.zeros(6), np.array([0, 0, 0]))


def test_additive_rewards_ignore_the_other_agent():
    env = make_env("additive")
    s0 = env.initial_state(np.random.default_rng(1))
    rng = np.random.default_rng(2)
    act_a = rng.random((env.horizon, 2, 2))
    act_b = act_a.copy()
    act_b[:, 1, :] = rng.random((env.horizon, 2))
    run = lambda u: env.rollout(
        s0,
        env.horizon,
        np.array([1, 1], dtype=np.int64),
        np.zeros(2),
        np.zeros(2, dtype=np.int64),
        u,
        np.zeros((env.horizon, 2, 2)),
    )
    _, _, rew_a, team_a, _ = run(act_a)
    _, _, rew_b, team_b, _ = run(act_b)
    assert np.array_equal(rew_a[:, 0], rew_b[:, 0])
    assert not np.array_equal(rew_a[:, 1], rew_b[:, 1])
    assert np.allclose(team_a, rew_a.sum(axis=1))


def test_step_validates_actions():
    env = make_env("gridworld")
    s = env.initial_state(np.random.default_rng(0))
    with pytest.raises(ConfigError):
        env.step(s, np.array([0]))
    with pytest.raises(ConfigError):
        env.step(s, np.array([0, 9]))
