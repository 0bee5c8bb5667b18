import numpy as np
import pytest

from macie import (
    CounterfactualEngine,
    ConfigError,
    Episode,
    History,
    MacieError,
    OutcomeSpec,
    SeedTree,
    Step,
    StructuralCausalModel,
    default_policies,
    make_env,
)
from macie.scm import ConstantMean, Linear, MIN_SAMPLES


def gridworld_history(episodes=25, seed=42):
    env = make_env("gridworld")
    eng = CounterfactualEngine(
        SeedTree(seed), OutcomeSpec(), env=env, policies=default_policies(2)
    )
    return eng.generate_history(episodes)


def synthetic_history(episodes, horizon, act_fn, state_fn=None, seed=0):
    rng = np.random.default_rng(seed)
    eps = []
    for e in range(episodes):
        state = rng.random(3)
        prev = np.zeros(2, dtype=np.int64)
        steps = []
        for t in range(horizon):
            acts = act_fn(rng, prev, t)
            nxt = state_fn(state, acts, rng) if state_fn else rng.random(3)
            steps.append(
                Step(
                    state=state.copy(),
                    joint_action=acts.copy(),
                    rewards=np.zeros(2),
                    team_reward=float(acts.sum()),
                )
            )
            state = nxt
            prev = acts
        eps.append(
            Episode(
                steps=steps,
                env_name="synth",
                seed=e,
                horizon=horizon,
                final_state=state.copy(),
            )
        )
    return History(episodes=eps, feature_names=["x", "y", "z"])


def test_constant_mean_predicts_the_mean():
    m = ConstantMean().fit(np.zeros((5, 2)), np.full(5, 3.0), None)
    assert np.allclose(m.predict(np.zeros((4, 2))), 3.0)


def test_linear_recovers_exact_coefficients():
    rng = np.random.default_rng(0)
    X = rng.random((60, 1))
    y = 2.0 * X[:, 0] + 1.0
    m = Linear().fit(X, y, None)
    assert m.coef[0] == pytest.approx(1.0, abs=1e-9)
    assert m.coef[1] == pytest.approx(2.0, abs=1e-9)


def test_fit_rejects_unknown_model_and_small_histories():
    hist = gridworld_history(episodes=12)
    with pytest.raises(ConfigError):
        StructuralCausalModel().fit(hist, OutcomeSpec(), model="neural_net")
    tiny = gridworld_history(episodes=3)
    scm = StructuralCausalModel()
    with pytest.raises(MacieError, match="too few samples"):
        scm.fit(tiny, OutcomeSpec())
    assert MIN_SAMPLES == 10


def test_goal_coordinates_become_static_features():
    hist = gridworld_history()
    scm = StructuralCausalModel().fit(hist, OutcomeSpec())
    assert scm.static_features == [4, 5, 6, 7]
    for f in (4, 5, 6, 7):
        assert f"ns{f}" not in scm.equations
        assert f"ns{f}" not in scm.nodes
    state = hist.episodes[0].steps[0].state
    nxt = scm.predict_next_state(state, np.array([4, 4]))
    assert np.array_equal(nxt[4:8], state[4:8])


def test_node_set_and_acyclic_parent_structure():
    hist = gridworld_history()
    scm = StructuralCausalModel().fit(hist, OutcomeSpec())
    nodes = scm.nodes
    assert "a0" in nodes and "ns0" in nodes and "y" in nodes
    # parents only ever point backwards: s/prev_a feed a, s/a feed ns,
    # a/ns feed r, r feeds y; that ordering admits no cycle
    def rank(name):
        if name == "y":
            return 4
        if name == "r":
            return 3
        if name.startswith(("ns", "prev_a")):
            return 2 if name.startswith("ns") else 0
        if name.startswith("s"):
            return 0
        return 1
    for node, parents in scm.parents.items():
        for p in parents:
            assert rank(p) < rank(node), (p, node)


def test_predicted_actions_stay_in_range():
    hist = gridworld_history()
    scm = StructuralCausalModel().fit(hist, OutcomeSpec())
    rng = np.random.default_rng(1)
    for _ in range(20):
        state = rng.random(10) * 4.0
        for agent in (0, 1):
            a = scm.predict_action(agent, state, rng.integers(0, 5, 2))
            assert 0 <= a < scm.n_actions


def test_fit_is_deterministic():
    hist = gridworld_history()
    state = hist.episodes[0].steps[2].state
    outs = []
    for _ in range(2):
        scm = StructuralCausalModel().fit(
            hist, OutcomeSpec(), rng=np.random.default_rng(7)
        )
        outs.append(scm.predict_next_state(state, np.array([1, 3])))
    assert np.array_equal(outs[0], outs[1])


def test_serialization_round_trip_preserves_predictions(tmp_path):
    hist = gridworld_history()
    scm = StructuralCausalModel().fit(hist, OutcomeSpec())
    path = tmp_path / "model.json"
    scm.save(path)
    back = StructuralCausalModel.load(path)
    assert back.static_features == scm.static_features
    assert back.parents == scm.parents
    rng = np.random.default_rng(3)
    for _ in range(10):
        state = rng.random(10) * 4.0
        acts = rng.integers(0, 5, 2)
        assert np.array_equal(
            scm.predict_next_state(state, acts), back.predict_next_state(state, acts)
        )
        assert scm.predict_reward(acts, state) == back.predict_reward(acts, state)
    assert back.predict_outcome(3.5) == scm.predict_outcome(3.5)


def test_from_dict_rejects_foreign_payloads():
    with pytest.raises(MacieError):
        StructuralCausalModel.from_dict({"format": "other"})
    with pytest.raises(MacieError):
        StructuralCausalModel.from_dict({"format": "macie-scm", "version": 2})


def test_validate_scores_an_exact_linear_system():
    # next state is an exact linear map of the current state and actions
    def act(rng, prev, t):
        return rng.integers(0, 3, 2)

    def nxt(state, acts, rng):
        return 0.5 * state + 0.1 * float(acts.sum())

    hist = synthetic_history(20, 8, act, nxt)
    scm = StructuralCausalModel().fit(hist, OutcomeSpec(), model="linear")
    scores = scm.validate(hist, OutcomeSpec())
    for f in range(3):
        assert scores[f"ns{f}"] == pytest.approx(1.0, abs=1e-9)


def test_validate_gives_noise_a_low_score():
    def act(rng, prev, t):
        return rng.integers(0, 5, 2)

    hist = synthetic_history(40, 10, act)  # states are fresh noise each step
    scm = StructuralCausalModel().fit(hist, OutcomeSpec(), model="linear")
    scores = scm.validate(hist, OutcomeSpec(), n_folds=5)
    for f in range(3):
        assert scores[f"ns{f}"] <= 0.1


def test_validate_tree_band_on_gridworld():
    hist = gridworld_history()
    scm = StructuralCausalModel().fit(hist, OutcomeSpec())
    scores = scm.validate(hist, OutcomeSpec())
    mean_r2 = float(np.mean(list(scores.values())))
    assert 0.6 <= mean_r2 <= 0.8


def test_validate_requires_a_fit_and_enough_folds():
    scm = StructuralCausalModel()
    with pytest.raises(MacieError):
        scm.validate(gridworld_history(episodes=12), OutcomeSpec())
    fitted = StructuralCausalModel().fit(gridworld_history(), OutcomeSpec())
    with pytest.raises(ConfigError):
        fitted.validate(gridworld_history(), OutcomeSpec(), n_folds=1)


def test_copy_policy_keeps_the_inter_agent_edge():
    def act(rng, prev, t):
        a0 = rng.integers(0, 5)
        return np.array([a0, prev[0]], dtype=np.int64)

    hist = synthetic_history(30, 10, act)
    scm = StructuralCausalModel().fit(hist, OutcomeSpec(), model="linear")
    assert (0, 1) in scm.inter_agent_edges()


def test_independent_actions_prune_all_edges():
    def act(rng, prev, t):
        return rng.integers(0, 5, 2)

    hist = synthetic_history(30, 10, act)
    scm = StructuralCausalModel().fit(hist, OutcomeSpec(), model="linear")
    assert scm.inter_agent_edges() == []
