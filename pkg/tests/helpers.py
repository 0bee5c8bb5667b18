"""Hand-built histories with known structure, shared across the tests."""

import numpy as np

from macie import Episode, History, Step

DIRS = np.array([[0.0, 1.0], [0.0, -1.0], [-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])


def nav_history(seed, episodes=30, horizon=15):
    """Three agents drift toward the nearest of three random landmarks.

    Next positions contract toward the center and shift by a direction
    looked up from the action index, and the reward is a nearest-agent
    coverage cost over the landmarks. Both maps are nonlinear in the raw
    regression inputs, which is the point: tree models should beat linear
    ones on these transitions.
    """
    rng = np.random.default_rng(seed)
    alphas = (0.70, 0.75, 0.80)
    eps = []
    names = [f"p{i}{c}" for i in range(3) for c in "xy"]
    for e in range(episodes):
        lm = rng.random((3, 2))
        pos = rng.random((3, 2))
        steps = []
        for _ in range(horizon):
            acts = np.zeros(3, dtype=np.int64)
            for i in range(3):
                near = lm[np.argmin(np.abs(lm - pos[i]).sum(axis=1))]
                delta = near - pos[i]
                greedy = min(
                    (-(DIRS[a] * np.sign(delta)).sum(), a) for a in range(5)
                )[1]
                if rng.random() < alphas[i]:
                    acts[i] = greedy
                else:
                    acts[i] = rng.integers(0, 5)
            new = 0.5 + 0.3 * (pos - 0.5) + 0.25 * DIRS[acts]
            r = -sum(float(np.abs(new - l).sum(axis=1).min()) for l in lm)
            steps.append(
                Step(
                    state=pos.reshape(-1).copy(),
                    joint_action=acts,
                    rewards=np.full(3, r / 3.0),
                    team_reward=r,
                )
            )
            pos = new
        eps.append(
            Episode(
                steps=steps,
                env_name="navsynth",
                seed=e,
                horizon=horizon,
                final_state=pos.reshape(-1).copy(),
            )
        )
    return History(episodes=eps, feature_names=names)


def action_history(seed, mode, episodes=50, horizon=20):
    """Three agents acting on a frozen state, with known action coupling.

    ``independent`` draws each agent separately; ``copy`` fills one uniform
    draw into all three agents, so every pair shares exactly ln(5) nats.
    """
    rng = np.random.default_rng(seed)
    state = np.zeros(2)
    eps = []
    for e in range(episodes):
        steps = []
        for _ in range(horizon):
            if mode == "independent":
                acts = rng.integers(0, 5, size=3)
            else:
                acts = np.full(3, rng.integers(0, 5))
            steps.append(
                Step(
                    state=state.copy(),
                    joint_action=acts.astype(np.int64),
                    rewards=np.zeros(3),
                    team_reward=0.0,
                )
            )
        eps.append(
            Episode(
                steps=steps,
                env_name="synthetic",
                seed=e,
                horizon=horizon,
                final_state=state.copy(),
            )
        )
    return History(episodes=eps, feature_names=["f0", "f1"])
