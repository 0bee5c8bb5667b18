"""Structural model of one timestep of a multi-agent system.

The graph is a fixed template over named nodes: state features ``s{f}``,
previous actions ``prev_a{i}``, current actions ``a{i}``, next state
features ``ns{f}``, per-step team reward ``r``, and the episode outcome
``y``. States and previous actions are exogenous. Candidate edges
``prev_a{i} -> a{j}`` (i != j) carry inter-agent influence and are pruned
when the observed correlation is weak; all other edges are structural:
states drive actions, states and actions drive the next state, actions and
the next state drive the reward, and summed rewards drive the outcome.
State features that never change within the training transitions (goal or
landmark coordinates, for example) are treated as episode constants: they
get no transition equation and are copied through unchanged.

Each non-exogenous node gets its own fitted equation. Action nodes are
discrete and are fitted as one score regression per action value with
argmax prediction (ties to the lowest action); ``y`` is always a linear fit
on the per-episode reward sum. Everything serialises to versioned JSON.
"""

from __future__ import annotations

import json

import numpy as np

from .core import ConfigError, MacieError, OutcomeSpec, episode_outcome
from .trees import TreeEnsemble

MIN_SAMPLES = 10
DEFAULT_CORR_THRESHOLD = 0.1
MODEL_NAMES = ("constant_mean", "linear", "tree_ensemble")


def _pearson(x, y):
    sx = float(np.std(x))
    sy = float(np.std(y))
    if sx < 1e-12 or sy < 1e-12:
        return 0.0
    return float(np.mean((x - np.mean(x)) * (y - np.mean(y))) / (sx * sy))


class ConstantMean:
    def fit(self, X, y, rng):
        self.mean = float(np.mean(y))
        return self

    def predict(self, X):
        return np.full(X.shape[0], self.mean)

    def to_dict(self):
        return {"kind": "constant_mean", "mean": self.mean}

    @classmethod
    def from_dict(cls, data):
        model = cls()
        model.mean = float(data["mean"])
        return model


class Linear:
    def fit(self, X, y, rng):
        A = np.column_stack([np.ones(X.shape[0]), X])
        self.coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
        return self

    def predict(self, X):
        A = np.column_stack([np.ones(X.shape[0]), X])
        return A @ self.coef

    def to_dict(self):
        return {"kind": "linear", "coef": self.coef.tolist()}

    @classmethod
    def from_dict(cls, data):
        model = cls()
        model.coef = np.asarray(data["coef"], dtype=np.float64)
        return model


def _make_model(name, rng):
    if name == "constant_mean":
        return ConstantMean()
    if name == "linear":
        return Linear()
    if name == "tree_ensemble":
        return TreeEnsemble()
    raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")


def _fit_model(name, X, y, rng):
    model = _make_model(name, rng)
    if isinstance(model, TreeEnsemble):
        return model.fit(X, y, rng)
    return model.fit(X, y, rng)


def _model_to_dict(model):
    if isinstance(model, TreeEnsemble):
        return {"kind": "tree_ensemble", **model.to_dict()}
    return model.to_dict()


def _model_from_dict(data):
    kind = data["kind"]
    if kind == "constant_mean":
        return ConstantMean.from_dict(data)
    if kind == "linear":
        return Linear.from_dict(data)
    if kind == "tree_ensemble":
        return TreeEnsemble.from_dict(data)
    raise MacieError(f"unknown serialized model kind {kind!r}")


class ContinuousEquation:
    def __init__(self, features, model):
        self.features = list(features)
        self.model = model

    def predict_rows(self, X):
        return self.model.predict(X)

    def to_dict(self):
        return {
            "type": "continuous",
            "features": self.features,
            "model": _model_to_dict(self.model),
        }


class DiscreteEquation:
    """Per-value score regressions; prediction is the argmax value."""

    def __init__(self, features, values, models):
        self.features = list(features)
        self.values = list(values)
        self.models = list(models)

    def scores(self, X):
        return np.column_stack([m.predict(X) for m in self.models])

    def predict_rows(self, X):
        idx = np.argmax(self.scores(X), axis=1)
        return np.asarray(self.values, dtype=np.float64)[idx]

    def to_dict(self):
        return {
            "type": "discrete",
            "features": self.features,
            "values": self.values,
            "models": [_model_to_dict(m) for m in self.models],
        }


def _equation_from_dict(data):
    t = data["type"]
    if t == "continuous":
        return ContinuousEquation(data["features"], _model_from_dict(data["model"]))
    if t == "discrete":
        return DiscreteEquation(
            data["features"],
            data["values"],
            [_model_from_dict(m) for m in data["models"]],
        )
    raise MacieError(f"unknown serialized equation type {t!r}")


def _assemble_rows(history):
    """Pool (state, prev action, action, next state, reward) rows over episodes."""
    S, PA, A, NS, R = [], [], [], [], []
    for ep in history.episodes:
        steps = ep.steps
        for t in range(1, len(steps)):
            if t + 1 < len(steps):
                ns = steps[t + 1].state
            elif ep.final_state is not None:
                ns = ep.final_state
            else:
                continue
            S.append(steps[t].state)
            PA.append(steps[t - 1].joint_action)
            A.append(steps[t].joint_action)
            NS.append(ns)
            R.append(steps[t].team_reward)
    if not S:
        raise MacieError("history has no usable transitions (episodes too short)")
    return (
        np.asarray(S, dtype=np.float64),
        np.asarray(PA, dtype=np.int64),
        np.asarray(A, dtype=np.int64),
        np.asarray(NS, dtype=np.float64),
        np.asarray(R, dtype=np.float64),
    )


class StructuralCausalModel:
    def __init__(self):
        self.fitted = False
        self.model_name = None
        self.n_agents = 0
        self.n_features = 0
        self.n_actions = 0
        self.feature_names = None
        self.corr_threshold = DEFAULT_CORR_THRESHOLD
        self.static_features = []
        self.parents = {}
        self.equations = {}

    # -- graph -------------------------------------------------------------

    @property
    def nodes(self):
        s = [f"s{f}" for f in range(self.n_features)]
        pa = [f"prev_a{i}" for i in range(self.n_agents)]
        a = [f"a{i}" for i in range(self.n_agents)]
        ns = [
            f"ns{f}"
            for f in range(self.n_features)
            if f not in self.static_features
        ]
        return s + pa + a + ns + ["r", "y"]

    def inter_agent_edges(self):
        """Retained (source agent, target agent) influence pairs."""
        out = []
        for j in range(self.n_agents):
            for name in self.parents.get(f"a{j}", []):
                if name.startswith("prev_a"):
                    out.append((int(name[len("prev_a"):]), j))
        return sorted(out)

    def _build_parents(self, retained):
        s_nodes = [f"s{f}" for f in range(self.n_features)]
        a_nodes = [f"a{i}" for i in range(self.n_agents)]
        ns_nodes = [f"ns{f}" for f in range(self.n_features)]
        parents = {}
        for j in range(self.n_agents):
            parents[f"a{j}"] = s_nodes + [f"prev_a{i}" for i in retained[j]]
        for f in range(self.n_features):
            if f not in self.static_features:
                parents[f"ns{f}"] = s_nodes + a_nodes
        parents["r"] = a_nodes + ns_nodes
        parents["y"] = ["r"]
        return parents

    # -- fitting -----------------------------------------------------------

    def fit(
        self,
        history,
        outcome: OutcomeSpec,
        model="tree_ensemble",
        corr_threshold=DEFAULT_CORR_THRESHOLD,
        rng=None,
    ):
        """Fit every equation from a history.

        The rng feeds the tree bootstraps and is consumed in a fixed node
        order (actions, next states, reward, outcome), so a given rng state
        always yields the same fit.
        """
        if model not in MODEL_NAMES:
            raise ConfigError(
                f"unknown model {model!r}; choose from {', '.join(MODEL_NAMES)}"
            )
        if rng is None:
            rng = np.random.default_rng(0)
        S, PA, A, NS, R = _assemble_rows(history)
        n = S.shape[0]
        self.model_name = model
        self.n_agents = history.n_agents
        self.n_features = S.shape[1]
        self.n_actions = int(A.max()) + 1
        self.feature_names = history.feature_names
        self.corr_threshold = float(corr_threshold)
        self.static_features = [
            f for f in range(self.n_features) if np.all(NS[:, f] == S[:, f])
        ]

        retained = []
        for j in range(self.n_agents):
            keep = []
            for i in range(self.n_agents):
                if i == j:
                    continue
                if abs(_pearson(PA[:, i], A[:, j])) >= self.corr_threshold:
                    keep.append(i)
            retained.append(keep)
        self.parents = self._build_parents(retained)

        columns = {f"s{f}": S[:, f] for f in range(self.n_features)}
        columns.update(
            {f"prev_a{i}": PA[:, i].astype(np.float64) for i in range(self.n_agents)}
        )
        columns.update(
            {f"a{i}": A[:, i].astype(np.float64) for i in range(self.n_agents)}
        )
        columns.update({f"ns{f}": NS[:, f] for f in range(self.n_features)})

        self.equations = {}
        for j in range(self.n_agents):
            node = f"a{j}"
            self.equations[node] = self._fit_discrete(
                node, columns, A[:, j], n, rng
            )
        for f in range(self.n_features):
            if f in self.static_features:
                continue
            node = f"ns{f}"
            self.equations[node] = self._fit_continuous(
                node, columns, NS[:, f], n, rng
            )
        self.equations["r"] = self._fit_continuous("r", columns, R, n, rng)

        sum_r = np.array(
            [sum(s.team_reward for s in ep.steps) for ep in history.episodes]
        )
        ys = np.array([episode_outcome(ep, outcome) for ep in history.episodes])
        if len(ys) < MIN_SAMPLES:
            raise MacieError(
                f"too few samples to fit node y: {len(ys)} < {MIN_SAMPLES}"
            )
        y_model = Linear().fit(sum_r[:, None], ys, rng)
        self.equations["y"] = ContinuousEquation(["sum_r"], y_model)
        self.fitted = True
        return self

    def _features_matrix(self, node, columns, n):
        feats = self.parents[node]
        X = np.empty((n, len(feats)))
        for k, name in enumerate(feats):
            X[:, k] = columns[name]
        return X

    def _fit_continuous(self, node, columns, target, n, rng):
        if n < MIN_SAMPLES:
            raise MacieError(f"too few samples to fit node {node}: {n} < {MIN_SAMPLES}")
        X = self._features_matrix(node, columns, n)
        return ContinuousEquation(
            self.parents[node], _fit_model(self.model_name, X, target, rng)
        )

    def _fit_discrete(self, node, columns, target, n, rng):
        if n < MIN_SAMPLES:
            raise MacieError(f"too few samples to fit node {node}: {n} < {MIN_SAMPLES}")
        X = self._features_matrix(node, columns, n)
        values = list(range(self.n_actions))
        models = [
            _fit_model(self.model_name, X, (target == v).astype(np.float64), rng)
            for v in values
        ]
        return DiscreteEquation(self.parents[node], values, models)

    # -- validation ----------------------------------------------------------

    def validate(self, history, outcome: OutcomeSpec, n_folds=3, rng=None):
        """Out-of-fold R-squared per fitted node, via k-fold refits.

        Action nodes are scored on the predicted action index. A constant
        target scores 1.0 when predicted exactly and 0.0 otherwise.
        """
        if not self.fitted:
            raise MacieError("fit the model before validating it")
        if n_folds < 2:
            raise ConfigError(f"n_folds must be >= 2, got {n_folds}")
        if rng is None:
            rng = np.random.default_rng(0)
        S, PA, A, NS, R = _assemble_rows(history)
        n = S.shape[0]
        if n < n_folds:
            raise MacieError(f"{n} transitions cannot fill {n_folds} folds")
        columns = {f"s{f}": S[:, f] for f in range(self.n_features)}
        columns.update(
            {f"prev_a{i}": PA[:, i].astype(np.float64) for i in range(self.n_agents)}
        )
        columns.update(
            {f"a{i}": A[:, i].astype(np.float64) for i in range(self.n_agents)}
        )
        columns.update({f"ns{f}": NS[:, f] for f in range(self.n_features)})

        targets = {f"a{j}": A[:, j].astype(np.float64) for j in range(self.n_agents)}
        targets.update(
            {
                f"ns{f}": NS[:, f]
                for f in range(self.n_features)
                if f not in self.static_features
            }
        )
        targets["r"] = R

        folds = np.array_split(np.arange(n), n_folds)
        scores = {}
        for node, target in targets.items():
            X = self._features_matrix(node, columns, n)
            pred = np.zeros(n)
            discrete = node.startswith("a")
            for test_idx in folds:
                train = np.ones(n, dtype=bool)
                train[test_idx] = False
                if discrete:
                    models = [
                        _fit_model(
                            self.model_name,
                            X[train],
                            (targets[node][train] == v).astype(np.float64),
                            rng,
                        )
                        for v in range(self.n_actions)
                    ]
                    sc = np.column_stack([m.predict(X[test_idx]) for m in models])
                    pred[test_idx] = np.argmax(sc, axis=1).astype(np.float64)
                else:
                    m = _fit_model(self.model_name, X[train], target[train], rng)
                    pred[test_idx] = m.predict(X[test_idx])
            scores[node] = _r_squared(target, pred)

        sum_r = np.array(
            [sum(s.team_reward for s in ep.steps) for ep in history.episodes]
        )
        ys = np.array([episode_outcome(ep, outcome) for ep in history.episodes])
        if len(ys) >= n_folds:
            pred = np.zeros(len(ys))
            for test_idx in np.array_split(np.arange(len(ys)), n_folds):
                train = np.ones(len(ys), dtype=bool)
                train[test_idx] = False
                m = Linear().fit(sum_r[train][:, None], ys[train], rng)
                pred[test_idx] = m.predict(sum_r[test_idx][:, None])
            scores["y"] = _r_squared(ys, pred)
        return scores

    # -- prediction -----------------------------------------------------------

    def _vector(self, node, context):
        feats = self.parents[node]
        X = np.empty((1, len(feats)))
        for k, name in enumerate(feats):
            X[0, k] = context[name]
        return X

    def _context(self, state, prev_actions=None, actions=None, next_state=None):
        ctx = {f"s{f}": state[f] for f in range(self.n_features)}
        if prev_actions is not None:
            for i in range(self.n_agents):
                ctx[f"prev_a{i}"] = float(prev_actions[i])
        if actions is not None:
            for i in range(self.n_agents):
                ctx[f"a{i}"] = float(actions[i])
        if next_state is not None:
            for f in range(self.n_features):
                ctx[f"ns{f}"] = next_state[f]
        return ctx

    def predict_action(self, agent, state, prev_actions):
        self._require_fitted()
        ctx = self._context(state, prev_actions=prev_actions)
        eq = self.equations[f"a{agent}"]
        return int(eq.predict_rows(self._vector(f"a{agent}", ctx))[0])

    def predict_next_state(self, state, actions):
        self._require_fitted()
        ctx = self._context(state, actions=actions)
        out = np.empty(self.n_features)
        for f in range(self.n_features):
            if f in self.static_features:
                out[f] = state[f]
                continue
            node = f"ns{f}"
            out[f] = self.equations[node].predict_rows(self._vector(node, ctx))[0]
        return out

    def predict_reward(self, actions, next_state):
        self._require_fitted()
        ctx = self._context(np.zeros(self.n_features), actions=actions,
                            next_state=next_state)
        return float(self.equations["r"].predict_rows(self._vector("r", ctx))[0])

    def predict_outcome(self, sum_r):
        self._require_fitted()
        return float(
            self.equations["y"].predict_rows(np.array([[float(sum_r)]]))[0]
        )

    def _require_fitted(self):
        if not self.fitted:
            raise MacieError("structural model is not fitted")

    # -- serialization ---------------------------------------------------------

    def to_dict(self):
        self._require_fitted()
        return {
            "format": "macie-scm",
            "version": 1,
            "model": self.model_name,
            "n_agents": self.n_agents,
            "n_features": self.n_features,
            "n_actions": self.n_actions,
            "feature_names": self.feature_names,
            "corr_threshold": self.corr_threshold,
            "static_features": list(self.static_features),
            "parents": self.parents,
            "equations": {k: eq.to_dict() for k, eq in self.equations.items()},
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != "macie-scm":
            raise MacieError("not a structural model file")
        if data.get("version") != 1:
            raise MacieError(f"unsupported model version {data.get('version')!r}")
        scm = cls()
        scm.model_name = data["model"]
        scm.n_agents = int(data["n_agents"])
        scm.n_features = int(data["n_features"])
        scm.n_actions = int(data["n_actions"])
        scm.feature_names = data["feature_names"]
        scm.corr_threshold = float(data["corr_threshold"])
        scm.static_features = [int(f) for f in data["static_features"]]
        scm.parents = {k: list(v) for k, v in data["parents"].items()}
        scm.equations = {
            k: _equation_from_dict(v) for k, v in data["equations"].items()
        }
        scm.fitted = True
        return scm

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _r_squared(target, pred):
    sse = float(np.sum((target - pred) ** 2))
    sst = float(np.sum((target - np.mean(target)) ** 2))
    if sst < 1e-12:
        return 1.0 if sse < 1e-12 else 0.0
    return 1.0 - sse / sst
