"""Collective behaviour metrics: synergy, coordination, and integration.

These quantify what attribution to individual agents misses. Pairwise
synergy compares the grand coalition against dropping a pair and their solo
credits; the synergy index compares the team outcome against the sum of
solo outcomes on a bounded scale; coordination correlates consecutive
joint actions; information integration totals the conditional mutual
information between agents' actions given a discretized state.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from math import log

import numpy as np

from .core import ConfigError

DEFAULT_N_BINS = 4
SI_BOUND = 2.0


def synergy_matrix(values, phi):
    """sigma_ij = v(all) - v(all minus {i, j}) - phi_i - phi_j, zero diagonal."""
    n = values.n_agents
    phi = np.asarray(phi, dtype=np.float64)
    if len(phi) != n:
        raise ConfigError(f"expected {n} attributions, got {len(phi)}")
    grand = values.value(tuple(range(n)))
    sigma = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            rest = tuple(k for k in range(n) if k != i and k != j)
            s = grand - values.value(rest) - phi[i] - phi[j]
            sigma[i, j] = s
            sigma[j, i] = s
    return sigma


def synergy_index(values):
    """Bounded gap between the team outcome and the sum of solo outcomes.

    Positive means the team achieves what no sum of individuals would;
    negative means agents get in each other's way. Clipped to [-2, 2].
    """
    n = values.n_agents
    grand = values.value(tuple(range(n)))
    solo_sum = float(sum(values.value((i,)) for i in range(n)))
    denom = max(abs(grand), abs(solo_sum), 1e-9)
    return float(np.clip((grand - solo_sum) / denom, -SI_BOUND, SI_BOUND))


def _vector_corr(x, y):
    sx = float(np.std(x))
    sy = float(np.std(y))
    if sx < 1e-12 or sy < 1e-12:
        # constant vectors carry no spread to correlate; call them fully
        # coordinated only when literally identical
        return 1.0 if np.array_equal(x, y) else 0.0
    return float(np.mean((x - np.mean(x)) * (y - np.mean(y))) / (sx * sy))


def coordination_score(history):
    """Mean correlation between consecutive joint-action vectors."""
    per_episode = []
    for ep in history.episodes:
        acts = [np.asarray(s.joint_action, dtype=np.float64) for s in ep.steps]
        if len(acts) < 2:
            continue
        cs = [
            _vector_corr(acts[t - 1], acts[t]) for t in range(1, len(acts))
        ]
        per_episode.append(float(np.mean(cs)))
    if not per_episode:
        return 0.0
    return float(np.mean(per_episode))


def discretize_states(states, n_bins=DEFAULT_N_BINS):
    """Equal-width bin signature per row, one symbol id per distinct cell."""
    if n_bins < 1:
        raise ConfigError(f"n_bins must be >= 1, got {n_bins}")
    S = np.asarray(states, dtype=np.float64)
    lo = S.min(axis=0)
    span = S.max(axis=0) - lo
    bins = np.zeros(S.shape, dtype=np.int64)
    for f in range(S.shape[1]):
        if span[f] < 1e-12:
            continue
        bins[:, f] = np.clip(
            ((S[:, f] - lo[f]) / span[f] * n_bins).astype(np.int64),
            0,
            n_bins - 1,
        )
    _, ids = np.unique(bins, axis=0, return_inverse=True)
    return ids


def _conditional_mi(sig, x, y):
    """Plug-in I(x; y | sig) in nats."""
    n = len(sig)
    c_sxy = Counter(zip(sig, x, y))
    c_sx = Counter(zip(sig, x))
    c_sy = Counter(zip(sig, y))
    c_s = Counter(sig)
    total = 0.0
    for (s, xv, yv), c in c_sxy.items():
        total += (c / n) * log(c * c_s[s] / (c_sx[(s, xv)] * c_sy[(s, yv)]))
    return max(0.0, total)


def pairwise_conditional_mi(history, n_bins=DEFAULT_N_BINS):
    """I(a_i; a_j | discretized state) for every agent pair, in nats."""
    states = []
    actions = []
    for ep in history.episodes:
        for step in ep.steps:
            states.append(np.asarray(step.state, dtype=np.float64))
            actions.append(np.asarray(step.joint_action, dtype=np.int64))
    if not states:
        raise ConfigError("history has no steps")
    sig = discretize_states(np.asarray(states), n_bins)
    A = np.asarray(actions)
    n = history.n_agents
    out = np.zeros((n, n))
    sig_t = [int(v) for v in sig]
    cols = [[int(v) for v in A[:, i]] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            mi = _conditional_mi(sig_t, cols[i], cols[j])
            out[i, j] = mi
            out[j, i] = mi
    return out


def information_integration(history, n_bins=DEFAULT_N_BINS):
    """Total conditional mutual information over ordered agent pairs."""
    return float(pairwise_conditional_mi(history, n_bins).sum())


@dataclass
class EmergenceMetrics:
    synergy: np.ndarray   # (N, N)
    si: float
    cs: float
    ii: float
    ii_pairs: np.ndarray  # (N, N)


def emergence_metrics(history, values, phi, n_bins=DEFAULT_N_BINS):
    pairs = pairwise_conditional_mi(history, n_bins)
    return EmergenceMetrics(
        synergy=synergy_matrix(values, phi),
        si=synergy_index(values),
        cs=coordination_score(history),
        ii=float(pairs.sum()),
        ii_pairs=pairs,
    )
