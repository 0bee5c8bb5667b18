"""Deterministic derivation of independent random streams.

All randomness in a run flows from one 64-bit master seed held by a
:class:`SeedTree`.  Child streams are keyed by a string tag plus a tuple of
integer indices and are produced with a counter-based bit generator
(Philox), so any stream can be rebuilt in isolation: derivation is
order-insensitive and two streams with different keys are statistically
independent.

Typical keys used by the pipeline:

- ``("reset", episode)`` - initial placements of an episode
- ``("env", episode, replicate)`` - environment stochasticity
- ``("act", episode, agent, replicate)`` - one agent's policy draws

Replicate 0 is the factual draw; counterfactual sample ``k`` re-draws the
intervened quantities at replicate ``k`` while everything else stays on its
factual stream (common random numbers).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .core import ConfigError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedTree:
    """Root of a run's random stream hierarchy."""

    master_seed: int

    def stream(self, tag: str, *indices: int) -> np.random.Generator:
        return derive_stream(self, tag, list(indices))


def derive_stream(seed_tree: SeedTree, tag: str, indices) -> np.random.Generator:
    """Derive the stream keyed by ``(master_seed, tag, indices)``.

    Parameters
    ----------
    seed_tree:
        Tree holding the master seed.
    tag:
        Non-empty purpose label, e.g. ``"act"`` or ``"cf"``.
    indices:
        Sequence of non-negative integers distinguishing sibling streams.

    Returns
    -------
    numpy.random.Generator
        Generator over a Philox counter-based stream.  Differing any index
        (or the tag) yields an independent stream; the same key always
        yields the same draw sequence.
    """
    if not tag:
        raise ConfigError("stream tag must be a non-empty string")
    idx = [int(i) for i in indices]
    if any(i < 0 for i in idx):
        raise ConfigError("stream indices must be non-negative integers")
    key = zlib.crc32(tag.encode("utf-8"))
    seq = np.random.SeedSequence(
        entropy=int(seed_tree.master_seed) & _MASK64, spawn_key=(key, *idx)
    )
    return np.random.Generator(np.random.Philox(seq))
