"""Seeded random streams shared by the simulator and the trainer.

Every stream is a PCG64 generator keyed by ``(seed, *key)`` through numpy's
``SeedSequence`` spawn keys, so independent consumers (train path, tail
series, per-model initialization, per-epoch shuffles) never share draws.
Both the bit generator and the seeding algorithm are fully specified, so
the raw 64-bit output is the same on every platform.

Uniforms use the top 52 bits of each raw word, ``u = (k + 1/2) 2^-52``,
which lies strictly inside (0, 1). Normals are the inverse CDF of those
uniforms, one uniform per normal, with no rejection step.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_TWO_M52 = 2.0**-52


def stream(seed: int, *key: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit child seed, for handing a stream to another process."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def open_uniform(gen: np.random.Generator, n: int) -> np.ndarray:
    raw = gen.bit_generator.random_raw(n)
    return ((raw >> np.uint64(12)).astype(np.float64) + 0.5) * _TWO_M52


def standard_normal(gen: np.random.Generator, n: int) -> np.ndarray:
    return ndtri(open_uniform(gen, n))


def permutation(gen: np.random.Generator, n: int) -> np.ndarray:
    """Uniform random permutation of ``range(n)``: stable argsort of uniforms.

    ``Generator.permutation`` is not pinned across numpy releases; this is.
    """
    return np.argsort(open_uniform(gen, n), kind="stable")
