"""Counter-based random streams.

Every variate consumed anywhere in the lab is a pure function of
``(seed, stream, path_index, draw_index)``.  This makes simulation output
independent of how replicates are partitioned across chunks or worker
threads: replicate j always reads the same words no matter who computes it.

The generator is a keyed SplitMix64 stream (Stafford mix13 finalizer).  It is
a bijective 64-bit mixer applied to an affine counter sequence, the standard
construction for splittable simulation streams.  Known-answer vectors are
frozen in the test suite against an independent pure-integer implementation.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

__all__ = [
    "mix64",
    "stream_key",
    "uniforms",
    "normals",
    "MAX_DRAWS_PER_PATH",
    "STREAM_SIMULATION",
    "STREAM_PADDING",
    "STREAM_CORPUS",
    "STREAM_ORACLE",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF

# Draw indices are packed into the low 20 bits of the counter, path indices
# into the high 44.  A single path may therefore consume at most 2**20 words.
_DRAW_BITS = 20
MAX_DRAWS_PER_PATH = 1 << _DRAW_BITS

# Disjoint purposes get disjoint streams so that e.g. padding randomness can
# never collide with the simulation randomness it extends.
STREAM_SIMULATION = 0
STREAM_PADDING = 1
STREAM_CORPUS = 2
STREAM_ORACLE = 3


def mix64(z: np.ndarray | int) -> np.ndarray | np.uint64:
    """SplitMix64 finalizer; bijective on uint64 scalars and arrays."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):  # wraparound mod 2**64 is the point
        z = z ^ (z >> np.uint64(30))
        z = z * _MIX_A
        z = z ^ (z >> np.uint64(27))
        z = z * _MIX_B
        z = z ^ (z >> np.uint64(31))
    return z if z.ndim else z[()]


def stream_key(seed: int, stream: int = STREAM_SIMULATION) -> np.uint64:
    """Derive the 64-bit key for one (seed, stream) pair."""
    base = mix64(np.uint64(int(seed) & _U64_MASK))
    with np.errstate(over="ignore"):
        salt = np.uint64(int(stream) & _U64_MASK) * _GOLDEN
    return mix64(base ^ salt)


def _counters(path_index, draw_index) -> np.ndarray:
    paths = np.asarray(path_index, dtype=np.uint64)
    draws = np.asarray(draw_index, dtype=np.uint64)
    if np.any(draws >= MAX_DRAWS_PER_PATH):
        raise ValueError(
            f"draw index exceeds the per-path budget of {MAX_DRAWS_PER_PATH}"
        )
    return (paths << np.uint64(_DRAW_BITS)) | draws


def _words(key: np.uint64, path_index, draw_index) -> np.ndarray:
    with np.errstate(over="ignore"):
        offset = np.uint64(key) + _counters(path_index, draw_index) * _GOLDEN
    return mix64(offset)


def uniforms(key: np.uint64, path_index, draw_index) -> np.ndarray:
    """Uniform [0, 1) variates at the given (path, draw) counters.

    ``path_index`` and ``draw_index`` broadcast against each other, so one
    call can fill a step across all paths or a whole row for one path.
    """
    words = np.atleast_1d(_words(key, path_index, draw_index))
    return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53


def path_counter_base(path_index) -> np.ndarray:
    """Precomputed high bits of the counters for a block of paths."""
    return np.asarray(path_index, dtype=np.uint64) << np.uint64(_DRAW_BITS)


def uniforms_at(key: np.uint64, counter_base: np.ndarray, draw_index: int) -> np.ndarray:
    """Fast path for simulation loops: counters = counter_base | draw_index."""
    if draw_index >= MAX_DRAWS_PER_PATH:
        raise ValueError(
            f"draw index exceeds the per-path budget of {MAX_DRAWS_PER_PATH}"
        )
    with np.errstate(over="ignore"):
        offset = np.uint64(key) + (counter_base | np.uint64(draw_index)) * _GOLDEN
    words = mix64(offset)
    return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normals(key: np.uint64, path_index, draw_index) -> np.ndarray:
    """Standard normal variates via the inverse CDF, one word per variate."""
    words = np.atleast_1d(_words(key, path_index, draw_index))
    # Offset by half an ulp of the 53-bit grid so u lies strictly in (0, 1).
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)
