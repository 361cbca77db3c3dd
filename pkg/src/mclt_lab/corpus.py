"""Deterministic randomized corpora for the verification suites.

Corpus item i of a given seed is always the same object: values come from
the counter stream (seed, CORPUS, i, .), so suites are reproducible across
machines and partitionings.
"""

from __future__ import annotations

import math

import numpy as np

from . import rng
from .bounds import JointLaw
from .kernels import StepDistribution

__all__ = ["random_mean_zero_distribution", "random_joint_law"]


def random_mean_zero_distribution(seed: int, index: int) -> StepDistribution:
    """A random finite-support mean-zero law with 2..5 atoms.

    Atom locations are distinct draws in [-3, 3]; masses are bounded away
    from zero; the support is then recentered so the mean vanishes exactly
    up to one fused summation.
    """
    key = rng.stream_key(seed, rng.STREAM_CORPUS)
    u = rng.uniforms(key, index, np.arange(12))
    k = 2 + int(u[0] * 4.0)  # 2..5 support points
    values = np.sort(-3.0 + 6.0 * u[1 : 1 + k])
    raw = 0.05 + u[6 : 6 + k]
    probs = raw / math.fsum(raw.tolist())
    mean = math.fsum(p * v for p, v in zip(probs, values))
    values = values - mean
    return StepDistribution(values=tuple(values.tolist()), probs=tuple(probs.tolist()))


def random_joint_law(seed: int, index: int, max_side: int = 5) -> JointLaw:
    """A random finite joint law on a grid of at most max_side x max_side atoms."""
    key = rng.stream_key(seed, rng.STREAM_CORPUS)
    u = rng.uniforms(key, index + (1 << 32), np.arange(2 + 2 * max_side + max_side * max_side))
    kx = 2 + int(u[0] * (max_side - 1))
    ky = 2 + int(u[1] * (max_side - 1))
    xs = -2.0 + 4.0 * u[2 : 2 + kx]
    ys = -2.0 + 4.0 * u[2 + max_side : 2 + max_side + ky]
    cells = u[2 + 2 * max_side : 2 + 2 * max_side + kx * ky] + 0.02
    cells = cells / math.fsum(cells.tolist())
    x_flat = []
    y_flat = []
    p_flat = []
    for i in range(kx):
        for j in range(ky):
            x_flat.append(float(xs[i]))
            y_flat.append(float(ys[j]))
            p_flat.append(float(cells[i * ky + j]))
    return JointLaw(x=tuple(x_flat), y=tuple(y_flat), probs=tuple(p_flat))
