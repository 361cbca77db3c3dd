"""Independent exact oracles used before trusting any Monte Carlo estimate.

Two tools live here:

* a depth-first enumeration of every realizable path of an exact-mode kernel
  (full support tree, feasible for small n), yielding exact terminal moments;
* a lattice dynamic program for the variance-drift family, exact at any n.
  A drift path's randomness is its sign sequence, and its position after any
  prefix is ``a*h + b*l`` where (a, b) are net signed counts of high/low
  magnitude steps.  Both the magnitudes and the occupation side are pure
  functions of that integer state, so the chain (a, b, #high steps) carries
  the full law of the terminal conditional variance.

The DP is validated against the path enumeration at small n in the tests,
then run at large n where enumeration is impossible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import ConditionalKernel, VarianceDriftKernel

__all__ = [
    "exact_terminal_moments",
    "enumerate_terminal_variances",
    "variance_drift_mean_abs_deviation",
    "ExactTerminalMoments",
]

NODE_GUARD = 10_000_000


@dataclass(frozen=True)
class ExactTerminalMoments:
    """Exact expectations over the full path tree of a kernel."""

    mean_var_dev_p: float  # E |<X>_n - 1|^p
    mean_max_inc_2p: float  # E max_i |xi_i|^(2p)
    max_var_dev: float  # sup over paths of |<X>_n - 1|
    leaves: int


def _walk(kernel: ConditionalKernel, step, state, prob, var_acc, max_abs, counter, out):
    if step > kernel.n:
        out.append((prob, var_acc, max_abs))
        return
    dist = kernel.law_from_state(step, state)
    if dist.mode != "exact":
        raise ValueError("exact enumeration requires an exact-mode kernel")
    m2 = dist.moment(2)
    for value, p in zip(dist.values, dist.probs):
        if p == 0.0:
            continue
        counter[0] += 1
        if counter[0] > NODE_GUARD:
            raise ValueError("enumeration exceeds the node guard")
        _walk(
            kernel,
            step + 1,
            kernel.transition(state, value),
            prob * p,
            var_acc + m2,
            max(max_abs, abs(value)),
            counter,
            out,
        )


def enumerate_terminal_variances(kernel: ConditionalKernel) -> list[tuple[float, float, float]]:
    """All leaves of the path tree as (probability, <X>_n, max |xi|)."""
    out: list[tuple[float, float, float]] = []
    _walk(kernel, 1, kernel.initial_state(), 1.0, 0.0, 0.0, [0], out)
    return out


def exact_terminal_moments(kernel: ConditionalKernel, p: float = 1.0) -> ExactTerminalMoments:
    leaves = enumerate_terminal_variances(kernel)
    mean_dev = math.fsum(pr * abs(v - 1.0) ** p for pr, v, _ in leaves)
    mean_max = math.fsum(pr * m ** (2.0 * p) for pr, _, m in leaves)
    max_dev = max(abs(v - 1.0) for _, v, _ in leaves)
    return ExactTerminalMoments(
        mean_var_dev_p=mean_dev,
        mean_max_inc_2p=mean_max,
        max_var_dev=max_dev,
        leaves=len(leaves),
    )


def variance_drift_mean_abs_deviation(d: float, n: int, p: float = 1.0) -> float:
    """Exact E|<X>_n - 1|^p for the variance-drift kernel at any n.

    The terminal conditional variance is ``1 + d (2H - n)/n`` with H the
    number of steps taken from the high-variance side, so only the law of H
    is needed.  States are (a, b, H); probabilities are propagated level by
    level with the occupation side decided by the same canonical position
    formula the kernel itself uses.
    """
    kernel = VarianceDriftKernel(n, d)
    h, l = kernel.high_mag, kernel.low_mag
    # slabs[H] = P over (a, b), array indexed [a + H, b + (k - H)]
    slabs: dict[int, np.ndarray] = {0: np.ones((1, 1))}
    for k in range(n):
        new: dict[int, np.ndarray] = {}
        for H, P in slabs.items():
            a = np.arange(-H, H + 1)[:, None]
            b = np.arange(-(k - H), (k - H) + 1)[None, :]
            pos = a * h + b * l
            up = np.where(pos >= 0.0, P, 0.0) * 0.5
            dn = np.where(pos < 0.0, P, 0.0) * 0.5
            if up.any():
                # high step: a -> a +/- 1, slab H+1; b-range is unchanged
                tgt = new.setdefault(H + 1, np.zeros((2 * H + 3, 2 * (k - H) + 1)))
                tgt[0:-2, :] += up
                tgt[2:, :] += up
            if dn.any():
                # low step: b -> b +/- 1, slab H; b-range widens by one
                tgt = new.setdefault(H, np.zeros((2 * H + 1, 2 * (k - H) + 3)))
                tgt[:, 0:-2] += dn
                tgt[:, 2:] += dn
        slabs = new
    total = 0.0
    for H, P in slabs.items():
        dev = abs(d * (2.0 * H - n) / n)
        total += dev**p * float(P.sum())
    return total
