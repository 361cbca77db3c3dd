"""Martingale difference kernels and the simulation engine.

A :class:`ConditionalKernel` defines a martingale difference sequence through
per-step conditional laws: ``law(i, history)`` returns the distribution of
increment i given the realized increments before it.  Exact-mode laws carry a
finite support and answer moment queries by finite summation; sampled-mode
laws carry an inverse-CDF sampler plus a declared moment oracle.

Simulation produces :class:`PathBundle` objects holding the increments, the
partial sums ``X_0..X_n`` and the predictable variance ``<X>_0..<X>_n``
(the running sum of conditional second moments).  All randomness is
counter-based (see :mod:`mclt_lab.rng`), so results are reproducible and
independent of chunking or thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np

from . import rng

__all__ = [
    "StepDistribution",
    "ConditionalKernel",
    "PathBundle",
    "PathCollection",
    "TerminalStatistics",
    "KernelError",
    "InvalidKernelError",
    "make_kernel",
    "kernel_from_config",
    "sample_paths",
    "sample_terminal",
    "terminal_statistics",
    "conditional_moment",
    "conditional_moment_sampled",
    "KERNEL_FAMILIES",
]

#: Hard cap on ``count * n`` for bundle-mode simulation; larger jobs must use
#: the streaming terminal sampler.
BUNDLE_CELL_GUARD = 50_000_000

#: Paths per chunk in the streaming engine.  Fixed: results must not depend
#: on it at the bit level for per-path quantities, and only through float
#: summation order (<1e-12) for pooled moments.
DEFAULT_CHUNK = 1 << 16

PROB_TOL = 1e-12
MEAN_TOL = 1e-12


class KernelError(ValueError):
    """Base class for kernel construction and validation failures."""


class InvalidKernelError(KernelError):
    """A step distribution violated its invariants.

    Carries the offending step index and the realized history that produced
    the bad distribution.
    """

    def __init__(self, step: int, history, reason: str):
        self.step = step
        self.history = tuple(np.asarray(history, dtype=float).tolist())
        self.reason = reason
        super().__init__(f"invalid kernel at step {step}: {reason} (history={self.history})")


@dataclass(frozen=True)
class StepDistribution:
    """Conditional law of one increment given its history.

    Exact mode: ``values``/``probs`` give a finite support; moments are finite
    sums.  Sampled mode: ``sampler`` maps uniforms in [0,1) to variates via an
    inverse CDF, ``declared_moment(t)`` is a trusted oracle for E|xi|^t, and
    ``budget`` is the inner Monte Carlo budget for estimated moments.
    """

    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    sampler: Callable[[np.ndarray], np.ndarray] | None = None
    declared_moment: Callable[[float], float] | None = None
    budget: int = 0

    @property
    def mode(self) -> str:
        return "exact" if self.sampler is None else "sampled"

    @cached_property
    def _check_cached(self) -> str | None:
        return self.check()

    @cached_property
    def _m2_cached(self) -> float:
        return self.moment(2)

    def check(self) -> str | None:
        """Return a violation description, or None if the invariants hold."""
        if self.mode == "sampled":
            if self.declared_moment is None:
                return "sampled-mode distribution lacks a declared moment oracle"
            if self.budget < 1:
                return "sampled-mode distribution lacks a positive inner budget"
            return None
        if len(self.values) != len(self.probs) or not self.values:
            return "support and probability lists disagree or are empty"
        if any(p < 0 for p in self.probs):
            return "negative probability"
        total = math.fsum(self.probs)
        if abs(total - 1.0) > PROB_TOL:
            return f"probabilities sum to {total!r}, not 1"
        mean = math.fsum(p * v for v, p in zip(self.values, self.probs))
        if abs(mean) > MEAN_TOL:
            return f"mean is {mean!r}, not 0 (martingale-difference property)"
        return None

    def moment(self, t: float) -> float:
        """E|xi|^t.  Exact finite sum in exact mode, declared oracle otherwise."""
        if self.mode == "sampled":
            return float(self.declared_moment(t))
        if t == 2.0:
            # the t==2 path avoids pow() so conditional variances accumulate
            # bit-identically between scalar and batch code
            return math.fsum(p * v * v for v, p in zip(self.values, self.probs))
        return math.fsum(p * abs(v) ** t for v, p in zip(self.values, self.probs))

    def signed_moment(self, k: int) -> float:
        """E[xi^k] for integer k, exact mode only."""
        if self.mode == "sampled":
            raise KernelError("signed moments require an exact-mode distribution")
        return math.fsum(p * v**k for v, p in zip(self.values, self.probs))

    @cached_property
    def _cumprobs(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.probs, dtype=float))

    @cached_property
    def _values_arr(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def sample_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms in [0,1) to variates (inverse CDF in both modes)."""
        u = np.asarray(u, dtype=float)
        if self.mode == "sampled":
            return self.sampler(u)
        cum = self._cumprobs
        # small supports dominate simulation; branchless selects match the
        # searchsorted(side="right") mapping exactly
        if len(self.values) == 2:
            return np.where(u < cum[0], self.values[0], self.values[1])
        if len(self.values) == 3:
            return np.where(
                u < cum[0],
                self.values[0],
                np.where(u < cum[1], self.values[1], self.values[2]),
            )
        idx = np.searchsorted(cum, u, side="right")
        idx = np.minimum(idx, len(self.values) - 1)
        return self._values_arr[idx]


def rademacher_two_point(magnitude: float) -> StepDistribution:
    return StepDistribution(values=(-magnitude, magnitude), probs=(0.5, 0.5))


# ---------------------------------------------------------------------------
# kernels


class ConditionalKernel:
    """Base class: a pure per-step conditional law plus a Markov summary.

    Subclasses provide ``law_from_state`` together with ``initial_state`` /
    ``transition`` (the declared history summary).  ``law`` replays the raw
    history through the summary, so kernels whose law depends only on a small
    state get O(1)-state walks for free.
    """

    label: str = "kernel"
    n: int = 0

    # -- scalar (contract) interface ------------------------------------
    def initial_state(self):
        return ()

    def transition(self, state, value: float):
        return state + (float(value),)

    def state_key(self, state):
        return state

    def law_from_state(self, step: int, state) -> StepDistribution:
        raise NotImplementedError

    def law(self, step: int, history: Sequence[float]) -> StepDistribution:
        """Distribution of increment ``step`` (1-based) given the history."""
        if not 1 <= step <= self.n:
            raise KernelError(f"step {step} outside 1..{self.n}")
        state = self.initial_state()
        for value in history:
            state = self.transition(state, value)
        return self.law_from_state(step, state)

    # -- batch (engine) interface ----------------------------------------
    # Default implementation covers kernels whose law at each step takes one
    # of a small number of "regimes" selected from the batch state.

    def step_regimes(self, step: int) -> tuple[StepDistribution, ...]:
        raise NotImplementedError

    def batch_init(self, count: int):
        return None

    def batch_regime(self, step: int, batch_state) -> np.ndarray | None:
        """Per-path regime index, or None when a single regime applies."""
        return None

    def batch_advance(self, step: int, batch_state, increments: np.ndarray, regime):
        return batch_state

    def certified_epsilon(self, rho: float) -> float | None:
        """Closed-form sup of the per-step moment ratio, when the family has one.

        Verified against exhaustive history walks in the test suite.
        """
        return None

    def certified_delta(self) -> float | None:
        """Closed-form sup of |<X>_n - 1|^(1/2), when the family has one."""
        return None


class _IidKernel(ConditionalKernel):
    """n independent copies of one step distribution."""

    def __init__(self, label: str, n: int, dist: StepDistribution):
        if n < 1:
            raise KernelError("n must be positive")
        self.label = label
        self.n = int(n)
        self.dist = dist

    def initial_state(self):
        return None

    def transition(self, state, value):
        return None

    def law_from_state(self, step, state):
        return self.dist

    def step_regimes(self, step):
        return (self.dist,)

    def certified_epsilon(self, rho):
        m2 = self.dist.moment(2)
        if m2 == 0.0:
            return 0.0
        return (self.dist.moment(2.0 + rho) / m2) ** (1.0 / rho)

    def certified_delta(self):
        return math.sqrt(abs(self.n * self.dist.moment(2) - 1.0))


class TableKernel(ConditionalKernel):
    """History-independent kernel with an explicit table per step.

    Distributions are validated at simulation time, not construction, so a
    broken table is reported with the offending step.
    """

    def __init__(self, steps: Sequence[StepDistribution], label: str = "table"):
        if not steps:
            raise KernelError("table kernel needs at least one step")
        self.label = label
        self.n = len(steps)
        self.steps = tuple(steps)

    def initial_state(self):
        return None

    def transition(self, state, value):
        return None

    def law_from_state(self, step, state):
        return self.steps[step - 1]

    def step_regimes(self, step):
        return (self.steps[step - 1],)


class VarianceDriftKernel(ConditionalKernel):
    """Rademacher steps whose conditional variance drifts with the path sign.

    Step k has conditional standard deviation sqrt((1+d)/n) when the current
    partial sum is >= 0 and sqrt((1-d)/n) otherwise, with a fresh fair sign.
    The terminal conditional variance therefore lies in [1-d, 1+d], the
    deviation d being attained on paths that never change side.

    The regime decision uses the canonical position ``a*h + b*l`` built from
    integer counts of high/low signed steps, so simulation, exhaustive walks
    and enumeration oracles classify every history identically.
    """

    def __init__(self, n: int, d: float):
        if n < 1:
            raise KernelError("n must be positive")
        if not 0.0 < d < 1.0:
            raise KernelError("drift d must lie in (0, 1)")
        self.label = f"variance_drift(d={d}, n={n})"
        self.n = int(n)
        self.d = float(d)
        self.high_mag = math.sqrt((1.0 + d) / n)
        self.low_mag = math.sqrt((1.0 - d) / n)
        self._regimes = (
            rademacher_two_point(self.high_mag),
            rademacher_two_point(self.low_mag),
        )

    # state: (net signed count of high steps, net signed count of low steps)
    def initial_state(self):
        return (0, 0)

    def transition(self, state, value):
        a, b = state
        v = float(value)
        if abs(v) == self.high_mag:
            return (a + (1 if v > 0 else -1), b)
        if abs(v) == self.low_mag:
            return (a, b + (1 if v > 0 else -1))
        raise KernelError(f"increment {v!r} is not in this kernel's support")

    def _position(self, a, b):
        return a * self.high_mag + b * self.low_mag

    def law_from_state(self, step, state):
        a, b = state
        return self._regimes[0 if self._position(a, b) >= 0.0 else 1]

    def step_regimes(self, step):
        return self._regimes

    def batch_init(self, count):
        return (np.zeros(count, dtype=np.int64), np.zeros(count, dtype=np.int64))

    def batch_regime(self, step, batch_state):
        a, b = batch_state
        pos = a * self.high_mag + b * self.low_mag
        return np.where(pos >= 0.0, 0, 1).astype(np.uint8)

    def batch_advance(self, step, batch_state, increments, regime):
        a, b = batch_state
        sign = np.where(increments > 0.0, 1, -1)
        high = regime == 0
        return (a + np.where(high, sign, 0), b + np.where(high, 0, sign))

    def certified_epsilon(self, rho):
        # both regimes are reachable for n >= 2 (step 1 is high; a first
        # negative step makes step 2 low); each regime's ratio equals its
        # magnitude because the support has a single magnitude
        return self.high_mag if self.n >= 1 else None

    def certified_delta(self):
        # sup |<X>_n - 1| = d, attained by paths that never leave the
        # nonnegative side (verified by exhaustive walks at small n)
        return math.sqrt(self.d)


def _gaussian_moment(sigma: float) -> Callable[[float], float]:
    def declared(t: float) -> float:
        # E|sigma Z|^t for Z standard normal; t = 2 bypasses the gamma form
        # so conditional variances accumulate without an ulp of drift
        if t == 2.0:
            return sigma * sigma
        return sigma**t * 2 ** (t / 2.0) * math.gamma((t + 1.0) / 2.0) / math.sqrt(math.pi)

    return declared


def _make_iid_rademacher(n: int) -> ConditionalKernel:
    mag = 1.0 / math.sqrt(n)
    return _IidKernel(f"iid_rademacher(n={n})", n, rademacher_two_point(mag))


def _make_two_point(n: int, a: float) -> ConditionalKernel:
    if a <= 0:
        raise KernelError("two_point magnitude must be positive")
    return _IidKernel(f"two_point(a={a}, n={n})", n, rademacher_two_point(a))


def _make_three_point(n: int, b: float, q: float) -> ConditionalKernel:
    if b <= 0:
        raise KernelError("three_point jump size must be positive")
    if not 0.0 < q <= 1.0:
        raise KernelError("three_point jump probability must lie in (0, 1]")
    dist = StepDistribution(values=(-b, 0.0, b), probs=(q / 2.0, 1.0 - q, q / 2.0))
    return _IidKernel(f"three_point(b={b}, q={q}, n={n})", n, dist)


def _make_iid_scaled(n: int, values: Sequence[float], probs: Sequence[float]) -> ConditionalKernel:
    base = StepDistribution(values=tuple(float(v) for v in values), probs=tuple(float(p) for p in probs))
    reason = base.check()
    if reason is not None:
        raise KernelError(f"iid_scaled base distribution invalid: {reason}")
    sigma = math.sqrt(base.moment(2))
    if sigma == 0.0:
        raise KernelError("iid_scaled base distribution is degenerate")
    scale = 1.0 / (sigma * math.sqrt(n))
    dist = StepDistribution(
        values=tuple(v * scale for v in base.values), probs=base.probs
    )
    return _IidKernel(f"iid_scaled(n={n})", n, dist)


def _make_variance_drift(n: int, d: float) -> ConditionalKernel:
    return VarianceDriftKernel(n, d)


def _make_iid_gaussian(n: int, budget: int = 4096) -> ConditionalKernel:
    sigma = 1.0 / math.sqrt(n)

    def sampler(u: np.ndarray) -> np.ndarray:
        from scipy.special import ndtri

        u = np.clip(u, 2.0**-53, 1.0 - 2.0**-53)
        return sigma * ndtri(u)

    dist = StepDistribution(
        sampler=sampler, declared_moment=_gaussian_moment(sigma), budget=int(budget)
    )
    return _IidKernel(f"iid_gaussian(n={n})", n, dist)


def _make_table(steps: Sequence[dict], n: int | None = None) -> ConditionalKernel:
    dists = [
        StepDistribution(
            values=tuple(float(v) for v in s["values"]),
            probs=tuple(float(p) for p in s["probs"]),
        )
        for s in steps
    ]
    if n is not None and int(n) != len(dists):
        raise KernelError(f"table kernel has {len(dists)} steps, grid asked for n={n}")
    return TableKernel(dists)


KERNEL_FAMILIES: dict[str, Callable[..., ConditionalKernel]] = {
    "iid_rademacher": _make_iid_rademacher,
    "iid_scaled": _make_iid_scaled,
    "two_point": _make_two_point,
    "three_point": _make_three_point,
    "variance_drift": _make_variance_drift,
    "iid_gaussian": _make_iid_gaussian,
    "table": _make_table,
}


def make_kernel(name: str, **params) -> ConditionalKernel:
    """Instantiate a registry kernel by name."""
    try:
        family = KERNEL_FAMILIES[name]
    except KeyError:
        raise KernelError(f"unknown kernel family {name!r}") from None
    return family(**params)


def kernel_from_config(ref: dict) -> ConditionalKernel:
    """Build a kernel from a config reference ``{"name": ..., "params": {...}}``."""
    if not isinstance(ref, dict) or "name" not in ref:
        raise KernelError("kernel reference must be an object with a 'name' field")
    return make_kernel(ref["name"], **ref.get("params", {}))


# ---------------------------------------------------------------------------
# path containers


@dataclass(frozen=True)
class PathBundle:
    """One realized path: increments, partial sums, predictable variance."""

    increments: np.ndarray  # xi_1..xi_n
    sums: np.ndarray  # X_0..X_n
    variances: np.ndarray  # <X>_0..<X>_n
    conditional_moments: dict[float, np.ndarray] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.increments)

    @property
    def terminal(self) -> float:
        return float(self.sums[-1])

    @property
    def terminal_variance(self) -> float:
        return float(self.variances[-1])


@dataclass(frozen=True)
class PathCollection:
    """A batch of paths stored columnwise; rows are PathBundle views."""

    kernel_label: str
    seed: int
    increments: np.ndarray  # (count, n)
    sums: np.ndarray  # (count, n+1)
    variances: np.ndarray  # (count, n+1)
    conditional_moments: dict[float, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return self.increments.shape[0]

    def bundle(self, i: int) -> PathBundle:
        return PathBundle(
            increments=self.increments[i],
            sums=self.sums[i],
            variances=self.variances[i],
            conditional_moments={t: m[i] for t, m in self.conditional_moments.items()},
        )

    def __iter__(self) -> Iterator[PathBundle]:
        return (self.bundle(i) for i in range(len(self)))


@dataclass(frozen=True)
class TerminalStatistics:
    """Mergeable terminal-sample statistics for one simulation.

    Sample means are exposed as properties; the stored fields are raw sums so
    that statistics from disjoint collections merge associatively.
    """

    p: float
    count: int
    terminal: np.ndarray
    sum_var_dev_p: float  # sum over paths of |<X>_n - 1|^p
    sum_var_dev_2p: float  # sum over paths of |<X>_n - 1|^(2p), for stderrs
    sum_max_inc_2p: float  # sum over paths of max_i |xi_i|^(2p)
    sum_total_inc_2p: float  # sum over paths of sum_i |xi_i|^(2p)
    max_var_dev: float  # max over paths of |<X>_n - 1|

    @property
    def mean_var_dev_p(self) -> float:
        return self.sum_var_dev_p / self.count

    @property
    def stderr_var_dev_p(self) -> float:
        """Standard error of the E|<X>_n - 1|^p estimate."""
        mean = self.mean_var_dev_p
        var = max(self.sum_var_dev_2p / self.count - mean * mean, 0.0)
        return math.sqrt(var / self.count)

    @property
    def mean_max_inc_2p(self) -> float:
        return self.sum_max_inc_2p / self.count

    @property
    def mean_total_inc_2p(self) -> float:
        """Estimate of sum_i E|xi_i|^(2p)."""
        return self.sum_total_inc_2p / self.count

    def merge(self, other: "TerminalStatistics") -> "TerminalStatistics":
        if other.p != self.p:
            raise ValueError("cannot merge statistics computed at different p")
        return TerminalStatistics(
            p=self.p,
            count=self.count + other.count,
            terminal=np.concatenate([self.terminal, other.terminal]),
            sum_var_dev_p=self.sum_var_dev_p + other.sum_var_dev_p,
            sum_var_dev_2p=self.sum_var_dev_2p + other.sum_var_dev_2p,
            sum_max_inc_2p=self.sum_max_inc_2p + other.sum_max_inc_2p,
            sum_total_inc_2p=self.sum_total_inc_2p + other.sum_total_inc_2p,
            max_var_dev=max(self.max_var_dev, other.max_var_dev),
        )


# ---------------------------------------------------------------------------
# simulation engine


def _batch_step(kernel, step, batch_state, u):
    """Draw one step for a chunk of paths; returns (xi, m2, new_state).

    ``m2`` is a scalar when one regime covers the whole chunk.
    """
    regimes = kernel.step_regimes(step)
    for k, dist in enumerate(regimes):
        reason = dist._check_cached
        if reason is not None:
            if len(regimes) > 1:
                reason = f"{reason} (regime {k})"
            raise InvalidKernelError(step, (), reason)
    regime = kernel.batch_regime(step, batch_state)
    if regime is None or len(regimes) == 1:
        dist = regimes[0]
        xi = dist.sample_from_uniforms(u)
        new_state = kernel.batch_advance(step, batch_state, xi, None)
        return xi, dist._m2_cached, new_state
    xi = np.empty(u.shape)
    m2 = np.empty(u.shape)
    for k, dist in enumerate(regimes):
        mask = regime == k
        if np.any(mask):
            xi[mask] = dist.sample_from_uniforms(u[mask])
            m2[mask] = dist._m2_cached
    new_state = kernel.batch_advance(step, batch_state, xi, regime)
    return xi, m2, new_state


def _simulate_chunk(kernel, key, start, count, collect, p, moment_orders):
    """Streaming chunk simulation; returns per-chunk accumulators."""
    n = kernel.n
    ctr_base = rng.path_counter_base(np.arange(start, start + count, dtype=np.uint64))
    X = np.zeros(count)
    V = np.zeros(count)
    max_abs = np.zeros(count) if ("max_inc" in collect) else None
    total_2p = np.zeros(count) if ("sum_inc" in collect) else None
    inc_rows = np.empty((count, n)) if ("increments" in collect) else None
    var_rows = np.zeros((count, n + 1)) if ("increments" in collect) else None
    mom_rows = {t: np.empty((count, n)) for t in moment_orders}
    state = kernel.batch_init(count)
    for step in range(1, n + 1):
        u = rng.uniforms_at(key, ctr_base, step - 1)
        regimes = kernel.step_regimes(step)
        regime = kernel.batch_regime(step, state)
        for t in moment_orders:
            if regime is None or len(regimes) == 1:
                mom_rows[t][:, step - 1] = regimes[0].moment(t)
            else:
                vals = np.array([d.moment(t) for d in regimes])
                mom_rows[t][:, step - 1] = vals[regime]
        xi, m2, state = _batch_step(kernel, step, state, u)
        X += xi
        V += m2
        if inc_rows is not None:
            inc_rows[:, step - 1] = xi
            var_rows[:, step] = var_rows[:, step - 1] + m2
        if max_abs is not None:
            np.maximum(max_abs, np.abs(xi), out=max_abs)
        if total_2p is not None:
            total_2p += np.abs(xi) ** (2.0 * p)
    dev = np.abs(V - 1.0)
    out = {
        "terminal": X,
        "sum_var_dev_p": float(np.sum(dev**p)),
        "sum_var_dev_2p": float(np.sum(dev ** (2.0 * p))),
        "max_var_dev": float(np.max(dev)) if count else 0.0,
        "sum_max_inc_2p": float(np.sum(max_abs ** (2.0 * p))) if max_abs is not None else 0.0,
        "sum_total_inc_2p": float(np.sum(total_2p)) if total_2p is not None else 0.0,
    }
    if inc_rows is not None:
        out["increments"] = inc_rows
        out["variances"] = var_rows
        out["moments"] = mom_rows
    return out


def _chunks(count: int, chunk_size: int):
    start = 0
    while start < count:
        yield start, min(chunk_size, count - start)
        start += chunk_size


def _run_chunks(fn, pieces, threads: int):
    if threads <= 1:
        return [fn(*piece) for piece in pieces]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, *piece) for piece in pieces]
        return [f.result() for f in futures]


def sample_paths(
    kernel: ConditionalKernel,
    seed: int,
    count: int,
    moment_orders: Sequence[float] = (),
    chunk_size: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> PathCollection:
    """Simulate ``count`` full paths.

    Deterministic in (kernel, seed, count) and independent of chunking and
    thread assignment: replicate j always consumes the words of its own
    counter stream.
    """
    if count < 1:
        raise KernelError("count must be >= 1")
    if count * kernel.n > BUNDLE_CELL_GUARD:
        raise KernelError(
            "bundle-mode simulation would exceed the memory guard; "
            "use sample_terminal for large runs"
        )
    if kernel.n >= rng.MAX_DRAWS_PER_PATH:
        raise KernelError("path length exceeds the per-path draw budget")
    key = rng.stream_key(seed, rng.STREAM_SIMULATION)
    collect = {"increments", "max_inc"}
    pieces = [
        (kernel, key, start, size, collect, 1.0, tuple(moment_orders))
        for start, size in _chunks(count, chunk_size)
    ]
    results = _run_chunks(_simulate_chunk, pieces, threads)
    increments = np.concatenate([r["increments"] for r in results], axis=0)
    variances = np.concatenate([r["variances"] for r in results], axis=0)
    sums = np.concatenate(
        [np.zeros((count, 1)), np.cumsum(increments, axis=1)], axis=1
    )
    moments = {
        t: np.concatenate([r["moments"][t] for r in results], axis=0)
        for t in moment_orders
    }
    return PathCollection(
        kernel_label=kernel.label,
        seed=int(seed),
        increments=increments,
        sums=sums,
        variances=variances,
        conditional_moments=moments,
    )


def sample_terminal(
    kernel: ConditionalKernel,
    seed: int,
    count: int,
    p: float = 1.0,
    with_sum_inc: bool = False,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> TerminalStatistics:
    """Streaming simulation: terminal samples and pooled moment statistics.

    Memory stays O(count + chunk * 1); increments are never materialized.
    """
    if count < 1:
        raise KernelError("count must be >= 1")
    if p < 1.0:
        raise KernelError("p must be >= 1")
    if kernel.n >= rng.MAX_DRAWS_PER_PATH:
        raise KernelError("path length exceeds the per-path draw budget")
    key = rng.stream_key(seed, rng.STREAM_SIMULATION)
    collect = {"max_inc"} | ({"sum_inc"} if with_sum_inc else set())
    pieces = [
        (kernel, key, start, size, collect, float(p), ())
        for start, size in _chunks(count, chunk_size)
    ]
    results = _run_chunks(_simulate_chunk, pieces, threads)
    return TerminalStatistics(
        p=float(p),
        count=count,
        terminal=np.concatenate([r["terminal"] for r in results]),
        sum_var_dev_p=math.fsum(r["sum_var_dev_p"] for r in results),
        sum_var_dev_2p=math.fsum(r["sum_var_dev_2p"] for r in results),
        sum_max_inc_2p=math.fsum(r["sum_max_inc_2p"] for r in results),
        sum_total_inc_2p=math.fsum(r["sum_total_inc_2p"] for r in results),
        max_var_dev=max(r["max_var_dev"] for r in results),
    )


def terminal_statistics(paths: PathCollection | Sequence[PathBundle], p: float) -> TerminalStatistics:
    """Terminal statistics of an existing collection (mergeable)."""
    if p < 1.0:
        raise KernelError("p must be >= 1")
    bundles = list(paths) if not isinstance(paths, PathCollection) else None
    if bundles is not None and not bundles:
        raise KernelError("empty collection")
    if isinstance(paths, PathCollection):
        if len(paths) == 0:
            raise KernelError("empty collection")
        terminal = paths.sums[:, -1].copy()
        dev = np.abs(paths.variances[:, -1] - 1.0)
        max_abs = np.max(np.abs(paths.increments), axis=1)
        total = np.sum(np.abs(paths.increments) ** (2.0 * p), axis=1)
    else:
        terminal = np.array([b.terminal for b in bundles])
        dev = np.abs(np.array([b.terminal_variance for b in bundles]) - 1.0)
        max_abs = np.array([np.max(np.abs(b.increments)) for b in bundles])
        total = np.array([np.sum(np.abs(b.increments) ** (2.0 * p)) for b in bundles])
    return TerminalStatistics(
        p=float(p),
        count=len(terminal),
        terminal=terminal,
        sum_var_dev_p=float(np.sum(dev**p)),
        sum_var_dev_2p=float(np.sum(dev ** (2.0 * p))),
        sum_max_inc_2p=float(np.sum(max_abs ** (2.0 * p))),
        sum_total_inc_2p=float(np.sum(total)),
        max_var_dev=float(np.max(dev)),
    )


# ---------------------------------------------------------------------------
# conditional moment oracles


def conditional_moment(
    kernel: ConditionalKernel, step: int, history: Sequence[float], t: float
) -> float:
    """E[|xi_step|^t | history], exact finite sum (exact-mode kernels)."""
    if t < 1.0:
        raise KernelError("moment order t must be >= 1")
    dist = kernel.law(step, history)
    reason = dist.check()
    if reason is not None:
        raise InvalidKernelError(step, history, reason)
    if dist.mode != "exact":
        raise KernelError(
            "kernel is sampled-mode at this step; use conditional_moment_sampled"
        )
    value = dist.moment(t)
    if not math.isfinite(value):
        raise KernelError(f"non-finite conditional moment at step {step}")
    return value


def conditional_moment_sampled(
    kernel: ConditionalKernel,
    step: int,
    history: Sequence[float],
    t: float,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo conditional moment with its standard error (sampled mode).

    Averages ``dist.budget`` inverse-CDF draws from a dedicated oracle stream.
    """
    if t < 1.0:
        raise KernelError("moment order t must be >= 1")
    dist = kernel.law(step, history)
    reason = dist.check()
    if reason is not None:
        raise InvalidKernelError(step, history, reason)
    if dist.mode == "exact":
        return dist.moment(t), 0.0
    key = rng.stream_key(seed, rng.STREAM_ORACLE)
    u = rng.uniforms(key, step, np.arange(dist.budget))
    draws = np.abs(dist.sampler(u)) ** t
    value = float(np.mean(draws))
    stderr = float(np.std(draws, ddof=1) / math.sqrt(dist.budget)) if dist.budget > 1 else math.inf
    return value, stderr
