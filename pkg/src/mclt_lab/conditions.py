"""Moment-condition certification and the constant-free moment lemma checks.

Two conditions are certified for a kernel:

* moment domination: the smallest eps such that
  ``E[|xi_i|^(2+rho) | F] <= eps^rho E[xi_i^2 | F]`` holds at every step and
  every reachable history (the per-step ratio ``(m_{2+rho}/m_2)^(1/rho)``,
  with the 0/0 case counting as 0);
* terminal variance proximity: the smallest delta with
  ``|<X>_n - 1| <= delta^2`` over reachable histories.

Certified reports walk the full reachable history tree, deduplicating
histories through the kernel's declared Markov summary; estimated reports
evaluate the same exact ratios along simulated histories and are therefore
lower bounds on the true sup.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernels import (
    ConditionalKernel,
    InvalidKernelError,
    KernelError,
    StepDistribution,
    sample_paths,
)

__all__ = [
    "ConditionReport",
    "SimulatedHistories",
    "EXHAUSTIVE",
    "minimal_epsilon",
    "minimal_delta",
    "certify",
    "MomentLemmaReport",
    "verify_moment_lemmas",
    "check_bernstein",
    "WalkGuardExceeded",
]

NODE_GUARD = 10_000_000
RANGE_LIMIT = 0.5  # the conditions are stated for eps, delta in (0, 1/2]

EXHAUSTIVE = "exhaustive"


class WalkGuardExceeded(RuntimeError):
    """The reachable history tree is too large for exhaustive certification."""


@dataclass(frozen=True)
class SimulatedHistories:
    """History source that samples paths instead of enumerating them."""

    seed: int
    count: int


@dataclass(frozen=True)
class ConditionReport:
    """Certified or estimated (epsilon, delta) for one kernel.

    ``mode`` is "certified" only when every reachable history was examined;
    simulated sources yield "estimated" reports, which lower-bound the sup.
    ``per_step`` carries the worst per-step ratio seen (already raised to the
    1/rho power for the epsilon part).
    """

    rho: float | None
    epsilon: float | None
    delta: float | None
    mode: str
    per_step: tuple[dict, ...] = field(default_factory=tuple)
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def out_of_range(self) -> bool:
        eps_bad = self.epsilon is not None and self.epsilon > RANGE_LIMIT
        delta_bad = self.delta is not None and self.delta > RANGE_LIMIT
        return eps_bad or delta_bad

    def to_json(self) -> str:
        doc = {
            "rho": self.rho,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "mode": self.mode,
            "per_step": list(self.per_step),
            "out_of_range": self.out_of_range,
            "notes": list(self.notes),
        }
        return json.dumps(doc, sort_keys=True)


def _checked_law(kernel, step, state) -> StepDistribution:
    dist = kernel.law_from_state(step, state)
    reason = dist.check()
    if reason is not None:
        raise InvalidKernelError(step, (), reason)
    if dist.mode != "exact":
        raise KernelError("exhaustive certification requires an exact-mode kernel")
    return dist


def _ratio(dist: StepDistribution, rho: float) -> float:
    m2 = dist.moment(2)
    if m2 == 0.0:
        return 0.0  # degenerate step: the condition is vacuous
    value = dist.moment(2.0 + rho) / m2
    if not math.isfinite(value):
        raise KernelError("non-finite conditional moment ratio")
    return value


def _walk_epsilon(kernel: ConditionalKernel, rho: float) -> list[float]:
    """Worst per-step ratio over all reachable histories (state-deduplicated)."""
    per_step = [0.0] * kernel.n
    level = {kernel.state_key(kernel.initial_state()): kernel.initial_state()}
    nodes = 0
    for step in range(1, kernel.n + 1):
        nxt: dict = {}
        for state in level.values():
            dist = _checked_law(kernel, step, state)
            per_step[step - 1] = max(per_step[step - 1], _ratio(dist, rho))
            if step == kernel.n:
                continue
            for value, p in zip(dist.values, dist.probs):
                if p == 0.0:
                    continue
                child = kernel.transition(state, value)
                key = kernel.state_key(child)
                if key not in nxt:
                    nxt[key] = child
                    nodes += 1
                    if nodes > NODE_GUARD:
                        raise WalkGuardExceeded(
                            f"history walk exceeded {NODE_GUARD} nodes at step {step}"
                        )
        if step < kernel.n:
            level = nxt
    return per_step


def _walk_delta(kernel: ConditionalKernel) -> float:
    """Sup over reachable histories of |<X>_n - 1| (state+variance dedup)."""
    init = kernel.initial_state()
    level = {(kernel.state_key(init), 0.0): (init, 0.0)}
    nodes = 0
    for step in range(1, kernel.n + 1):
        nxt: dict = {}
        for state, acc in level.values():
            dist = _checked_law(kernel, step, state)
            new_acc = acc + dist.moment(2)
            for value, p in zip(dist.values, dist.probs):
                if p == 0.0:
                    continue
                child = kernel.transition(state, value)
                key = (kernel.state_key(child), round(new_acc, 14))
                if key not in nxt:
                    nxt[key] = (child, new_acc)
                    nodes += 1
                    if nodes > NODE_GUARD:
                        raise WalkGuardExceeded(
                            f"history walk exceeded {NODE_GUARD} nodes at step {step}"
                        )
        level = nxt
    return max(abs(acc - 1.0) for _, acc in level.values())


def _simulated_ratios(kernel, rho, source: SimulatedHistories):
    paths = sample_paths(
        kernel, source.seed, source.count, moment_orders=(2.0, 2.0 + rho)
    )
    m2 = paths.conditional_moments[2.0]
    mr = paths.conditional_moments[2.0 + rho]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(m2 > 0.0, mr / np.where(m2 > 0.0, m2, 1.0), 0.0)
    per_step = ratios.max(axis=0)
    devs = np.abs(paths.variances[:, -1] - 1.0)
    return per_step.tolist(), float(devs.max())


def minimal_epsilon(
    kernel: ConditionalKernel,
    rho: float,
    histories: str | SimulatedHistories = EXHAUSTIVE,
) -> ConditionReport:
    """Smallest eps satisfying the moment-domination condition at this rho."""
    if rho <= 0.0:
        raise KernelError("rho must be positive")
    if histories == EXHAUSTIVE:
        per_step_ratio = _walk_epsilon(kernel, rho)
        mode = "certified"
        notes: tuple[str, ...] = ()
    else:
        per_step_ratio, _ = _simulated_ratios(kernel, rho, histories)
        mode = "estimated"
        notes = ("estimate (lower bound on sup): histories were sampled",)
    per_step_eps = [r ** (1.0 / rho) for r in per_step_ratio]
    epsilon = max(per_step_eps) if per_step_eps else 0.0
    table = tuple(
        {"step": i + 1, "epsilon": e} for i, e in enumerate(per_step_eps)
    )
    if epsilon > RANGE_LIMIT:
        notes = notes + (f"epsilon {epsilon} exceeds the stated range (0, {RANGE_LIMIT}]",)
    return ConditionReport(
        rho=float(rho), epsilon=float(epsilon), delta=None, mode=mode,
        per_step=table, notes=notes,
    )


def minimal_delta(
    kernel: ConditionalKernel,
    histories: str | SimulatedHistories = EXHAUSTIVE,
) -> ConditionReport:
    """Smallest delta with |<X>_n - 1| <= delta^2 over examined histories."""
    if histories == EXHAUSTIVE:
        dev = _walk_delta(kernel)
        mode = "certified"
        notes: tuple[str, ...] = ()
    else:
        _, dev = _simulated_ratios(kernel, 1.0, histories)
        mode = "estimated"
        notes = ("estimate (lower bound on sup): histories were sampled",)
    if dev < 1e-12:
        # summation dust on kernels whose variance path is constant 1; the
        # square root would otherwise inflate ~1e-16 into delta ~ 1e-8
        dev = 0.0
    delta = math.sqrt(dev)
    if delta > RANGE_LIMIT:
        notes = notes + (f"delta {delta} exceeds the stated range (0, {RANGE_LIMIT}]",)
    return ConditionReport(
        rho=None, epsilon=None, delta=float(delta), mode=mode, notes=notes,
    )


def certify(
    kernel: ConditionalKernel,
    rho: float,
    histories: str | SimulatedHistories = EXHAUSTIVE,
) -> ConditionReport:
    """Joint (epsilon, delta) report from one history source."""
    eps = minimal_epsilon(kernel, rho, histories)
    dlt = minimal_delta(kernel, histories)
    return ConditionReport(
        rho=eps.rho,
        epsilon=eps.epsilon,
        delta=dlt.delta,
        mode=eps.mode,
        per_step=eps.per_step,
        notes=eps.notes + dlt.notes,
    )


# ---------------------------------------------------------------------------
# moment lemmas (exact, constant-free)

REL_TOL = 1e-12


@dataclass(frozen=True)
class MomentLemmaReport:
    """Moment interpolation and variance cap checks for one distribution.

    With ``eps = (m_s / m_2)^(1/(s-2))`` (the smallest eps satisfying the
    s-moment hypothesis), interpolation asserts ``m_t <= eps^(t-2) m_2`` for
    each requested t in [2, s), and the variance cap asserts ``m_2 <= eps^2``.
    """

    s: float
    epsilon: float
    vacuous: bool
    interpolation: tuple[dict, ...]
    variance_cap: dict
    all_hold: bool


def verify_moment_lemmas(
    dist: StepDistribution,
    s: float,
    t_grid: Sequence[float],
    epsilon: float | None = None,
) -> MomentLemmaReport:
    """Check the interpolation and variance-cap implications on one law.

    ``epsilon`` defaults to the minimal value allowed by the s-moment
    hypothesis; a user-supplied larger value only weakens the conclusions.
    """
    if s <= 2.0:
        raise ValueError("the hypothesis needs s > 2")
    if any(t < 2.0 or t >= s for t in t_grid):
        raise ValueError("t grid must lie in [2, s)")
    if dist.mode != "exact":
        raise ValueError("exact-mode distribution required")
    m2 = dist.moment(2)
    if m2 == 0.0:
        return MomentLemmaReport(
            s=float(s), epsilon=0.0, vacuous=True, interpolation=(),
            variance_cap={"m2": 0.0, "bound": 0.0, "holds": True}, all_hold=True,
        )
    eps = (dist.moment(s) / m2) ** (1.0 / (s - 2.0)) if epsilon is None else float(epsilon)
    rows = []
    ok = True
    for t in t_grid:
        mt = dist.moment(t)
        bound = eps ** (t - 2.0) * m2
        holds = mt <= bound * (1.0 + REL_TOL)
        ok = ok and holds
        rows.append({"t": float(t), "moment": mt, "bound": bound, "holds": holds})
    cap_bound = eps * eps
    cap_holds = m2 <= cap_bound * (1.0 + REL_TOL)
    ok = ok and cap_holds
    return MomentLemmaReport(
        s=float(s),
        epsilon=eps,
        vacuous=False,
        interpolation=tuple(rows),
        variance_cap={"m2": m2, "bound": cap_bound, "holds": cap_holds},
        all_hold=ok,
    )


def check_bernstein(
    dist: StepDistribution, epsilon: float, k_max: int
) -> tuple[bool, int | None]:
    """Check ``|E[xi^k]| <= k!/2 eps^(k-2) E[xi^2]`` for 3 <= k <= k_max.

    Returns (all hold, first violated k or None).  k_max is capped at 20;
    factorials are exact integers and moment sums use compensated summation.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if not 3 <= k_max <= 20:
        raise ValueError("k_max must lie in [3, 20]")
    if dist.mode != "exact":
        raise ValueError("exact-mode distribution required")
    m2 = dist.moment(2)
    for k in range(3, k_max + 1):
        lhs = abs(dist.signed_moment(k))
        rhs = 0.5 * math.factorial(k) * epsilon ** (k - 2) * m2
        if lhs > rhs * (1.0 + REL_TOL):
            return False, k
    return True, None
