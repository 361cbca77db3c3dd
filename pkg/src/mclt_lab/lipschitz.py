"""Doob decomposition of separately Lipschitz functionals of independent
coordinates, with exact conditional expectations by tensor enumeration.

A model is ``f(eta_1..eta_n)`` with independent finite-support coordinates
and per-coordinate metrics d1_i <= |coordinate change of f| <= d2_i.  The
martingale increments are ``xi_k = g_k - g_{k-1}`` with
``g_k = E[f | eta_1..eta_k]``; everything here is computed by contracting
the full value tensor of f against coordinate weights, so all conditional
expectations, moments and the variance are exact up to float summation.

The normalization pair reported by :func:`epsilon_delta_n` is::

    eps_n   = max_i (E[(E[d2_i(eta_i, eta_i') | eta_i])^rho])^(1/rho)
              / sqrt(sum_i E[(E[d1_i(eta_i, eta_i') | eta_i])^2])
    delta_n = | sum_i E[(E[d2_i | eta_i])^2]
              / sum_i E[(E[d1_i | eta_i])^2]  -  1 |

with eta' an independent copy of eta.  The variance sandwich
``sum_i E[(E[d1_i|eta_i])^2] <= Var f <= sum_i E[(E[d2_i|eta_i])^2]`` has a
sound upper half (conditional Jensen); the lower half can fail on valid
inputs (three-point coordinates already break it), so it is reported as a
diagnostic, never asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from . import rng

__all__ = [
    "CoordinateDistribution",
    "LipschitzModel",
    "DoobDecomposition",
    "doob_decompose",
    "doob_decompose_sampled",
    "EpsilonDelta",
    "epsilon_delta_n",
    "VarianceSandwich",
    "variance_sandwich",
    "verify_a1_lipschitz",
    "exact_distribution",
    "make_model",
    "model_from_config",
    "functional_sum",
    "functional_max",
    "functional_min",
    "abs_metric",
    "zero_metric",
    "discrete_metric",
    "MODEL_FAMILIES",
    "DegenerateMetricError",
    "EnumerationGuardExceeded",
]

ENUM_GUARD = 10_000_000
TOL = 1e-12


class EnumerationGuardExceeded(RuntimeError):
    pass


class DegenerateMetricError(ValueError):
    """The lower metrics are identically zero, so eps_n has no denominator."""


@dataclass(frozen=True)
class CoordinateDistribution:
    values: tuple[float, ...]
    probs: tuple[float, ...]

    def validate(self) -> None:
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("coordinate support and probabilities disagree")
        if any(p < 0.0 for p in self.probs):
            raise ValueError("negative coordinate probability")
        if abs(math.fsum(self.probs) - 1.0) > TOL:
            raise ValueError("coordinate probabilities do not sum to 1")


Metric = Callable[[float, float], float]


def abs_metric(scale: float = 1.0) -> Metric:
    def d(x: float, y: float) -> float:
        return scale * abs(x - y)

    return d


def zero_metric() -> Metric:
    return lambda x, y: 0.0


def discrete_metric(scale: float = 1.0) -> Metric:
    """``scale`` off the diagonal, 0 on it; dominates any function whose
    total spread is at most ``scale``."""

    def d(x: float, y: float) -> float:
        return 0.0 if x == y else scale

    return d


def functional_sum(weights: Sequence[float] | None = None):
    if weights is None:
        return lambda grid: np.sum(grid, axis=-1)
    w = np.asarray(weights, dtype=float)
    return lambda grid: grid @ w


def functional_max():
    return lambda grid: np.max(grid, axis=-1)


def functional_min():
    return lambda grid: np.min(grid, axis=-1)


@dataclass(frozen=True)
class LipschitzModel:
    """Coordinates, functional and two-sided coordinate metrics."""

    coords: tuple[CoordinateDistribution, ...]
    f: Callable[[np.ndarray], np.ndarray]  # (m, n) -> (m,)
    d1: tuple[Metric, ...]
    d2: tuple[Metric, ...]
    rho: float = 1.0
    label: str = "model"

    @property
    def n(self) -> int:
        return len(self.coords)

    def validate(self) -> None:
        if not self.coords:
            raise ValueError("model needs at least one coordinate")
        if not (len(self.d1) == len(self.d2) == self.n):
            raise ValueError("one metric pair per coordinate required")
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        for c in self.coords:
            c.validate()

    def check_metric_sandwich(self, max_pairs: int = 10_000) -> bool:
        """Spot-check d1 <= |coordinate change of f| <= d2 on support swaps.

        Full verification when the product space fits the guard; otherwise a
        deterministic subsample of swap pairs per coordinate.
        """
        enum = _enumeration(self)
        ok = True
        for i, coord in enumerate(self.coords):
            k = len(coord.values)
            # group outcomes by all-but-coordinate-i; within a group, f varies
            # only through coordinate i
            moved = np.moveaxis(enum.f_values, i, -1).reshape(-1, k)
            for a in range(k):
                for b in range(a + 1, k):
                    diff = np.abs(moved[:, a] - moved[:, b])
                    if diff.size > max_pairs:
                        step = diff.size // max_pairs + 1
                        diff = diff[::step]
                    lo = self.d1[i](coord.values[a], coord.values[b])
                    hi = self.d2[i](coord.values[a], coord.values[b])
                    if np.any(diff < lo - TOL) or np.any(diff > hi + TOL):
                        ok = False
        return ok


@dataclass(frozen=True)
class _Enumeration:
    dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    f_values: np.ndarray  # tensor of f over the product space
    g_tensors: tuple[np.ndarray, ...]  # g_0 (scalar) .. g_n (= f tensor)
    outcomes: np.ndarray | None = None

    @property
    def mean(self) -> float:
        return float(self.g_tensors[0])


def _enumeration(model: LipschitzModel) -> _Enumeration:
    model.validate()
    dims = tuple(len(c.values) for c in model.coords)
    size = 1
    for d in dims:
        size *= d
        if size > ENUM_GUARD:
            raise EnumerationGuardExceeded(
                f"product support size exceeds {ENUM_GUARD}; use the sampled path"
            )
    axes = [np.asarray(c.values, dtype=float) for c in model.coords]
    grids = np.meshgrid(*axes, indexing="ij")
    outcomes = np.stack([g.reshape(-1) for g in grids], axis=-1)
    f_values = np.asarray(model.f(outcomes), dtype=float).reshape(dims)
    if not np.all(np.isfinite(f_values)):
        raise ValueError("functional produced non-finite values")
    weights = tuple(np.asarray(c.probs, dtype=float) for c in model.coords)
    g_tensors: list[np.ndarray] = [f_values]
    g = f_values
    for k in range(model.n - 1, -1, -1):
        g = np.tensordot(g, weights[k], axes=([k], [0]))
        g_tensors.append(g)
    g_tensors.reverse()  # g_tensors[k] has shape dims[:k]
    return _Enumeration(
        dims=dims,
        weights=weights,
        f_values=f_values,
        g_tensors=tuple(g_tensors),
        outcomes=outcomes,
    )


@dataclass(frozen=True)
class DoobDecomposition:
    """Martingale increments of f - E f along one realization."""

    increments: tuple[float, ...]
    centered_value: float  # f(realization) - E f
    conditional_values: tuple[float, ...]  # g_0..g_n along the realization
    standard_errors: tuple[float, ...] = field(default_factory=tuple)

    @property
    def telescoping_defect(self) -> float:
        return abs(math.fsum(self.increments) - self.centered_value)


def _coordinate_indexes(model: LipschitzModel, realization: Sequence[float]) -> list[int]:
    if len(realization) != model.n:
        raise ValueError("realization length does not match the coordinate count")
    idx = []
    for value, coord in zip(realization, model.coords):
        try:
            idx.append(coord.values.index(float(value)))
        except ValueError:
            raise ValueError(f"value {value!r} is not in the coordinate support") from None
    return idx


def doob_decompose(model: LipschitzModel, realization: Sequence[float]) -> DoobDecomposition:
    """Exact increments g_k - g_{k-1} along a realization (tensor contraction)."""
    enum = _enumeration(model)
    idx = _coordinate_indexes(model, realization)
    g_along = [float(enum.g_tensors[0])]
    for k in range(1, model.n + 1):
        g_along.append(float(enum.g_tensors[k][tuple(idx[:k])]))
    increments = tuple(g_along[k] - g_along[k - 1] for k in range(1, model.n + 1))
    return DoobDecomposition(
        increments=increments,
        centered_value=g_along[-1] - g_along[0],
        conditional_values=tuple(g_along),
    )


def doob_decompose_sampled(
    model: LipschitzModel,
    realization: Sequence[float],
    budget: int,
    seed: int = 0,
) -> DoobDecomposition:
    """Nested Monte Carlo decomposition for models beyond the guard.

    Each g_k is estimated by ``budget`` suffix draws; increment standard
    errors combine the two adjacent estimates in quadrature.
    """
    model.validate()
    if budget < 2:
        raise ValueError("budget must be >= 2")
    realization = [float(v) for v in realization]
    key = rng.stream_key(seed, rng.STREAM_ORACLE)
    n = model.n
    g_hat = np.empty(n + 1)
    g_se = np.empty(n + 1)
    for k in range(n + 1):
        draws = np.empty((budget, n))
        draws[:, :k] = np.asarray(realization[:k])
        for j in range(k, n):
            u = rng.uniforms(key, k * (n + 1) + j, np.arange(budget))
            coord = model.coords[j]
            cum = np.cumsum(coord.probs)
            pick = np.searchsorted(cum, u, side="right")
            pick = np.minimum(pick, len(coord.values) - 1)
            draws[:, j] = np.asarray(coord.values)[pick]
        values = np.asarray(model.f(draws), dtype=float)
        g_hat[k] = values.mean()
        g_se[k] = values.std(ddof=1) / math.sqrt(budget) if k < n else 0.0
    increments = tuple(float(g_hat[k] - g_hat[k - 1]) for k in range(1, n + 1))
    ses = tuple(
        float(math.hypot(g_se[k], g_se[k - 1])) for k in range(1, n + 1)
    )
    return DoobDecomposition(
        increments=increments,
        centered_value=float(g_hat[-1] - g_hat[0]),
        conditional_values=tuple(g_hat.tolist()),
        standard_errors=ses,
    )


# ---------------------------------------------------------------------------
# normalization quantities


def _inner_metric_means(coord: CoordinateDistribution, metric: Metric) -> np.ndarray:
    """E[d(x, eta')] for each support point x (eta' an independent copy)."""
    vals = coord.values
    probs = coord.probs
    return np.array(
        [math.fsum(p * metric(x, y) for y, p in zip(vals, probs)) for x in vals]
    )


@dataclass(frozen=True)
class EpsilonDelta:
    epsilon_n: float
    delta_n: float
    numerator: float
    denominator_sq: float


def epsilon_delta_n(model: LipschitzModel) -> EpsilonDelta:
    """The normalization pair (eps_n, delta_n) of the model, exact."""
    model.validate()
    num_terms = []
    d1_sq_sum = []
    d2_sq_sum = []
    for coord, m1, m2 in zip(model.coords, model.d1, model.d2):
        probs = np.asarray(coord.probs)
        inner1 = _inner_metric_means(coord, m1)
        inner2 = _inner_metric_means(coord, m2)
        num_terms.append(float(np.sum(probs * inner2**model.rho)) ** (1.0 / model.rho))
        d1_sq_sum.append(float(np.sum(probs * inner1**2)))
        d2_sq_sum.append(float(np.sum(probs * inner2**2)))
    denom_sq = math.fsum(d1_sq_sum)
    if denom_sq <= 0.0:
        raise DegenerateMetricError("lower metrics are identically zero")
    epsilon_n = max(num_terms) / math.sqrt(denom_sq)
    upper_sq = math.fsum(d2_sq_sum)
    delta_n = abs(upper_sq / denom_sq - 1.0)
    return EpsilonDelta(
        epsilon_n=float(epsilon_n),
        delta_n=float(delta_n),
        numerator=float(max(num_terms)),
        denominator_sq=float(denom_sq),
    )


@dataclass(frozen=True)
class VarianceSandwich:
    lower: float
    variance: float
    upper: float
    upper_holds: bool  # must be true for valid d2; asserted by callers
    lower_holds: bool  # diagnostic only: fails on valid inputs


def variance_sandwich(model: LipschitzModel) -> VarianceSandwich:
    """Exact Var(f) against the metric sums; the lower bound is a diagnostic."""
    enum = _enumeration(model)
    centered = enum.f_values - enum.mean
    probs_tensor = reduce(np.multiply.outer, enum.weights)
    variance = float(np.sum(probs_tensor * centered**2))
    lower = 0.0
    upper = 0.0
    for coord, m1, m2 in zip(model.coords, model.d1, model.d2):
        probs = np.asarray(coord.probs)
        lower += float(np.sum(probs * _inner_metric_means(coord, m1) ** 2))
        upper += float(np.sum(probs * _inner_metric_means(coord, m2) ** 2))
    return VarianceSandwich(
        lower=lower,
        variance=variance,
        upper=upper,
        upper_holds=variance <= upper + TOL,
        lower_holds=lower <= variance + TOL,
    )


def verify_a1_lipschitz(model: LipschitzModel) -> list[dict]:
    """Per-step check of the moment-domination transfer.

    For every step i and prefix history, verifies
    ``E[|xi_i|^(2+rho) | prefix] <= E[(E[d2_i|eta_i])^rho] * E[xi_i^2 | prefix]``
    within 1e-12; degenerate prefixes (zero conditional variance) pass
    vacuously.
    """
    enum = _enumeration(model)
    rho = model.rho
    report = []
    for i in range(1, model.n + 1):
        g_i = enum.g_tensors[i]  # shape dims[:i]
        g_prev = enum.g_tensors[i - 1]  # shape dims[:i-1]
        xi = g_i - g_prev[..., None]
        w = enum.weights[i - 1]
        lhs = np.tensordot(np.abs(xi) ** (2.0 + rho), w, axes=([i - 1], [0]))
        m2 = np.tensordot(xi**2, w, axes=([i - 1], [0]))
        coord = model.coords[i - 1]
        factor = float(
            np.sum(np.asarray(coord.probs) * _inner_metric_means(coord, model.d2[i - 1]) ** rho)
        )
        rhs = factor * m2
        slack = rhs - lhs
        nontrivial = m2 > 0.0
        holds = bool(np.all(lhs <= rhs + TOL * np.maximum(rhs, 1.0)))
        equality = bool(
            np.all(np.abs(slack[nontrivial]) <= TOL * np.maximum(rhs[nontrivial], 1.0))
        ) if np.any(nontrivial) else True
        report.append(
            {
                "step": i,
                "holds": holds,
                "vacuous": not bool(np.any(nontrivial)),
                "equality": equality,
                "max_lhs_minus_rhs": float(np.max(lhs - rhs)) if lhs.size else 0.0,
            }
        )
    return report


def exact_distribution(model: LipschitzModel, normalized: bool = True):
    """Support and probabilities of (f - E f), optionally variance-normalized."""
    enum = _enumeration(model)
    probs_tensor = reduce(np.multiply.outer, enum.weights).reshape(-1)
    centered = (enum.f_values - enum.mean).reshape(-1)
    if normalized:
        var = float(np.sum(probs_tensor * centered**2))
        if var <= 0.0:
            raise ValueError("degenerate functional: zero variance")
        centered = centered / math.sqrt(var)
    return centered, probs_tensor


# ---------------------------------------------------------------------------
# model registry


def _rademacher_average(n: int, rho: float = 1.0) -> LipschitzModel:
    scale = 1.0 / math.sqrt(n)
    coord = CoordinateDistribution(values=(-1.0, 1.0), probs=(0.5, 0.5))
    metric = abs_metric(scale)
    return LipschitzModel(
        coords=(coord,) * n,
        f=functional_sum([scale] * n),
        d1=(metric,) * n,
        d2=(metric,) * n,
        rho=rho,
        label=f"rademacher_average(n={n})",
    )


def _max_of_bits(n: int, rho: float = 1.0) -> LipschitzModel:
    coord = CoordinateDistribution(values=(0.0, 1.0), probs=(0.5, 0.5))
    return LipschitzModel(
        coords=(coord,) * n,
        f=functional_max(),
        d1=(zero_metric(),) * n,
        d2=(abs_metric(),) * n,
        rho=rho,
        label=f"max_of_bits(n={n})",
    )


def _uniform_triple_sum(n: int, rho: float = 1.0) -> LipschitzModel:
    third = 1.0 / 3.0
    coord = CoordinateDistribution(values=(0.0, 1.0, 2.0), probs=(third, third, third))
    metric = abs_metric()
    return LipschitzModel(
        coords=(coord,) * n,
        f=functional_sum(),
        d1=(metric,) * n,
        d2=(metric,) * n,
        rho=rho,
        label=f"uniform_triple_sum(n={n})",
    )


MODEL_FAMILIES = {
    "rademacher_average": _rademacher_average,
    "max_of_bits": _max_of_bits,
    "uniform_triple_sum": _uniform_triple_sum,
}


def make_model(name: str, **params) -> LipschitzModel:
    try:
        family = MODEL_FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown model family {name!r}") from None
    return family(**params)


def _metric_from_config(spec: dict, n: int) -> tuple[Metric, ...]:
    kind = spec.get("kind", "abs_diff")
    if kind == "zero":
        return (zero_metric(),) * n
    if kind == "abs_diff":
        if "scales" in spec:
            scales = [float(s) for s in spec["scales"]]
            if len(scales) != n:
                raise ValueError("metric scales must match the coordinate count")
            return tuple(abs_metric(s) for s in scales)
        return (abs_metric(float(spec.get("scale", 1.0))),) * n
    raise ValueError(f"unknown metric kind {kind!r}")


def model_from_config(ref: dict) -> LipschitzModel:
    """Build a model from a config reference.

    Either ``{"name": ..., "params": {...}}`` for a registry family, or the
    expression form with ``coords`` (tabulated distributions), ``f`` (sum /
    weighted_sum / max / min) and ``metrics`` ({"d1": ..., "d2": ...}).
    """
    if "name" in ref:
        return make_model(ref["name"], **ref.get("params", {}))
    coords = tuple(
        CoordinateDistribution(
            values=tuple(float(v) for v in c["values"]),
            probs=tuple(float(p) for p in c["probs"]),
        )
        for c in ref["coords"]
    )
    n = len(coords)
    f_spec = ref["f"]
    kind = f_spec["kind"]
    if kind == "sum":
        f = functional_sum()
    elif kind == "weighted_sum":
        f = functional_sum([float(w) for w in f_spec["weights"]])
    elif kind == "max":
        f = functional_max()
    elif kind == "min":
        f = functional_min()
    else:
        raise ValueError(f"unknown functional kind {kind!r}")
    metrics = ref.get("metrics", {})
    d2 = _metric_from_config(metrics.get("d2", {"kind": "abs_diff"}), n)
    d1 = _metric_from_config(metrics.get("d1", metrics.get("d2", {"kind": "abs_diff"})), n)
    return LipschitzModel(
        coords=coords,
        f=f,
        d1=d1,
        d2=d2,
        rho=float(ref.get("rho", 1.0)),
        label=ref.get("label", "config_model"),
    )
