"""Unit-variance padding and stopping-rule constructions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mclt_lab as m
from mclt_lab.kernels import PathBundle, sample_paths
from mclt_lab.transforms import (
    INF_GE_1,
    SUP_LE_1,
    pad_collection,
    pad_to_unit_variance,
    padding_ratio_report,
    restrict_to_v,
    stop_time_v,
)


def _bundle_from_variances(variances, increments=None):
    variances = np.asarray(variances, dtype=float)
    if increments is None:
        increments = np.sqrt(np.diff(variances))  # one +sigma path
    increments = np.asarray(increments, dtype=float)
    return PathBundle(
        increments=increments,
        sums=np.concatenate([[0.0], np.cumsum(increments)]),
        variances=variances,
    )


def test_pad_worked_example():
    # variance 0.9 after three steps, eps = 0.2: two eps pads plus a residual
    b = _bundle_from_variances([0.0, 0.3, 0.6, 0.9])
    p = pad_to_unit_variance(b, epsilon=0.2, seed=5)
    assert p.tau == 3
    assert p.pad_count == 2
    assert p.residual == pytest.approx(math.sqrt(0.02), abs=1e-12)
    assert p.residual == pytest.approx(0.141421, abs=1e-6)
    assert abs(p.terminal_variance - 1.0) <= 1e-9
    assert p.total_length == 3 + math.floor(1.0 / 0.2**2) + 1


def test_pad_already_normalized_path_is_identity_plus_zeros():
    k = m.make_kernel("iid_rademacher", n=16)
    paths = sample_paths(k, seed=2, count=5)
    for i, b in enumerate(paths):
        p = pad_to_unit_variance(b, epsilon=0.25, seed=9, path_index=i)
        assert p.tau == 16
        assert p.pad_count == 0
        assert p.residual == 0.0
        assert np.array_equal(p.increments[:16], b.increments)
        assert np.all(p.increments[16:] == 0.0)
        assert p.terminal == pytest.approx(b.terminal, abs=0.0)
        assert p.terminal_variance == pytest.approx(1.0, abs=1e-12)


def test_padding_epsilon_range_enforced():
    b = _bundle_from_variances([0.0, 0.5])
    for eps in (0.0, -0.1, 0.6):
        with pytest.raises(ValueError):
            pad_to_unit_variance(b, epsilon=eps, seed=1)


def test_residual_stays_below_epsilon():
    b = _bundle_from_variances([0.0, 0.37, 0.81])
    p = pad_to_unit_variance(b, epsilon=0.17, seed=3)
    assert 0.0 <= p.residual <= 0.17
    assert abs(p.terminal_variance - 1.0) <= 1e-9


def test_padded_ratio_equality_and_slack():
    d, n = 0.2, 64
    k = m.make_kernel("variance_drift", n=n, d=d)
    eps = k.certified_epsilon(1.0)
    paths = sample_paths(k, seed=13, count=50)
    padded = pad_collection(paths, eps, seed=13)
    for p in padded:
        report = padding_ratio_report(p, rho=1.0)
        assert report["holds"]
        # the kept high-variance steps and the eps pads sit exactly at the bound
        assert report["worst_ratio"] <= 1.0 + 1e-12
        if p.pad_count > 0:
            assert report["equality_steps"] >= p.pad_count


def test_padding_ratio_flags_undersized_epsilon():
    b = _bundle_from_variances([0.0, 0.3, 0.6, 0.9])  # step std ~ 0.55
    p = pad_to_unit_variance(b, epsilon=0.2, seed=5)
    report = padding_ratio_report(p, rho=1.0)
    assert not report["holds"]


def test_padding_signs_are_mean_zero():
    b = _bundle_from_variances([0.0, 0.25])  # needs r = 12 pads at eps = 0.25
    values = []
    for i in range(4000):
        p = pad_to_unit_variance(b, epsilon=0.25, seed=77, path_index=i)
        values.append(p.increments[1])
    mean = np.mean(values)
    assert abs(mean) < 4 * 0.25 / math.sqrt(len(values))


def test_terminal_unchanged_when_variance_complete():
    # <X>_n = 1 exactly: X'_N = X_n because padding contributes literal zeros
    k = m.make_kernel("iid_rademacher", n=64)
    paths = sample_paths(k, seed=5, count=10)
    for i, b in enumerate(paths):
        p = pad_to_unit_variance(b, epsilon=0.125, seed=1, path_index=i)
        assert p.terminal == b.terminal


@settings(max_examples=40)
@given(
    steps=st.lists(st.floats(min_value=1e-4, max_value=0.2), min_size=1, max_size=30),
    eps100=st.integers(min_value=5, max_value=50),
    seed=st.integers(min_value=0, max_value=10**6),
)
def test_padding_invariants_random_variance_paths(steps, eps100, seed):
    eps = eps100 / 100.0
    variances = np.concatenate([[0.0], np.cumsum(steps)])
    b = _bundle_from_variances(variances)
    p = pad_to_unit_variance(b, epsilon=eps, seed=seed)
    assert abs(p.terminal_variance - 1.0) <= 1e-9
    assert 0.0 <= p.residual <= eps
    assert p.pad_count <= math.floor(1.0 / eps**2)
    assert p.total_length == b.n + math.floor(1.0 / eps**2) + 1
    # increments beyond tau + r + 1 are literal zeros
    assert np.all(p.increments[p.tau + p.pad_count + 1 :] == 0.0)


def test_stop_time_examples():
    assert stop_time_v([0.0, 0.4, 0.8, 1.2], SUP_LE_1) == 2
    assert stop_time_v([0.0, 0.4, 0.8, 1.2], INF_GE_1) == 3
    n = 10
    linear = np.arange(n + 1) / n
    assert stop_time_v(linear, SUP_LE_1) == n
    assert stop_time_v(linear, INF_GE_1) == n
    below = np.arange(n + 1) / (2 * n)
    assert stop_time_v(below, SUP_LE_1) == n  # never exceeds 1
    assert stop_time_v(below, INF_GE_1) == n  # boundary convention
    with pytest.raises(ValueError):
        stop_time_v([0.0, 0.5, 0.4], SUP_LE_1)
    with pytest.raises(ValueError):
        stop_time_v([0.0, 0.5, 1.0], "nope")


def test_restrict_rademacher_is_identity():
    k = m.make_kernel("iid_rademacher", n=64)
    paths = sample_paths(k, seed=21, count=100)
    for variant in (SUP_LE_1, INF_GE_1):
        stopped = restrict_to_v(paths, variant)
        assert np.all(stopped.indices == 64)
        assert np.array_equal(stopped.terminal, paths.sums[:, -1])
        assert np.all(stopped.residuals == 0.0)
        assert not np.any(stopped.out_of_hypothesis)


def test_restrict_variance_drift_residual_bound():
    d, n = 0.2, 64
    k = m.make_kernel("variance_drift", n=n, d=d)
    paths = sample_paths(k, seed=3, count=400)
    eps_sq = k.certified_epsilon(1.0) ** 2  # equals the largest step variance
    for variant in (SUP_LE_1, INF_GE_1):
        stopped = restrict_to_v(paths, variant)
        flagged = stopped.out_of_hypothesis
        assert np.array_equal(flagged, paths.variances[:, -1] < 1.0)
        kept = stopped.residuals[~flagged]
        assert np.all(kept <= eps_sq + 1e-15)
