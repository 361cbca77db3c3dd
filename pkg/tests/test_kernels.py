"""Kernel registry, simulation determinism, and terminal statistics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mclt_lab as m
from mclt_lab import oracles
from mclt_lab.kernels import (
    InvalidKernelError,
    KernelError,
    StepDistribution,
    TableKernel,
    conditional_moment,
    conditional_moment_sampled,
    rademacher_two_point,
    sample_paths,
    sample_terminal,
    terminal_statistics,
)


def test_rademacher_paths_have_unit_terminal_variance():
    k = m.make_kernel("iid_rademacher", n=4)
    paths = sample_paths(k, seed=11, count=50)
    assert np.all(paths.variances[:, -1] == 1.0)
    # X_0 = 0 and the recurrence X_k = X_{k-1} + xi_k holds exactly
    assert np.all(paths.sums[:, 0] == 0.0)
    assert np.array_equal(paths.sums[:, 1:], np.cumsum(paths.increments, axis=1))


def test_invalid_probability_sum_rejected_with_step():
    bad = StepDistribution(values=(1.0, -1.0), probs=(0.6, 0.6))
    kernel = TableKernel([rademacher_two_point(0.5), bad])
    with pytest.raises(InvalidKernelError) as err:
        sample_paths(kernel, seed=1, count=3)
    assert err.value.step == 2
    assert "sum" in str(err.value)


def test_nonzero_mean_rejected():
    bad = StepDistribution(values=(1.0, 0.0), probs=(0.5, 0.5))
    kernel = TableKernel([bad])
    with pytest.raises(InvalidKernelError) as err:
        sample_paths(kernel, seed=1, count=3)
    assert "mean" in str(err.value)


def test_variance_drift_terminal_variance_band():
    k = m.make_kernel("variance_drift", n=64, d=0.2)
    paths = sample_paths(k, seed=7, count=1000)
    tv = paths.variances[:, -1]
    assert np.all(tv >= 0.8 - 1e-12)
    assert np.all(tv <= 1.2 + 1e-12)


def test_conditional_moment_examples():
    n = 16
    k = m.make_kernel("iid_rademacher", n=n)
    assert conditional_moment(k, 3, [], 3.0) == pytest.approx(n**-1.5, rel=1e-14)
    three = m.make_kernel("three_point", n=8, b=2.0, q=0.1)
    for t in (1.0, 2.0, 2.7, 4.0):
        assert conditional_moment(three, 1, [], t) == pytest.approx(0.1 * 2.0**t, rel=1e-14)
    two = m.make_kernel("two_point", n=4, a=0.3)
    assert conditional_moment(two, 2, [0.3], 2.0) == pytest.approx(0.09, rel=1e-14)
    with pytest.raises(KernelError):
        conditional_moment(k, 1, [], 0.5)


def test_conditional_moment_sampled_gaussian():
    k = m.make_kernel("iid_gaussian", n=4, budget=40_000)
    sigma = 0.5
    value, stderr = conditional_moment_sampled(k, 1, [], 2.0, seed=5)
    assert stderr > 0.0
    assert abs(value - sigma**2) < 4 * stderr + 1e-3
    # the declared oracle is exact
    dist = k.law(1, [])
    assert dist.moment(2.0) == pytest.approx(sigma**2, rel=1e-12)
    assert dist.moment(3.0) == pytest.approx(sigma**3 * 2 * math.sqrt(2 / math.pi), rel=1e-12)


def test_terminal_statistics_rademacher_exact():
    k = m.make_kernel("iid_rademacher", n=4)
    paths = sample_paths(k, seed=3, count=200)
    stats = terminal_statistics(paths, p=1.0)
    assert stats.mean_var_dev_p == 0.0
    assert stats.mean_max_inc_2p == 0.25  # (1/sqrt(4))^2 exactly
    assert stats.max_var_dev == 0.0


def test_terminal_statistics_p2():
    k = m.make_kernel("iid_rademacher", n=4)
    paths = sample_paths(k, seed=3, count=10)
    stats = terminal_statistics(paths, p=2.0)
    assert stats.mean_max_inc_2p == pytest.approx(0.0625, rel=1e-14)


def test_terminal_statistics_merge_matches_pooled():
    k = m.make_kernel("variance_drift", n=32, d=0.3)
    paths = sample_paths(k, seed=5, count=120)
    bundles = list(paths)
    pooled = terminal_statistics(bundles, p=2.0)
    merged = terminal_statistics(bundles[:47], p=2.0).merge(
        terminal_statistics(bundles[47:], p=2.0)
    )
    assert merged.count == pooled.count
    assert np.array_equal(merged.terminal, pooled.terminal)
    assert merged.sum_var_dev_p == pytest.approx(pooled.sum_var_dev_p, abs=1e-12)
    assert merged.sum_max_inc_2p == pytest.approx(pooled.sum_max_inc_2p, abs=1e-12)
    assert merged.max_var_dev == pooled.max_var_dev


def test_empty_collection_rejected():
    with pytest.raises(KernelError):
        terminal_statistics([], p=1.0)


def test_determinism_and_partition_independence():
    k = m.make_kernel("variance_drift", n=24, d=0.2)
    a = sample_paths(k, seed=9, count=100)
    b = sample_paths(k, seed=9, count=100, chunk_size=7)
    assert np.array_equal(a.increments, b.increments)
    assert np.array_equal(a.variances, b.variances)
    c = sample_paths(k, seed=9, count=100, threads=3, chunk_size=13)
    assert np.array_equal(a.increments, c.increments)
    # streaming terminal sampler: same per-path values regardless of threads
    s1 = sample_terminal(k, seed=9, count=100)
    s2 = sample_terminal(k, seed=9, count=100, threads=2, chunk_size=17)
    assert np.array_equal(s1.terminal, s2.terminal)
    assert s1.sum_var_dev_p == pytest.approx(s2.sum_var_dev_p, abs=1e-12)
    # and the streaming sampler agrees with the bundle path
    assert np.array_equal(s1.terminal, a.sums[:, -1])


def test_streaming_matches_bundle_statistics():
    k = m.make_kernel("three_point", n=20, b=0.4, q=0.3)
    paths = sample_paths(k, seed=21, count=500)
    pooled = terminal_statistics(paths, p=1.0)
    stream = sample_terminal(k, seed=21, count=500, p=1.0, with_sum_inc=True)
    assert np.array_equal(stream.terminal, pooled.terminal)
    assert stream.sum_var_dev_p == pytest.approx(pooled.sum_var_dev_p, abs=1e-12)
    assert stream.sum_max_inc_2p == pytest.approx(pooled.sum_max_inc_2p, abs=1e-12)
    assert stream.sum_total_inc_2p == pytest.approx(pooled.sum_total_inc_2p, abs=1e-12)


def test_variance_additivity_against_conditional_moments():
    k = m.make_kernel("variance_drift", n=12, d=0.4)
    paths = sample_paths(k, seed=2, count=20)
    for b in paths:
        acc = 0.0
        for step in range(1, k.n + 1):
            acc += conditional_moment(k, step, b.increments[: step - 1], 2.0)
        assert abs(acc - b.terminal_variance) < 1e-12


def test_batch_stepper_consistent_with_law():
    k = m.make_kernel("variance_drift", n=16, d=0.25)
    paths = sample_paths(k, seed=31, count=50)
    for b in list(paths)[:10]:
        for step in range(1, k.n + 1):
            dist = k.law(step, b.increments[: step - 1])
            assert b.increments[step - 1] in dist.values
            m2 = dist.moment(2)
            assert b.variances[step] - b.variances[step - 1] == pytest.approx(m2, abs=1e-15)


def test_iid_scaled_normalizes_variance():
    k = m.make_kernel("iid_scaled", n=9, values=[-2.0, 1.0], probs=[1.0 / 3.0, 2.0 / 3.0])
    dist = k.law(1, [])
    assert dist.moment(2) == pytest.approx(1.0 / 9.0, rel=1e-12)
    paths = sample_paths(k, seed=1, count=10)
    assert np.all(np.abs(paths.variances[:, -1] - 1.0) < 1e-12)


def test_variance_drift_exhaustive_oracle_matches_simulation():
    # exact small-n oracle first, Monte Carlo against it afterwards
    d, n = 0.2, 8
    k = m.make_kernel("variance_drift", n=n, d=d)
    exact = oracles.exact_terminal_moments(k, p=1.0)
    assert exact.leaves == 2**n
    stats = sample_terminal(k, seed=17, count=100_000, p=1.0)
    se = 0.25 * d / math.sqrt(stats.count)  # crude bound on the std of |dev|
    assert abs(stats.mean_var_dev_p - exact.mean_var_dev_p) < 5 * se
    assert 0.0 < stats.mean_var_dev_p <= d


def test_registry_rejects_bad_parameters():
    with pytest.raises(KernelError):
        m.make_kernel("three_point", n=4, b=-1.0, q=0.5)
    with pytest.raises(KernelError):
        m.make_kernel("three_point", n=4, b=1.0, q=1.5)
    with pytest.raises(KernelError):
        m.make_kernel("variance_drift", n=4, d=1.5)
    with pytest.raises(KernelError):
        m.make_kernel("nope", n=4)


@settings(max_examples=20)
@given(
    seed=st.integers(min_value=0, max_value=2**63),
    count=st.integers(min_value=1, max_value=40),
)
def test_two_runs_identical(seed, count):
    k = m.make_kernel("iid_rademacher", n=8)
    a = sample_paths(k, seed=seed, count=count)
    b = sample_paths(k, seed=seed, count=count)
    assert np.array_equal(a.increments, b.increments)


@settings(max_examples=20)
@given(split=st.integers(min_value=1, max_value=99))
def test_merge_associativity(split):
    k = m.make_kernel("variance_drift", n=16, d=0.3)
    paths = sample_paths(k, seed=4, count=100)
    bundles = list(paths)
    pooled = terminal_statistics(bundles, p=1.0)
    merged = terminal_statistics(bundles[:split], p=1.0).merge(
        terminal_statistics(bundles[split:], p=1.0)
    )
    assert merged.sum_var_dev_p == pytest.approx(pooled.sum_var_dev_p, abs=1e-12)
    assert merged.sum_max_inc_2p == pytest.approx(pooled.sum_max_inc_2p, abs=1e-12)


def test_law_is_pure():
    k = m.make_kernel("variance_drift", n=8, d=0.2)
    history = [k.high_mag, -k.high_mag, -k.low_mag]
    a = k.law(4, history)
    b = k.law(4, history)
    assert a.values == b.values and a.probs == b.probs


def test_sampled_mode_simulation_is_standard_normal():
    k = m.make_kernel("iid_gaussian", n=16)
    stats = sample_terminal(k, seed=55, count=50_000)
    # terminal law is exactly N(0, 1); the distance sits inside the DKW band
    from mclt_lab.distance import dkw_halfwidth, kolmogorov_distance

    est = kolmogorov_distance(stats.terminal, alpha=0.01)
    assert est.d_hat <= dkw_halfwidth(stats.count, 0.001)
    assert stats.mean_var_dev_p == 0.0  # declared variance is exactly 1/n
