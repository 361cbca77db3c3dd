"""Kolmogorov distance estimators and rate fitting."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mclt_lab import rng
from mclt_lab.distance import (
    KolmogorovEstimate,
    dkw_halfwidth,
    exact_kolmogorov_discrete,
    fit_rate,
    kolmogorov_distance,
    standard_normal_cdf,
)

PHI_1 = 0.8413447460685429  # Phi(1)


def test_normal_cdf_against_mpmath():
    import mpmath

    mpmath.mp.dps = 30
    for x in (-8.0, -3.5, -1.0, -0.1, 0.0, 0.1, 1.0, 2.5, 6.0, 8.5):
        exact = float(mpmath.ncdf(x))
        assert abs(float(standard_normal_cdf(x)) - exact) < 1e-15


def test_point_mass_at_zero():
    assert kolmogorov_distance([0.0]).d_hat == pytest.approx(0.5, abs=1e-15)
    assert exact_kolmogorov_discrete([0.0], [1.0]) == pytest.approx(0.5, abs=1e-15)


def test_two_point_sample():
    est = kolmogorov_distance([-1.0, 1.0])
    assert est.d_hat == pytest.approx(PHI_1 - 0.5, abs=1e-15)
    assert exact_kolmogorov_discrete([-1.0, 1.0], [0.5, 0.5]) == pytest.approx(
        PHI_1 - 0.5, abs=1e-15
    )


def test_shrinking_two_point_approaches_half():
    d = exact_kolmogorov_discrete([-1e-8, 1e-8], [0.5, 0.5])
    assert d == pytest.approx(0.5, abs=1e-6)


def test_dkw_band_formula():
    est = KolmogorovEstimate(d_hat=0.1, count=400, alpha=0.05)
    assert est.dkw_band == pytest.approx(math.sqrt(math.log(40.0) / 800.0), rel=1e-14)
    with pytest.raises(ValueError):
        dkw_halfwidth(0, 0.05)
    with pytest.raises(ValueError):
        dkw_halfwidth(10, 1.5)


def test_nonfinite_samples_rejected():
    with pytest.raises(ValueError):
        kolmogorov_distance([0.0, float("nan")])
    with pytest.raises(ValueError):
        kolmogorov_distance([float("inf")])


def test_invalid_discrete_laws_rejected():
    with pytest.raises(ValueError):
        exact_kolmogorov_discrete([0.0, 1.0], [0.5])
    with pytest.raises(ValueError):
        exact_kolmogorov_discrete([0.0, 1.0], [0.7, 0.6])
    with pytest.raises(ValueError):
        exact_kolmogorov_discrete([0.0, 1.0], [-0.1, 1.1])


def test_empirical_equals_exact_on_expanded_law():
    # integer multiplicities M*p_i turn the discrete law into a sample whose
    # empirical CDF is the law itself
    support = [-1.0, 0.0, 1.5]
    probs = [0.25, 0.5, 0.25]
    samples = [-1.0] + [0.0, 0.0] + [1.5]
    assert kolmogorov_distance(samples).d_hat == pytest.approx(
        exact_kolmogorov_discrete(support, probs), abs=1e-15
    )


def test_million_standard_normals_within_dkw():
    z = rng.normals(rng.stream_key(2024), np.arange(1_000_000), 0)
    est = kolmogorov_distance(z, alpha=0.01)
    assert est.d_hat <= 0.0017  # dkw band at alpha=0.01 is ~0.00163


def test_dkw_coverage_sanity():
    exceed = 0
    reps, m = 200, 10_000
    band = dkw_halfwidth(m, 0.1)
    key = rng.stream_key(515)
    for r in range(reps):
        z = rng.normals(key, np.arange(r * m, (r + 1) * m), 1)
        if kolmogorov_distance(z).d_hat > band:
            exceed += 1
    assert exceed / reps <= 0.15


def test_permutation_invariance_and_tail_perturbation():
    u = rng.uniforms(rng.stream_key(8), np.arange(500), 0)
    samples = 2.0 * u - 1.0
    base = kolmogorov_distance(samples).d_hat
    assert kolmogorov_distance(samples[::-1]).d_hat == base
    with_extreme = np.concatenate([samples, [1e9]])
    assert abs(kolmogorov_distance(with_extreme).d_hat - base) <= 1.0 / len(samples)


@settings(max_examples=40)
@given(
    data=st.lists(
        st.floats(min_value=-50.0, max_value=50.0, allow_nan=False),
        min_size=1,
        max_size=60,
    ),
    seed=st.integers(min_value=0, max_value=1000),
)
def test_distance_properties(data, seed):
    arr = np.asarray(data)
    est = kolmogorov_distance(arr)
    assert 0.0 <= est.d_hat <= 1.0
    perm = np.random.default_rng(seed).permutation(arr)
    assert kolmogorov_distance(perm).d_hat == est.d_hat
    bigger = kolmogorov_distance(np.concatenate([arr, [1e9]])).d_hat
    assert abs(bigger - est.d_hat) <= 1.0 / len(arr) + 1e-12


def test_fit_rate_exact_power_law():
    xs = [1.0, 2.0, 4.0, 8.0]
    pts = [(x, KolmogorovEstimate(0.01 * x**0.5, 10**9, 0.05)) for x in xs]
    fit = fit_rate(pts)
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_rate_reference_ratio_spread_one():
    xs = [0.3, 0.2, 0.1, 0.05]
    pts = [(x, KolmogorovEstimate(x * abs(math.log(x)), 10**9, 0.05)) for x in xs]
    fit = fit_rate(pts, reference=lambda e: e * abs(math.log(e)))
    assert fit.ratio_spread == pytest.approx(1.0, abs=1e-12)


def test_fit_rate_exclusions():
    pts = [
        (1.0, KolmogorovEstimate(0.5, 10**6, 0.05)),
        (2.0, KolmogorovEstimate(0.0, 10**6, 0.05)),  # log undefined
        (4.0, KolmogorovEstimate(0.25, 10**6, 0.05)),
        (8.0, KolmogorovEstimate(1e-9, 10**6, 0.05)),  # band swamps estimate
    ]
    fit = fit_rate(pts)
    assert len(fit.points) == 2
    assert len(fit.excluded) == 2
    assert any("d_hat = 0" in reason for reason in fit.excluded)
    assert any("DKW band" in reason for reason in fit.excluded)
    with pytest.raises(ValueError):
        fit_rate(pts[:2])
