import math

import numpy as np
import pytest
from scipy import stats

import orbitmatch as om
from orbitmatch.dynamics import (
    _skew_orbit_exact,
    beta_invariant_cdf,
    beta_invariant_density,
    fiber_at,
    lipschitz_constant,
    observe_orbit,
    step_many,
)
from orbitmatch.errors import DimensionMismatch, GaussAtZero, SelectorGap

PHI = (1 + math.sqrt(5)) / 2

# 1% two-sample KS critical value scale: c(0.01) * sqrt((m+n)/(m*n))
KS_C_001 = 1.628


def test_step_examples():
    assert om.step(om.MTimesMod1(2), 0.3) == pytest.approx(0.6)
    assert om.step(om.Gauss(), 0.5) == 0.0
    assert om.step(om.Beta(2.5), 0.5) == pytest.approx(0.25)


def test_step_piecewise_doubling_branches():
    # branch [1/2, 1): 2x - 1; branch [1/4, 1/2): 4x - 1
    assert om.step(om.PiecewiseDoubling(), 0.75) == pytest.approx(0.5)
    assert om.step(om.PiecewiseDoubling(), 0.3) == pytest.approx(0.2)
    assert om.step(om.PiecewiseDoubling(), 0.0) == 0.0


def test_step_validates_domain():
    with pytest.raises(DimensionMismatch):
        om.step(om.MTimesMod1(2), 1.5)
    with pytest.raises(GaussAtZero):
        om.step(om.Gauss(), 0.0)
    with pytest.raises(DimensionMismatch):
        om.step(om.TorusExpanding(2, 3), np.array([0.1, 0.2, 0.3]))


def test_orbit_fixed_point():
    assert np.all(om.orbit(om.MTimesMod1(2), 0.0, 5) == 0.0)


def test_orbit_is_step_iteration():
    o = om.orbit(om.Beta(PHI), 0.37, 20)
    for i in range(19):
        assert o[i + 1] == om.step(om.Beta(PHI), o[i])


def test_orbit_digit_shift():
    # initial point given by an explicit binary digit stream
    digits = np.array([0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1] * 5)
    x0 = float((digits * 2.0 ** -(np.arange(digits.size) + 1)).sum())
    o = om.orbit(om.MTimesMod1(2), x0, 3)
    for t in range(3):
        shifted = float((digits[t:] * 2.0 ** -(np.arange(digits.size - t) + 1)).sum())
        assert o[t] == pytest.approx(shifted, abs=1e-12)


def test_orbit_gauss_golden_ratio_fixed_point():
    o = om.orbit(om.Gauss(), 1 / PHI, 3)
    assert np.abs(o - 1 / PHI).max() < 1e-12


def test_random_orbit_hand_iteration():
    # driver: 0.1 -> 0.2 -> 0.4; fibers applied: 2x, 2x, 3x
    sk = om.skew_2x_3x()
    o = om.random_orbit(sk, 0.1, 0.3, 3)
    assert o == pytest.approx([0.3, 0.6, 0.2])
    assert fiber_at(sk, 0.39) == om.MTimesMod1(2)
    assert fiber_at(sk, 0.4) == om.MTimesMod1(3)


def test_random_orbit_degenerate_selector_matches_deterministic():
    sk = om.SkewProduct(
        base=om.skew_2x_3x().base, thresholds=(0.5,), fibers=(om.MTimesMod1(2),) * 2
    )
    o = om.random_orbit(sk, 0.7, 0.123, 12)
    assert np.array_equal(o, om.orbit(om.MTimesMod1(2), 0.123, 12))


def test_random_orbit_selector_gap():
    with pytest.raises(SelectorGap):
        fiber_at(om.skew_2x_3x(), 1.5)


def test_skew_driver_preserves_lebesgue():
    rng = np.random.default_rng(0)
    x = rng.random(100_000)
    y = step_many(om.skew_2x_3x().base, x)
    stat = stats.ks_2samp(y, rng.random(100_000)).statistic
    assert stat < KS_C_001 * math.sqrt(2 / 100_000)


@pytest.mark.parametrize(
    "spec",
    [
        om.MTimesMod1(2),
        om.MTimesMod1(3),
        om.Beta(PHI),
        om.Beta(2.5),
        om.Gauss(),
        om.PiecewiseDoubling(),
    ],
)
def test_invariance_one_step_ks(spec):
    rng = np.random.default_rng(1234)
    x = om.sample_invariant(spec, rng, size=100_000)
    fresh = om.sample_invariant(spec, rng, size=100_000)
    stat = stats.ks_2samp(step_many(spec, x), fresh).statistic
    assert stat < KS_C_001 * math.sqrt(2 / 100_000)


def test_invariance_torus_marginals():
    rng = np.random.default_rng(5)
    spec = om.TorusExpanding(2, 3)
    x = om.sample_invariant(spec, rng, size=100_000)
    y = step_many(spec, x)
    for d in range(2):
        stat = stats.ks_2samp(y[:, d], rng.random(100_000)).statistic
        assert stat < KS_C_001 * math.sqrt(2 / 100_000)


def test_sample_invariant_uniform_mean():
    rng = np.random.default_rng(2)
    x = om.sample_invariant(om.MTimesMod1(2), rng, size=100_000)
    assert abs(x.mean() - 0.5) < 0.01


def test_sample_invariant_gauss_cdf():
    rng = np.random.default_rng(3)
    x = om.sample_invariant(om.Gauss(), rng, size=100_000)
    assert abs((x <= 0.5).mean() - math.log(1.5) / math.log(2)) < 0.005


def test_sample_invariant_beta_bounds_and_cdf():
    beta = PHI
    rng = np.random.default_rng(4)
    x = om.sample_invariant(om.Beta(beta), rng, size=100_000)
    assert np.all((0 <= x) & (x < 1))
    dens = beta_invariant_density(beta, np.linspace(0, 1, 2001, endpoint=False))
    lo, hi = 1 - 1 / beta, 1 / (1 - 1 / beta)
    assert dens.min() >= lo - 1e-12 and dens.max() <= hi + 1e-12
    stat = stats.kstest(x, lambda t: beta_invariant_cdf(beta, t)).statistic
    assert stat < KS_C_001 / math.sqrt(100_000)


def test_invariant_orbit_mtimes_reconstructs_steps():
    rng = np.random.default_rng(6)
    o = om.invariant_orbit(om.MTimesMod1(2), 300, rng)
    assert np.abs((2 * o[:-1]) % 1.0 - o[1:]).max() < 1e-12


def test_invariant_orbit_piecewise_doubling_no_collapse():
    rng = np.random.default_rng(7)
    o = om.invariant_orbit(om.PiecewiseDoubling(), 2000, rng)
    assert np.abs(step_many(om.PiecewiseDoubling(), o[:-1]) - o[1:]).max() < 1e-12
    # plain double iteration dies at the fixed point 0 within ~53 steps
    collapsed = om.orbit(om.PiecewiseDoubling(), rng.random(), 100)
    assert collapsed[-1] == 0.0
    assert o[1500:].min() > 0.0


def test_invariant_orbit_skew_exact_no_collapse():
    rng = np.random.default_rng(8)
    o = om.invariant_orbit(om.skew_2x_3x(), 4096, rng)
    assert np.unique(o).size == 4096
    stat = stats.ks_2samp(o, rng.random(4096)).statistic
    assert stat < KS_C_001 * math.sqrt(2 / 4096)


def test_skew_exact_orbit_follows_selected_fibers():
    sk = om.skew_2x_3x()
    rng = np.random.default_rng(9)
    o = _skew_orbit_exact(sk, 0.1, 50, rng)
    omega = 0.1
    for t in range(49):
        fiber = fiber_at(sk, omega)
        # exact fixed-point step agrees with float step to double resolution
        assert abs((fiber.m * o[t]) % 1.0 - o[t + 1]) < 1e-12
        omega = om.step(sk.base, omega)


def test_observe_examples():
    assert om.observe(om.Identity(), 0.7) == 0.7
    assert om.observe(om.CoordinateProjection((0,)), np.array([0.2, 0.9])) == 0.2
    assert om.observe(om.AffineObservation(0.5, 0.1), 0.4) == pytest.approx(0.3)


def test_observe_orbit_identity_is_noop():
    pts = np.random.default_rng(0).random((10, 2))
    assert observe_orbit(om.Identity(), pts) is pts


def test_observe_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        om.observe(om.CoordinateProjection((3,)), np.array([0.1, 0.2]))


def test_lipschitz_constants():
    assert lipschitz_constant(om.Identity()) == 1.0
    assert lipschitz_constant(om.CoordinateProjection((0,))) == 1.0
    assert lipschitz_constant(om.AffineObservation(-2.0, 0.5)) == 2.0


def test_spec_validation():
    with pytest.raises(ValueError):
        om.MTimesMod1(1)
    with pytest.raises(ValueError):
        om.Beta(1.0)
    with pytest.raises(ValueError):
        om.TorusExpanding(0, 2)
    with pytest.raises(ValueError):
        om.SkewProduct(base=om.skew_2x_3x().base, thresholds=(0.7, 0.2), fibers=(om.MTimesMod1(2),) * 3)
    with pytest.raises(ValueError):
        om.AffineObservation(0.0, 0.1)
