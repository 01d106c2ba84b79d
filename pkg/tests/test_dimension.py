import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import orbitmatch as om
from orbitmatch.dimension import RadiiLadder, neighbor_counts
from orbitmatch.errors import NoUsableRadii, TooFewPoints


def test_radii_ladder():
    ladder = RadiiLadder(0.2, 5)
    assert np.allclose(ladder.radii, [0.2, 0.1, 0.05, 0.025, 0.0125])
    with pytest.raises(ValueError):
        RadiiLadder(0.2, 3)
    with pytest.raises(ValueError):
        RadiiLadder(0.2, 5, ratio=1.1)


def test_centered_identical_points():
    pts = np.zeros(20)
    assert om.centered_correlation_sum(pts, 0.01, 3, om.EuclideanBox(1)) == 1.0


def test_centered_radius_beyond_diameter():
    rng = np.random.default_rng(0)
    pts = rng.random((50, 2))
    assert om.centered_correlation_sum(pts, 5.0, 4, om.EuclideanBox(2)) == 1.0
    assert om.ktuple_correlation_sum(pts, 5.0, 3, om.TorusWrap(2)) == 1.0


def test_centered_uniform_analytic():
    # int mu(B(x,r)) dmu = 2r - r^2 for Lebesgue on [0,1]
    rng = np.random.default_rng(1)
    pts = rng.random(10_000)
    v = om.centered_correlation_sum(pts, 0.05, 2, om.EuclideanBox(1))
    assert abs(v - 0.0975) < 0.005


def test_ktuple_distinct_hand_example():
    pts = np.array([0.0, 0.1, 0.5])
    v = om.ktuple_correlation_sum(pts, 0.2, 3, om.EuclideanBox(1), distinct=True)
    assert v == 0.0


def test_ktuple_k2_equals_centered():
    rng = np.random.default_rng(2)
    pts = rng.random(500)
    for r in (0.01, 0.1, 0.4):
        assert om.ktuple_correlation_sum(pts, r, 2, om.EuclideanBox(1)) == (
            om.centered_correlation_sum(pts, r, 2, om.EuclideanBox(1))
        )


def test_ktuple_subsampled_close_to_exact():
    rng = np.random.default_rng(3)
    pts = rng.random(150)
    exact = om.ktuple_correlation_sum(pts, 0.1, 3, om.EuclideanBox(1))
    approx = om.ktuple_correlation_sum(
        np.concatenate([pts, pts]),  # M=300 > exact threshold
        0.1,
        3,
        om.EuclideanBox(1),
        rng=np.random.default_rng(7),
        tuples=200_000,
    )
    assert abs(approx - exact) < 0.02


def test_ktuple_needs_rng_when_subsampling():
    rng = np.random.default_rng(4)
    with pytest.raises(TooFewPoints):
        om.ktuple_correlation_sum(rng.random(300), 0.1, 3, om.EuclideanBox(1))


def _sandwich_holds(pts, r, metric, k=3):
    c_half = om.centered_correlation_sum(pts, r / 2, k, metric)
    kt = om.ktuple_correlation_sum(pts, r, k, metric)
    c_full = om.centered_correlation_sum(pts, r, k, metric)
    return c_half <= kt <= c_full


@settings(deadline=None, max_examples=80)
@given(
    st.integers(3, 100),
    st.integers(1, 2),
    st.booleans(),
    st.floats(0.003, 0.9),
    st.randoms(use_true_random=False),
)
def test_sandwich_deterministic(m, dim, torus, r, pyrandom):
    rng = np.random.default_rng(pyrandom.getrandbits(64))
    metric = om.TorusWrap(dim) if torus else om.EuclideanBox(dim)
    assert _sandwich_holds(rng.random((m, dim)), r, metric)


def test_sandwich_adversarial_clusters():
    # two sub-k clusters far apart: breaks distinct-index variants, must
    # hold for the plug-in sums
    pts = np.array([0.0, 1e-4, 0.7, 0.7001])
    assert _sandwich_holds(pts, 1e-3, om.EuclideanBox(1))
    pts2 = np.array([0.0, 0.0, 0.9])
    assert _sandwich_holds(pts2, 0.01, om.EuclideanBox(1))


def test_correlations_nondecreasing_in_r():
    rng = np.random.default_rng(5)
    pts = rng.random((120, 1))
    radii = [0.01, 0.05, 0.1, 0.2, 0.5, 1.0]
    cent = [om.centered_correlation_sum(pts, r, 3, om.EuclideanBox(1)) for r in radii]
    ktup = [om.ktuple_correlation_sum(pts, r, 3, om.EuclideanBox(1)) for r in radii]
    assert all(a <= b for a, b in zip(cent, cent[1:]))
    assert all(a <= b for a, b in zip(ktup, ktup[1:]))


def test_step_function_breakpoints():
    # q distinct points: correlations change only at pairwise distances
    pts = np.array([0.0, 0.3, 0.45])
    metric = om.EuclideanBox(1)
    gaps = sorted({0.3, 0.45, 0.15})
    eps = 1e-9
    for lo, hi in zip(gaps, gaps[1:]):
        a = om.centered_correlation_sum(pts, lo + eps, 3, metric)
        b = om.centered_correlation_sum(pts, hi - eps, 3, metric)
        assert a == b


def test_estimate_uniform_interval():
    rng = np.random.default_rng(6)
    est = om.estimate_Dk(rng.random(4000), RadiiLadder(0.1, 7), 2, om.EuclideanBox(1))
    assert abs(est.dimension - 1.0) < 0.12
    assert est.residual < 0.1


def test_estimate_permutation_invariant():
    rng = np.random.default_rng(7)
    pts = rng.random(500)
    ladder = RadiiLadder(0.1, 5)
    a = om.estimate_Dk(pts, ladder, 2, om.EuclideanBox(1))
    b = om.estimate_Dk(pts[rng.permutation(500)], ladder, 2, om.EuclideanBox(1))
    assert a.dimension == b.dimension


def test_estimate_ktuple_estimator_close():
    rng = np.random.default_rng(8)
    pts = rng.random(180)
    ladder = RadiiLadder(0.3, 4)
    cent = om.estimate_Dk(pts, ladder, 3, om.EuclideanBox(1), estimator="centered")
    ktup = om.estimate_Dk(pts, ladder, 3, om.EuclideanBox(1), estimator="ktuple")
    assert abs(cent.dimension - ktup.dimension) < 0.5


def test_estimate_degenerate_inputs():
    with pytest.raises(NoUsableRadii):
        om.estimate_Dk(np.zeros(50), RadiiLadder(0.1, 5), 2, om.EuclideanBox(1))
    with pytest.raises(TooFewPoints):
        om.estimate_Dk(np.array([0.1]), RadiiLadder(0.1, 5), 2, om.EuclideanBox(1))


def test_neighbor_counts_include_self():
    pts = np.array([0.0, 0.5])
    counts = neighbor_counts(pts, [0.1], om.EuclideanBox(1))
    assert counts.tolist() == [[1], [1]]


def test_theoretical_values():
    assert om.theoretical_Dk(om.MTimesMod1(3)) == 1.0
    assert om.theoretical_Dk(om.Beta(1.3)) == 1.0
    assert om.theoretical_Dk(om.Gauss()) == 1.0
    assert om.theoretical_Dk(om.TorusExpanding(2, 3)) == 2.0
    assert om.theoretical_Dk(om.skew_2x_3x()) == 1.0
    assert om.theoretical_Dk(om.PiecewiseLinear((0.5,), (2.0, 2.0), (0.0, -1.0))) is None
