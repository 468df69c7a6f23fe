"""Closed-form equilibrium constructions and their sampling laws.

Sampled-law checks use scipy.stats KS tests as the independent oracle; the
analytic CDFs under test never touch scipy.
"""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from supply_eq.closedform import (
    FinitePCurve,
    InfiniteTwoGenre,
    OnePopulation,
    QuarterCircle,
    angle_cdf,
    eq_cdf_quality,
    eq_sample,
    finite_p_x_cdf,
    genre_set,
    make_finite_p_curve,
    make_infinite_two_genre,
    make_one_population,
    make_p2_quarter_circle,
)
from supply_eq.geometry import CostSpec, angle_between, angle_pair, two_user_plane
from supply_eq.threshold import beta_star_two_user

INFINITE_CASES = [
    (math.pi / 3, 7.0, 0.015758743157470702),
    (1.2, 7.0, 0.0021800236927420934),
    (math.pi / 2.5, 5.0, 0.009727302331289635),
]


def _plane(theta):
    return two_user_plane(*angle_pair(theta).embeddings)


@pytest.mark.parametrize("n,beta,producers", [(1, 2.0, 2), (4, 3.0, 5), (2, 7.0, 2)])
def test_one_population_zero_profit_identity(n, beta, producers):
    dist = OnePopulation(
        direction=np.array([1.0, 0.0]), n_users=n, beta=beta, producers=producers
    )
    rs = np.linspace(0.0, dist.support_max, 1000)
    fs = np.array([eq_cdf_quality(dist, float(r)) for r in rs])
    resid = np.abs(n * fs ** (producers - 1) - rs**beta)
    assert float(resid.max()) <= 1e-12


def test_one_population_support_max():
    dist = OnePopulation(np.array([1.0, 0.0]), 4, 3.0, 5)
    assert dist.support_max == pytest.approx(4.0 ** (1.0 / 3.0), rel=1e-15)
    assert eq_cdf_quality(dist, dist.support_max) == pytest.approx(1.0, abs=1e-12)
    assert eq_cdf_quality(dist, 0.0) == 0.0


def test_one_population_sampling_ks():
    dist = OnePopulation(np.array([0.0, 1.0]), 2, 7.0, 2)
    pts = eq_sample(dist, 20000, seed=0)
    assert pts.shape == (20000, 2)
    assert np.all(pts[:, 0] == 0.0)
    quality = pts[:, 1]
    stat = scipy.stats.kstest(quality, lambda r: np.minimum(1.0, (r**7.0 / 2.0))).statistic
    assert stat < 0.02


def test_make_one_population_normalizes():
    dist = make_one_population(np.array([3.0, 4.0]), 1, CostSpec(q=2.0, beta=2.0), 2)
    assert np.allclose(dist.direction, [0.6, 0.8], atol=1e-12)


def test_one_population_validation():
    with pytest.raises(ValueError):
        OnePopulation(np.array([0.0, 0.0]), 1, 2.0, 2)
    with pytest.raises(ValueError):
        OnePopulation(np.array([1.0, 0.0]), 0, 2.0, 2)
    with pytest.raises(ValueError):
        OnePopulation(np.array([1.0, 0.0]), 1, 2.0, 1)


@pytest.mark.parametrize("beta", [2.0, 4.0, 8.0])
def test_quarter_circle_radius_and_samples(beta):
    dist = make_p2_quarter_circle(beta)
    assert dist.radius == pytest.approx((2.0 / beta) ** (1.0 / beta), rel=1e-15)
    pts = eq_sample(dist, 5000, seed=1)
    norms = np.linalg.norm(pts, axis=1)
    assert float(np.abs(norms - dist.radius).max()) <= 1e-12
    assert np.all(pts >= -1e-15)


def test_quarter_circle_angle_law_ks():
    dist = make_p2_quarter_circle(4.0)
    pts = eq_sample(dist, 20000, seed=2)
    angles = np.arctan2(pts[:, 1], pts[:, 0])
    stat = scipy.stats.kstest(angles, lambda t: np.sin(np.clip(t, 0, math.pi / 2)) ** 2).statistic
    assert stat < 0.02


def test_quarter_circle_angle_cdf_values():
    dist = make_p2_quarter_circle(2.0)
    assert angle_cdf(dist, 0.0) == 0.0
    assert angle_cdf(dist, math.pi / 4) == pytest.approx(0.5, abs=1e-12)
    assert angle_cdf(dist, math.pi / 2) == 1.0


def test_quarter_circle_requires_orthogonal_plane():
    with pytest.raises(ValueError):
        QuarterCircle(beta=4.0, plane=_plane(math.pi / 3))
    with pytest.raises(ValueError):
        QuarterCircle(beta=1.5, plane=_plane(math.pi / 2))


def test_quarter_circle_quality_cdf_is_step():
    dist = make_p2_quarter_circle(4.0)
    assert eq_cdf_quality(dist, dist.radius * 0.999) == 0.0
    assert eq_cdf_quality(dist, dist.radius) == 1.0


@pytest.mark.parametrize("producers", [2, 3, 4])
def test_finite_p_x_law_ks(producers):
    dist = make_finite_p_curve(producers)
    pts = eq_sample(dist, 20000, seed=2)
    stat = scipy.stats.kstest(
        pts[:, 0], lambda x: np.minimum(1.0, np.maximum(x, 0.0) ** (2.0 / (producers - 1)))
    ).statistic
    assert stat < 0.02


def test_finite_p_example_value():
    # P = 2: the curve is the unit quarter circle, x-CDF(x) = x^2.
    dist = make_finite_p_curve(2)
    assert finite_p_x_cdf(dist, 0.5) == pytest.approx(0.25, abs=1e-15)
    assert finite_p_x_cdf(dist, 0.25) == pytest.approx(0.0625, abs=1e-15)


def test_finite_p_three_is_line_segment():
    dist = make_finite_p_curve(3)
    pts = eq_sample(dist, 5000, seed=3)
    assert float(np.abs(pts.sum(axis=1) - 1.0).max()) < 1e-12


def test_finite_p_two_is_unit_circle():
    dist = make_finite_p_curve(2)
    pts = eq_sample(dist, 5000, seed=4)
    assert float(np.abs(np.linalg.norm(pts, axis=1) - 1.0).max()) < 1e-12


def test_finite_p_quality_cdf_against_monte_carlo():
    dist = make_finite_p_curve(3)
    rng = np.random.default_rng(6)
    t = rng.random(200000)
    phi = t**2 + (1 - t) ** 2
    for q in (0.72, 0.8, 0.9, 0.99):
        want = float(np.mean(phi <= q * q))
        assert eq_cdf_quality(dist, q) == pytest.approx(want, abs=0.01)


def test_finite_p_quality_cdf_edges():
    dist = make_finite_p_curve(4)
    assert eq_cdf_quality(dist, 1.0) == 1.0
    assert eq_cdf_quality(dist, 2.0 ** ((2 - 4) / 2.0) * 0.999) == 0.0


def test_finite_p_beta_fixed():
    assert make_finite_p_curve(3).beta == 2.0


@pytest.mark.parametrize("theta_star,beta,theta_g", INFINITE_CASES)
def test_infinite_genre_angle_frozen(theta_star, beta, theta_g):
    dist = make_infinite_two_genre(_plane(theta_star), beta)
    assert dist.theta_g == pytest.approx(theta_g, abs=1e-8)


@pytest.mark.parametrize("theta_star,beta,_", INFINITE_CASES)
def test_infinite_genre_angle_grid_oracle(theta_star, beta, _):
    dist = make_infinite_two_genre(_plane(theta_star), beta)
    grid = np.linspace(0.0, theta_star / 2, 1000001)
    vals = np.cos(grid) ** beta + np.cos(theta_star - grid) ** beta
    assert dist.theta_g == pytest.approx(float(grid[np.argmax(vals)]), abs=2e-6)


@pytest.mark.parametrize("theta_star,beta,_", INFINITE_CASES)
def test_infinite_genre_foc_residual(theta_star, beta, _):
    dist = make_infinite_two_genre(_plane(theta_star), beta)
    t = dist.theta_g
    slope = beta * (
        math.cos(theta_star - t) ** (beta - 1) * math.sin(theta_star - t)
        - math.cos(t) ** (beta - 1) * math.sin(t)
    )
    assert abs(slope) < 1e-10


@pytest.mark.parametrize("theta_star,beta,_", INFINITE_CASES)
def test_infinite_band_continuity(theta_star, beta, _):
    dist = make_infinite_two_genre(_plane(theta_star), beta)
    top = dist.support_max
    for k in range(1, 12):
        edge = top * dist.c2**k
        below = eq_cdf_quality(dist, float(np.nextafter(edge, 0.0)), 0)
        at = eq_cdf_quality(dist, edge, 0)
        assert abs(at - below) <= 1e-12


@pytest.mark.parametrize("theta_star,beta,_", INFINITE_CASES)
def test_infinite_product_identity(theta_star, beta, _):
    dist = make_infinite_two_genre(_plane(theta_star), beta)
    qs = np.linspace(dist.support_max * dist.c2**6, dist.support_max, 1000)
    for q in qs:
        lhs = math.sqrt(eq_cdf_quality(dist, float(q), 0) * eq_cdf_quality(dist, float(q) * dist.c2, 0))
        rhs = dist.c2**beta * float(q) ** beta / dist.c1
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_infinite_orthogonal_limit_exact():
    dist = make_infinite_two_genre(_plane(math.pi / 2), 7.0)
    assert dist.theta_g == 0.0
    assert dist.c1 == 1.0
    assert dist.c3 == math.inf
    qs = np.linspace(0.0, 1.0, 1000)
    for q in qs:
        assert eq_cdf_quality(dist, float(q), 0) == pytest.approx(float(q) ** 14.0, abs=1e-12)


def test_infinite_requires_beta_above_threshold():
    theta = math.pi / 3
    with pytest.raises(ValueError):
        make_infinite_two_genre(_plane(theta), beta_star_two_user(theta))


def test_infinite_genre_directions():
    dist = make_infinite_two_genre(_plane(math.pi / 3), 7.0)
    dirs = dist.genre_directions()
    assert dirs.shape == (2, 2)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)
    assert angle_between(dirs[0], dirs[1]) == pytest.approx(
        math.pi / 3 - 2 * dist.theta_g, abs=1e-10
    )
    assert dist.weights == (0.5, 0.5)


def test_infinite_sampler_two_genres_and_law():
    dist = make_infinite_two_genre(_plane(1.2), 7.0)
    pts = eq_sample(dist, 20000, seed=5)
    angles = np.round(np.arctan2(pts[:, 1], pts[:, 0]), 9)
    assert len(np.unique(angles)) == 2
    quality = np.linalg.norm(pts, axis=1)
    stat = scipy.stats.kstest(
        quality, lambda q: np.array([eq_cdf_quality(dist, float(v), 0) for v in np.atleast_1d(q)])
    ).statistic
    assert stat < 0.02


def test_infinite_sampler_avoids_flat_bands():
    # Flat (odd) bands carry no mass; every draw must land on a power piece.
    dist = make_infinite_two_genre(_plane(math.pi / 3), 7.0)
    quality = np.linalg.norm(eq_sample(dist, 20000, seed=6), axis=1)
    k = np.floor(np.log(quality / dist.support_max) / math.log(dist.c2)).astype(int)
    assert np.all(k % 2 == 0)


def test_eq_cdf_quality_genre_index_contract():
    inf_dist = make_infinite_two_genre(_plane(1.2), 7.0)
    with pytest.raises(ValueError):
        eq_cdf_quality(inf_dist, 0.5)
    onepop = OnePopulation(np.array([1.0, 0.0]), 1, 2.0, 2)
    assert eq_cdf_quality(onepop, 0.5, 0) == eq_cdf_quality(onepop, 0.5)
    with pytest.raises(ValueError):
        eq_cdf_quality(onepop, 0.5, 1)
    with pytest.raises(ValueError):
        eq_cdf_quality(make_p2_quarter_circle(4.0), 0.5, 0)
    with pytest.raises(ValueError):
        eq_cdf_quality(onepop, -0.1)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(0.5, math.pi / 2),
    st.floats(1.05, 4.0),
)
def test_infinite_cdf_monotone_property(theta_star, beta_factor):
    beta = beta_factor * beta_star_two_user(theta_star) + 0.1
    dist = make_infinite_two_genre(_plane(theta_star), beta)
    qs = np.linspace(0.0, dist.support_max * 1.1, 300)
    fs = [eq_cdf_quality(dist, float(q), 0) for q in qs]
    assert all(b >= a - 1e-15 for a, b in zip(fs, fs[1:]))
    assert fs[0] == 0.0
    assert fs[-1] == 1.0


def test_genre_sets():
    one = genre_set(OnePopulation(np.array([1.0, 0.0]), 1, 2.0, 2))
    assert one.kind == "finite" and one.directions.shape == (1, 2)
    two = genre_set(make_infinite_two_genre(_plane(1.2), 7.0))
    assert two.kind == "finite" and two.directions.shape == (2, 2)
    assert genre_set(make_p2_quarter_circle(4.0)).kind == "continuum"
    assert genre_set(make_finite_p_curve(3)).kind == "continuum"


def test_eq_sample_determinism_and_validation():
    dist = make_p2_quarter_circle(4.0)
    a = eq_sample(dist, 100, seed=7)
    b = eq_sample(dist, 100, seed=7)
    assert np.all(a == b)
    with pytest.raises(ValueError):
        eq_sample(dist, 0, seed=7)
