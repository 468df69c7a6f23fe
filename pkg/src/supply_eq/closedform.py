"""Closed-form symmetric mixed equilibria and their samplers.

Four families:

* ``OnePopulation`` - every producer randomizes quality along one shared ray,
  so the market has a single genre.
* ``QuarterCircle`` - two producers spread over the quarter circle between two
  orthogonal users, at one fixed quality.
* ``FinitePCurve`` - P producers on a curve between the axes, quadratic cost.
* ``InfiniteTwoGenre`` - the infinite-producer limit with exactly two genres;
  the winning quality law is piecewise with countably many flat gaps.

Throughout, quality is the weighted production norm of a content vector and
genre is its direction.  Samplers are inverse-transform and deterministic for
a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CostSpec, TwoUserPlane, UserSet, two_user_plane
from .optimize import OptimizerConfig, nsw_direction
from .threshold import beta_star_two_user

__all__ = [
    "OnePopulation",
    "QuarterCircle",
    "FinitePCurve",
    "InfiniteTwoGenre",
    "EquilibriumDist",
    "GenreSet",
    "make_one_population",
    "make_p2_quarter_circle",
    "make_finite_p_curve",
    "make_infinite_two_genre",
    "eq_cdf_quality",
    "eq_sample",
    "genre_set",
    "angle_cdf",
    "finite_p_x_cdf",
]

# Below this, the two genres are numerically orthogonal and the band
# structure collapses to the smooth power law.
_DEGENERATE_C2 = 1e-12


def _canonical_plane() -> TwoUserPlane:
    return two_user_plane(np.array([1.0, 0.0]), np.array([0.0, 1.0]))


@dataclass(frozen=True)
class OnePopulation:
    """Single-genre equilibrium for N users sharing one direction.

    ``direction`` must have unit production norm; every sampled content
    vector is a nonnegative multiple of it.  The quality CDF is
    min(1, (r^beta / N)^(1/(P-1))) on [0, N^(1/beta)].
    """

    direction: np.ndarray
    n_users: int
    beta: float
    producers: int

    variant = "one_population"

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.ndim != 1 or np.any(d < 0) or not np.any(d > 0):
            raise ValueError("direction must be a nonnegative nonzero vector")
        object.__setattr__(self, "direction", d)
        if self.producers < 2:
            raise ValueError("producers must be >= 2")
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        if not self.beta >= 1.0:
            raise ValueError("beta must be >= 1")

    @property
    def support_max(self) -> float:
        return self.n_users ** (1.0 / self.beta)


@dataclass(frozen=True)
class QuarterCircle:
    """Two-producer equilibrium on the quarter circle between orthogonal users.

    Quality is degenerate at radius (2/beta)^(1/beta); the angle has CDF
    sin^2(theta) on [0, pi/2].
    """

    beta: float
    plane: TwoUserPlane

    variant = "quarter_circle"

    def __post_init__(self):
        if not self.beta >= 2.0:
            raise ValueError("beta must be >= 2 for the quarter-circle equilibrium")
        if abs(self.plane.theta_star - math.pi / 2) > 1e-12:
            raise ValueError("quarter-circle equilibrium requires orthogonal users")

    @property
    def radius(self) -> float:
        return (2.0 / self.beta) ** (1.0 / self.beta)

    @property
    def producers(self) -> int:
        return 2


@dataclass(frozen=True)
class FinitePCurve:
    """P-producer equilibrium on the curve y = (1 - x^(2/(P-1)))^((P-1)/2).

    Fixed to quadratic cost; the x coordinate has CDF min(1, x^(2/(P-1))).
    """

    producers: int
    plane: TwoUserPlane

    variant = "finite_p_curve"
    beta = 2.0

    def __post_init__(self):
        if self.producers < 2:
            raise ValueError("producers must be >= 2")
        if abs(self.plane.theta_star - math.pi / 2) > 1e-12:
            raise ValueError("finite-P curve requires orthogonal users")


@dataclass(frozen=True)
class InfiniteTwoGenre:
    """Infinite-producer two-genre equilibrium for users at angle theta_star.

    Genres sit at in-plane angles theta_g and theta_star - theta_g.  The
    winning-producer quality CDF alternates between power pieces
    c1^(-2) c2^(-2n beta) q^(2 beta) and flats, on geometric bands with ratio
    c2; support gaps are where the CDF is flat.
    """

    theta_star: float
    beta: float
    theta_g: float
    c1: float
    c2: float
    c3: float
    plane: TwoUserPlane

    variant = "infinite_two_genre"
    weights = (0.5, 0.5)

    def __post_init__(self):
        if self.beta <= beta_star_two_user(self.theta_star):
            raise ValueError("beta must exceed the two-user threshold")
        if not 0.0 <= self.theta_g < 0.5 * self.theta_star:
            raise ValueError("theta_g must lie in [0, theta_star/2)")
        if not 0.0 <= self.c2 < 1.0:
            raise ValueError("c2 must lie in [0, 1)")

    @property
    def support_max(self) -> float:
        return self.c1 ** (1.0 / self.beta)

    @property
    def genre_angles(self) -> tuple[float, float]:
        return (self.theta_g, self.theta_star - self.theta_g)

    def genre_directions(self) -> np.ndarray:
        return np.stack([self.plane.direction(a) for a in self.genre_angles])


EquilibriumDist = OnePopulation | QuarterCircle | FinitePCurve | InfiniteTwoGenre


def make_one_population(u, n_users: int, spec: CostSpec, producers: int) -> OnePopulation:
    """Single-genre equilibrium along the best direction for one user vector."""
    u = np.asarray(u, dtype=float)
    if spec.q == 2.0 and spec.alpha is None:
        direction = u / np.linalg.norm(u)
    else:
        direction = nsw_direction(UserSet(u.reshape(1, -1)), spec).point
    return OnePopulation(
        direction=direction, n_users=n_users, beta=spec.beta, producers=producers
    )


def make_p2_quarter_circle(beta: float) -> QuarterCircle:
    return QuarterCircle(beta=beta, plane=_canonical_plane())


def make_finite_p_curve(producers: int) -> FinitePCurve:
    return FinitePCurve(producers=producers, plane=_canonical_plane())


def _genre_objective(theta_star, beta, t):
    return math.cos(t) ** beta + math.cos(theta_star - t) ** beta


def _genre_slope(theta_star, beta, t):
    return beta * (
        math.cos(theta_star - t) ** (beta - 1.0) * math.sin(theta_star - t)
        - math.cos(t) ** (beta - 1.0) * math.sin(t)
    )


def _golden_max(f, lo, hi):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > 1e-15:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def _theta_genre(theta_star: float, beta: float) -> float:
    """Maximizer of cos^beta(t) + cos^beta(theta_star - t) over [0, theta_star/2].

    Coarse grid, then bisection on the slope's sign change; the slope root is
    the stationarity condition the genre angle must satisfy.  The endpoint
    t = 0 is compared explicitly and returned exactly when it wins, which is
    the orthogonal-user case.
    """
    half = 0.5 * theta_star
    grid = np.linspace(0.0, half, 10001)
    vals = np.cos(grid) ** beta + np.cos(theta_star - grid) ** beta
    i = int(np.argmax(vals))
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, grid.size - 1)])
    if _genre_slope(theta_star, beta, lo) > 0.0 > _genre_slope(theta_star, beta, hi):
        while True:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _genre_slope(theta_star, beta, mid) > 0.0:
                lo = mid
            else:
                hi = mid
        cand = 0.5 * (lo + hi)
    else:
        cand = _golden_max(lambda t: _genre_objective(theta_star, beta, t), lo, hi)
    if _genre_objective(theta_star, beta, 0.0) >= _genre_objective(theta_star, beta, cand):
        return 0.0
    return cand


def make_infinite_two_genre(
    plane: TwoUserPlane, beta: float, cfg: OptimizerConfig | None = None
) -> InfiniteTwoGenre:
    """Two-genre infinite-producer equilibrium; requires beta above threshold.

    cfg is accepted for interface uniformity; the genre angle is located by a
    deterministic grid-plus-bisection search, not a stochastic optimizer.
    """
    del cfg
    theta_star = plane.theta_star
    if beta <= beta_star_two_user(theta_star):
        raise ValueError("beta must exceed 2/(1 - cos theta_star) for two genres")
    theta_g = _theta_genre(theta_star, beta)
    c1 = math.sin(theta_star) * math.cos(theta_g) / math.sin(theta_star - theta_g)
    c2 = math.cos(theta_star - theta_g) / math.cos(theta_g)
    c3 = math.inf if c2 <= _DEGENERATE_C2 else c1 * c2 ** (-beta)
    return InfiniteTwoGenre(
        theta_star=theta_star,
        beta=beta,
        theta_g=theta_g,
        c1=c1,
        c2=c2,
        c3=c3,
        plane=plane,
    )


def _fmax_cdf(dist: InfiniteTwoGenre, q: float) -> float:
    if q <= 0.0:
        return 0.0
    top = dist.support_max
    if q >= top:
        return 1.0
    beta = dist.beta
    if dist.c2 <= _DEGENERATE_C2:
        return min(1.0, q ** (2.0 * beta) / dist.c1**2)
    lc2 = math.log(dist.c2)
    k = math.floor(math.log(q / top) / lc2)
    if k % 2 == 1:
        return math.exp((k + 1) * beta * lc2)
    return math.exp(2.0 * beta * math.log(q) - 2.0 * math.log(dist.c1) - k * beta * lc2)


def _fmax_quantile(dist: InfiniteTwoGenre, u: np.ndarray) -> np.ndarray:
    # u in (0, 1]; flats carry no mass, so every draw lands on a power piece.
    beta = dist.beta
    if dist.c2 <= _DEGENERATE_C2:
        return (u * dist.c1**2) ** (1.0 / (2.0 * beta))
    lc2 = math.log(dist.c2)
    n = np.floor(np.log(u) / (2.0 * beta * lc2))
    return np.exp(
        (np.log(u) + 2.0 * math.log(dist.c1) + 2.0 * n * beta * lc2) / (2.0 * beta)
    )


def _finite_p_phi(t: float, p: int) -> float:
    return t ** (p - 1) + (1.0 - t) ** (p - 1)


def _bisect_to_float_limit(keep_low, lo, hi):
    # Runs until the bracket has no representable interior point.
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        if keep_low(mid):
            lo = mid
        else:
            hi = mid


def _finite_p_quality_cdf(dist: FinitePCurve, q: float) -> float:
    # Squared quality along the curve is phi(t) = t^(P-1) + (1-t)^(P-1) with
    # t uniform; phi falls then rises, so the CDF is the root gap.
    p = dist.producers
    target = q * q
    if target >= 1.0:
        return 1.0
    if target <= 2.0 ** (2 - p):
        return 0.0
    t_lo = _bisect_to_float_limit(lambda t: _finite_p_phi(t, p) > target, 0.0, 0.5)
    t_hi = _bisect_to_float_limit(lambda t: _finite_p_phi(t, p) < target, 0.5, 1.0)
    return t_hi - t_lo


def eq_cdf_quality(dist: EquilibriumDist, qvalue: float, genre_index: int | None = None) -> float:
    """Quality CDF at qvalue; the winning-producer law for InfiniteTwoGenre.

    genre_index selects the genre for InfiniteTwoGenre (required there, and
    the two genres share one law); elsewhere it may only name the single
    genre of OnePopulation.
    """
    if qvalue < 0.0:
        raise ValueError("qvalue must be >= 0")
    if isinstance(dist, InfiniteTwoGenre):
        if genre_index not in (0, 1):
            raise ValueError("genre_index must be 0 or 1 for InfiniteTwoGenre")
        return _fmax_cdf(dist, qvalue)
    if isinstance(dist, OnePopulation):
        if genre_index not in (None, 0):
            raise ValueError("OnePopulation has a single genre (index 0)")
        f = (qvalue**dist.beta / dist.n_users) ** (1.0 / (dist.producers - 1))
        return min(1.0, f)
    if genre_index is not None:
        raise ValueError("continuum variants take no genre_index")
    if isinstance(dist, QuarterCircle):
        return 1.0 if qvalue >= dist.radius else 0.0
    if isinstance(dist, FinitePCurve):
        return _finite_p_quality_cdf(dist, qvalue)
    raise TypeError(f"unknown distribution {dist!r}")


def angle_cdf(dist: QuarterCircle, theta: float) -> float:
    """CDF sin^2(theta) of the quarter-circle angle."""
    if not isinstance(dist, QuarterCircle):
        raise TypeError("angle_cdf applies to QuarterCircle only")
    if theta <= 0.0:
        return 0.0
    if theta >= math.pi / 2:
        return 1.0
    return math.sin(theta) ** 2


def finite_p_x_cdf(dist: FinitePCurve, x: float) -> float:
    """CDF min(1, x^(2/(P-1))) of the curve's first coordinate."""
    if not isinstance(dist, FinitePCurve):
        raise TypeError("finite_p_x_cdf applies to FinitePCurve only")
    if x <= 0.0:
        return 0.0
    return min(1.0, x ** (2.0 / (dist.producers - 1)))


def eq_sample(dist: EquilibriumDist, n: int, seed: int) -> np.ndarray:
    """n inverse-transform draws as rows of an (n, D) content array."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(dist, OnePopulation):
        u = rng.random(n)
        r = (dist.n_users * u ** (dist.producers - 1)) ** (1.0 / dist.beta)
        return np.outer(r, dist.direction)
    if isinstance(dist, QuarterCircle):
        theta = np.arcsin(np.sqrt(rng.random(n)))
        xy = dist.radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return dist.plane.embed(xy)
    if isinstance(dist, FinitePCurve):
        u = rng.random(n)
        e = 0.5 * (dist.producers - 1)
        xy = np.stack([u**e, (1.0 - u) ** e], axis=1)
        return dist.plane.embed(xy)
    if isinstance(dist, InfiniteTwoGenre):
        g = rng.integers(0, 2, size=n)
        u = 1.0 - rng.random(n)
        q = _fmax_quantile(dist, u)
        return q[:, None] * dist.genre_directions()[g]
    raise TypeError(f"unknown distribution {dist!r}")


@dataclass(frozen=True)
class GenreSet:
    """Genres of a distribution: finitely many directions, or a continuum."""

    kind: str
    directions: np.ndarray | None
    description: str


def genre_set(dist: EquilibriumDist) -> GenreSet:
    if isinstance(dist, OnePopulation):
        return GenreSet(
            kind="finite",
            directions=dist.direction.reshape(1, -1),
            description="single ray",
        )
    if isinstance(dist, InfiniteTwoGenre):
        a1, a2 = dist.genre_angles
        return GenreSet(
            kind="finite",
            directions=dist.genre_directions(),
            description=f"two genres at in-plane angles {a1:.6g} and {a2:.6g}",
        )
    if isinstance(dist, QuarterCircle):
        return GenreSet(
            kind="continuum",
            directions=None,
            description="quarter-circle arc, angles in [0, pi/2]",
        )
    if isinstance(dist, FinitePCurve):
        p = dist.producers
        return GenreSet(
            kind="continuum",
            directions=None,
            description=f"curve (x, (1 - x^(2/{p - 1}))^({p - 1}/2)), x in [0, 1]",
        )
    raise TypeError(f"unknown distribution {dist!r}")
