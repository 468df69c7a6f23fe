"""Numerical equilibrium verification.

Checks a constructed distribution the way a skeptical producer would: sample
opponents, price every deviation on a grid, and compare against the analytic
profit.  Tie handling brackets the truth between lose-all-ties and
win-all-ties ranks instead of simulating the tie-split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closedform import (
    EquilibriumDist,
    FinitePCurve,
    InfiniteTwoGenre,
    OnePopulation,
    QuarterCircle,
    eq_sample,
)
from .geometry import CostSpec, TwoUserPlane, UserSet, cost, induced_cost_grad
from .optimize import OptimizerConfig, minmax_alignment

__all__ = [
    "EmpiricalMarginals",
    "VerifyReport",
    "empirical_marginals",
    "deviation_profit",
    "best_response_gap",
    "equilibrium_profit",
    "positive_profit_condition",
    "foc_residual",
    "soc_direction_sign",
    "genre_count",
]


@dataclass(frozen=True)
class EmpiricalMarginals:
    """Sorted per-user inferred values from M draws of one opponent strategy."""

    values: np.ndarray
    producers: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must be (n_users, M)")
        if self.producers < 2:
            raise ValueError("producers must be >= 2")
        object.__setattr__(self, "values", v)

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    def win_probability(self, inferred: np.ndarray, weak: bool) -> np.ndarray:
        """Empirical chance that inferred beats the max of P-1 opponents.

        inferred has shape (..., n_users); weak counts ties as wins.
        """
        side = "right" if weak else "left"
        z = np.asarray(inferred, dtype=float)
        m = self.n_samples
        out = np.empty_like(z)
        for i in range(self.values.shape[0]):
            rank = np.searchsorted(self.values[i], z[..., i], side=side)
            out[..., i] = (rank / m) ** (self.producers - 1)
        return out


def empirical_marginals(dist, users, producers, n_samples, seed) -> EmpiricalMarginals:
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    pts = eq_sample(dist, n_samples, seed)
    vals = np.sort(pts @ users.embeddings.T, axis=0).T
    return EmpiricalMarginals(values=vals, producers=producers)


def deviation_profit(p, marg: EmpiricalMarginals, users: UserSet, spec: CostSpec):
    """(lower, upper) bracket of the expected profit of deviating to p."""
    z = users.embeddings @ np.asarray(p, dtype=float)
    lo = float(marg.win_probability(z, weak=False).sum()) - cost(p, spec)
    hi = float(marg.win_probability(z, weak=True).sum()) - cost(p, spec)
    return lo, hi


def equilibrium_profit(dist, users, spec, producers) -> float:
    """Analytic expected profit per producer: users-won share minus cost.

    Exact closed forms per variant; the only quadrature is the finite-P curve
    priced under an exponent other than its native 2.
    """
    n = users.n_users
    if isinstance(dist, OnePopulation):
        _check(producers == dist.producers, "producers disagrees with dist")
        _check(n == dist.n_users, "user count disagrees with dist")
        if spec.beta == dist.beta:
            return 0.0
        bs, bd = spec.beta, dist.beta
        return n / producers - n ** (bs / bd) * bd / (bd + (producers - 1) * bs)
    if isinstance(dist, QuarterCircle):
        _check(producers == 2, "quarter-circle equilibrium has two producers")
        return n / 2.0 - (2.0 / dist.beta) ** (spec.beta / dist.beta)
    if isinstance(dist, FinitePCurve):
        _check(producers == dist.producers, "producers disagrees with dist")
        if spec.beta == 2.0:
            return n / producers - 2.0 / producers
        t = np.linspace(0.0, 1.0, 200001)
        phi = t ** (producers - 1) + (1.0 - t) ** (producers - 1)
        return n / producers - float(np.trapezoid(phi ** (spec.beta / 2.0), t))
    if isinstance(dist, InfiniteTwoGenre):
        raise ValueError("per-producer profit is not defined in the infinite-producer limit")
    raise TypeError(f"unknown distribution {dist!r}")


def positive_profit_condition(users, spec, producers, cfg=None):
    """(flag, Q, threshold): profit is forced positive when Q < N^(-P/beta).

    flag is None when the alignment solve did not certify convergence.
    """
    res = minmax_alignment(users, spec, cfg or OptimizerConfig())
    threshold = users.n_users ** (-producers / spec.beta)
    flag = res.value < threshold if res.converged else None
    return flag, res.value, threshold


def _mc_profit(dist, users, spec, producers, n_rounds, seed):
    pts = eq_sample(dist, n_rounds * producers, seed)
    z = (pts @ users.embeddings.T).reshape(n_rounds, producers, users.n_users)
    wins = (z.argmax(axis=1) == 0).sum(axis=1)
    costs = cost(pts[::producers], spec)
    profits = wins - costs
    mc = float(profits.mean())
    stderr = float(profits.std(ddof=1) / math.sqrt(n_rounds))
    return mc, stderr


@dataclass(frozen=True)
class VerifyReport:
    eq_profit: float
    eq_profit_mc: float
    eq_profit_mc_stderr: float
    best_response_gap: float
    gap_argmax: np.ndarray
    genre_count_estimate: int | str
    foc_residual_max: float | None
    positive_profit: bool | None
    q_alignment: float
    q_threshold: float


def best_response_gap(
    dist,
    users,
    spec,
    producers,
    n_samples=100000,
    grid=(200, 200),
    seed=0,
    cfg=None,
) -> VerifyReport:
    """Grid-search deviations against empirical opponents; full report.

    Deviations sweep in-plane angles [0, theta_star] times qualities up to
    N^(1/beta), beyond which revenue cannot cover cost.  The gap uses the
    win-all-ties upper bracket.
    """
    plane = getattr(dist, "plane", None)
    marg = empirical_marginals(dist, users, producers, n_samples, [seed, 0])

    n_angles, n_radii = grid
    radii = np.linspace(0.0, users.n_users ** (1.0 / spec.beta), n_radii)
    if plane is not None:
        angles = np.linspace(0.0, plane.theta_star, n_angles)
        dirs = plane.direction(angles)
    else:
        dirs = dist.direction.reshape(1, -1)
    points = radii[:, None, None] * dirs[None, :, :]
    z = points @ users.embeddings.T
    win = marg.win_probability(z, weak=True).sum(axis=-1)
    profits = win - np.asarray(cost(points, spec))
    flat = int(np.argmax(profits))
    best = float(profits.reshape(-1)[flat])
    argmax_pt = points.reshape(-1, points.shape[-1])[flat]

    eq_profit = equilibrium_profit(dist, users, spec, producers)
    mc, stderr = _mc_profit(dist, users, spec, producers, n_samples, [seed, 1])
    samples = eq_sample(dist, max(1000, min(n_samples, 20000)), [seed, 2])
    count = genre_count(samples)
    try:
        foc = foc_residual(dist, getattr(dist, "plane", None), spec)
    except ValueError:
        foc = None
    flag, qval, qthr = positive_profit_condition(users, spec, producers, cfg)
    return VerifyReport(
        eq_profit=eq_profit,
        eq_profit_mc=mc,
        eq_profit_mc_stderr=stderr,
        best_response_gap=best - eq_profit,
        gap_argmax=argmax_pt,
        genre_count_estimate=count,
        foc_residual_max=foc,
        positive_profit=flag,
        q_alignment=qval,
        q_threshold=qthr,
    )


def foc_residual(dist, plane, spec, grid=512) -> float:
    """Max gap between the win-density stationarity terms and the induced-cost
    gradient over interior support points; defined for the variants with
    analytic marginal densities."""
    if isinstance(dist, QuarterCircle):
        theta_star = dist.plane.theta_star
        r = dist.radius
        thetas = np.linspace(0.0, theta_star, grid + 2)[1:-1]
        z = r * np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
        h = 2.0 * z / (r * r)
    elif isinstance(dist, FinitePCurve):
        if spec.beta != 2.0:
            raise ValueError("finite-P curve stationarity is specific to beta = 2")
        theta_star = dist.plane.theta_star
        e = 0.5 * (dist.producers - 1)
        t = np.linspace(0.0, 1.0, grid + 2)[1:-1]
        z = np.stack([t**e, (1.0 - t) ** e], axis=1)
        h = 2.0 * z
    else:
        raise ValueError("analytic densities are only available for "
                         "QuarterCircle and FinitePCurve")
    if plane is not None and abs(plane.theta_star - theta_star) > 1e-12:
        raise ValueError("plane disagrees with the distribution's plane")
    spec_b = CostSpec(q=2.0, beta=dist.beta, alpha=spec.alpha)
    grad = induced_cost_grad(z, theta_star, spec_b)
    return float(np.abs(h - grad).max())


def soc_direction_sign(theta, theta_star, beta) -> int:
    """Sign of the induced-cost cross partial along the support direction."""
    expr = (beta - 2.0) / beta * math.cos(theta_star - 2.0 * theta) - math.cos(theta_star)
    return (expr > 0.0) - (expr < 0.0)


def genre_count(samples, angle_tol=1e-3):
    """Greedy direction clustering; "continuum" past sqrt(len(samples)) clusters."""
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 100:
        raise ValueError("need at least 100 samples")
    nrm = np.linalg.norm(pts, axis=1)
    dirs = pts[nrm > 0] / nrm[nrm > 0, None]
    limit = math.isqrt(dirs.shape[0])
    cos_tol = math.cos(angle_tol)
    reps = []
    for d in dirs:
        if not any(d @ r >= cos_tol for r in reps):
            reps.append(d)
            if len(reps) > limit:
                return "continuum"
    return len(reps)


def _check(ok, msg):
    if not ok:
        raise ValueError(msg)
