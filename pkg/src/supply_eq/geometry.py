"""Geometry of users, content, and production costs.

Users and content vectors live in the nonnegative orthant of R^D.  A
``CostSpec`` fixes the weighted q-norm cost family

    cost(p) = ||alpha * p||_q ** beta,   q in [1, inf],  beta >= 1,  alpha > 0,

whose unit ball, dual norm, and two-user reduction drive everything else in
this package.  Content vectors are plain 1-D float arrays; ``content_vector``
validates one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CostSpec",
    "UserSet",
    "TwoUserPlane",
    "content_vector",
    "weighted_norm",
    "cost",
    "dual_norm",
    "induced_cost",
    "induced_cost_grad",
    "angle_between",
    "two_user_plane",
    "basis_pair",
    "angle_pair",
    "orthonormal_users",
]


def _as_vector(x, name="vector"):
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def content_vector(values):
    """Validate ``values`` as a content vector (1-D, finite, nonnegative)."""
    p = _as_vector(values, "content vector")
    if np.any(p < 0):
        raise ValueError("content vector must be nonnegative")
    return p


@dataclass(frozen=True)
class CostSpec:
    """Parameters of the cost family cost(p) = ||alpha * p||_q ** beta.

    alpha is None for uniform unit weights; otherwise a strictly positive
    length-D vector.  q = math.inf selects the sup norm.
    """

    q: float = 2.0
    beta: float = 2.0
    alpha: np.ndarray | None = None

    def __post_init__(self):
        if not self.q >= 1.0:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if not (math.isfinite(self.beta) and self.beta >= 1.0):
            raise ValueError(f"beta must be finite and >= 1, got {self.beta}")
        if self.alpha is not None:
            a = _as_vector(self.alpha, "alpha")
            if np.any(a <= 0):
                raise ValueError("alpha must be strictly positive")
            object.__setattr__(self, "alpha", a)

    def uniform_alpha(self):
        """Scalar weight when alpha is uniform; raises otherwise."""
        if self.alpha is None:
            return 1.0
        a = float(self.alpha[0])
        if np.any(self.alpha != a):
            raise ValueError("operation requires uniform alpha weights")
        return a


@dataclass(frozen=True)
class UserSet:
    """N user embeddings stacked as an (N, D) array.

    Rows are nonnegative and nonzero; duplicates are allowed (a homogeneous
    population is N copies of one vector).
    """

    embeddings: np.ndarray

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=float)
        if emb.ndim != 2:
            raise ValueError(f"embeddings must be 2-D, got shape {emb.shape}")
        if emb.shape[0] < 1 or emb.shape[1] < 1:
            raise ValueError("need at least one user and one dimension")
        if not np.all(np.isfinite(emb)):
            raise ValueError("embeddings have non-finite entries")
        if np.any(emb < 0):
            raise ValueError("embeddings must be nonnegative")
        zero_rows = np.flatnonzero(~np.any(emb > 0, axis=1))
        if zero_rows.size:
            raise ValueError(f"user rows {zero_rows.tolist()} are all-zero")
        object.__setattr__(self, "embeddings", emb)

    @property
    def n_users(self):
        return self.embeddings.shape[0]

    @property
    def dim(self):
        return self.embeddings.shape[1]


def basis_pair():
    """Two users at the standard basis vectors of R^2."""
    return UserSet(np.eye(2))


def angle_pair(theta_star):
    """Two unit users in R^2 separated by ``theta_star``, the first on e1."""
    if not 0.0 < theta_star <= math.pi / 2:
        raise ValueError("theta_star must lie in (0, pi/2]")
    return UserSet(
        np.array([[1.0, 0.0], [math.cos(theta_star), math.sin(theta_star)]])
    )


def orthonormal_users(n):
    """n users at the standard basis vectors of R^n."""
    if n < 1:
        raise ValueError("need n >= 1")
    return UserSet(np.eye(int(n)))


def weighted_norm(p, spec):
    """Weighted q-norm ||alpha * p||_q, reduced over the last axis.

    Accepts a single vector or a stack of vectors; negative entries
    contribute through their absolute value.
    """
    arr = np.asarray(p, dtype=float)
    w = arr if spec.alpha is None else arr * spec.alpha
    w = np.abs(w)
    if math.isinf(spec.q):
        out = w.max(axis=-1)
    elif spec.q == 1.0:
        out = w.sum(axis=-1)
    elif spec.q == 2.0:
        out = np.sqrt((w * w).sum(axis=-1))
    else:
        out = (w ** spec.q).sum(axis=-1) ** (1.0 / spec.q)
    return float(out) if out.ndim == 0 else out


def cost(p, spec):
    """Production cost ||alpha * p||_q ** beta (vectorized like weighted_norm)."""
    r = weighted_norm(p, spec)
    if isinstance(r, float):
        return r ** spec.beta
    return r ** spec.beta


def dual_norm(u, spec):
    """Dual of the weighted q-norm at a nonnegative vector.

    For nonnegative u this equals max { <u, p> : ||alpha * p||_q <= 1, p >= 0 }
    and evaluates to ||u / alpha||_q' with 1/q + 1/q' = 1.
    """
    u = _as_vector(u, "u")
    if np.any(u < 0):
        raise ValueError("dual_norm requires a nonnegative vector")
    v = u if spec.alpha is None else u / spec.alpha
    if math.isinf(spec.q):
        qq = 1.0
    elif spec.q == 1.0:
        qq = math.inf
    else:
        qq = spec.q / (spec.q - 1.0)
    return weighted_norm(v, CostSpec(q=qq, beta=1.0))


def angle_between(u1, u2):
    """Euclidean angle between two nonzero vectors."""
    u1 = _as_vector(u1, "u1")
    u2 = _as_vector(u2, "u2")
    n1 = float(np.linalg.norm(u1))
    n2 = float(np.linalg.norm(u2))
    if n1 == 0.0 or n2 == 0.0:
        raise ValueError("angle_between requires nonzero vectors")
    c = float(u1 @ u2) / (n1 * n2)
    return math.acos(min(1.0, max(-1.0, c)))


# Cone membership tolerance for the two-user value space.
_CONE_TOL = 1e-9


def induced_cost(z, theta_star, spec):
    """Cost of the cheapest content generating values z = (z1, z2).

    Two unit users at angle theta_star; q = 2 with uniform alpha only.  The
    minimizer lies in the user plane, giving

        cost(z) = a^beta * sin(theta_star)^-beta
                  * (z1^2 + z2^2 - 2 z1 z2 cos(theta_star))^(beta/2).
    """
    if spec.q != 2.0:
        raise ValueError("induced cost requires q = 2")
    a = spec.uniform_alpha()
    if not 0.0 < theta_star <= math.pi / 2:
        raise ValueError("theta_star must lie in (0, pi/2]")
    z = _as_vector(z, "z")
    if z.shape != (2,):
        raise ValueError("z must have exactly two coordinates")
    z1, z2 = float(z[0]), float(z[1])
    c = math.cos(theta_star)
    # Restricted to values producible from the cone spanned by the users
    # themselves; there the minimizer is nonnegative for every embedding.
    if z1 < z2 * c - _CONE_TOL or z2 < z1 * c - _CONE_TOL:
        raise ValueError(f"z={z.tolist()} lies outside the users' cone")
    s = math.sin(theta_star)
    g = max(z1 * z1 + z2 * z2 - 2.0 * z1 * z2 * c, 0.0)
    return (a ** spec.beta) * s ** (-spec.beta) * g ** (spec.beta / 2.0)


def induced_cost_grad(z, theta_star, spec):
    """Gradient of ``induced_cost`` in the value coordinates.

    Rows of z may be stacked; returns an array of matching shape.
    """
    if spec.q != 2.0:
        raise ValueError("induced cost requires q = 2")
    a = spec.uniform_alpha()
    zz = np.asarray(z, dtype=float)
    z1 = zz[..., 0]
    z2 = zz[..., 1]
    c = math.cos(theta_star)
    s = math.sin(theta_star)
    g = np.maximum(z1 * z1 + z2 * z2 - 2.0 * z1 * z2 * c, 0.0)
    pref = spec.beta * (a ** spec.beta) * s ** (-spec.beta)
    core = pref * g ** (spec.beta / 2.0 - 1.0)
    return np.stack([core * (z1 - z2 * c), core * (z2 - z1 * c)], axis=-1)


@dataclass(frozen=True)
class TwoUserPlane:
    """Orthonormal frame for the span of two users.

    basis[0] points along u1; in-plane angles are measured from it toward u2,
    so u2's direction sits at in-plane angle theta_star.  theta_min is the
    ambient angle between e1 and the closer of the two users when D = 2, and
    0 otherwise.
    """

    theta_star: float
    basis: np.ndarray
    theta_min: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.shape[0] != 2:
            raise ValueError("basis must have two rows")
        gram = b @ b.T
        if not np.allclose(gram, np.eye(2), atol=1e-12):
            raise ValueError("basis rows must be orthonormal")
        if not 0.0 < self.theta_star <= math.pi / 2:
            raise ValueError("theta_star must lie in (0, pi/2]")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self):
        return self.basis.shape[1]

    def embed(self, xy):
        """Map in-plane coordinates (..., 2) to ambient (..., D)."""
        return np.asarray(xy, dtype=float) @ self.basis

    def direction(self, theta):
        """Ambient unit vector(s) at in-plane angle(s) ``theta`` from the u1 axis."""
        t = np.asarray(theta, dtype=float)
        return self.embed(np.stack([np.cos(t), np.sin(t)], axis=-1))


def two_user_plane(u1, u2):
    """Build the TwoUserPlane spanned by two independent nonnegative users."""
    u1 = _as_vector(u1, "u1")
    u2 = _as_vector(u2, "u2")
    if np.any(u1 < 0) or np.any(u2 < 0):
        raise ValueError("user vectors must be nonnegative")
    n1 = float(np.linalg.norm(u1))
    n2 = float(np.linalg.norm(u2))
    if n1 == 0.0 or n2 == 0.0:
        raise ValueError("user vectors must be nonzero")
    b1 = u1 / n1
    resid = u2 - (u2 @ b1) * b1
    rn = float(np.linalg.norm(resid))
    if rn <= 1e-12 * n2:
        raise ValueError("user vectors are linearly dependent")
    b2 = resid / rn
    theta_star = angle_between(u1, u2)
    theta_min = 0.0
    if u1.shape[0] == 2:
        a1 = math.acos(min(1.0, max(-1.0, u1[0] / n1)))
        a2 = math.acos(min(1.0, max(-1.0, u2[0] / n2)))
        theta_min = min(a1, a2)
    return TwoUserPlane(theta_star=theta_star, basis=np.stack([b1, b2]), theta_min=theta_min)
