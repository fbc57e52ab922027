"""B-spline bases with analytic derivatives, difference penalties, and the
constrained/extrapolated basis used for the outer part of nested effects.

Bases are immutable after construction and evaluation is pure, so basis
objects can be shared freely across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

__all__ = [
    "SplineBasis",
    "PenaltyMatrix",
    "ConstrainedOuterBasis",
    "ExtremeKnots",
    "bspline_eval",
    "extreme_knots",
    "pi_for_xi",
    "outside_count_bound",
    "difference_penalty",
    "constrain_outer",
]

MAX_DERIV = 4


def _check_x(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError("evaluation points must be a 1-d array")
    if not np.all(np.isfinite(x)):
        raise ValueError("evaluation points must be finite")
    return x


def _cox_de_boor(t, degree, x, deriv):
    """Plain B-spline recurrence, vectorised over x.

    Returns the (len(x), n_basis) design matrix of the deriv-th derivative.
    Outside the extended knot range the recurrence yields zeros; no special
    extrapolation is applied here.
    """
    nb = len(t) - degree - 1
    B = ((x[:, None] >= t[None, :-1]) & (x[:, None] < t[None, 1:])).astype(float)
    # x exactly on the right end of the domain belongs to the last interior span
    on_hi = x == t[nb]
    if np.any(on_hi):
        B[on_hi] = 0.0
        B[on_hi, nb - 1] = 1.0
    value_stop = degree - deriv
    for d in range(1, degree + 1):
        m = len(t) - d - 1
        den1 = t[d : d + m] - t[:m]
        den2 = t[d + 1 : d + m + 1] - t[1 : m + 1]
        inv1 = np.where(den1 > 0, 1.0 / np.where(den1 > 0, den1, 1.0), 0.0)
        inv2 = np.where(den2 > 0, 1.0 / np.where(den2 > 0, den2, 1.0), 0.0)
        if d <= value_stop:
            w1 = (x[:, None] - t[None, :m]) * inv1
            w2 = (t[None, d + 1 : d + m + 1] - x[:, None]) * inv2
            B = w1 * B[:, :m] + w2 * B[:, 1 : m + 1]
        else:
            B = d * (inv1 * B[:, :m] - inv2 * B[:, 1 : m + 1])
    return B


@dataclass(frozen=True)
class SplineBasis:
    """B-spline basis on a fixed knot grid.

    ``knots`` is the full (extended) knot vector of length
    ``n_basis + degree + 1``; the basis spans the domain between knot
    ``degree`` and knot ``n_basis``.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", t)
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if len(t) < 2 * self.degree + 2:
            raise ValueError("too few knots for the requested degree")
        if np.any(np.diff(t) < 0):
            raise ValueError("knots must be non-decreasing")
        interior = t[self.degree : len(t) - self.degree]
        if np.any(np.diff(interior) <= 0):
            raise ValueError("interior knots must be strictly increasing")

    @classmethod
    def uniform(cls, lo, hi, n_basis, degree):
        if hi <= lo:
            raise ValueError("empty domain")
        n_seg = n_basis - degree
        if n_seg < 1:
            raise ValueError("n_basis must exceed degree")
        h = (hi - lo) / n_seg
        t = lo + h * np.arange(-degree, n_basis + 1)
        return cls(knots=t, degree=degree)

    @classmethod
    def from_data(cls, x, n_basis, degree):
        x = _check_x(x)
        lo, hi = float(np.min(x)), float(np.max(x))
        if hi <= lo:
            hi = lo + 1.0
        return cls.uniform(lo, hi, n_basis, degree)

    @property
    def n_basis(self):
        return len(self.knots) - self.degree - 1

    @property
    def domain(self):
        return float(self.knots[self.degree]), float(self.knots[self.n_basis])

    def design(self, x, deriv=0):
        x = _check_x(x)
        if deriv < 0 or deriv > MAX_DERIV:
            raise ValueError(f"derivative order {deriv} not supported (0..{MAX_DERIV})")
        if deriv > self.degree:
            raise ValueError("derivative order exceeds spline degree")
        return _cox_de_boor(self.knots, self.degree, x, deriv)


def bspline_eval(basis, x, deriv_order=0):
    """Design matrix of ``basis`` (or its derivative) at the points ``x``."""
    return basis.design(x, deriv_order)


@dataclass(frozen=True)
class PenaltyMatrix:
    order: int
    matrix: np.ndarray
    null_dim: int


def difference_penalty(order, k):
    """S = D'D for the order-th difference operator D on k coefficients."""
    if order < 1:
        raise ValueError("difference order must be >= 1")
    if k <= order:
        raise ValueError("need more coefficients than the difference order")
    D = np.diff(np.eye(k), n=order, axis=0)
    return PenaltyMatrix(order=order, matrix=D.T @ D, null_dim=order)


@dataclass(frozen=True)
class ExtremeKnots:
    xi: float
    range: tuple
    prob_bound: float


def extreme_knots(pi_bound, c=1.0):
    """Symmetric knot range [-xi*sqrt(c), xi*sqrt(c)] for a standardized
    transformation with sample mean 0 and variance c.

    At most ``floor(pi_bound * n)`` of n such values can fall outside the
    range, and a fresh draw falls outside with probability below
    ``pi_bound / (2 - pi_bound)`` up to an O(1/n) term.
    """
    if not 0.0 < pi_bound <= 1.0:
        raise ValueError("pi_bound must lie in (0, 1]")
    if c <= 0:
        raise ValueError("c must be positive")
    xi = math.sqrt((2.0 - pi_bound) / pi_bound)
    half = xi * math.sqrt(c)
    return ExtremeKnots(xi=xi, range=(-half, half), prob_bound=pi_bound / (2.0 - pi_bound))


def pi_for_xi(xi):
    """Inverse query: the bound pi implied by a given half-width xi."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    return 2.0 / (xi**2 + 1.0)


def outside_count_bound(n, pi_bound):
    """Deterministic bound on how many of n standardized values can fall
    outside the extreme-knot range (floor rule for non-integer pi*n/2)."""
    return int(math.floor(pi_bound * n + 1e-12))


@dataclass(frozen=True)
class ConstrainedOuterBasis:
    """Outer basis for nested effects: no intercept (value 0 at x=0), 2nd to
    4th derivatives zero at both boundary knots, and exact linear
    extrapolation beyond them.

    ``constraint_map`` maps the reduced coefficients to the full B-spline
    coefficients; columns are an orthonormal null-space basis of the
    constraint matrix.
    """

    inner: SplineBasis
    constraint_map: np.ndarray
    r: int

    @property
    def n_basis(self):
        return self.constraint_map.shape[1]

    @property
    def boundary(self):
        return self.inner.domain

    def design(self, x, deriv=0):
        x = _check_x(x)
        if deriv < 0 or deriv > MAX_DERIV:
            raise ValueError(f"derivative order {deriv} not supported (0..{MAX_DERIV})")
        lo, hi = self.inner.domain
        xc = np.clip(x, lo, hi)
        D = self.inner.design(xc, deriv) @ self.constraint_map
        below = x < lo
        above = x > hi
        for mask, knot in ((below, lo), (above, hi)):
            if not np.any(mask):
                continue
            if deriv == 0:
                v0 = self.inner.design(np.array([knot]), 0) @ self.constraint_map
                v1 = self.inner.design(np.array([knot]), 1) @ self.constraint_map
                D[mask] = v0 + (x[mask, None] - knot) * v1
            elif deriv == 1:
                v1 = self.inner.design(np.array([knot]), 1) @ self.constraint_map
                D[mask] = v1
            else:
                D[mask] = 0.0
        return D


def constrain_outer(basis):
    """Absorb the point and boundary-derivative constraints of an outer
    nested-effect basis into a reduced, unconstrained parametrisation."""
    if basis.degree < 6:
        raise ValueError("outer nested-effect bases need degree >= 6")
    lo, hi = basis.domain
    if not lo < 0.0 < hi:
        raise ValueError("outer basis domain must contain 0")
    rows = [basis.design(np.array([0.0]), 0)]
    for knot in (lo, hi):
        for d in (2, 3, 4):
            rows.append(basis.design(np.array([knot]), d))
    C = np.vstack(rows)
    Z = null_space(C)
    r = C.shape[0]
    if np.linalg.matrix_rank(C) != r:
        raise ValueError("outer constraint matrix is rank deficient; increase n_basis")
    if Z.shape[1] < 1:
        raise ValueError("no free coefficients left after constraints; increase n_basis")
    return ConstrainedOuterBasis(inner=basis, constraint_map=Z, r=r)
