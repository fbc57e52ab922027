"""Response families, link functions, and chain rules.

A family exposes per-observation log-likelihood derivatives to third order
in its own parameter coordinates (all mixed combinations); links map linear
predictors to those coordinates and the chain rules push the derivatives to
the predictors and, for nested effects, to the transformed covariates.

The containers are sized for up to four distribution parameters so heavier
tailed families can be added without interface changes; shipped are the
Gaussian location-scale family (coordinates mu and log sigma^2) and a
fixed-variance Gaussian used by the quadratic-posterior fixtures.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FamilyDerivs",
    "PredictorDerivs",
    "StildeDerivs",
    "Link",
    "IdentityLink",
    "LogLink",
    "LINKS",
    "Family",
    "GaussianLS",
    "GaussianFixed",
    "FAMILIES",
    "gaussian_ls_derivs",
    "gaussian_fixed_derivs",
    "chain_to_eta",
    "chain_to_stilde",
]


@dataclass
class FamilyDerivs:
    """Per-observation log-likelihood derivatives w.r.t. the m family
    coordinates: ll (n,), d1 (m,n), d2 (m,m,n), d3 (m,m,m,n)."""

    ll: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray

    @property
    def n_par(self):
        return self.d1.shape[0]


@dataclass
class PredictorDerivs:
    """Same layout as FamilyDerivs but w.r.t. the linear predictors."""

    ll: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


@dataclass
class StildeDerivs:
    """Derivatives carried to one nested effect's transformed covariate.

    ``ls``/``lss``/``lsss`` are the pure s-derivatives, the rest the mixed
    ones with that effect's own predictor.
    """

    ls: np.ndarray
    lss: np.ndarray
    lsss: np.ndarray
    les: np.ndarray
    lees: np.ndarray
    less: np.ndarray


def _check_finite(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite values in family inputs")


def gaussian_ls_derivs(y, mu, log_var):
    """Gaussian location-scale: exact partials in (mu, log sigma^2)."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    v = np.asarray(log_var, dtype=float)
    _check_finite(y, mu, v)
    r = y - mu
    E = np.exp(-v)
    n = y.shape[0]
    ll = -0.5 * np.log(2.0 * np.pi) - 0.5 * v - 0.5 * r * r * E
    d1 = np.empty((2, n))
    d1[0] = r * E
    d1[1] = -0.5 + 0.5 * r * r * E
    d2 = np.empty((2, 2, n))
    d2[0, 0] = -E
    d2[0, 1] = d2[1, 0] = -r * E
    d2[1, 1] = -0.5 * r * r * E
    d3 = np.empty((2, 2, 2, n))
    d3[0, 0, 0] = 0.0
    d3[0, 0, 1] = d3[0, 1, 0] = d3[1, 0, 0] = E
    d3[0, 1, 1] = d3[1, 0, 1] = d3[1, 1, 0] = r * E
    d3[1, 1, 1] = 0.5 * r * r * E
    return FamilyDerivs(ll=ll, d1=d1, d2=d2, d3=d3)


def gaussian_fixed_derivs(y, mu, sigma2):
    """Gaussian with known variance: partials in mu only."""
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    _check_finite(y, mu)
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    r = y - mu
    n = y.shape[0]
    ll = -0.5 * np.log(2.0 * np.pi * sigma2) - 0.5 * r * r / sigma2
    d1 = (r / sigma2)[None, :]
    d2 = np.full((1, 1, n), -1.0 / sigma2)
    d3 = np.zeros((1, 1, 1, n))
    return FamilyDerivs(ll=ll, d1=d1, d2=d2, d3=d3)


class Link:
    """Inverse link theta(eta) with three derivatives."""

    name = "abstract"

    def inverse(self, eta):
        raise NotImplementedError

    def derivs(self, eta):
        """Returns (theta, d1, d2, d3) as arrays over eta."""
        raise NotImplementedError


class IdentityLink(Link):
    name = "identity"

    def inverse(self, eta):
        return np.asarray(eta, dtype=float)

    def derivs(self, eta):
        eta = np.asarray(eta, dtype=float)
        one = np.ones_like(eta)
        zero = np.zeros_like(eta)
        return eta, one, zero, zero


class LogLink(Link):
    """g(theta) = log(theta), so theta = exp(eta) and all derivatives too."""

    name = "log"

    def inverse(self, eta):
        return np.exp(np.asarray(eta, dtype=float))

    def derivs(self, eta):
        t = np.exp(np.asarray(eta, dtype=float))
        return t, t, t, t


LINKS = {"identity": IdentityLink(), "log": LogLink()}


class Family:
    """Response distribution in its own parameter coordinates."""

    name = "abstract"
    n_par = 0
    param_names = ()
    default_links = ()

    def derivs(self, y, theta):
        """theta: (m, n) coordinate values; returns FamilyDerivs."""
        raise NotImplementedError


class GaussianLS(Family):
    name = "gaussian_ls"
    n_par = 2
    param_names = ("mu", "log_var")
    default_links = ("identity", "identity")

    def derivs(self, y, theta):
        return gaussian_ls_derivs(y, theta[0], theta[1])

    def point_params(self, theta):
        return {"mu": theta[0], "sigma2": np.exp(theta[1])}


class GaussianFixed(Family):
    name = "gaussian_fixed"
    n_par = 1
    param_names = ("mu",)
    default_links = ("identity",)

    def __init__(self, sigma2=1.0):
        if sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        self.sigma2 = float(sigma2)

    def derivs(self, y, theta):
        return gaussian_fixed_derivs(y, theta[0], self.sigma2)

    def point_params(self, theta):
        return {"mu": theta[0], "sigma2": np.full_like(theta[0], self.sigma2)}


FAMILIES = {"gaussian_ls": GaussianLS, "gaussian_fixed": GaussianFixed}


def chain_to_eta(fam, links, eta):
    """Push family derivatives through the inverse links to the predictors.

    Each theta_j depends on eta_j only, so the multivariate composition
    reduces to per-coordinate Faa di Bruno factors plus diagonal
    corrections.
    """
    m, n = fam.d1.shape
    if len(links) != m:
        raise ValueError("one link per family parameter required")
    t1 = np.empty((m, n))
    t2 = np.empty((m, n))
    t3 = np.empty((m, n))
    for j, link in enumerate(links):
        _, t1[j], t2[j], t3[j] = link.derivs(eta[j])
    d1 = fam.d1 * t1
    d2 = fam.d2 * t1[:, None, :] * t1[None, :, :]
    d2[np.arange(m), np.arange(m)] += fam.d1 * t2
    d3 = fam.d3 * t1[:, None, None, :] * t1[None, :, None, :] * t1[None, None, :, :]
    for j in range(m):
        for k in range(m):
            # second-derivative corrections from repeated indices
            d3[j, j, k] += fam.d2[j, k] * t2[j] * t1[k]
            d3[j, k, j] += fam.d2[j, k] * t2[j] * t1[k]
            d3[k, j, j] += fam.d2[j, k] * t2[j] * t1[k]
        d3[j, j, j] += fam.d1[j] * t3[j]
    return PredictorDerivs(ll=fam.ll, d1=d1, d2=d2, d3=d3)


def chain_to_stilde(pred, j, eta_s, eta_ss, eta_sss):
    """Derivatives of the log-likelihood w.r.t. one nested effect's
    transformed covariate, for an effect living in predictor ``j``.

    ``eta_s``/``eta_ss``/``eta_sss`` are the derivatives of the outer
    smooth, i.e. rows of the outer basis derivative matrices times the
    outer coefficients.
    """
    le = pred.d1[j]
    lee = pred.d2[j, j]
    leee = pred.d3[j, j, j]
    ls = le * eta_s
    lss = le * eta_ss + lee * eta_s * eta_s
    lsss = le * eta_sss + 3.0 * lee * eta_s * eta_ss + leee * eta_s**3
    les = lee * eta_s
    lees = leee * eta_s
    less = leee * eta_s * eta_s + lee * eta_ss
    return StildeDerivs(ls=ls, lss=lss, lsss=lsss, les=les, lees=lees, less=less)
