"""Independent verification harness.

Everything the test suites treat as ground truth lives here: central
finite differences (optionally Richardson-extrapolated), a dense slow-path
reference for the Hessian rho-derivatives, the closed-form Gaussian
evidence, and the simulation scenarios used by the recovery tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

__all__ = [
    "FdConfig",
    "rel_err",
    "fd_gradient",
    "fd_jacobian",
    "fd_directional",
    "dense_hessian_rho_reference",
    "gaussian_evidence",
    "SimScenario",
    "simulate",
]


def rel_err(a, b):
    """|a-b| / max(1, |a|, |b|), reduced to the maximum over all entries."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom))


@dataclass(frozen=True)
class FdConfig:
    step: float = 1e-5
    abs_floor: float = 1e-6
    richardson: bool = False

    def step_for(self, x):
        return np.maximum(np.abs(x) * self.step, self.abs_floor)


def _central(f, x, h, j):
    xp = np.array(x, dtype=float)
    xm = np.array(x, dtype=float)
    xp[j] += h
    xm[j] -= h
    fp = np.asarray(f(xp), dtype=float)
    fm = np.asarray(f(xm), dtype=float)
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
        raise FloatingPointError(f"non-finite value at perturbed coordinate {j}")
    return (fp - fm) / (2.0 * h)


def fd_jacobian(f, x, cfg=FdConfig()):
    """Central-difference Jacobian of a (scalar- or vector-valued) callable.

    Returns an array of shape f(x).shape + x.shape. With ``richardson`` the
    steps h and h/2 are combined to fourth-order accuracy.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    steps = cfg.step_for(x)
    cols = []
    for j in range(x.size):
        h = steps[j]
        d = _central(f, x, h, j)
        if cfg.richardson:
            d2 = _central(f, x, h / 2.0, j)
            d = (4.0 * d2 - d) / 3.0
        cols.append(d)
    return np.stack(cols, axis=-1)


def fd_gradient(f, x, cfg=FdConfig()):
    return fd_jacobian(lambda z: float(f(z)), x, cfg)


def fd_directional(f, x, v, cfg=FdConfig()):
    """Directional central difference of f along v (f may be array-valued)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return np.zeros_like(np.asarray(f(x), dtype=float))
    h = max(cfg.step * max(1.0, float(np.max(np.abs(x)))), cfg.abs_floor) / scale

    def diff(hh):
        fp = np.asarray(f(x + hh * v), dtype=float)
        fm = np.asarray(f(x - hh * v), dtype=float)
        return (fp - fm) / (2.0 * hh)

    d = diff(h)
    if cfg.richardson:
        d = (4.0 * diff(h / 2.0) - d) / 3.0
    return d


def dense_hessian_rho_reference(model, zeta, dzeta, include_penalties=True):
    """Slow O(n p^3) reference for the rho-derivative of the log-posterior
    Hessian, excluding the direct -lambda_g S_g term.

    Contracts the full third-derivative tensor of the penalised
    log-likelihood (obtained by per-coordinate central differences of the
    analytic Hessian) against the coefficient sensitivity ``dzeta``. Only
    meant for small models.
    """
    zeta = np.asarray(zeta, dtype=float)
    p = zeta.size
    if p > 15:
        raise ValueError("dense reference is restricted to p <= 15")
    dzeta = np.asarray(dzeta, dtype=float)

    def hess_at(z):
        return model.eval(z, order=2).hessian(include_penalties=include_penalties)

    out = np.zeros((p, p))
    cfg = FdConfig(step=1e-5, abs_floor=1e-6, richardson=True)
    steps = cfg.step_for(zeta)
    for l in range(p):
        if dzeta[l] == 0.0:
            continue
        h = steps[l]
        d = _central(hess_at, zeta, h, l)
        d2 = _central(hess_at, zeta, h / 2.0, l)
        out += ((4.0 * d2 - d) / 3.0) * dzeta[l]
    return out


def gaussian_evidence(X, y, sigma2, lam, S):
    """log of the Gaussian integral int N(y | X z, sigma2 I) N(z | 0, (lam S)^-1) dz.

    Requires a full-rank (proper) penalty S.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    S = np.asarray(S, dtype=float)
    n, p = X.shape
    P = lam * S
    sign, logdet_prior = np.linalg.slogdet(P)
    if sign <= 0:
        raise ValueError("penalty must be positive definite for the evidence formula")
    A = X.T @ X / sigma2 + P
    sign_a, logdet_post = np.linalg.slogdet(A)
    zhat = np.linalg.solve(A, X.T @ y / sigma2)
    resid = y - X @ zhat
    ll = -0.5 * n * np.log(2.0 * np.pi * sigma2) - 0.5 * resid @ resid / sigma2
    return float(ll - 0.5 * zhat @ P @ zhat + 0.5 * logdet_prior - 0.5 * logdet_post)
