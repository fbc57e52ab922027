"""Nested covariate transformations with derivative stacks.

Each transformation maps covariates and a parameter vector ``a`` to a
standardized n-vector ``s_tilde`` together with its derivatives w.r.t.
``a`` up to third order. For exponential and kernel smoothing the first
element of ``a`` is the log-scale ``a0`` and the values are centred and
scaled as exp(a0) * (raw - mean(raw)); linear indices carry their scale in
||a|| and are centred through column-centring of the design instead.

Evaluation is pure given (config, a); all reductions are plain fixed-order
numpy sums, so repeated evaluations are bit-reproducible.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "TransformState",
    "ExpSmoothConfig",
    "KernelSmoothConfig",
    "ScalingPenalty",
    "exp_smooth_raw",
    "exp_smooth_eval",
    "kernel_smooth_eval",
    "linear_index_eval",
    "scaling_penalty_eval",
    "scaling_penalty_general",
    "single_index_init",
    "sign_convention",
]


@dataclass
class TransformState:
    """One transformation's values and derivative stacks at a given ``a``.

    ``hess`` / ``third`` are None when they vanish identically (linear
    index). All stacks refer to the standardized values in ``s_tilde``.
    """

    kind: str
    a: np.ndarray
    s_tilde: np.ndarray
    grad: np.ndarray
    hess: Optional[np.ndarray] = None
    third: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.s_tilde.shape[0]

    @property
    def p(self):
        return self.a.shape[0]

    def hess_dense(self):
        if self.hess is None:
            return np.zeros((self.n, self.p, self.p))
        return self.hess

    def third_dense(self):
        if self.third is None:
            return np.zeros((self.n, self.p, self.p, self.p))
        return self.third


def _check_a(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or not np.all(np.isfinite(a)):
        raise ValueError("transformation parameters must be a finite 1-d vector")
    return a


# ---------------------------------------------------------------------------
# adaptive exponential smoothing


@dataclass
class ExpSmoothConfig:
    """Design for the smoothing-factor model and the fixed initial state.

    ``design`` rows follow the observation order of the smoothed series;
    ``z0 = None`` uses the first series value as initial state.
    """

    design: np.ndarray
    z0: Optional[float] = None

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))


def _logistic(u):
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    e = np.exp(u[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def exp_smooth_raw(x, cfg, a_omega, order=2):
    """Raw recursion s_i = w_i s_{i-1} + (1 - w_i) x_i with derivative
    recursions in the smoothing-factor coefficients ``a_omega``.

    Returns (s, grad, hess, third); entries beyond ``order`` are None.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n < 1:
        raise ValueError("empty series")
    Xw = cfg.design
    if Xw.shape[0] != n:
        raise ValueError("omega design must have one row per series value")
    a_omega = _check_a(a_omega)
    q = a_omega.size
    if Xw.shape[1] != q:
        raise ValueError("omega coefficient length does not match design")
    z0 = float(x[0]) if cfg.z0 is None else float(cfg.z0)

    w = _logistic(Xw @ a_omega)
    p1 = w * (1.0 - w)
    p2 = p1 * (1.0 - 2.0 * w)
    p3 = p1 * (1.0 - 6.0 * w + 6.0 * w * w)

    s = np.empty(n)
    g = np.empty((n, q)) if order >= 1 else None
    h = np.empty((n, q, q)) if order >= 2 else None
    t3 = np.empty((n, q, q, q)) if order >= 3 else None

    prev = z0
    pg = np.zeros(q)
    ph = np.zeros((q, q))
    pt = np.zeros((q, q, q))
    for i in range(n):
        xi = Xw[i]
        diff = prev - x[i]
        s[i] = x[i] + w[i] * diff
        if order >= 1:
            wg = p1[i] * xi
            cg = wg * diff + w[i] * pg
            g[i] = cg
        if order >= 2:
            wh = p2[i] * np.outer(xi, xi)
            ch = wh * diff + np.outer(wg, pg) + np.outer(pg, wg) + w[i] * ph
            h[i] = ch
        if order >= 3:
            wt = p3[i] * xi[:, None, None] * xi[None, :, None] * xi[None, None, :]
            ct = (
                wt * diff
                + wh[:, :, None] * pg[None, None, :]
                + wh[:, None, :] * pg[None, :, None]
                + wh[None, :, :] * pg[:, None, None]
                + wg[:, None, None] * ph[None, :, :]
                + wg[None, :, None] * ph[:, None, :]
                + wg[None, None, :] * ph[:, :, None]
                + w[i] * pt
            )
            t3[i] = ct
        prev = s[i]
        if order >= 1:
            pg = g[i]
        if order >= 2:
            ph = h[i]
        if order >= 3:
            pt = t3[i]
    return s, g, h, t3


def _standardized_state(kind, a, raw_s, raw_g, raw_h, raw_t, order, center):
    """Wrap raw stacks through the centring / exp(a0)-scaling chain.

    With ``center=None`` the sample mean is part of the differentiated map;
    a frozen ``center`` (prediction time) supports values only.
    """
    a0 = a[0]
    es = np.exp(a0)
    if center is not None:
        s = es * (raw_s - center)
        return TransformState(kind=kind, a=a, s_tilde=s, grad=None)
    s = es * (raw_s - raw_s.mean())
    p = 1 + (raw_g.shape[1] if raw_g is not None else 0)
    n = raw_s.shape[0]
    grad = hess = third = None
    if order >= 1:
        grad = np.empty((n, p))
        grad[:, 0] = s
        grad[:, 1:] = es * (raw_g - raw_g.mean(axis=0))
    if order >= 2:
        hess = np.zeros((n, p, p))
        hess[:, 1:, 1:] = es * (raw_h - raw_h.mean(axis=0))
        hess[:, 0, :] = grad
        hess[:, :, 0] = grad
    if order >= 3:
        third = np.zeros((n, p, p, p))
        third[:, 1:, 1:, 1:] = es * (raw_t - raw_t.mean(axis=0))
        third[:, 0, :, :] = hess
        third[:, :, 0, :] = hess
        third[:, :, :, 0] = hess
    return TransformState(kind=kind, a=a, s_tilde=s, grad=grad, hess=hess, third=third)


def exp_smooth_eval(x, cfg, a, max_deriv=2, center=None):
    """Standardized adaptive exponential smoothing state at ``a = [a0, a_omega]``."""
    a = _check_a(a)
    raw = exp_smooth_raw(x, cfg, a[1:], order=max_deriv)
    return _standardized_state("exp_smooth", a, *raw, order=max_deriv, center=center)


# ---------------------------------------------------------------------------
# multivariate kernel smoothing


@dataclass
class KernelSmoothConfig:
    """Neighbour structure for a kernel smooth.

    ``sq_diffs[i, u, k]`` holds the squared coordinate differences between
    observation i and its u-th neighbour (zero-padded), ``valid`` marks real
    neighbours, and ``values`` the neighbour covariate values. The kernel is
    diagonal Gaussian with a_k = log(1 / Sigma_kk) per coordinate.
    """

    sq_diffs: np.ndarray
    valid: np.ndarray
    values: np.ndarray

    @property
    def bandwidth_dim(self):
        return self.sq_diffs.shape[2]

    @classmethod
    def build(cls, points, neighbor_sets, neighbor_values):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n, d = points.shape
        if len(neighbor_sets) != n or len(neighbor_values) != n:
            raise ValueError("neighbour lists must align with the observations")
        sizes = [len(ns) for ns in neighbor_sets]
        if min(sizes) == 0:
            raise ValueError("empty neighbour set")
        L = max(sizes)
        sq = np.zeros((n, L, d))
        valid = np.zeros((n, L), dtype=bool)
        vals = np.zeros((n, L))
        for i, (ns, zv) in enumerate(zip(neighbor_sets, neighbor_values)):
            if len(ns) != len(zv):
                raise ValueError(f"neighbour values misaligned at observation {i}")
            coords = points[np.asarray(ns, dtype=int)]
            m = len(ns)
            sq[i, :m] = (coords - points[i]) ** 2
            valid[i, :m] = True
            vals[i, :m] = np.asarray(zv, dtype=float)
            if m >= 2 and np.all(coords == coords[0]):
                warnings.warn(
                    f"observation {i}: all neighbours share one coordinate, "
                    "kernel weights are degenerate",
                    stacklevel=2,
                )
        return cls(sq_diffs=sq, valid=valid, values=vals)


def _kernel_raw(cfg, a_bw, order):
    """Raw kernel-smooth values and derivative stacks in the log-precisions."""
    d = cfg.bandwidth_dim
    if a_bw.size != d:
        raise ValueError("bandwidth parameter length does not match coordinates")
    sq = cfg.sq_diffs
    valid = cfg.valid
    z = cfg.values
    c = -0.5 * sq * np.exp(a_bw)[None, None, :]
    c = np.where(valid[:, :, None], c, 0.0)
    logits = np.where(valid, c.sum(axis=2), -np.inf)
    mx = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - mx)
    kap = e / e.sum(axis=1, keepdims=True)

    s = (kap * z).sum(axis=1)
    g = h = t3 = None
    if order >= 1:
        Sj = np.einsum("nu,nuj->nj", kap, c)
        ecen = c - Sj[:, None, :]
        k1 = kap[:, :, None] * ecen
        g = np.einsum("nuj,nu->nj", k1, z)
    if order >= 2:
        eye = np.eye(d)
        # T[n,j,k] = sum_f kappa_f^k L_f^j for the diagonal Gaussian log-kernel
        T = np.einsum("nfk,nfj->njk", k1, c)
        A = eye[None, None] * ecen[:, :, :, None] - T[:, None, :, :]
        k2 = k1[:, :, None, :] * ecen[:, :, :, None] + kap[:, :, None, None] * A
        h = np.einsum("nujk,nu->njk", k2, z)
    if order >= 3:
        U = np.einsum("nfkl,nfj->njkl", k2, c)
        eye3 = np.einsum("jk,kl->jkl", eye, eye)
        B = (
            eye3[None, None] * ecen[:, :, :, None, None]
            - U[:, None]
            - eye[None, None, :, None, :] * T[:, None, :, :, None]
            - eye[None, None, :, :, None] * T[:, None, :, None, :]
        )
        k3 = (
            k2[:, :, None, :, :] * ecen[:, :, :, None, None]
            + k1[:, :, None, :, None] * A[:, :, :, None, :]
            + k1[:, :, None, None, :] * A[:, :, :, :, None]
            + kap[:, :, None, None, None] * B
        )
        t3 = np.einsum("nujkl,nu->njkl", k3, z)
    return s, g, h, t3


def kernel_smooth_eval(cfg, a, max_deriv=2, center=None):
    """Standardized kernel-smoothing state at ``a = [a0, a_bandwidth]``."""
    a = _check_a(a)
    raw = _kernel_raw(cfg, a[1:], order=max_deriv)
    return _standardized_state("kernel_smooth", a, *raw, order=max_deriv, center=center)


# ---------------------------------------------------------------------------
# linear combinations (single index)


def linear_index_eval(X, a, max_deriv=2):
    """Linear-combination state; ``X`` must already be column-centred.

    The gradient is the design itself and all higher derivatives vanish, so
    no a0 scale parameter is carried (||a|| plays that role).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = _check_a(a)
    if X.shape[1] != a.size:
        raise ValueError("index coefficient length does not match design")
    return TransformState(kind="linear_index", a=a, s_tilde=X @ a, grad=X)


def single_index_init(X, c=1.0):
    """First right singular vector of the centred design, scaled so the
    sample variance of the index is c, with the reporting sign convention."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    a = vt[0]
    v = float(a @ (Xc.T @ (Xc @ a))) / X.shape[0]
    if v <= 0:
        a = np.zeros(X.shape[1])
        a[0] = 1.0
        return a
    return sign_convention(a * np.sqrt(c / v))


def sign_convention(a):
    """Flip so the largest-magnitude entry is positive (reporting only)."""
    a = np.asarray(a, dtype=float)
    j = int(np.argmax(np.abs(a)))
    return -a if a[j] < 0 else a.copy()


# ---------------------------------------------------------------------------
# variance-scaling penalty


@dataclass
class ScalingPenalty:
    """q = (var(s_tilde) - c)^2 with derivatives in ``a``; ``hess_rho`` is
    the directional derivative of the Hessian along a given da/drho."""

    c: float
    value: float
    grad: np.ndarray
    hess: np.ndarray
    hess_rho: Optional[np.ndarray] = None


def scaling_penalty_general(state, c=1.0, da_drho=None):
    """General-path penalty derivatives from the transformation stacks."""
    if c <= 0:
        raise ValueError("target variance c must be positive")
    s = state.s_tilde
    n = s.shape[0]
    Ma = state.grad
    Hs = state.hess
    var = float(s @ s) / n
    gvec = Ma.T @ s
    C = Ma.T @ Ma
    if Hs is None:
        P = np.zeros_like(C)
    else:
        P = np.einsum("i,ijk->jk", s, Hs)
    value = (var - c) ** 2
    grad = (4.0 / n) * (var - c) * gvec
    hess = (4.0 / n) * ((2.0 / n) * np.outer(gvec, gvec) + (var - c) * (C + P))
    hess_rho = None
    if da_drho is not None:
        da = np.asarray(da_drho, dtype=float)
        ds = Ma @ da
        dMa = np.zeros_like(Ma) if Hs is None else np.einsum("ijk,k->ij", Hs, da)
        if state.third is None and Hs is not None:
            raise ValueError("third-order stack required for the rho-derivative")
        dHs = (
            np.zeros((n, Ma.shape[1], Ma.shape[1]))
            if state.third is None
            else np.einsum("ijkl,l->ijk", state.third, da)
        )
        dvar = 2.0 / n * float(s @ ds)
        dg = dMa.T @ s + C @ da
        dC = dMa.T @ Ma + Ma.T @ dMa
        dP = np.einsum("i,ijk->jk", ds, Hs) if Hs is not None else np.zeros_like(C)
        dP = dP + np.einsum("i,ijk->jk", s, dHs)
        hess_rho = (4.0 / n) * (
            (2.0 / n) * (np.outer(dg, gvec) + np.outer(gvec, dg))
            + dvar * (C + P)
            + (var - c) * (dC + dP)
        )
    return ScalingPenalty(c=c, value=value, grad=grad, hess=hess, hess_rho=hess_rho)


def scaling_penalty_eval(state, c=1.0, da_drho=None):
    """Penalty derivatives; single-index states use the closed forms based
    on the empirical covariance of the index design."""
    if c <= 0:
        raise ValueError("target variance c must be positive")
    if state.kind != "linear_index":
        return scaling_penalty_general(state, c=c, da_drho=da_drho)
    X = state.grad
    n = X.shape[0]
    a = state.a
    Sig = X.T @ X / n
    Sa = Sig @ a
    var = float(a @ Sa)
    value = (var - c) ** 2
    grad = 4.0 * (var - c) * Sa
    hess = 8.0 * np.outer(Sa, Sa) + 4.0 * (var - c) * Sig
    hess_rho = None
    if da_drho is not None:
        da = np.asarray(da_drho, dtype=float)
        Sda = Sig @ da
        hess_rho = 8.0 * (np.outer(Sa, Sda) + np.outer(Sda, Sa) + float(a @ Sda) * Sig)
    return ScalingPenalty(c=c, value=value, grad=grad, hess=hess, hess_rho=hess_rho)
