"""Exact per-mode propagators for the full, limit and auxiliary systems.

Each wavenumber obeys w' = M_k w with

    M_k = [[alpha/eps - mu - 4 pi^2 |k|^2,  beta/eps             ],
           [gamma,                          delta - nu - 4 pi^2|k|^2]]

The eigenvalue gap of M_k is omega (independent of k), so the exponential
is assembled from the two spectral projectors

    exp(M t) = (e^{l_s t} (M - l_f) - e^{l_f t} (M - l_s)) / (l_s - l_f).

Every solver advances from t = 0 in a single exact step.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .core import (
    FOUR_PI2,
    SpectralField,
    SpectralPair,
    SystemParams,
    derive_constants,
    h0_map,
)

#: Below this ratio omega / |M| the projector formula loses accuracy and the
#: propagator falls back to scaling-and-squaring.
PROJECTOR_RTOL = 1e-8


class DegenerateParameterError(ArithmeticError):
    pass


def _k2(k) -> float:
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return float(np.dot(k, k))


def mode_matrices(params: SystemParams, k2) -> np.ndarray:
    """Stack of M_k for an array of |k|^2 values, shape (..., 2, 2)."""
    p = params
    k2 = np.asarray(k2, dtype=float)
    out = np.empty(k2.shape + (2, 2))
    out[..., 0, 0] = p.alpha / p.eps - p.mu - FOUR_PI2 * k2
    out[..., 0, 1] = p.beta / p.eps
    out[..., 1, 0] = p.gamma
    out[..., 1, 1] = p.delta - p.nu - FOUR_PI2 * k2
    return out


def mode_matrix(params: SystemParams, k) -> np.ndarray:
    """M_k for a single wavevector (scalar or length-n sequence)."""
    return mode_matrices(params, _k2(k))


def propagators(params: SystemParams, k2, t: float) -> np.ndarray:
    """exp(M_k t) for every |k|^2 in ``k2``, shape (..., 2, 2)."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    M = mode_matrices(params, k2)
    dc = derive_constants(params)
    scale = np.max(np.abs(M), axis=(-2, -1))
    if np.any(dc.omega_eps <= PROJECTOR_RTOL * scale):
        return scipy.linalg.expm(M * t)
    ls = np.asarray(dc.lambda_slow_at(k2))
    lf = np.asarray(dc.lambda_fast_at(k2))
    es = np.exp(ls * t)[..., None, None]
    ef = np.exp(lf * t)[..., None, None]
    eye = np.eye(2)
    gap = (ls - lf)[..., None, None]
    return (es * (M - lf[..., None, None] * eye) - ef * (M - ls[..., None, None] * eye)) / gap


def mode_propagator(params: SystemParams, k, t: float) -> np.ndarray:
    return propagators(params, _k2(k), t)


def solve_full(params: SystemParams, state0: SpectralPair, t: float) -> SpectralPair:
    """Time-t map of the full system applied mode by mode."""
    lat = state0.lattice
    P = propagators(params, lat.k2, t)
    u0 = state0.u_hat.coeffs
    v0 = state0.v_hat.coeffs
    u = P[:, 0, 0] * u0 + P[:, 0, 1] * v0
    v = P[:, 1, 0] * u0 + P[:, 1, 1] * v0
    return SpectralPair(SpectralField(lat, u), SpectralField(lat, v))


def limit_rate(params: SystemParams, k2):
    """Per-mode growth rate -4 pi^2 |k|^2 + kappa of the reduced equation."""
    return -FOUR_PI2 * np.asarray(k2, dtype=float) + derive_constants(params).kappa


def solve_limit(params: SystemParams, v0: SpectralField, t: float) -> SpectralPair:
    """Limit system: heat flow with rate kappa for v, u slaved by h0."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    lat = v0.lattice
    v = SpectralField(lat, np.exp(limit_rate(params, lat.k2) * t) * v0.coeffs)
    return SpectralPair(h0_map(v, params), v)


def _aux_denominator(params: SystemParams) -> float:
    p = params
    kappa = derive_constants(p).kappa
    den = -p.alpha + p.eps * p.mu + p.eps * kappa
    if den == 0:
        raise DegenerateParameterError("-alpha + eps*mu + eps*kappa vanishes; the auxiliary closed forms are undefined")
    return den


def _aux(params: SystemParams, u0: SpectralField, v0: SpectralField, t: float, coef: float) -> SpectralField:
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    p = params
    lat = u0.lattice
    kappa = derive_constants(p).kappa
    heat = np.exp(-FOUR_PI2 * lat.k2 * t)
    fast = np.exp((-p.mu + p.alpha / p.eps) * t)
    slow = np.exp(kappa * t)
    u = heat * (fast * u0.coeffs + coef * (slow - fast) * v0.coeffs)
    return SpectralField(lat, u)


def solve_aux_tilde(params: SystemParams, u0: SpectralField, v0: SpectralField, t: float) -> SpectralField:
    """Fast equation driven by the limit slow variable, without correction.

    eps u' = eps (Lap - mu) u + alpha u + beta v0(t)
    """
    coef = params.beta / _aux_denominator(params)
    return _aux(params, u0, v0, t, coef)


def solve_aux_eps0(params: SystemParams, u0: SpectralField, v0: SpectralField, t: float) -> SpectralField:
    """As ``solve_aux_tilde`` plus the forcing eps (d/dt - Lap + mu) h0(v0(t))."""
    p = params
    kappa = derive_constants(p).kappa
    coef = (p.beta - p.eps * p.beta / p.alpha * (p.mu + kappa)) / _aux_denominator(p)
    return _aux(params, u0, v0, t, coef)
