"""Critical and slow manifolds as lines in the (u_hat, v_hat) plane.

All eigenvectors of M_k are k-independent: the eigenvector for the root
(tr + s omega)/2 is proportional to (2 beta, eps (delta - nu + mu) - alpha
+ s eps omega).  Every invariant line is therefore one relation
sigma u - 2 beta v = 0 imposed on all modes at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import mode_propagator, solve_full
from .core import (
    FOUR_PI2,
    SpectralField,
    SpectralPair,
    SystemParams,
    derive_constants,
    pair_norm,
)

RESIDUAL_FLOOR = 1e-30

KINDS = ("slow_eps", "fast_eps", "critical")


class DegenerateLineError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ManifoldLine:
    sigma: float
    beta: float
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")

    @property
    def slope(self) -> float:
        """v / u along the line."""
        return self.sigma / (2.0 * self.beta)

    @property
    def direction(self) -> np.ndarray:
        return np.array([2.0 * self.beta, self.sigma])


@dataclass(frozen=True)
class ManifoldDiagnostics:
    max_residual: float
    attraction_rate_measured: float
    graph_distance: float


def slow_manifold(params: SystemParams) -> ManifoldLine:
    return ManifoldLine(derive_constants(params).sigma_slow, params.beta, "slow_eps")


def fast_manifold(params: SystemParams) -> ManifoldLine:
    return ManifoldLine(derive_constants(params).sigma_fast, params.beta, "fast_eps")


def critical_manifold(params: SystemParams) -> ManifoldLine:
    return ManifoldLine(-2.0 * params.alpha, params.beta, "critical")


def scaled_slow_eigenvector(params: SystemParams) -> np.ndarray:
    """eps times the slow eigenvector (2 beta/eps, ...) of M_k."""
    return slow_manifold(params).direction


def residual(line: ManifoldLine, state: SpectralPair) -> float:
    """Worst per-mode violation of the line relation, relative to the state norm."""
    r = line.sigma * state.u_hat.coeffs - 2.0 * line.beta * state.v_hat.coeffs
    worst = float(np.max(np.abs(r), initial=0.0))
    return worst / max(pair_norm(state), RESIDUAL_FLOOR)


def project_to_manifold(line: ManifoldLine, v: SpectralField) -> SpectralPair:
    if line.sigma == 0:
        raise DegenerateLineError("sigma = 0: the line is u = 0 and cannot be parametrised by v")
    return SpectralPair(v * (2.0 * line.beta / line.sigma), v)


def graph_distance(line_a: ManifoldLine, line_b: ManifoldLine, M: float) -> float:
    """Distance between two lines over first components bounded by M.

    Points with the same u are paired, so the distance is M times the
    mismatch of the slopes v/u.  For lines through the origin this bounds
    the Hausdorff distance of the truncated sets.
    """
    if not M > 0:
        raise ValueError(f"M must be positive, got {M}")
    return M * abs(line_a.slope - line_b.slope)


def reduced_slow_exponents(params: SystemParams, k2) -> np.ndarray:
    """Per-mode rate of v on the slow manifold, u eliminated via the line."""
    dc = derive_constants(params)
    if dc.sigma_slow == 0:
        raise DegenerateLineError("sigma_slow = 0")
    p = params
    k2 = np.asarray(k2, dtype=float)
    return -FOUR_PI2 * k2 - p.nu + p.delta + 2.0 * p.beta * p.gamma / dc.sigma_slow


def reduced_slow_exponent(params: SystemParams, k) -> float:
    return float(reduced_slow_exponents(params, _k2(k)))


def _k2(k) -> float:
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return float(np.dot(k, k))


def _eigen_coordinates(params: SystemParams, w: np.ndarray) -> np.ndarray:
    """Coefficients of w in the (slow, fast) eigenbasis."""
    basis = np.column_stack([slow_manifold(params).direction, fast_manifold(params).direction])
    return np.linalg.solve(basis, w)


def attraction_rate(params: SystemParams, k, t_window, state=None):
    """Measured exponential rate of the fast eigencomponent of one mode.

    ``t_window`` is either the end time T of [0, T] or a pair (t0, t1).
    ``state`` defaults to (1, 0), which is off both eigenlines.  Returns
    None when the state has no fast component.
    """
    if np.ndim(t_window) == 0:
        t0, t1 = 0.0, float(t_window)
    else:
        t0, t1 = map(float, t_window)
    dc = derive_constants(params)
    lam_f = dc.lambda_fast_at(_k2(k))
    if (t1 - t0) * abs(lam_f) < 1:
        raise ValueError(f"window {t1 - t0:g} too short to resolve rate {lam_f:g}")
    w = np.array([1.0, 0.0]) if state is None else np.asarray(state, dtype=float)
    c_init = _eigen_coordinates(params, w)
    if abs(c_init[1]) <= 1e-12 * max(np.linalg.norm(c_init), 1e-300):
        return None
    c0 = _eigen_coordinates(params, mode_propagator(params, k, t0) @ w)[1]
    c1 = _eigen_coordinates(params, mode_propagator(params, k, t1) @ w)[1]
    return math.log(abs(c1) / abs(c0)) / (t1 - t0)


def diagnose(params: SystemParams, state: SpectralPair, times, M: float = 1.0, k=0.0) -> ManifoldDiagnostics:
    """Invariance residual of a trajectory, attraction rate and distance to C0."""
    line = slow_manifold(params)
    res = max(residual(line, solve_full(params, state, float(t))) for t in times)
    lam_f = derive_constants(params).lambda_fast_at(_k2(k))
    rate = attraction_rate(params, k, 2.0 / abs(lam_f))
    return ManifoldDiagnostics(
        max_residual=res,
        attraction_rate_measured=abs(rate),
        graph_distance=graph_distance(line, critical_manifold(params), M),
    )
