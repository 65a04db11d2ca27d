"""Fixed-step classical RK4 reference integrators.

Nothing here imports the analytic module: the right-hand sides are rebuilt
from the raw parameters so that agreement between the two is evidence,
not tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import SpectralField, SpectralPair, SystemParams

#: Magnitudes below this are set to zero after each step.  Decaying stiff
#: modes otherwise crawl through the subnormal range, which is very slow.
FLUSH_BELOW = 1e-280

# Real-axis stability limit of classical RK4: |R(z)| <= 1 for z in [-2.785, 0].
RK4_STABILITY = 2.785293563405282

STIFF_LIMIT = 0.5


class StiffnessError(ValueError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    dt: float
    method: str = "rk4"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.method != "rk4":
            raise ValueError(f"only classical rk4 is available, got {self.method!r}")


def _steps(t: float, dt: float) -> int:
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    n = int(round(t / dt))
    if abs(n * dt - t) > 1e-9 * max(1.0, t):
        raise ValueError(f"dt={dt} does not divide t={t}")
    return n


def _rk4(rhs, y, t_end: float, dt: float):
    n = _steps(t_end, dt)
    s = 0.0
    for i in range(n):
        s = i * dt
        k1 = rhs(s, y)
        k2 = rhs(s + 0.5 * dt, [a + 0.5 * dt * b for a, b in zip(y, k1)])
        k3 = rhs(s + 0.5 * dt, [a + 0.5 * dt * b for a, b in zip(y, k2)])
        k4 = rhs(s + dt, [a + dt * b for a, b in zip(y, k3)])
        y = [a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        for a in y:
            a[np.abs(a) < FLUSH_BELOW] = 0.0
    return y


def _entries(p: SystemParams, k2):
    lap = -4.0 * math.pi**2 * k2
    return (p.alpha / p.eps - p.mu + lap, p.beta / p.eps, p.gamma, p.delta - p.nu + lap)


def _check_stability(dt: float, rate_bound: float, what: str):
    if dt * rate_bound > RK4_STABILITY:
        raise StiffnessError(
            f"dt*|rate| = {dt * rate_bound:.3g} exceeds the RK4 stability limit on the lattice ({what})"
        )


def rk4_full(params: SystemParams, state0: SpectralPair, t: float, cfg: OracleConfig) -> SpectralPair:
    p = params
    if cfg.dt > p.eps / 10 * (1 + 1e-12):
        raise StiffnessError(f"dt={cfg.dt} must not exceed eps/10={p.eps / 10}")
    m0 = np.array([[p.alpha / p.eps - p.mu, p.beta / p.eps], [p.gamma, p.delta - p.nu]])
    lam_fast0 = float(np.max(np.abs(np.linalg.eigvals(m0))))
    if cfg.dt * lam_fast0 > STIFF_LIMIT:
        raise StiffnessError(f"dt*|lambda_fast(0)| = {cfg.dt * lam_fast0:.3g} > {STIFF_LIMIT}")
    lat = state0.lattice
    a, b, g, d = _entries(p, lat.k2)
    # infinity-norm of M_k bounds its spectral radius
    bound = float(np.max(np.maximum(np.abs(a) + abs(b), abs(g) + np.abs(d))))
    _check_stability(cfg.dt, bound, "full system")

    def rhs(_s, y):
        u, v = y
        return [a * u + b * v, g * u + d * v]

    u, v = _rk4(rhs, [state0.u_hat.coeffs.copy(), state0.v_hat.coeffs.copy()], t, cfg.dt)
    return SpectralPair(SpectralField(lat, u), SpectralField(lat, v))


def _kappa(p: SystemParams) -> float:
    return -p.nu - p.gamma * p.beta / p.alpha + p.delta


def rk4_limit(params: SystemParams, v0: SpectralField, t: float, cfg: OracleConfig) -> SpectralField:
    """RK4 on v' = (Lap - nu) v - gamma beta/alpha v + delta v."""
    kappa = _kappa(params)
    if cfg.dt * abs(kappa) > STIFF_LIMIT:
        raise StiffnessError(f"dt*|kappa| = {cfg.dt * abs(kappa):.3g} > {STIFF_LIMIT}")
    lat = v0.lattice
    rate = -4.0 * math.pi**2 * lat.k2 + kappa
    _check_stability(cfg.dt, float(np.max(np.abs(rate))), "limit equation")
    (v,) = _rk4(lambda _s, y: [rate * y[0]], [v0.coeffs.copy()], t, cfg.dt)
    return SpectralField(lat, v)


def rk4_aux(params: SystemParams, which: str, u0: SpectralField, v0: SpectralField, t: float,
            cfg: OracleConfig) -> SpectralField:
    """Integrate one of the two auxiliary fast equations.

    ``which="tilde"``:  eps u' = eps (Lap - mu) u + alpha u + beta v0(s)
    ``which="eps0"``:   the same plus eps (d/ds - Lap + mu) h0(v0(s))

    The drive v0(s) is evaluated in closed form at every stage, so only the
    fast equation is being integrated.
    """
    if which not in ("tilde", "eps0"):
        raise ValueError(f"which must be 'tilde' or 'eps0', got {which!r}")
    p = params
    fast0 = p.alpha / p.eps - p.mu
    if cfg.dt * abs(fast0) > STIFF_LIMIT:
        raise StiffnessError(f"dt*|alpha/eps - mu| = {cfg.dt * abs(fast0):.3g} > {STIFF_LIMIT}")
    lat = u0.lattice
    lap = -4.0 * math.pi**2 * lat.k2
    rate = fast0 + lap
    _check_stability(cfg.dt, float(np.max(np.abs(rate))), "auxiliary equation")
    kappa = _kappa(p)
    slow_rate = lap + kappa
    h0 = -p.beta / p.alpha
    vhat0 = v0.coeffs

    if which == "tilde":
        def forcing(s):
            return (p.beta / p.eps) * np.exp(slow_rate * s) * vhat0
    else:
        def forcing(s):
            v = np.exp(slow_rate * s) * vhat0
            # (d/ds - Lap + mu) applied to h0 v, with dv/ds = slow_rate v
            corr = h0 * (slow_rate - lap + p.mu) * v
            return (p.beta / p.eps) * v + corr

    (u,) = _rk4(lambda s, y: [rate * y[0] + forcing(s)], [u0.coeffs.copy()], t, cfg.dt)
    return SpectralField(lat, u)
