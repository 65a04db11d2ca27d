"""Convergence experiments over an eps ladder.

Every experiment evaluates closed-form solutions on a fixed time grid and
reports sup-over-time quantities together with log-log rate fits.  Unknown
constants in the inequalities are calibrated on the coarsest eps and then
applied unchanged to all finer eps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import analytic, manifold
from .core import (
    SpectralField,
    SpectralLattice,
    SpectralPair,
    SystemParams,
    build_lattice,
    derive_constants,
    h0_map,
    h2_norm,
    pair_norm,
    sample_gaussian,
    validate_params,
)

log = logging.getLogger(__name__)

#: Relative size below which the difference of two computed fields is
#: indistinguishable from rounding in its operands.
NOISE_RTOL = 1e-13

#: Slack for ratios that are exactly 1 in exact arithmetic.
ROUNDING_RTOL = 1e-9

P1 = dict(alpha=-1.0, beta=1.0, gamma=1.0, delta=-2.0, mu=0.0, nu=1.0)


class FitError(ValueError):
    pass


class ExactZeroError(FitError):
    """A fitted quantity is identically zero, so there is no rate to fit."""


@dataclass(frozen=True)
class GaussianMixture:
    """Finite sum of amp_i * exp(-a_i |x|^2)."""

    a: tuple[float, ...]
    amp: tuple[float, ...]

    def __post_init__(self):
        if len(self.a) != len(self.amp):
            raise ValueError("Gaussian mixture needs as many rates as amplitudes")

    def sample(self, lattice: SpectralLattice) -> SpectralField:
        out = SpectralField.zeros(lattice)
        for a, amp in zip(self.a, self.amp):
            out = out + sample_gaussian(lattice, a, amp)
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    base: dict
    eps_ladder: tuple[float, ...] = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    dim: int = 1
    cutoff: float = 8.0
    dk: float = 0.01
    v0: GaussianMixture = GaussianMixture((0.5,), (1.0,))
    u0: GaussianMixture | None = GaussianMixture((1.0,), (0.5,))
    on_critical: bool = True
    T: float = 2.0
    samples: int = 64
    decades: float = 3.0
    seed: int = 0
    name: str = "base"
    families: tuple = ()

    def validate(self) -> "ExperimentConfig":
        eps = self.eps_ladder
        if len(eps) < 4:
            raise ValueError(f"eps ladder needs at least 4 points, got {len(eps)}")
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps ladder must be positive and strictly decreasing")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.samples < 1:
            raise ValueError("need at least one time sample")
        if not self.on_critical and self.u0 is None:
            raise ValueError("on_critical=false requires a u0 specification")
        for e in eps:
            self.params_at(e)
        return self

    def params_at(self, eps: float) -> SystemParams:
        return validate_params(SystemParams(eps=float(eps), **{k: float(v) for k, v in self.base.items()}))

    def lattice(self) -> SpectralLattice:
        return build_lattice(self.dim, self.cutoff, self.dk)

    def times(self) -> np.ndarray:
        """Log-spaced grid in (0, T]; doubling ``samples`` yields a superset."""
        m = np.arange(self.samples - 1, -1, -1)
        return self.T * 10.0 ** (-self.decades * m / self.samples)

    def initial_data(self, lattice: SpectralLattice, params: SystemParams) -> SpectralPair:
        v0 = self.v0.sample(lattice)
        u0 = h0_map(v0, params) if self.on_critical else self.u0.sample(lattice)
        return SpectralPair(u0, v0)

    def family(self, name: str, overrides: dict) -> "ExperimentConfig":
        return replace(self, base={**self.base, **overrides}, name=name, families=())


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple

    def predict(self, eps):
        return math.exp(self.intercept) * np.asarray(eps) ** self.slope

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "points": [list(p) for p in self.points],
        }


def fit_rate(points) -> RateFit:
    """Least squares on (log eps, log value)."""
    pts = [(float(e), float(v)) for e, v in points]
    if len(pts) < 4:
        raise FitError(f"rate fit needs at least 4 points, got {len(pts)}")
    if any(v == 0 for _, v in pts):
        raise ExactZeroError("value identically zero: the quantity is exact, not a rate")
    if any(v < 0 or e <= 0 for e, v in pts):
        raise FitError("rate fit needs positive eps and values")
    x = np.log([e for e, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), tuple(pts))


# --------------------------------------------------------------------------
# Semiflow convergence


@dataclass
class ConvergenceResult:
    eps: np.ndarray
    times: np.ndarray
    error: np.ndarray  # (n_eps, n_t)
    layer: np.ndarray  # e^{(alpha/eps - mu) t} |u0 - h0(v0)|
    d0: float  # |u0 - h0(v0)|
    v0_norm: float
    on_critical: bool
    fit: RateFit | None = None
    layer_fit: RateFit | None = None

    @property
    def sup_error(self) -> np.ndarray:
        return self.error.max(axis=1)

    @property
    def t_sup(self) -> np.ndarray:
        return self.times[self.error.argmax(axis=1)]

    @property
    def sup_layer_corrected(self) -> np.ndarray:
        """sup_t |error - layer|: the size of what remains once the layer is removed."""
        return np.abs(self.error - self.layer).max(axis=1)

    def rows(self):
        fit_slope = self.fit.slope if self.fit else float("nan")
        return [
            (e, t, s, fit_slope)
            for e, t, s in zip(self.eps, self.t_sup, self.sup_error)
        ]


def semiflow_error(params: SystemParams, state0: SpectralPair, t: float) -> float:
    full = analytic.solve_full(params, state0, t)
    lim = analytic.solve_limit(params, state0.v_hat, t)
    return pair_norm(full - lim)


def convergence_ladder(cfg: ExperimentConfig) -> ConvergenceResult:
    cfg.validate()
    lat = cfg.lattice()
    times = cfg.times()
    errs, layers = [], []
    d0 = v0n = 0.0
    for e in cfg.eps_ladder:
        p = cfg.params_at(e)
        state0 = cfg.initial_data(lat, p)
        d0 = h2_norm(state0.u_hat - h0_map(state0.v_hat, p))
        v0n = h2_norm(state0.v_hat)
        errs.append([semiflow_error(p, state0, t) for t in times])
        layers.append(np.exp((p.alpha / p.eps - p.mu) * times) * d0)
        log.debug("eps=%g sup error %.3e", e, max(errs[-1]))
    res = ConvergenceResult(
        eps=np.array(cfg.eps_ladder),
        times=times,
        error=np.array(errs),
        layer=np.array(layers),
        d0=d0,
        v0_norm=v0n,
        on_critical=cfg.on_critical,
    )
    try:
        res.fit = fit_rate(zip(res.eps, res.sup_error))
    except ExactZeroError:
        res.fit = None
    if d0 > 0:
        corrected = res.sup_layer_corrected
        if np.all(corrected > 0):
            res.layer_fit = fit_rate(zip(res.eps, corrected))
    return res


@dataclass
class LayerBoundCheck:
    """error(t) <= C eps (|u0 - h0 v0| + |v0|) + layer_coef * e^{(alpha/eps - mu)t} |u0 - h0 v0|."""

    C: float
    layer_coef: str
    ratios: np.ndarray  # per eps: max_t error / bound
    passed: bool


def layer_bound_check(res: ConvergenceResult, layer_coef: str = "unit") -> LayerBoundCheck:
    """Calibrate C at the coarsest eps and test every eps.

    ``layer_coef="unit"`` puts coefficient 1 on the initial-layer term;
    ``"fitted"`` multiplies the layer term by the same C as the O(eps) term.
    """
    eps = res.eps[:, None]
    drive = eps * (res.d0 + res.v0_norm)
    if layer_coef == "unit":
        C = float(np.max((res.error[0] - res.layer[0]) / drive[0]))
        C = max(C, 0.0)
        bound = C * drive + res.layer
    elif layer_coef == "fitted":
        shape = drive + res.layer
        C = float(np.max(res.error[0] / shape[0]))
        bound = C * shape
    else:
        raise ValueError(f"unknown layer coefficient {layer_coef!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(bound > 0, res.error / bound, np.where(res.error > 0, np.inf, 0.0))
    ratios = r.max(axis=1)
    return LayerBoundCheck(C, layer_coef, ratios, bool(np.all(ratios <= 1 + ROUNDING_RTOL)))


# --------------------------------------------------------------------------
# Intermediate estimates of the O(eps) proof


BOUNDS = ("i", "ii", "iii")


@dataclass
class BoundEntry:
    name: str
    C: float
    max_ratio: float
    passed: bool
    exact: bool = False  # left side identically zero
    ratios: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class BoundReport:
    family: str
    eps: np.ndarray
    times: np.ndarray
    lhs: dict
    rhs: dict
    entries: dict

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries.values())

    def rows(self):
        out = []
        for name in BOUNDS:
            for i, e in enumerate(self.eps):
                for j, t in enumerate(self.times):
                    out.append((self.family, name, e, t, self.lhs[name][i, j], self.rhs[name][i, j]))
        return out


def _diff_norm(a: SpectralField, b: SpectralField) -> float:
    d = h2_norm(a - b)
    floor = NOISE_RTOL * (h2_norm(a) + h2_norm(b))
    return d if d > floor else 0.0


def bound_sides(p: SystemParams, state0: SpectralPair, times) -> tuple[dict, dict]:
    u0, v0 = state0.u_hat, state0.v_hat
    kappa = derive_constants(p).kappa
    d0 = h2_norm(u0 - h0_map(v0, p))
    v0n = h2_norm(v0)
    lhs = {b: [] for b in BOUNDS}
    rhs = {b: [] for b in BOUNDS}
    running = 0.0
    for t in times:
        full = analytic.solve_full(p, state0, t)
        lim = analytic.solve_limit(p, v0, t)
        tilde = analytic.solve_aux_tilde(p, u0, v0, t)
        eps0 = analytic.solve_aux_eps0(p, u0, v0, t)
        running = max(running, _diff_norm(full.v_hat, lim.v_hat))
        lhs["i"].append(_diff_norm(full.u_hat, tilde))
        rhs["i"].append(running)
        lhs["ii"].append(_diff_norm(eps0, tilde))
        rhs["ii"].append(p.eps * math.exp(kappa * t) * v0n)
        lhs["iii"].append(_diff_norm(eps0, lim.u_hat))
        rhs["iii"].append(math.exp((p.alpha / p.eps - p.mu) * t) * d0)
    return ({b: np.array(v) for b, v in lhs.items()}, {b: np.array(v) for b, v in rhs.items()})


def _ratio(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))


def _calibrate(name: str, lhs: np.ndarray, rhs: np.ndarray) -> BoundEntry:
    if not np.any(lhs > 0):
        return BoundEntry(name, 0.0, 0.0, True, exact=True, ratios=np.zeros(lhs.shape[0]))
    C = float(np.max(_ratio(lhs[0], rhs[0])))
    if C == 0:
        # nothing to calibrate on: any nonzero left side at finer eps is a violation
        ratios = np.where(np.any(lhs > 0, axis=1), np.inf, 0.0)
    else:
        ratios = np.max(_ratio(lhs, C * rhs), axis=1)
    max_ratio = float(np.max(ratios))
    return BoundEntry(name, C, max_ratio, max_ratio <= 1 + ROUNDING_RTOL, ratios=ratios)


def proposition_bounds(cfg: ExperimentConfig) -> BoundReport:
    cfg.validate()
    lat = cfg.lattice()
    times = cfg.times()
    L = {b: [] for b in BOUNDS}
    R = {b: [] for b in BOUNDS}
    for e in cfg.eps_ladder:
        p = cfg.params_at(e)
        lhs, rhs = bound_sides(p, cfg.initial_data(lat, p), times)
        for b in BOUNDS:
            L[b].append(lhs[b])
            R[b].append(rhs[b])
    L = {b: np.array(v) for b, v in L.items()}
    R = {b: np.array(v) for b, v in R.items()}
    entries = {b: _calibrate(b, L[b], R[b]) for b in BOUNDS}
    return BoundReport(cfg.name, np.array(cfg.eps_ladder), times, L, R, entries)


# --------------------------------------------------------------------------
# Slow manifold versus critical manifold


@dataclass
class ManifoldResult:
    eps: np.ndarray
    sigma_slow: np.ndarray
    distance: np.ndarray
    rate_gap: np.ndarray
    identity_gap: np.ndarray  # max_k |reduced rate - lambda_slow| / |lambda_slow|
    residual: np.ndarray
    eigvec_gap: np.ndarray  # |eps w_slow - (2 beta, -2 alpha)|
    distance_fit: RateFit | None
    rate_gap_fit: RateFit | None
    eigvec_C: float
    eigvec_ratios: np.ndarray

    def rows(self):
        return list(
            zip(self.eps, self.sigma_slow, self.distance, self.rate_gap, self.identity_gap, self.residual, self.eigvec_gap)
        )


INVARIANCE_TIMES = np.linspace(0.0, 2.0, 20)


def manifold_convergence(cfg: ExperimentConfig, M: float = 1.0) -> ManifoldResult:
    cfg.validate()
    lat = cfg.lattice()
    v0 = cfg.v0.sample(lat)
    rows = []
    for e in cfg.eps_ladder:
        p = cfg.params_at(e)
        dc = derive_constants(p)
        slow = manifold.slow_manifold(p)
        crit = manifold.critical_manifold(p)
        dist = manifold.graph_distance(slow, crit, M)
        reduced = manifold.reduced_slow_exponents(p, lat.k2)
        limit = analytic.limit_rate(p, lat.k2)
        lam = dc.lambda_slow_at(lat.k2)
        gap = float(np.max(np.abs(reduced - limit)))
        ident = float(np.max(np.abs(reduced - lam) / np.maximum(np.abs(lam), 1e-300)))
        state0 = manifold.project_to_manifold(slow, v0)
        resid = max(manifold.residual(slow, analytic.solve_full(p, state0, t)) for t in INVARIANCE_TIMES)
        w = manifold.scaled_slow_eigenvector(p)
        eig = float(np.linalg.norm(w - np.array([2.0 * p.beta, -2.0 * p.alpha])))
        rows.append((e, dc.sigma_slow, dist, gap, ident, resid, eig))
    a = np.array(rows)
    eps = a[:, 0]

    def _fit(vals):
        try:
            return fit_rate(zip(eps, vals))
        except ExactZeroError:
            return None

    eig_C = float(a[0, 6] / eps[0])
    eig_ratios = a[:, 6] / (eig_C * eps) if eig_C > 0 else np.zeros_like(eps)
    return ManifoldResult(
        eps=eps,
        sigma_slow=a[:, 1],
        distance=a[:, 2],
        rate_gap=a[:, 3],
        identity_gap=a[:, 4],
        residual=a[:, 5],
        eigvec_gap=a[:, 6],
        distance_fit=_fit(a[:, 2]),
        rate_gap_fit=_fit(a[:, 3]),
        eigvec_C=eig_C,
        eigvec_ratios=eig_ratios,
    )


# --------------------------------------------------------------------------
# Cross-checks against the reference integrator and the eigen-identities


ORACLE_TIMES = (0.1, 0.5, 1.0)


def random_params(rng: np.random.Generator, n: int, eps_range=(0.01, 0.1)) -> list[SystemParams]:
    """Draw ``n`` valid parameter sets with moderate coefficients.

    eps is drawn as 1/m for an integer m so that eps/100 divides every
    sample time exactly.
    """
    m_lo, m_hi = math.ceil(1 / eps_range[1]), math.floor(1 / eps_range[0])
    out = []
    while len(out) < n:
        sign = rng.choice([-1.0, 1.0], size=2)
        p = SystemParams(
            alpha=float(-rng.uniform(0.5, 2.0)),
            beta=float(sign[0] * rng.uniform(0.5, 1.5)),
            gamma=float(sign[1] * rng.uniform(0.5, 1.5)),
            delta=float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)),
            mu=float(rng.uniform(0.0, 1.0)),
            nu=float(rng.uniform(-1.0, 1.0)),
            eps=1.0 / int(rng.integers(m_lo, m_hi + 1)),
        )
        try:
            out.append(validate_params(p))
        except ValueError:
            continue
    return out


def oracle_errors(params: SystemParams, state0: SpectralPair, times=ORACLE_TIMES, dt_ratio: float = 0.01) -> list:
    """Relative H2 x H2 gap between the exact solution and RK4 at each time."""
    from .oracle import OracleConfig, rk4_full

    cfg = OracleConfig(dt=params.eps * dt_ratio)
    out = []
    state, t_prev = state0, 0.0
    for t in times:
        state = rk4_full(params, state, t - t_prev, cfg)
        t_prev = t
        exact = analytic.solve_full(params, state0, t)
        out.append((t, pair_norm(exact - state) / pair_norm(exact)))
    return out


def eigen_residuals(params: SystemParams, k2) -> tuple[np.ndarray, np.ndarray]:
    """Relative residuals of the characteristic polynomial and M w = lambda w.

    The polynomial residual is scaled by lambda^2 + |tr lambda| + |det| and
    the pairing residual by |M| |w|, the usual backward-error scalings.
    """
    dc = derive_constants(params)
    k2 = np.asarray(k2, dtype=float)
    M = analytic.mode_matrices(params, k2)
    tr, det = dc.trace_at(k2), dc.det_at(k2)
    poly, pair = [], []
    for lam, sig in ((dc.lambda_slow_at(k2), dc.sigma_slow), (dc.lambda_fast_at(k2), dc.sigma_fast)):
        lam = np.asarray(lam)
        poly.append(np.abs(lam**2 - tr * lam + det) / (lam**2 + np.abs(tr * lam) + np.abs(det)))
        w = np.array([2.0 * params.beta, sig]) / params.eps
        r = M @ w - lam[..., None] * w
        pair.append(np.linalg.norm(r, axis=-1) / (np.linalg.norm(M, 2, axis=(-2, -1)) * np.linalg.norm(w)))
    return np.maximum(*poly), np.maximum(*pair)
