"""Parameters, wavenumber lattices, spectral fields and H^2 norms.

The system under study is, for t >= 0,

    eps u_t = eps (Lap - mu) u + alpha u + beta v
        v_t =     (Lap - nu) v + gamma u + delta v

on R^n.  Under the Fourier transform (convention exp(-2 pi i k x)) the
Laplacian becomes multiplication by -4 pi^2 |k|^2, so every wavenumber
evolves independently.  R^n is replaced by a truncated symmetric lattice of
wavenumbers and the Fourier integral by a rectangle rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

FOUR_PI2 = 4.0 * math.pi**2

#: Mode count above which ``build_lattice`` refuses to allocate.
MAX_MODES = 4_000_000


class ParameterError(ValueError):
    """A ``SystemParams`` invariant does not hold.

    ``condition`` names the violated inequality.
    """

    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        msg = f"violated condition: {condition}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SignViolation(ParameterError):
    pass


class HyperbolicityViolation(ParameterError):
    pass


class ComplexOmegaViolation(ParameterError):
    pass


class LatticeError(ValueError):
    pass


class LatticeSizeError(LatticeError):
    pass


@dataclass(frozen=True)
class SystemParams:
    alpha: float
    beta: float
    gamma: float
    delta: float
    mu: float
    nu: float
    eps: float

    def with_eps(self, eps: float) -> "SystemParams":
        return replace(self, eps=float(eps))

    def as_dict(self) -> dict[str, float]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "delta": self.delta,
            "mu": self.mu,
            "nu": self.nu,
            "eps": self.eps,
        }


def omega_discriminant(p: SystemParams) -> float:
    """(delta - nu - alpha/eps + mu)^2 + 4 beta gamma / eps."""
    return (p.delta - p.nu - p.alpha / p.eps + p.mu) ** 2 + 4.0 * p.beta * p.gamma / p.eps


def validate_params(raw: SystemParams) -> SystemParams:
    """Return ``raw`` unchanged if every invariant holds, otherwise raise.

    Raises
    ------
    SignViolation
        alpha >= 0, a zero coupling, eps <= 0 or a non-finite value.
    HyperbolicityViolation
        alpha/eps - mu >= 0.
    ComplexOmegaViolation
        The eigenvalue discriminant is not positive.
    """
    for name, value in raw.as_dict().items():
        if not math.isfinite(value):
            raise SignViolation(f"{name} finite", f"{name}={value}")
    if not raw.alpha < 0:
        raise SignViolation("alpha < 0", f"alpha={raw.alpha}")
    if not raw.eps > 0:
        raise SignViolation("eps > 0", f"eps={raw.eps}")
    hyp = raw.alpha / raw.eps - raw.mu
    if not hyp < 0:
        raise HyperbolicityViolation("alpha/eps - mu < 0", f"alpha/eps - mu={hyp:g}")
    disc = omega_discriminant(raw)
    if not disc > 0:
        raise ComplexOmegaViolation(
            "(delta - nu - alpha/eps + mu)^2 + 4 beta gamma/eps > 0",
            f"discriminant={disc:g}",
        )
    # checked last so that a negative discriminant is reported as such
    for name in ("beta", "gamma", "delta"):
        if getattr(raw, name) == 0:
            raise SignViolation(f"{name} != 0", f"{name}=0")
    return raw


@dataclass(frozen=True)
class DerivedConstants:
    """Scalars derived from validated parameters.

    ``slow_sign`` is +1 when the slow eigenvalue is (tr + omega)/2 and -1
    otherwise; it is decided by which branch stays bounded as eps -> 0.
    """

    params: SystemParams
    kappa: float
    omega_eps: float
    slow_sign: int
    sigma_slow: float
    sigma_fast: float

    def trace_at(self, q):
        p = self.params
        return p.alpha / p.eps - p.mu + p.delta - p.nu - 2.0 * FOUR_PI2 * np.asarray(q, dtype=float)

    def det_at(self, q):
        p = self.params
        q = np.asarray(q, dtype=float)
        a = p.alpha / p.eps - p.mu - FOUR_PI2 * q
        d = p.delta - p.nu - FOUR_PI2 * q
        return a * d - p.beta * p.gamma / p.eps

    def _roots(self, q):
        # The root whose sum with the trace does not cancel is computed
        # directly; the other one follows from the product (Vieta).
        tr = self.trace_at(q)
        det = self.det_at(q)
        s = np.where(tr < 0, -1.0, 1.0)
        # |big| >= omega/2 > 0 after validation.
        big = 0.5 * (tr + s * self.omega_eps)
        small = det / big
        # big is the root with sign s on omega, so it is slow iff s == slow_sign.
        slow = np.where(s == self.slow_sign, big, small)
        fast = np.where(s == self.slow_sign, small, big)
        return slow, fast

    def lambda_slow_at(self, q):
        slow, _ = self._roots(q)
        return slow if np.ndim(slow) else float(slow)

    def lambda_fast_at(self, q):
        _, fast = self._roots(q)
        return fast if np.ndim(fast) else float(fast)


def slow_branch_sign(p: SystemParams) -> int:
    """Sign s such that (tr + s*omega)/2 stays bounded as eps -> 0.

    At leading order tr ~ alpha/eps and omega ~ |alpha|/eps, so the branch
    with s = -sign(alpha) cancels the 1/eps term.
    """
    return 1 if p.alpha < 0 else -1


def derive_constants(params: SystemParams) -> DerivedConstants:
    p = params
    kappa = -p.nu - p.beta * p.gamma / p.alpha + p.delta
    omega = math.sqrt(omega_discriminant(p))
    s = slow_branch_sign(p)
    base = p.eps * (p.delta - p.nu + p.mu) - p.alpha
    # sigma_slow * sigma_fast = base^2 - (eps*omega)^2 = -4 eps beta gamma;
    # the non-cancelling branch is evaluated directly.
    direct = base + s * p.eps * omega
    other = base - s * p.eps * omega
    if abs(direct) >= abs(other):
        sigma_slow = direct
        sigma_fast = -4.0 * p.eps * p.beta * p.gamma / direct
    else:
        sigma_fast = other
        sigma_slow = -4.0 * p.eps * p.beta * p.gamma / other
    return DerivedConstants(
        params=p,
        kappa=kappa,
        omega_eps=omega,
        slow_sign=s,
        sigma_slow=sigma_slow,
        sigma_fast=sigma_fast,
    )


@dataclass(frozen=True, eq=False)
class SpectralLattice:
    """Symmetric tensor grid {m*dk : |m*dk| <= K}^n in C order.

    Because the grid is symmetric and C-ordered, reversing the flat mode
    order maps every k to -k.
    """

    dim: int
    cutoff: float
    spacing: float
    k: np.ndarray  # (N, dim)

    @property
    def size(self) -> int:
        return self.k.shape[0]

    @property
    def weight(self) -> float:
        return self.spacing**self.dim

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.weight)

    @property
    def k2(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.k, self.k)

    def reflect_index(self) -> np.ndarray:
        return np.arange(self.size)[::-1]


def build_lattice(n: int, K: float, dk: float, max_modes: int = MAX_MODES) -> SpectralLattice:
    if int(n) != n or n < 1:
        raise LatticeError(f"dimension must be a positive integer, got {n}")
    if not K > 0:
        raise LatticeError(f"cutoff K must be positive, got {K}")
    if not 0 < dk <= K:
        raise LatticeError(f"spacing must satisfy 0 < dk <= K, got dk={dk}, K={K}")
    m = int(math.floor(K / dk * (1 + 1e-12)))
    per_axis = 2 * m + 1
    count = per_axis ** int(n)
    if count > max_modes:
        raise LatticeSizeError(f"{count} modes exceed the budget of {max_modes}")
    axis = np.arange(-m, m + 1) * dk
    grids = np.meshgrid(*([axis] * int(n)), indexing="ij")
    k = np.stack([g.ravel() for g in grids], axis=1)
    return SpectralLattice(dim=int(n), cutoff=float(K), spacing=float(dk), k=k)


@dataclass(frozen=True, eq=False)
class SpectralField:
    lattice: SpectralLattice
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.lattice.size,):
            raise ValueError(f"expected {self.lattice.size} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def _check(self, other: "SpectralField"):
        if other.lattice is not self.lattice:
            raise ValueError("fields live on different lattices")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.lattice, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.lattice, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.lattice, -self.coeffs)

    def conj_reflect(self) -> "SpectralField":
        """The field k -> conj(c(-k)); equal to self for real-valued functions."""
        return SpectralField(self.lattice, np.conj(self.coeffs[self.lattice.reflect_index()]))

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        ref = self.conj_reflect().coeffs
        scale = max(np.max(np.abs(self.coeffs), initial=0.0), 1e-300)
        return bool(np.max(np.abs(self.coeffs - ref), initial=0.0) <= rtol * scale)

    @classmethod
    def zeros(cls, lattice: SpectralLattice) -> "SpectralField":
        return cls(lattice, np.zeros(lattice.size, dtype=complex))


@dataclass(frozen=True, eq=False)
class SpectralPair:
    u_hat: SpectralField
    v_hat: SpectralField

    def __post_init__(self):
        if self.u_hat.lattice is not self.v_hat.lattice:
            raise ValueError("u_hat and v_hat must share one lattice")

    @property
    def lattice(self) -> SpectralLattice:
        return self.u_hat.lattice

    def __add__(self, other):
        return SpectralPair(self.u_hat + other.u_hat, self.v_hat + other.v_hat)

    def __sub__(self, other):
        return SpectralPair(self.u_hat - other.u_hat, self.v_hat - other.v_hat)

    def __mul__(self, scalar):
        return SpectralPair(self.u_hat * scalar, self.v_hat * scalar)

    __rmul__ = __mul__


def sample_gaussian(lattice: SpectralLattice, a: float, amp: float = 1.0) -> SpectralField:
    """Exact transform of amp * exp(-a |x|^2) sampled on the lattice."""
    if not a > 0:
        raise ValueError(f"Gaussian rate a must be positive, got {a}")
    n = lattice.dim
    c = amp * (math.pi / a) ** (n / 2) * np.exp(-(math.pi**2) * lattice.k2 / a)
    return SpectralField(lattice, c.astype(complex))


def h2_norm(field: SpectralField) -> float:
    lat = field.lattice
    w = (1.0 + lat.k2) ** 2 * np.abs(field.coeffs) ** 2
    return float(math.sqrt(lat.weight * float(np.sum(w))))


def pair_norm(pair: SpectralPair) -> float:
    """Norm on H^2 x H^2: sqrt(|u|^2 + |v|^2)."""
    return math.hypot(h2_norm(pair.u_hat), h2_norm(pair.v_hat))


def h0_factor(params: SystemParams) -> float:
    return -params.beta / params.alpha


def h0_map(v: SpectralField, params: SystemParams) -> SpectralField:
    """Graph map of the critical set alpha u + beta v = 0: v -> -beta/alpha v."""
    return v * h0_factor(params)
