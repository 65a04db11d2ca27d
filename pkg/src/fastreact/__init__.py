"""Fast-reaction limit of a linear reaction-diffusion system, solved per Fourier mode."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ParameterError,
    SpectralField,
    SpectralLattice,
    SpectralPair,
    SystemParams,
    build_lattice,
    derive_constants,
    h2_norm,
    pair_norm,
    validate_params,
)

__all__ = [
    "ParameterError",
    "SpectralField",
    "SpectralLattice",
    "SpectralPair",
    "SystemParams",
    "build_lattice",
    "derive_constants",
    "h2_norm",
    "pair_norm",
    "validate_params",
]
