"""Spectral toolkit for a 2D fluid-beam interaction system.

Discretizes the fixed-domain formulation of an incompressible viscous flow
under a periodic elastic beam on a Fourier x Chebyshev tensor grid,
assembles the operators of the coupled linear analysis, sweeps resolvent
and commutator estimates, and integrates the linear and nonlinear
(local-in-time fixed point) dynamics.
"""

from __future__ import annotations

from .config import ConfigError, SpectralConfig

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "SpectralConfig",
    "__version__",
]
