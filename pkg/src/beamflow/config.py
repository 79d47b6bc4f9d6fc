"""Run-level configuration for the spectral fluid-beam toolkit.

The configuration fixes the periodic length of the beam, the tensor-grid
resolution (Fourier in the horizontal coordinate ``s``, Chebyshev in the
vertical coordinate ``y``), the fluid viscosity, and the beam stiffness
coefficients.  Everything downstream (grids, operators, solvers) is derived
from one immutable :class:`SpectralConfig` instance.
"""

from __future__ import annotations

from dataclasses import dataclass


class ConfigError(ValueError):
    """Raised when a configuration violates a documented invariant."""


@dataclass(frozen=True)
class SpectralConfig:
    """Discretization and physical parameters shared by all solvers.

    Parameters
    ----------
    L : float
        Period of the beam coordinate ``s``; the fluid strip is
        ``[0, L) x [0, 1]`` in reference variables.  Must be positive.
    Ns : int
        Number of Fourier collocation points in ``s``.  Must be even and
        at least 8; differentiation keeps the modes ``|k| <= Ns/2 - 1``.
    Ny : int
        Number of Chebyshev-Gauss-Lobatto points in ``y``.  Must be even
        and at least 8.  With an odd count the mean-mode divergence rows
        admit a spurious velocity/pressure kernel vector (the interior
        Chebyshev polynomial that integrates to zero), so odd values are
        rejected outright.
    nu : float
        Fluid viscosity, positive.
    alpha1 : float
        Beam bending coefficient (fourth-derivative term), positive.
    alpha2 : float
        Beam tension coefficient (second-derivative term), nonnegative.
    dealias : bool
        Apply the 2/3-rule mask to pointwise products of spectral data.
        On by default for nonlinear evaluation; operator assembly is linear
        in the state and ignores the flag.

    Attributes
    ----------
    Nm : int
        Number of Fourier modes carried by operators (``Ns - 1``; the
        Nyquist mode is excluded because it cannot carry the odd-derivative
        information of conjugate-symmetric data).
    Nb : int
        Dimension of the mean-zero beam space (``Ns - 2``: operator modes
        minus the mean).
    """

    L: float = 6.283185307179586
    Ns: int = 32
    Ny: int = 32
    nu: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 0.5
    dealias: bool = True

    def __post_init__(self) -> None:
        if not self.L > 0:
            raise ConfigError(f"L must be positive, got {self.L}")
        if self.Ns % 2 != 0 or self.Ns < 8:
            raise ConfigError(f"Ns must be even and >= 8, got {self.Ns}")
        if self.Ny % 2 != 0 or self.Ny < 8:
            raise ConfigError(f"Ny must be even and >= 8, got {self.Ny}")
        if not self.nu > 0:
            raise ConfigError(f"nu must be positive, got {self.nu}")
        if not self.alpha1 > 0:
            raise ConfigError(f"alpha1 must be positive, got {self.alpha1}")
        if self.alpha2 < 0:
            raise ConfigError(f"alpha2 must be nonnegative, got {self.alpha2}")

    # ------------------------------------------------------------------
    # Derived sizes
    # ------------------------------------------------------------------

    @property
    def Nm(self) -> int:
        """Number of Fourier modes used by operators (Nyquist excluded)."""
        return self.Ns - 1

    @property
    def Nb(self) -> int:
        """Dimension of the mean-zero beam coefficient space."""
        return self.Ns - 2

    def refine(self, Ns: int, Ny: int) -> "SpectralConfig":
        """Return a copy at a different resolution, physics unchanged."""
        return SpectralConfig(
            L=self.L,
            Ns=Ns,
            Ny=Ny,
            nu=self.nu,
            alpha1=self.alpha1,
            alpha2=self.alpha2,
            dealias=self.dealias,
        )
