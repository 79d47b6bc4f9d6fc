"""Beam-side objects: periodic functions on the interface and their operators.

The beam operator is ``A1 eta = alpha1 d^4 eta/ds^4 - alpha2 d^2 eta/ds^2``
acting on mean-zero periodic functions.  In Fourier coefficients it is
diagonal with symbol ``m_k = alpha1 xi_k^4 + alpha2 xi_k^2``, so all real
powers are exact coefficient-wise multiplications — no matrix functions.

Also here: the mean-zero projection ``M``, the boundary lifting ``Lambda``
(a beam function becomes a vertical velocity trace on the top interface,
zero on the bottom wall), and its adjoint ``Lambda*`` with the arclength
weight of the reference interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .config import SpectralConfig
from .spectral import (
    beam_mode_indices,
    deriv_s_values,
    enforce_conjugate_symmetry,
    fourier_nodes,
    fourier_xi,
    to_coeffs,
    to_values,
)

# ======================================================================
# BeamFunction
# ======================================================================


@dataclass(frozen=True)
class BeamFunction:
    """A periodic scalar function of ``s`` in Fourier coefficients.

    Parameters
    ----------
    cfg : SpectralConfig
        Grid the coefficients refer to.
    coeffs : numpy.ndarray
        Complex coefficients in the numpy FFT layout, shape ``(Ns,)``.

    Notes
    -----
    Instances are immutable by convention; the coefficient array is marked
    read-only at construction.
    """

    cfg: SpectralConfig
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.cfg.Ns,):
            raise ValueError(f"coeffs must have shape ({self.cfg.Ns},), got {c.shape}")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------

    @classmethod
    def zero(cls, cfg: SpectralConfig) -> "BeamFunction":
        return cls(cfg, np.zeros(cfg.Ns, dtype=complex))

    @classmethod
    def from_values(cls, cfg: SpectralConfig, values: np.ndarray) -> "BeamFunction":
        return cls(cfg, to_coeffs(np.asarray(values, dtype=complex)))

    @classmethod
    def from_callable(cls, cfg: SpectralConfig, fn: Callable[[np.ndarray], np.ndarray]) -> "BeamFunction":
        return cls.from_values(cfg, fn(fourier_nodes(cfg)))

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def values(self) -> np.ndarray:
        """Collocation values on the ``Ns`` grid points (complex)."""
        return to_values(self.coeffs)

    def real_values(self) -> np.ndarray:
        """Collocation values with the imaginary part dropped."""
        return self.values().real

    def derivative(self, order: int = 1) -> "BeamFunction":
        """Spectral derivative in ``s`` of the given order."""
        vals = deriv_s_values(self.values(), self.cfg, order=order)
        return BeamFunction.from_values(self.cfg, vals)

    def mean(self) -> complex:
        return complex(self.coeffs[0])

    def __add__(self, other: "BeamFunction") -> "BeamFunction":
        return BeamFunction(self.cfg, self.coeffs + other.coeffs)

    def __sub__(self, other: "BeamFunction") -> "BeamFunction":
        return BeamFunction(self.cfg, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "BeamFunction":
        return BeamFunction(self.cfg, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class BeamState:
    """Deflection and deflection velocity of the beam, both mean-zero."""

    eta1: BeamFunction
    eta2: BeamFunction

    def __post_init__(self) -> None:
        if abs(self.eta1.mean()) > 1e-12 or abs(self.eta2.mean()) > 1e-12:
            raise ValueError("beam state components must be mean-zero")


@dataclass(frozen=True)
class BoundaryField:
    """Vector-valued data on the two channel boundaries, parametrized by ``s``.

    ``top`` holds the two components on the interface curve, ``bottom`` the
    two components on the flat wall.
    """

    top: Tuple[BeamFunction, BeamFunction]
    bottom: Tuple[BeamFunction, BeamFunction]


# ======================================================================
# Beam operator symbol and fractional powers
# ======================================================================


def beam_symbol(cfg: SpectralConfig) -> np.ndarray:
    """Fourier symbol ``alpha1 xi^4 + alpha2 xi^2`` per FFT slot, shape (Ns,)."""
    xi = fourier_xi(cfg)
    return cfg.alpha1 * xi**4 + cfg.alpha2 * xi**2


def beam_symbol_power(cfg: SpectralConfig, theta: float) -> np.ndarray:
    """Symbol of ``A1^theta`` per FFT slot; the mean slot is 0 (1 at theta=0)."""
    m = beam_symbol(cfg)
    out = np.zeros_like(m)
    if theta == 0.0:
        return np.ones_like(m)
    nz = m > 0
    out[nz] = m[nz] ** theta
    return out


def project_mean_zero(f: BeamFunction) -> BeamFunction:
    """Orthogonal projection ``M``: zero the mean, keep everything else."""
    c = f.coeffs.copy()
    c[0] = 0.0
    return BeamFunction(f.cfg, c)


def apply_A1_power(f: BeamFunction, theta: float) -> BeamFunction:
    """Apply ``A1^theta`` coefficient-wise.

    Parameters
    ----------
    f : BeamFunction
        Input function; must be mean-zero when ``theta < 0`` (negative
        powers are unbounded on constants).
    theta : float
        Any exponent in ``[-1, 1]``.

    Returns
    -------
    BeamFunction
        Coefficients multiplied by ``(alpha1 xi_k^4 + alpha2 xi_k^2)^theta``;
        the mean coefficient stays zero.
    """
    if not -1.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [-1, 1], got {theta}")
    if theta < 0 and abs(f.mean()) > 1e-13:
        raise ValueError("negative powers require mean-zero input")
    mult = beam_symbol_power(f.cfg, theta)
    c = f.coeffs * mult
    if theta == 0.0:
        return BeamFunction(f.cfg, c)
    c[0] = 0.0
    return BeamFunction(f.cfg, c)


# ======================================================================
# Mean-zero coefficient vectors (operator basis)
# ======================================================================


def coeffs_to_beamvec(f: BeamFunction) -> np.ndarray:
    """Restrict coefficients to the ``Nb`` mean-zero operator modes."""
    return f.coeffs[beam_mode_indices(f.cfg)]


def beamvec_to_function(cfg: SpectralConfig, vec: np.ndarray) -> BeamFunction:
    """Embed an ``Nb`` operator-mode vector back into the full FFT layout."""
    c = np.zeros(cfg.Ns, dtype=complex)
    c[beam_mode_indices(cfg)] = vec
    return BeamFunction(cfg, c)


def beam_power_diagonal(cfg: SpectralConfig, theta: float) -> np.ndarray:
    """Diagonal of ``A1^theta`` over the ``Nb`` operator modes."""
    return beam_symbol_power(cfg, theta)[beam_mode_indices(cfg)]


# ======================================================================
# Norms and inner products
# ======================================================================


def beam_inner(f: BeamFunction, g: BeamFunction) -> complex:
    """L2 inner product ``int f conj(g) ds = L sum c_k conj(d_k)``."""
    return f.cfg.L * complex(np.vdot(g.coeffs, f.coeffs))


def beam_norm(f: BeamFunction, theta: float = 0.0) -> float:
    """Norm ``||A1^theta f||_{L2}`` (exact via the diagonal symbol)."""
    if theta == 0.0:
        return float(np.sqrt(f.cfg.L) * np.linalg.norm(f.coeffs))
    g = apply_A1_power(f, theta)
    return float(np.sqrt(g.cfg.L) * np.linalg.norm(g.coeffs))


# ======================================================================
# Trace lifting Lambda and adjoint Lambda*
# ======================================================================


def lift_Lambda(eta: BeamFunction, eta10: BeamFunction) -> BoundaryField:
    """Lift a beam function to boundary data: ``(0, M eta)`` on top, 0 below.

    The top trace is parametrized by ``s`` (the lifted field takes the
    value ``M eta(s)`` in the vertical direction at the interface point
    above ``s``); ``eta10`` fixes the interface the data lives on but does
    not enter the values.
    """
    zero = BeamFunction.zero(eta.cfg)
    return BoundaryField(top=(zero, project_mean_zero(eta)), bottom=(zero, zero))


def arclength_weight(eta10: BeamFunction) -> np.ndarray:
    """Grid values of ``sqrt(1 + (d eta10/ds)^2)`` on the interface."""
    slope = eta10.derivative().values().real
    return np.sqrt(1.0 + slope**2)


def adjoint_Lambda_star(g: BoundaryField, eta10: BeamFunction) -> BeamFunction:
    """Adjoint of the lifting: ``M( sqrt(1+|d eta10|^2) * g_top . e2 )``.

    Only the vertical component of the top trace enters; the output is
    mean-zero.  Adjointness against :func:`lift_Lambda` in the boundary
    quadrature holds to machine precision (both sides reduce to the same
    grid sum).
    """
    w = arclength_weight(eta10)
    vals = g.top[1].values() * w
    return project_mean_zero(BeamFunction.from_values(eta10.cfg, vals))


def boundary_inner(f: BoundaryField, g: BoundaryField, eta10: BeamFunction) -> complex:
    """L2 pairing on the two boundary curves with the arclength weight."""
    cfg = eta10.cfg
    w = arclength_weight(eta10)
    ds = cfg.L / cfg.Ns
    top = sum(
        np.sum(f.top[i].values() * np.conj(g.top[i].values()) * w) for i in range(2)
    )
    bottom = sum(
        np.sum(f.bottom[i].values() * np.conj(g.bottom[i].values())) for i in range(2)
    )
    return complex(ds * (top + bottom))


# ======================================================================
# Random draws with controlled smoothness
# ======================================================================


def random_beam(
    cfg: SpectralConfig,
    rng: np.random.Generator,
    decay: float = 2.0,
    amplitude: float = 1.0,
    mean_zero: bool = True,
) -> BeamFunction:
    """Random real beam function with coefficients decaying like ``k^-decay``.

    The decay makes smoothness-sensitive estimates meaningful: draws have
    finite discrete norms of every order but are not trivially band-limited.
    """
    k = np.abs(np.fft.fftfreq(cfg.Ns, d=1.0 / cfg.Ns).astype(int))
    scale = amplitude / (1.0 + k.astype(float)) ** decay
    c = scale * (rng.standard_normal(cfg.Ns) + 1j * rng.standard_normal(cfg.Ns))
    c = enforce_conjugate_symmetry(c)
    c[cfg.Ns // 2] = 0.0
    if mean_zero:
        c[0] = 0.0
    return BeamFunction(cfg, c)
