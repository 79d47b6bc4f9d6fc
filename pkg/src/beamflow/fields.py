"""Fluid-side field containers on the Fourier x Chebyshev tensor grid.

A :class:`FluidField` stores collocation values of a two-component vector
field on the reference strip grid ``(s_i, y_j)``; a :class:`PressureField`
stores a scalar.  Spectral derivatives act along either axis.  The packed
coefficient layout used by operator matrices (Fourier operator modes times
Chebyshev nodes) lives in :mod:`beamflow.assembly`; here fields are plain
value arrays, which keeps pointwise geometry algebra simple.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .beam import BeamFunction
from .config import SpectralConfig
from .spectral import (
    chebyshev_diff,
    chebyshev_nodes,
    deriv_s_values,
    fourier_nodes,
)

# ======================================================================
# Containers
# ======================================================================


@dataclass(frozen=True)
class FluidField:
    """Two-component vector field as collocation values, shape ``(2, Ns, Ny)``."""

    cfg: SpectralConfig
    u: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.u, dtype=complex)
        expected = (2, self.cfg.Ns, self.cfg.Ny)
        if arr.shape != expected:
            raise ValueError(f"u must have shape {expected}, got {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "u", arr)

    @classmethod
    def zero(cls, cfg: SpectralConfig) -> "FluidField":
        return cls(cfg, np.zeros((2, cfg.Ns, cfg.Ny), dtype=complex))

    @classmethod
    def from_callables(
        cls,
        cfg: SpectralConfig,
        f1: Callable[[np.ndarray, np.ndarray], np.ndarray],
        f2: Callable[[np.ndarray, np.ndarray], np.ndarray],
    ) -> "FluidField":
        """Sample two callables ``f(s, y)`` on the tensor grid."""
        s = fourier_nodes(cfg)[:, None]
        y = chebyshev_nodes(cfg.Ny)[None, :]
        return cls(cfg, np.stack([np.broadcast_to(f1(s, y), (cfg.Ns, cfg.Ny)),
                                  np.broadcast_to(f2(s, y), (cfg.Ns, cfg.Ny))]))

    def component(self, i: int) -> np.ndarray:
        return self.u[i]

    def __add__(self, other: "FluidField") -> "FluidField":
        return FluidField(self.cfg, self.u + other.u)

    def __sub__(self, other: "FluidField") -> "FluidField":
        return FluidField(self.cfg, self.u - other.u)

    def __mul__(self, scalar: complex) -> "FluidField":
        return FluidField(self.cfg, self.u * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class PressureField:
    """Scalar field as collocation values, shape ``(Ns, Ny)``.

    Solvers normalize returned pressures to zero weighted mean over the
    reference fluid domain; fields built by hand carry whatever mean their
    data has.
    """

    cfg: SpectralConfig
    p: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.p, dtype=complex)
        expected = (self.cfg.Ns, self.cfg.Ny)
        if arr.shape != expected:
            raise ValueError(f"p must have shape {expected}, got {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "p", arr)

    @classmethod
    def zero(cls, cfg: SpectralConfig) -> "PressureField":
        return cls(cfg, np.zeros((cfg.Ns, cfg.Ny), dtype=complex))

    @classmethod
    def from_callable(
        cls, cfg: SpectralConfig, f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ) -> "PressureField":
        s = fourier_nodes(cfg)[:, None]
        y = chebyshev_nodes(cfg.Ny)[None, :]
        return cls(cfg, np.broadcast_to(f(s, y), (cfg.Ns, cfg.Ny)).copy())

    def __add__(self, other: "PressureField") -> "PressureField":
        return PressureField(self.cfg, self.p + other.p)

    def __sub__(self, other: "PressureField") -> "PressureField":
        return PressureField(self.cfg, self.p - other.p)

    def __mul__(self, scalar: complex) -> "PressureField":
        return PressureField(self.cfg, self.p * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class CoupledState:
    """Element of the coupled energy space: fluid velocity plus beam pair."""

    w: FluidField
    eta1: BeamFunction
    eta2: BeamFunction

    @property
    def cfg(self) -> SpectralConfig:
        return self.w.cfg

    @classmethod
    def zero(cls, cfg: SpectralConfig) -> "CoupledState":
        return cls(FluidField.zero(cfg), BeamFunction.zero(cfg), BeamFunction.zero(cfg))


# ======================================================================
# Derivatives on the strip grid
# ======================================================================


def grid_deriv_s(values: np.ndarray, cfg: SpectralConfig, order: int = 1) -> np.ndarray:
    """Spectral s-derivative along axis 0 of an ``(Ns, Ny)`` grid array."""
    return deriv_s_values(values.T, cfg, order=order).T


def grid_deriv_y(values: np.ndarray, cfg: SpectralConfig, order: int = 1) -> np.ndarray:
    """Chebyshev y-derivative along axis 1 of an ``(Ns, Ny)`` grid array."""
    D = chebyshev_diff(cfg.Ny)
    out = values
    for _ in range(order):
        out = out @ D.T
    return out


def field_deriv_s(f: FluidField, order: int = 1) -> FluidField:
    return FluidField(f.cfg, np.stack([grid_deriv_s(f.u[i], f.cfg, order) for i in range(2)]))


def field_deriv_y(f: FluidField, order: int = 1) -> FluidField:
    return FluidField(f.cfg, np.stack([grid_deriv_y(f.u[i], f.cfg, order) for i in range(2)]))


def strip_divergence(f: FluidField) -> np.ndarray:
    """Flat divergence ``d u1/ds + d u2/dy`` on the grid."""
    return grid_deriv_s(f.u[0], f.cfg) + grid_deriv_y(f.u[1], f.cfg)


# ======================================================================
# Random draws with controlled smoothness
# ======================================================================


def random_fluid(
    cfg: SpectralConfig,
    rng: np.random.Generator,
    decay: float = 2.0,
    amplitude: float = 1.0,
) -> FluidField:
    """Random real vector field with spectral coefficients decaying like
    ``(1+|k|)^-decay (1+m)^-decay`` in Fourier mode ``k`` and Chebyshev
    degree ``m``."""
    from .spectral import chebyshev_vandermonde, to_values

    half = cfg.Ns // 2
    kabs = np.abs(np.fft.fftfreq(cfg.Ns, d=1.0 / cfg.Ns).astype(int))
    V = chebyshev_vandermonde(chebyshev_nodes(cfg.Ny), cfg.Ny)
    comps = []
    for _ in range(2):
        c = (rng.standard_normal((cfg.Ns, cfg.Ny)) + 1j * rng.standard_normal((cfg.Ns, cfg.Ny)))
        scale = amplitude / ((1.0 + kabs[:, None]) ** decay * (1.0 + np.arange(cfg.Ny)[None, :]) ** decay)
        c = c * scale
        c[half, :] = 0.0
        vals_nodal = c @ V.T  # (Ns modes, Ny nodes)
        vals = to_values(vals_nodal.T).T  # synthesize along s
        comps.append(vals.real.astype(complex))
    return FluidField(cfg, np.stack(comps))
