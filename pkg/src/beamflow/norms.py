"""Norms and inner products for beam, fluid, and coupled data.

Beam norms are exact through the diagonal operator symbol.  Strip-field
integrals use the grid's trigonometric exactness in ``s`` (the trapezoid
rule integrates every resolvable harmonic product exactly) and an
oversampled Clenshaw-Curtis rule in ``y`` so that products of two grid
polynomials are integrated exactly.  The deformed-channel velocity inner
product carries the map's cofactor weight evaluated analytically on the
quadrature grid.

The :func:`norm` entry point dispatches a :class:`NormSpec` across data
kinds.  Fluid norms here are the flat-strip ones; the geometry-weighted
energy inner product is exposed separately (:func:`weighted_fluid_inner`,
:func:`energy_inner`) and is what the coupled-generator module builds its
Gram matrices from.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg

from .beam import BeamFunction, apply_A1_power, beam_inner
from .config import SpectralConfig
from .fields import CoupledState, FluidField, grid_deriv_s, grid_deriv_y
from .spectral import (
    chebyshev_interp_matrix,
    chebyshev_nodes,
    clenshaw_curtis_weights,
)

FLUID_SPACES = ("L2_fluid", "Hsigma_fluid")
BEAM_SPACES = ("L2_beam", "A1_power", "A1_power_dual")
STATE_SPACES = ("energy",)


@dataclass(frozen=True)
class NormSpec:
    """Selects a norm: flat fluid ``L2``/``H^sigma``, beam ``L2``/operator
    domain/dual, or the coupled energy norm.

    ``exponent`` is ``sigma`` for ``Hsigma_fluid`` (integer 0..4) and
    ``theta`` for the beam operator-power spaces (``theta`` in [-1, 1];
    the dual space uses the negative power of the same exponent).
    """

    space: str
    exponent: float = 0.0

    def __post_init__(self) -> None:
        known = FLUID_SPACES + BEAM_SPACES + STATE_SPACES
        if self.space not in known:
            raise ValueError(f"unknown norm space {self.space!r}; expected one of {known}")
        if self.space == "Hsigma_fluid":
            sig = self.exponent
            if sig != int(sig) or not 0 <= sig <= 4:
                raise ValueError("Hsigma_fluid requires integer exponent in [0, 4]")
        if self.space in ("A1_power", "A1_power_dual") and not -1.0 <= self.exponent <= 1.0:
            raise ValueError("operator power exponent must lie in [-1, 1]")


# ======================================================================
# Quadrature helpers
# ======================================================================


def fine_y_rule(cfg: SpectralConfig, factor: int = 2) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Oversampled vertical rule: nodes, weights, and the interpolation
    matrix from the ``Ny`` grid onto the fine nodes."""
    n = factor * cfg.Ny
    y = chebyshev_nodes(n)
    w = clenshaw_curtis_weights(n)
    P = chebyshev_interp_matrix(cfg.Ny, y)
    return y, w, P


def strip_l2_inner(u: np.ndarray, v: np.ndarray, cfg: SpectralConfig) -> complex:
    """Flat inner product ``int u conj(v) ds dy`` of two grid scalars."""
    _, wy, P = fine_y_rule(cfg)
    uf = u @ P.T
    vf = v @ P.T
    ds = cfg.L / cfg.Ns
    return complex(ds * np.sum(uf * np.conj(vf) * wy[None, :]))


def fluid_l2_inner(u: FluidField, v: FluidField) -> complex:
    return strip_l2_inner(u.u[0], v.u[0], u.cfg) + strip_l2_inner(u.u[1], v.u[1], u.cfg)


def fluid_sobolev_norm(f: FluidField, sigma: int) -> float:
    """Flat-strip Sobolev norm summing all mixed derivatives to order sigma."""
    cfg = f.cfg
    total = 0.0
    for a in range(sigma + 1):
        for b in range(sigma + 1 - a):
            for c in range(2):
                g = f.u[c]
                if a:
                    g = grid_deriv_s(g, cfg, a)
                if b:
                    g = grid_deriv_y(g, cfg, b)
                total += strip_l2_inner(g, g, cfg).real
    return float(np.sqrt(max(total, 0.0)))


# ======================================================================
# Deformed-channel weight
# ======================================================================


def fluid_weight_grids(
    cfg: SpectralConfig, eta10: Optional[BeamFunction], factor: int = 2
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Entries ``(W11, W12, W22)`` of the velocity-metric weight on the
    quadrature grid ``(Ns, factor*Ny)``.

    The weight is ``det * a^T a`` composed with the strip chart, so that
    the flat integral of ``v^H W u`` equals the deformed-channel integral
    of the physical fields the strip data represents.
    """
    yf = chebyshev_nodes(factor * cfg.Ny)
    if eta10 is None:
        ones = np.ones((cfg.Ns, yf.size))
        return ones, np.zeros_like(ones), ones
    zeta = eta10.real_values()[:, None]
    dz = eta10.derivative().real_values()[:, None]
    y = yf[None, :]
    w11 = (1.0 + (y * dz) ** 2) / (1.0 + zeta)
    w12 = y * dz * np.ones_like(w11)
    w22 = (1.0 + zeta) * np.ones_like(w11)
    return w11, w12, w22


def weighted_fluid_inner(
    u: FluidField, v: FluidField, eta10: Optional[BeamFunction] = None
) -> complex:
    """Velocity inner product over the channel deformed by ``eta10``,
    evaluated on strip data (flat ``L2`` when ``eta10`` is flat)."""
    cfg = u.cfg
    w11, w12, w22 = fluid_weight_grids(cfg, eta10)
    _, wy, P = fine_y_rule(cfg)
    u1, u2 = u.u[0] @ P.T, u.u[1] @ P.T
    v1, v2 = v.u[0] @ P.T, v.u[1] @ P.T
    integrand = (
        w11 * u1 * np.conj(v1)
        + w12 * (u1 * np.conj(v2) + u2 * np.conj(v1))
        + w22 * u2 * np.conj(v2)
    )
    ds = cfg.L / cfg.Ns
    return complex(ds * np.sum(integrand * wy[None, :]))


def energy_inner(
    a: CoupledState, b: CoupledState, eta10: Optional[BeamFunction] = None
) -> complex:
    """Coupled energy inner product: weighted velocity term plus the beam
    elastic term and the beam kinetic term."""
    fluid = weighted_fluid_inner(a.w, b.w, eta10)
    el = beam_inner(apply_A1_power(a.eta1, 0.5), apply_A1_power(b.eta1, 0.5))
    kin = beam_inner(a.eta2, b.eta2)
    return fluid + el + kin


def energy_norm(x: CoupledState, eta10: Optional[BeamFunction] = None) -> float:
    return float(np.sqrt(max(energy_inner(x, x, eta10).real, 0.0)))


# ======================================================================
# Dispatch
# ======================================================================


def norm(x: Union[BeamFunction, FluidField, CoupledState], spec: NormSpec) -> float:
    """Norm of ``x`` under ``spec``; raises if the pairing is invalid."""
    if isinstance(x, BeamFunction):
        if spec.space not in BEAM_SPACES:
            raise ValueError(f"{spec.space} does not apply to beam data")
        if spec.space == "L2_beam":
            theta = 0.0
        elif spec.space == "A1_power":
            theta = spec.exponent
        else:
            theta = -spec.exponent
        g = apply_A1_power(x, theta)
        return float(np.sqrt(max(beam_inner(g, g).real, 0.0)))
    if isinstance(x, FluidField):
        if spec.space == "L2_fluid":
            return float(np.sqrt(max(fluid_l2_inner(x, x).real, 0.0)))
        if spec.space == "Hsigma_fluid":
            return fluid_sobolev_norm(x, int(spec.exponent))
        raise ValueError(f"{spec.space} does not apply to fluid data")
    if isinstance(x, CoupledState):
        if spec.space != "energy":
            raise ValueError(f"{spec.space} does not apply to coupled states")
        return energy_norm(x)
    raise TypeError(f"unsupported operand type {type(x).__name__}")


# ======================================================================
# Weighted operator norms
# ======================================================================


def gram_factor(gram: np.ndarray) -> np.ndarray:
    """Upper-triangular ``R`` with ``gram = R^H R`` (eigenvalue fallback
    for semidefinite input)."""
    try:
        return scipy.linalg.cholesky(gram, lower=False)
    except scipy.linalg.LinAlgError:
        vals, vecs = scipy.linalg.eigh(gram)
        vals = np.clip(vals, 0.0, None)
        return (vecs * np.sqrt(vals)[None, :]).conj().T


def weighted_operator_norm(
    B: np.ndarray, gram_target: np.ndarray, gram_source: np.ndarray
) -> float:
    """Operator norm of ``B`` from the ``gram_source`` inner product to
    the ``gram_target`` one (largest weighted singular value)."""
    Rt = gram_factor(gram_target)
    Rs = gram_factor(gram_source)
    # sigma_max of Rt B Rs^{-1}, the right inverse applied by triangular solve.
    core = Rt @ B
    core = scipy.linalg.solve_triangular(Rs.conj().T, core.conj().T, lower=True).conj().T
    return float(np.linalg.svd(core, compute_uv=False)[0])
