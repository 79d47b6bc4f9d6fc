"""Packed degree-of-freedom layouts and matrix forms of the strip operators.

Velocity and pressure live in a semi-spectral representation: Fourier
coefficients in ``s`` (the ``Nm`` operator modes), resolved in ``y`` either
by Chebyshev collocation values (velocity) or by Chebyshev polynomial
coefficients (pressure).  This module fixes the flattened orderings, builds
differentiation and variable-coefficient multiplication matrices on them,
and assembles the Gram matrices of the discrete inner products.

Layouts
-------
Velocity vector, length ``2 * Nm * Ny``::

    index = comp * (Nm * Ny) + m * Ny + j

with ``comp`` the component, ``m`` the operator-mode position (FFT order,
Nyquist removed) and ``j`` the ascending Chebyshev node.

Pressure vector, length ``(Ny - 1) + (Nm - 1) * (Ny - 2)``: per-mode
Chebyshev coefficients, degree ``<= Ny - 2`` for the mean mode and
``<= Ny - 3`` otherwise, concatenated in operator-mode order.  The lowered
degree keeps the saddle systems square once boundary rows are added.

State vector, length ``2 * Nm * Ny + 2 * Nb``: velocity dofs, then the
mean-zero beam coefficients of the deflection, then those of its velocity.

Every matrix that multiplies by a grid coefficient field is exact (to
roundoff) on Nyquist-free band-limited data: multiplication on the
collocation grid is a circular convolution of coefficient vectors, which is
what the mode-difference indexing implements.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .beam import BeamFunction, beam_power_diagonal, coeffs_to_beamvec, beamvec_to_function
from .config import SpectralConfig
from .fields import CoupledState, FluidField, PressureField
from .geometry import TransformOps, _metric, _require_strip
from .norms import fine_y_rule, fluid_weight_grids
from .spectral import (
    chebyshev_diff,
    chebyshev_nodes,
    chebyshev_vandermonde,
    clenshaw_curtis_weights,
    fourier_wavenumbers,
    fourier_xi,
    operator_mode_indices,
)

# ======================================================================
# Velocity packing
# ======================================================================


def fluid_size(cfg: SpectralConfig) -> int:
    """Length of the packed velocity vector."""
    return 2 * cfg.Nm * cfg.Ny


def pack_fluid(f: FluidField) -> np.ndarray:
    """Flatten a fluid field to semi-spectral dofs (Nyquist discarded)."""
    cfg = f.cfg
    coeffs = np.fft.fft(f.u, axis=1) / cfg.Ns
    return coeffs[:, operator_mode_indices(cfg), :].reshape(-1)


def unpack_fluid(cfg: SpectralConfig, vec: np.ndarray) -> FluidField:
    """Rebuild a fluid field from packed dofs (Nyquist slot zero)."""
    coeffs = np.zeros((2, cfg.Ns, cfg.Ny), dtype=complex)
    coeffs[:, operator_mode_indices(cfg), :] = np.asarray(vec).reshape(2, cfg.Nm, cfg.Ny)
    return FluidField(cfg, np.fft.ifft(coeffs * cfg.Ns, axis=1))


def fluid_dof_index(cfg: SpectralConfig, comp: int, m, j) -> np.ndarray:
    """Flat dof indices for component/mode/node positions (broadcasting)."""
    return comp * (cfg.Nm * cfg.Ny) + np.asarray(m) * cfg.Ny + np.asarray(j)


def scalar_rows_at_node(cfg: SpectralConfig, j: int) -> np.ndarray:
    """Scalar-layout row indices of node ``j`` across all modes."""
    return np.arange(cfg.Nm) * cfg.Ny + j


def scalar_interior_rows(cfg: SpectralConfig) -> np.ndarray:
    """Scalar-layout row indices of the interior nodes, all modes."""
    j = np.arange(1, cfg.Ny - 1)
    return (np.arange(cfg.Nm)[:, None] * cfg.Ny + j[None, :]).reshape(-1)


# ======================================================================
# Pressure packing
# ======================================================================


def pressure_coeff_counts(cfg: SpectralConfig) -> np.ndarray:
    """Chebyshev coefficient count per operator mode (mean mode first)."""
    counts = np.full(cfg.Nm, cfg.Ny - 2)
    counts[0] = cfg.Ny - 1
    return counts


def pressure_offsets(cfg: SpectralConfig) -> np.ndarray:
    """Start offset of each mode's coefficient block, plus the total size."""
    counts = pressure_coeff_counts(cfg)
    return np.concatenate([[0], np.cumsum(counts)])


def pressure_size(cfg: SpectralConfig) -> int:
    """Length of the packed pressure vector."""
    return int(pressure_offsets(cfg)[-1])


def pressure_synthesis(cfg: SpectralConfig) -> np.ndarray:
    """Map packed pressure coefficients to semi-spectral node values.

    Shape ``(Nm * Ny, pressure_size)``; block-diagonal over modes with
    Chebyshev-Vandermonde blocks on the collocation nodes.
    """
    y = chebyshev_nodes(cfg.Ny)
    counts = pressure_coeff_counts(cfg)
    offs = pressure_offsets(cfg)
    out = np.zeros((cfg.Nm * cfg.Ny, pressure_size(cfg)))
    for m in range(cfg.Nm):
        V = chebyshev_vandermonde(y, int(counts[m]))
        out[m * cfg.Ny : (m + 1) * cfg.Ny, offs[m] : offs[m + 1]] = V
    return out


def pack_pressure(q: PressureField) -> np.ndarray:
    """Project a pressure grid onto the packed coefficient space.

    Per mode: full-degree Chebyshev interpolation of the node values,
    then truncation to the allowed degree.  Exact when the input already
    lies in the represented space.
    """
    cfg = q.cfg
    coeffs = np.fft.fft(q.p, axis=0)[operator_mode_indices(cfg), :] / cfg.Ns
    y = chebyshev_nodes(cfg.Ny)
    Vfull = chebyshev_vandermonde(y, cfg.Ny)
    cheb = np.linalg.solve(Vfull, coeffs.T).T  # (Nm, Ny) coefficients
    counts = pressure_coeff_counts(cfg)
    return np.concatenate([cheb[m, : counts[m]] for m in range(cfg.Nm)])


def unpack_pressure(cfg: SpectralConfig, vec: np.ndarray) -> PressureField:
    """Rebuild a pressure grid from packed coefficients."""
    nodal = (pressure_synthesis(cfg) @ np.asarray(vec)).reshape(cfg.Nm, cfg.Ny)
    full = np.zeros((cfg.Ns, cfg.Ny), dtype=complex)
    full[operator_mode_indices(cfg), :] = nodal
    return PressureField(cfg, np.fft.ifft(full * cfg.Ns, axis=0))


def pressure_pin_row(cfg: SpectralConfig) -> np.ndarray:
    """Row fixing the vertical mean of the mean-mode pressure to zero.

    The integrand has degree ``Ny - 2``, so the collocation quadrature is
    exact; the row touches only the first coefficient block.
    """
    wy = clenshaw_curtis_weights(cfg.Ny)
    V0 = chebyshev_vandermonde(chebyshev_nodes(cfg.Ny), cfg.Ny - 1)
    row = np.zeros(pressure_size(cfg))
    row[: cfg.Ny - 1] = wy @ V0
    return row


def pressure_top_rows(cfg: SpectralConfig) -> np.ndarray:
    """Per-mode trace of the pressure at the top boundary.

    Shape ``(Nm, pressure_size)``: Chebyshev polynomials all equal one at
    the upper endpoint, so each mode's row is an indicator of its block.
    """
    counts = pressure_coeff_counts(cfg)
    offs = pressure_offsets(cfg)
    out = np.zeros((cfg.Nm, pressure_size(cfg)))
    for m in range(cfg.Nm):
        out[m, offs[m] : offs[m + 1]] = 1.0
    return out


# ======================================================================
# State packing
# ======================================================================


def state_size(cfg: SpectralConfig) -> int:
    """Length of the packed coupled-state vector."""
    return fluid_size(cfg) + 2 * cfg.Nb


def pack_state(z: CoupledState) -> np.ndarray:
    """Flatten ``(w, eta1, eta2)`` into a single complex vector."""
    return np.concatenate(
        [pack_fluid(z.w), coeffs_to_beamvec(z.eta1), coeffs_to_beamvec(z.eta2)]
    )


def unpack_state(cfg: SpectralConfig, vec: np.ndarray) -> CoupledState:
    """Rebuild a coupled state from a packed vector."""
    vec = np.asarray(vec)
    nf = fluid_size(cfg)
    w = unpack_fluid(cfg, vec[:nf])
    eta1 = beamvec_to_function(cfg, vec[nf : nf + cfg.Nb])
    eta2 = beamvec_to_function(cfg, vec[nf + cfg.Nb :])
    return CoupledState(w=w, eta1=eta1, eta2=eta2)


# ======================================================================
# Differentiation and multiplication matrices
# ======================================================================


def scalar_Ds(cfg: SpectralConfig) -> np.ndarray:
    """Horizontal derivative on scalar semi-spectral dofs (diagonal)."""
    xi = fourier_xi(cfg)[operator_mode_indices(cfg)]
    return np.diag(np.repeat(1j * xi, cfg.Ny))


def scalar_Dy(cfg: SpectralConfig) -> np.ndarray:
    """Vertical derivative on scalar semi-spectral dofs (block diagonal)."""
    return np.kron(np.eye(cfg.Nm), chebyshev_diff(cfg.Ny))


def fluid_Ds(cfg: SpectralConfig) -> np.ndarray:
    """Componentwise horizontal derivative on packed velocity dofs."""
    return np.kron(np.eye(2), scalar_Ds(cfg))


def fluid_Dy(cfg: SpectralConfig) -> np.ndarray:
    """Componentwise vertical derivative on packed velocity dofs."""
    return np.kron(np.eye(2), scalar_Dy(cfg))


def mult_matrix(cfg: SpectralConfig, grid: np.ndarray) -> np.ndarray:
    """Matrix of pointwise multiplication by a coefficient grid.

    Parameters
    ----------
    cfg : SpectralConfig
        Discretization.
    grid : ndarray, shape (Ns, Ny)
        Collocation values of the coefficient field.

    Returns
    -------
    ndarray, shape (Nm * Ny, Nm * Ny)
        Circular-convolution matrix per node: entry ``((m', j), (m, j))``
        is the FFT coefficient of the grid at mode ``k_{m'} - k_m``.
        Composed with packing, this reproduces multiplication on the grid
        exactly for Nyquist-free inputs.
    """
    grid = np.asarray(grid)
    if grid.shape != (cfg.Ns, cfg.Ny):
        raise ValueError(f"grid must have shape {(cfg.Ns, cfg.Ny)}, got {grid.shape}")
    chat = np.fft.fft(grid, axis=0) / cfg.Ns
    kidx = fourier_wavenumbers(cfg)[operator_mode_indices(cfg)]
    diff = (kidx[:, None] - kidx[None, :]) % cfg.Ns
    out = np.zeros((cfg.Nm, cfg.Ny, cfg.Nm, cfg.Ny), dtype=complex)
    sel = chat[diff, :]  # (Nm, Nm, Ny)
    for j in range(cfg.Ny):
        out[:, j, :, j] = sel[:, :, j]
    return out.reshape(cfg.Nm * cfg.Ny, cfg.Nm * cfg.Ny)


def _broadcast_grid(cfg: SpectralConfig, values: np.ndarray) -> np.ndarray:
    """Broadcast an ``(Ns,)`` profile to an ``(Ns, Ny)`` grid if needed."""
    values = np.asarray(values)
    if values.ndim == 1:
        return np.broadcast_to(values[:, None], (cfg.Ns, cfg.Ny))
    return values


# ======================================================================
# Transformed-operator matrices
# ======================================================================


def laplacian_matrix(tf: TransformOps) -> np.ndarray:
    """Matrix of the transformed Laplacian on packed velocity dofs.

    Mirrors the pointwise evaluation term by term: every contribution is a
    coefficient grid times a flat derivative of the input, so the matrix
    agrees with the grid form to roundoff on band-limited fields.
    """
    _require_strip(tf, "laplacian_matrix")
    cfg = tf.cfg
    f = tf.fields
    n = cfg.Nm * cfg.Ny
    Ds, Dy = scalar_Ds(cfg), scalar_Dy(cfg)
    c11, c12, c22 = _metric(tf)
    dY21, dY22 = f["dY21"], f["dY22"]

    t11 = f["da1_11"]
    t12 = f["da1_11"] * dY21
    t21 = f["da1_21"]
    t22 = f["da1_21"] * dY21 + f["da2_21"] * dY22

    # Principal part plus first-order drift, identical for both components.
    diag_block = (
        mult_matrix(cfg, c11) @ (Ds @ Ds)
        + 2.0 * mult_matrix(cfg, c12) @ (Ds @ Dy)
        + mult_matrix(cfg, c22) @ (Dy @ Dy)
        + mult_matrix(cfg, f["lapY2"]) @ Dy
    )

    b11, b21 = f["b11"], f["b21"]
    d2a_11, d2a_21 = f["d2a11_11"], f["d2a11_21"]

    L = np.zeros((2 * n, 2 * n), dtype=complex)
    # Component 0 rows: coupling to component 0 only.
    L[:n, :n] = (
        diag_block
        + mult_matrix(cfg, b11 * d2a_11)
        + 2.0 * mult_matrix(cfg, b11 * t11) @ Ds
        + 2.0 * mult_matrix(cfg, b11 * t12) @ Dy
    )
    # Component 1 rows: diagonal part on component 1, drift on component 0.
    L[n:, n:] = diag_block
    L[n:, :n] = (
        mult_matrix(cfg, b21 * d2a_11 + d2a_21)
        + 2.0 * mult_matrix(cfg, b21 * t11 + t21) @ Ds
        + 2.0 * mult_matrix(cfg, b21 * t12 + t22) @ Dy
    )
    return L


def gradient_matrix(tf: TransformOps) -> np.ndarray:
    """Matrix of the transformed pressure gradient.

    Maps packed pressure coefficients to packed velocity dofs.
    """
    _require_strip(tf, "gradient_matrix")
    cfg = tf.cfg
    det = tf.field("det")
    c11, c12, c22 = _metric(tf)
    Sq = pressure_synthesis(cfg)
    Ds, Dy = scalar_Ds(cfg), scalar_Dy(cfg)
    DsS, DyS = Ds @ Sq, Dy @ Sq
    top = mult_matrix(cfg, det * c11) @ DsS + mult_matrix(cfg, det * c12) @ DyS
    bot = mult_matrix(cfg, det * c12) @ DsS + mult_matrix(cfg, det * c22) @ DyS
    return np.vstack([top, bot])


def divergence_matrix(cfg: SpectralConfig) -> np.ndarray:
    """Flat divergence on packed velocity dofs (exact for transformed fields).

    Shape ``(Nm * Ny, 2 * Nm * Ny)``.
    """
    return np.hstack([scalar_Ds(cfg), scalar_Dy(cfg)])


def trace_D_rows(tf: TransformOps) -> np.ndarray:
    """Interface rows of the symmetrized-gradient trace operator.

    Shape ``(Nm, 2 * Nm * Ny)``: operator-mode coefficients (mean mode
    first) of the boundary functional evaluated at the top nodes.
    """
    _require_strip(tf, "trace_D_rows")
    cfg = tf.cfg
    f = tf.fields
    h = _broadcast_grid(cfg, 0.5 * (-tf.dzeta))
    a11, a21 = f["a11"], f["a21"]
    dY21, dY22 = f["dY21"], f["dY22"]
    Ds, Dy = scalar_Ds(cfg), scalar_Dy(cfg)

    on_w1 = (
        mult_matrix(cfg, h * f["da1_21"] + f["da2_21"])
        + mult_matrix(cfg, h * a21) @ Ds
        + mult_matrix(cfg, h * a21 * dY21 + h * a11 * dY22 + dY22 * a21) @ Dy
    )
    on_w2 = mult_matrix(cfg, h) @ Ds + mult_matrix(cfg, h * dY21 + dY22) @ Dy
    rows = scalar_rows_at_node(cfg, cfg.Ny - 1)
    return np.hstack([on_w1[rows, :], on_w2[rows, :]])


def traction_rows(tf: TransformOps) -> Tuple[np.ndarray, np.ndarray]:
    """Mean-zero traction functional as rows over velocity and pressure dofs.

    Returns ``(Tw, Tq)`` with ``Nb`` rows each (beam-mode order): the
    beam coefficients of ``2 nu`` times the symmetrized-gradient trace
    minus the pressure trace, mean removed.
    """
    cfg = tf.cfg
    Tw = 2.0 * cfg.nu * trace_D_rows(tf)[1:, :]
    Tq = -pressure_top_rows(cfg)[1:, :].astype(complex)
    return Tw, Tq


# ======================================================================
# Gram matrices
# ======================================================================


def _mode_mass(cfg: SpectralConfig, factor: int = 2) -> np.ndarray:
    """Per-mode vertical mass matrix ``L * P^T diag(wy) P`` (exact)."""
    y, wy, P = fine_y_rule(cfg, factor)
    return cfg.L * (P.T * wy) @ P


def fluid_l2_gram(cfg: SpectralConfig) -> np.ndarray:
    """Gram of the flat velocity inner product on packed dofs."""
    Y = _mode_mass(cfg)
    return np.kron(np.eye(2 * cfg.Nm), Y)


def fluid_sobolev_gram(cfg: SpectralConfig, sigma: int) -> np.ndarray:
    """Gram of the flat Sobolev inner product of integer order ``sigma``.

    Block diagonal per component and mode; all mixed derivatives up to
    total order ``sigma`` contribute.
    """
    if sigma < 0 or sigma > 4 or int(sigma) != sigma:
        raise ValueError(f"sigma must be an integer in [0, 4], got {sigma}")
    Y = _mode_mass(cfg)
    D = chebyshev_diff(cfg.Ny)
    xi = fourier_xi(cfg)[operator_mode_indices(cfg)]
    blocks = np.zeros((cfg.Nm, cfg.Ny, cfg.Ny), dtype=complex)
    for a in range(int(sigma) + 1):
        for b in range(int(sigma) + 1 - a):
            Db = np.linalg.matrix_power(D, b)
            core = Db.T @ Y @ Db
            for m in range(cfg.Nm):
                blocks[m] += np.abs(xi[m]) ** (2 * a) * core
    out = np.zeros((cfg.Nm * cfg.Ny, cfg.Nm * cfg.Ny), dtype=complex)
    for m in range(cfg.Nm):
        out[m * cfg.Ny : (m + 1) * cfg.Ny, m * cfg.Ny : (m + 1) * cfg.Ny] = blocks[m]
    return np.kron(np.eye(2), out)


def _weighted_block(cfg: SpectralConfig, wgrid: np.ndarray, P: np.ndarray, wy: np.ndarray) -> np.ndarray:
    """Single component-pair block of the weighted velocity Gram."""
    chat = np.fft.fft(wgrid, axis=0) / cfg.Ns
    kidx = fourier_wavenumbers(cfg)[operator_mode_indices(cfg)]
    diff = (kidx[:, None] - kidx[None, :]) % cfg.Ns
    sel = chat[diff, :]  # (Nm, Nm, nq)
    block = cfg.L * np.einsum("abq,qi,qj,q->aibj", sel, P.conj(), P, wy, optimize=True)
    return block.reshape(cfg.Nm * cfg.Ny, cfg.Nm * cfg.Ny)


def fluid_weighted_gram(cfg: SpectralConfig, eta10: Optional[BeamFunction] = None) -> np.ndarray:
    """Gram of the deformed-channel velocity inner product on packed dofs.

    Matches the quadrature convention of the grid-level weighted inner
    product; with no deflection it reduces to the flat Gram.
    """
    if eta10 is None:
        return fluid_l2_gram(cfg)
    W11, W12, W22 = fluid_weight_grids(cfg, eta10)
    y, wy, P = fine_y_rule(cfg)
    B11 = _weighted_block(cfg, W11, P, wy)
    B12 = _weighted_block(cfg, W12, P, wy)
    B22 = _weighted_block(cfg, W22, P, wy)
    n = cfg.Nm * cfg.Ny
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = B11
    out[:n, n:] = B12
    out[n:, :n] = B12.conj().T
    out[n:, n:] = B22
    return out


def beam_gram(cfg: SpectralConfig, theta: float = 0.0) -> np.ndarray:
    """Gram of the fractional beam inner product on mean-zero modes."""
    d = beam_power_diagonal(cfg, theta)
    return cfg.L * np.diag(d**2)


def state_gram(cfg: SpectralConfig, eta10: Optional[BeamFunction] = None) -> np.ndarray:
    """Gram of the coupled energy inner product on packed state vectors.

    Velocity block weighted by the deformed geometry, deflection block
    paired through the square root of the beam operator, velocity-of-beam
    block plain.
    """
    n = fluid_size(cfg)
    out = np.zeros((state_size(cfg), state_size(cfg)), dtype=complex)
    out[:n, :n] = fluid_weighted_gram(cfg, eta10)
    out[n : n + cfg.Nb, n : n + cfg.Nb] = beam_gram(cfg, 0.5)
    out[n + cfg.Nb :, n + cfg.Nb :] = beam_gram(cfg, 0.0)
    return out
