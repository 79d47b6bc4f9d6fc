"""Grids, transforms, and differentiation for the Fourier x Chebyshev layout.

Horizontal coordinate ``s``: periodic on ``[0, L)`` with ``Ns`` equispaced
points; coefficients live in the numpy FFT layout (slot ``k`` for
``0 <= k < Ns/2``, slot ``Ns + k`` for negative ``k``; the Nyquist slot
``Ns/2`` is excluded from all operator work).  Normalization: coefficient
``c_k = (1/Ns) sum_i f(s_i) exp(-i xi_k s_i)`` so that
``f(s_i) = sum_k c_k exp(i xi_k s_i)`` and the discrete Parseval identity
``(L/Ns) sum_i |f_i|^2 = L sum_k |c_k|^2`` holds exactly.

Vertical coordinate ``y``: Chebyshev-Gauss-Lobatto points mapped to
``[0, 1]``, ascending (``y_0 = 0``, ``y_{Ny-1} = 1``), with the standard
collocation differentiation matrix and Clenshaw-Curtis quadrature weights.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .config import SpectralConfig

# ======================================================================
# Fourier direction
# ======================================================================


def fourier_nodes(cfg: SpectralConfig) -> np.ndarray:
    """Equispaced collocation points ``s_i = i L / Ns``, shape ``(Ns,)``."""
    return cfg.L * np.arange(cfg.Ns) / cfg.Ns


def fourier_wavenumbers(cfg: SpectralConfig) -> np.ndarray:
    """Integer mode numbers ``k`` per FFT slot, shape ``(Ns,)``.

    The Nyquist slot carries ``-Ns/2`` (the numpy convention); it is
    excluded from operator work via :func:`operator_mode_indices`.
    """
    return np.fft.fftfreq(cfg.Ns, d=1.0 / cfg.Ns).astype(int)


def fourier_xi(cfg: SpectralConfig) -> np.ndarray:
    """Angular wavenumbers ``xi_k = 2 pi k / L`` per FFT slot."""
    return 2.0 * np.pi * fourier_wavenumbers(cfg) / cfg.L


def operator_mode_indices(cfg: SpectralConfig) -> np.ndarray:
    """FFT slots of the ``Nm = Ns - 1`` modes kept by operators.

    Order: ``k = 0, 1, ..., Ns/2 - 1, -(Ns/2 - 1), ..., -1`` (the FFT
    layout with the Nyquist slot removed).
    """
    half = cfg.Ns // 2
    return np.concatenate([np.arange(half), np.arange(half + 1, cfg.Ns)])


def beam_mode_indices(cfg: SpectralConfig) -> np.ndarray:
    """FFT slots of the ``Nb = Ns - 2`` mean-zero beam modes (``k != 0``)."""
    half = cfg.Ns // 2
    return np.concatenate([np.arange(1, half), np.arange(half + 1, cfg.Ns)])


def to_coeffs(values: np.ndarray) -> np.ndarray:
    """Collocation values -> Fourier coefficients (last axis)."""
    n = values.shape[-1]
    return np.fft.fft(values, axis=-1) / n


def to_values(coeffs: np.ndarray) -> np.ndarray:
    """Fourier coefficients -> collocation values (last axis)."""
    n = coeffs.shape[-1]
    return np.fft.ifft(coeffs * n, axis=-1)


def enforce_conjugate_symmetry(coeffs: np.ndarray) -> np.ndarray:
    """Project coefficients onto the real-valued subspace.

    Averages ``c_k`` with ``conj(c_{-k})``; the result synthesizes to real
    collocation values.  Used after every nonlinear product to suppress
    imaginary drift.
    """
    n = coeffs.shape[-1]
    refl = (-np.arange(n)) % n
    return 0.5 * (coeffs + np.conj(coeffs[..., refl]))


def deriv_s_values(values: np.ndarray, cfg: SpectralConfig, order: int = 1) -> np.ndarray:
    """Spectral s-derivative of collocation values along the last axis.

    The Nyquist slot is zeroed for odd orders (it carries no sign
    information for real data).
    """
    xi = fourier_xi(cfg)
    mult = (1j * xi) ** order
    if order % 2 == 1:
        mult[cfg.Ns // 2] = 0.0
    c = to_coeffs(values) * mult
    return to_values(c)


def fourier_synthesis_matrix(cfg: SpectralConfig, s_points: np.ndarray) -> np.ndarray:
    """Matrix mapping operator-mode coefficients to values at ``s_points``.

    Shape ``(len(s_points), Nm)``; column order follows
    :func:`operator_mode_indices`.
    """
    xi = fourier_xi(cfg)[operator_mode_indices(cfg)]
    return np.exp(1j * np.outer(s_points, xi))


def fourier_analysis_matrix(cfg: SpectralConfig) -> np.ndarray:
    """Matrix mapping ``Ns`` grid values to the ``Nm`` operator-mode coefficients."""
    s = fourier_nodes(cfg)
    xi = fourier_xi(cfg)[operator_mode_indices(cfg)]
    return np.exp(-1j * np.outer(xi, s)) / cfg.Ns


def dealias_mask(cfg: SpectralConfig) -> np.ndarray:
    """Boolean FFT-layout mask keeping ``|k| <= floor(Ns/3)`` (2/3 rule)."""
    k = fourier_wavenumbers(cfg)
    return np.abs(k) <= cfg.Ns // 3


def dealias_values(values: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """Apply the 2/3-rule mask to collocation values along the last axis."""
    c = to_coeffs(values)
    c = np.where(dealias_mask(cfg), c, 0.0)
    return to_values(c)


# ======================================================================
# Chebyshev direction
# ======================================================================


def chebyshev_nodes(n: int) -> np.ndarray:
    """Gauss-Lobatto points on ``[0, 1]``, ascending, shape ``(n,)``."""
    j = np.arange(n)
    return 0.5 * (1.0 - np.cos(np.pi * j / (n - 1)))


def chebyshev_diff(n: int) -> np.ndarray:
    """Collocation differentiation matrix on the ascending ``[0, 1]`` nodes.

    Exact for polynomials of degree ``n - 1``.
    """
    # Standard Gauss-Lobatto matrix on [-1, 1] with descending nodes,
    # then flipped to ascending order and scaled by the chart factor 2.
    m = n - 1
    x = np.cos(np.pi * np.arange(n) / m)
    c = np.ones(n)
    c[0] = 2.0
    c[-1] = 2.0
    c = c * (-1.0) ** np.arange(n)
    X = np.tile(x, (n, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n))
    D = D - np.diag(D.sum(axis=1))
    # Flip to ascending nodes and map [-1, 1] -> [0, 1].
    J = np.flip(np.eye(n), axis=0)
    return 2.0 * (J @ D @ J)


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Quadrature weights for ``int_0^1 f(y) dy`` on the ascending nodes.

    Exact for polynomials of degree ``n - 1`` (degree ``n`` for even
    ``n - 1``); spectrally accurate for smooth integrands.
    """
    m = n - 1
    theta = np.pi * np.arange(n) / m
    w = np.zeros(n)
    v = np.ones(m - 1)
    for k in range(1, m // 2 + 1):
        factor = 2.0 if 2 * k < m else 1.0
        v -= factor * np.cos(2.0 * k * theta[1:-1]) / (4.0 * k * k - 1.0)
    w[1:-1] = 2.0 * v / m
    w[0] = w[-1] = 1.0 / (m * m - 1.0 + (m % 2))
    # Map [-1, 1] -> [0, 1] (factor 1/2) and flip to ascending order.
    return 0.5 * w[::-1]


def chebyshev_vandermonde(y: np.ndarray, ncols: int) -> np.ndarray:
    """Values ``T_m(2 y - 1)`` for ``m < ncols``, shape ``(len(y), ncols)``."""
    x = np.clip(2.0 * np.asarray(y) - 1.0, -1.0, 1.0)
    theta = np.arccos(x)
    return np.cos(np.outer(theta, np.arange(ncols)))


def chebyshev_interp_matrix(n_from: int, y_to: np.ndarray) -> np.ndarray:
    """Polynomial interpolation matrix from the ``n_from`` nodes to ``y_to``.

    Exact for polynomials of degree ``n_from - 1``.
    """
    y_from = chebyshev_nodes(n_from)
    V_from = chebyshev_vandermonde(y_from, n_from)
    V_to = chebyshev_vandermonde(np.asarray(y_to), n_from)
    return np.linalg.solve(V_from.T, V_to.T).T


# ======================================================================
# Oversampled tensor quadrature
# ======================================================================


def fine_quadrature(cfg: SpectralConfig, factor: int = 2) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Oversampled tensor quadrature for products of discrete fields.

    Returns ``(s_fine, ws, y_fine, wy)``: trapezoid points/weights on
    ``factor * Ns`` horizontal points (exact for the trigonometric products
    arising from operator-mode data) and Clenshaw-Curtis points/weights on
    ``factor * Ny`` vertical points (exact for polynomial products of
    degree ``< factor * Ny - 1``).
    """
    ns = factor * cfg.Ns
    s_fine = cfg.L * np.arange(ns) / ns
    ws = np.full(ns, cfg.L / ns)
    ny = factor * cfg.Ny
    y_fine = chebyshev_nodes(ny)
    wy = clenshaw_curtis_weights(ny)
    return s_fine, ws, y_fine, wy
