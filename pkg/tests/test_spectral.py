"""Grid, transform, and quadrature primitives."""

from __future__ import annotations

import numpy as np
import pytest

from beamflow.config import ConfigError, SpectralConfig
from beamflow.spectral import (
    chebyshev_diff,
    chebyshev_interp_matrix,
    chebyshev_nodes,
    chebyshev_vandermonde,
    clenshaw_curtis_weights,
    dealias_values,
    deriv_s_values,
    enforce_conjugate_symmetry,
    fine_quadrature,
    fourier_analysis_matrix,
    fourier_nodes,
    fourier_synthesis_matrix,
    fourier_wavenumbers,
    fourier_xi,
    operator_mode_indices,
    to_coeffs,
    to_values,
)

CFG = SpectralConfig(Ns=16, Ny=12)


# ======================================================================
# Config validation
# ======================================================================


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        SpectralConfig(Ns=15)
    with pytest.raises(ConfigError):
        SpectralConfig(Ns=4)
    with pytest.raises(ConfigError):
        SpectralConfig(Ny=4)
    with pytest.raises(ConfigError):
        SpectralConfig(L=-1.0)
    with pytest.raises(ConfigError):
        SpectralConfig(nu=0.0)
    with pytest.raises(ConfigError):
        SpectralConfig(alpha1=0.0)
    with pytest.raises(ConfigError):
        SpectralConfig(alpha2=-0.5)


def test_config_derived_sizes():
    assert CFG.Nm == 15
    assert CFG.Nb == 14
    fine = CFG.refine(24, 20)
    assert (fine.Ns, fine.Ny) == (24, 20)
    assert fine.L == CFG.L and fine.nu == CFG.nu


# ======================================================================
# Fourier direction
# ======================================================================


def test_fourier_roundtrip_and_parseval():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(CFG.Ns)
    c = to_coeffs(v)
    assert np.allclose(to_values(c).real, v, atol=1e-13)
    # Discrete Parseval: (L/Ns) sum |v|^2 = L sum |c|^2.
    lhs = CFG.L / CFG.Ns * np.sum(v**2)
    rhs = CFG.L * np.sum(np.abs(c) ** 2)
    assert abs(lhs - rhs) < 1e-12 * abs(lhs)


def test_spectral_derivative_of_single_mode():
    # d/ds of exp(i xi_k s) is (i xi_k) exp(i xi_k s) to machine precision.
    s = fourier_nodes(CFG)
    for k in (1, 3, CFG.Ns // 2 - 1):
        xi = 2.0 * np.pi * k / CFG.L
        f = np.exp(1j * xi * s)
        df = deriv_s_values(f, CFG)
        assert np.allclose(df, 1j * xi * f, atol=1e-11)
    # Fourth derivative as used by the beam operator.
    f = np.cos(2.0 * s)
    d4 = deriv_s_values(f, CFG, order=4)
    assert np.allclose(d4.real, 16.0 * np.cos(2.0 * s), atol=1e-10)


def test_operator_modes_exclude_nyquist():
    idx = operator_mode_indices(CFG)
    k = fourier_wavenumbers(CFG)
    assert len(idx) == CFG.Nm
    assert CFG.Ns // 2 not in idx
    assert set(k[idx]) == set(range(-(CFG.Ns // 2 - 1), CFG.Ns // 2))


def test_synthesis_analysis_matrices_are_inverse_on_modes():
    E = fourier_synthesis_matrix(CFG, fourier_nodes(CFG))
    A = fourier_analysis_matrix(CFG)
    assert np.allclose(A @ E, np.eye(CFG.Nm), atol=1e-12)


def test_conjugate_symmetry_projection():
    rng = np.random.default_rng(1)
    c = rng.standard_normal(CFG.Ns) + 1j * rng.standard_normal(CFG.Ns)
    cs = enforce_conjugate_symmetry(c)
    v = to_values(cs)
    assert np.max(np.abs(v.imag)) < 1e-13
    # Idempotent.
    assert np.allclose(enforce_conjugate_symmetry(cs), cs, atol=1e-14)


def test_dealias_kills_high_modes_only():
    s = fourier_nodes(CFG)
    keep = np.cos(3.0 * s)  # |k|=3 <= Ns//3 = 5
    kill = np.cos(6.0 * s)  # |k|=6 > 5
    out = dealias_values(keep + kill, CFG)
    assert np.allclose(out.real, keep, atol=1e-12)


# ======================================================================
# Chebyshev direction
# ======================================================================


def test_chebyshev_nodes_ascending_endpoints():
    y = chebyshev_nodes(CFG.Ny)
    assert y[0] == 0.0 and abs(y[-1] - 1.0) < 1e-15
    assert np.all(np.diff(y) > 0)


def test_chebyshev_diff_exact_on_polynomials():
    n = CFG.Ny
    y = chebyshev_nodes(n)
    D = chebyshev_diff(n)
    for p in range(n):
        f = y**p
        df = D @ f
        expected = p * y ** (p - 1) if p > 0 else np.zeros(n)
        assert np.allclose(df, expected, atol=1e-8 * max(1.0, p**2))


def test_clenshaw_curtis_integrates_polynomials():
    n = CFG.Ny
    y = chebyshev_nodes(n)
    w = clenshaw_curtis_weights(n)
    for p in range(n):
        got = w @ y**p
        assert abs(got - 1.0 / (p + 1)) < 1e-13, f"degree {p}"


def test_chebyshev_interp_matrix_exact_for_polynomials():
    n = CFG.Ny
    y = chebyshev_nodes(n)
    y_to = np.linspace(0.0, 1.0, 17)
    P = chebyshev_interp_matrix(n, y_to)
    f = 1.0 - 3.0 * y**2 + y ** (n - 1)
    expected = 1.0 - 3.0 * y_to**2 + y_to ** (n - 1)
    assert np.allclose(P @ f, expected, atol=1e-9)


def test_chebyshev_vandermonde_matches_recurrence():
    y = chebyshev_nodes(7)
    V = chebyshev_vandermonde(y, 5)
    x = 2.0 * y - 1.0
    T = [np.ones_like(x), x]
    for m in range(2, 5):
        T.append(2.0 * x * T[-1] - T[-2])
    assert np.allclose(V, np.stack(T, axis=1), atol=1e-12)


def test_fine_quadrature_integrates_products_exactly():
    # Products of grid data: bandwidth 2(Ns/2-1) in s, degree 2(Ny-1) in y;
    # the oversampled rule must integrate them to machine precision.
    s, ws, y, wy = fine_quadrature(CFG)
    f = np.cos(7.0 * s)[:, None] * y[None, :] ** (CFG.Ny - 1)
    g = np.cos(7.0 * s)[:, None] * y[None, :] ** (CFG.Ny - 1)
    got = np.einsum("i,j,ij->", ws, wy, f * g)
    # int cos^2(7s) ds = L/2; int y^(2Ny-2) dy = 1/(2Ny-1).
    expected = CFG.L / 2.0 / (2.0 * CFG.Ny - 1.0)
    assert abs(got - expected) < 1e-12 * abs(expected)
