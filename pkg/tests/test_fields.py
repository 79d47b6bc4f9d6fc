"""Tests for fluid-side field containers and strip-grid derivatives."""

from __future__ import annotations

import numpy as np
import pytest

from beamflow.config import SpectralConfig
from beamflow.fields import (
    CoupledState,
    FluidField,
    PressureField,
    field_deriv_s,
    field_deriv_y,
    grid_deriv_s,
    grid_deriv_y,
    random_fluid,
    strip_divergence,
)
from beamflow.spectral import chebyshev_nodes, fourier_nodes

CFG = SpectralConfig(Ns=16, Ny=10)


def test_shape_validation() -> None:
    with pytest.raises(ValueError):
        FluidField(CFG, np.zeros((2, 3, 4)))
    with pytest.raises(ValueError):
        PressureField(CFG, np.zeros((CFG.Ns,)))


def test_sampling_and_immutability() -> None:
    f = FluidField.from_callables(CFG, lambda s, y: np.sin(s) * y, lambda s, y: y**2 + 0.0 * s)
    s = fourier_nodes(CFG)
    y = chebyshev_nodes(CFG.Ny)
    assert np.allclose(f.u[0], np.outer(np.sin(s), y))
    assert np.allclose(f.u[1], np.outer(np.ones_like(s), y**2))
    with pytest.raises(ValueError):
        f.u[0, 0, 0] = 1.0


def test_grid_derivatives_exact() -> None:
    s = fourier_nodes(CFG)[:, None]
    y = chebyshev_nodes(CFG.Ny)[None, :]
    g = np.cos(3 * s) * y**4
    assert np.allclose(grid_deriv_s(g, CFG), -3 * np.sin(3 * s) * y**4, atol=1e-11)
    assert np.allclose(grid_deriv_y(g, CFG), np.cos(3 * s) * 4 * y**3, atol=1e-10)
    assert np.allclose(grid_deriv_y(g, CFG, order=2), np.cos(3 * s) * 12 * y**2, atol=1e-9)


def test_divergence_free_combination() -> None:
    f = FluidField.from_callables(
        CFG,
        lambda s, y: np.sin(s) * y**2,
        lambda s, y: np.cos(s) * y**3 / 3.0,
    )
    # d/ds sin(s) y^2 = cos(s) y^2; d/dy cos(s) y^3/3 = cos(s) y^2.
    assert np.max(np.abs(strip_divergence(f) - 2.0 * np.outer(
        np.cos(fourier_nodes(CFG)), chebyshev_nodes(CFG.Ny) ** 2))) < 1e-11


def test_field_derivative_wrappers() -> None:
    f = FluidField.from_callables(CFG, lambda s, y: np.sin(s) + 0.0 * y, lambda s, y: y + 0.0 * s)
    ds = field_deriv_s(f)
    dy = field_deriv_y(f)
    assert np.allclose(ds.u[0], np.cos(fourier_nodes(CFG))[:, None], atol=1e-12)
    assert np.max(np.abs(ds.u[1])) < 1e-12
    assert np.allclose(dy.u[1], 1.0, atol=1e-12)


def test_random_fluid_reproducible_and_real() -> None:
    a = random_fluid(CFG, np.random.default_rng(3))
    b = random_fluid(CFG, np.random.default_rng(3))
    assert np.array_equal(a.u, b.u)
    assert np.max(np.abs(a.u.imag)) < 1e-14


def test_coupled_state_zero() -> None:
    z = CoupledState.zero(CFG)
    assert z.cfg is CFG
    assert np.max(np.abs(z.w.u)) == 0.0
    assert np.max(np.abs(z.eta1.coeffs)) == 0.0
