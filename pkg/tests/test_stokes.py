"""Resolvent Stokes solves: oracles, boundary exactness, projection."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import null_space

from beamflow.assembly import (
    divergence_matrix,
    fluid_dof_index,
    pack_fluid,
    pack_pressure,
    pressure_size,
    unpack_pressure,
)
from beamflow.beam import BeamFunction, project_mean_zero, random_beam
from beamflow.config import SpectralConfig
from beamflow.fields import FluidField, PressureField, random_fluid
from beamflow.geometry import apply_D_trace, apply_G, apply_L, flat_transform
from beamflow.norms import fluid_l2_inner, weighted_fluid_inner
from beamflow.stokes import (
    StokesSolution,
    divfree_constraints,
    leray_project,
    solve_forced,
    solve_lifted,
    weighted_pressure_mean,
)

CFG = SpectralConfig(Ns=24, Ny=12)


def _sin_interface(cfg: SpectralConfig, amp: float = 0.2) -> BeamFunction:
    return BeamFunction.from_callable(cfg, lambda s: amp * np.sin(2.0 * np.pi * s / cfg.L))


def _stream_field(cfg: SpectralConfig) -> FluidField:
    """Divergence-free field with clamped traces from a stream function."""

    def w1(s, y):
        return 2.0 * y * (1.0 - y) * (1.0 - 2.0 * y) * np.sin(2.0 * s)

    def w2(s, y):
        return -(y**2) * (1.0 - y) ** 2 * 2.0 * np.cos(2.0 * s)

    return FluidField.from_callables(cfg, w1, w2)


def _fluid_norm(f: FluidField) -> float:
    return float(np.sqrt(fluid_l2_inner(f, f).real))


# ======================================================================
# Degenerate and validation cases
# ======================================================================


def test_constant_data_gives_zero_solution():
    tf = flat_transform(CFG, _sin_interface(CFG))
    eta = BeamFunction.from_callable(CFG, lambda s: np.full_like(s, 0.7))
    sol = solve_lifted(1.5, eta, tf)
    assert _fluid_norm(sol.w) < 1e-10
    assert np.abs(sol.q.p).max() < 1e-9
    assert np.abs(sol.traction_top.coeffs).max() < 1e-10


def test_negative_real_part_rejected():
    tf = flat_transform(CFG)
    eta = random_beam(CFG, np.random.default_rng(1))
    with pytest.raises(ValueError):
        solve_lifted(-1.0 + 2.0j, eta, tf)
    with pytest.raises(ValueError):
        solve_forced(-0.1, random_fluid(CFG, np.random.default_rng(2)), tf)


def test_permode_requires_flat_chart():
    tf = flat_transform(CFG, _sin_interface(CFG))
    eta = random_beam(CFG, np.random.default_rng(3))
    with pytest.raises(ValueError):
        solve_lifted(1.0, eta, tf, method="permode")


# ======================================================================
# Route agreement (correctness anchor)
# ======================================================================


def test_permode_matches_dense_lifted():
    tf = flat_transform(CFG)
    eta = random_beam(CFG, np.random.default_rng(4))
    a = solve_lifted(3.0 + 2.0j, eta, tf, method="permode")
    b = solve_lifted(3.0 + 2.0j, eta, tf, method="dense")
    scale = np.abs(b.w.u).max()
    np.testing.assert_allclose(a.w.u, b.w.u, atol=1e-10 * scale)
    np.testing.assert_allclose(a.q.p, b.q.p, atol=1e-10 * max(1.0, np.abs(b.q.p).max()))


def test_permode_matches_dense_forced():
    tf = flat_transform(CFG)
    f = random_fluid(CFG, np.random.default_rng(5))
    a = solve_forced(2.0 + 0.5j, f, tf, method="permode")
    b = solve_forced(2.0 + 0.5j, f, tf, method="dense")
    scale = max(np.abs(b.w.u).max(), 1e-30)
    np.testing.assert_allclose(a.w.u, b.w.u, atol=1e-10 * scale)
    np.testing.assert_allclose(a.q.p, b.q.p, atol=1e-10 * max(1.0, np.abs(b.q.p).max()))


# ======================================================================
# Boundary conditions and residuals
# ======================================================================


def test_lifted_boundary_conditions_exact():
    tf = flat_transform(CFG, _sin_interface(CFG))
    eta = random_beam(CFG, np.random.default_rng(6))
    sol = solve_lifted(2.0 + 1.0j, eta, tf)
    data = project_mean_zero(eta).values()
    assert np.abs(sol.w.u[1][:, -1] - data).max() < 1e-10
    assert np.abs(sol.w.u[0][:, -1]).max() < 1e-10
    assert np.abs(sol.w.u[:, :, 0]).max() < 1e-10
    assert sol.bc_residual < 1e-10
    assert sol.div_residual < 1e-9


def test_pressure_weighted_mean_removed():
    tf = flat_transform(CFG, _sin_interface(CFG))
    eta = random_beam(CFG, np.random.default_rng(7))
    sol = solve_lifted(1.0, eta, tf)
    assert abs(weighted_pressure_mean(sol.q, tf)) < 1e-10


def test_traction_matches_pointwise_trace():
    tf = flat_transform(CFG, _sin_interface(CFG))
    eta = random_beam(CFG, np.random.default_rng(8))
    sol = solve_lifted(2.5 + 0.3j, eta, tf)
    qtop = BeamFunction.from_values(CFG, sol.q.p[:, -1])
    want = project_mean_zero(
        2.0 * CFG.nu * apply_D_trace(tf, sol.w) - qtop
    )
    # The functional lives on the operator modes; the grid route also
    # carries an aliased Nyquist coefficient that the matrix route drops.
    keep = np.ones(CFG.Ns, dtype=bool)
    keep[CFG.Ns // 2] = False
    np.testing.assert_allclose(
        sol.traction_top.coeffs[keep],
        want.coeffs[keep],
        atol=1e-9 * max(1.0, np.abs(want.coeffs).max()),
    )


# ======================================================================
# Manufactured solution
# ======================================================================


def test_manufactured_solution_recovery():
    cfg = CFG
    tf = flat_transform(cfg, _sin_interface(cfg))
    lam = 2.0 + 1.0j
    w_man = _stream_field(cfg)

    def qfun(s, y):
        return np.cos(2.0 * s) * (y**3 - y) + 0.3 * (2.0 * (2.0 * y - 1.0) ** 2 - 1.0)

    q_man = PressureField.from_callable(cfg, qfun)
    f = FluidField(
        cfg,
        lam * w_man.u - cfg.nu * apply_L(tf, w_man).u + apply_G(tf, q_man).u,
    )
    sol = solve_forced(lam, f, tf, method="dense")
    scale = np.abs(w_man.u).max()
    np.testing.assert_allclose(sol.w.u, w_man.u, atol=1e-8 * scale)
    q_ref = q_man.p - weighted_pressure_mean(q_man, tf)
    np.testing.assert_allclose(sol.q.p, q_ref, atol=1e-8 * max(1.0, np.abs(q_ref).max()))


# ======================================================================
# Resolvent decay
# ======================================================================


def test_forced_resolvent_decay_slope():
    # Fit above the first Stokes eigenvalue (about nu * pi^2); below it the
    # resolvent norm plateaus and no power law is expected.
    tf = flat_transform(CFG)
    f = random_fluid(CFG, np.random.default_rng(9))
    taus = [1e2, 1e3, 1e4, 1e5]
    norms = [_fluid_norm(solve_forced(1j * t, f, tf).w) for t in taus]
    slope = np.polyfit(np.log(taus), np.log(norms), 1)[0]
    assert abs(slope - (-1.0)) < 0.1


# ======================================================================
# Projection onto divergence-free fields
# ======================================================================


def test_leray_constraint_rank():
    C = divfree_constraints(CFG)
    n_rows = CFG.Nm * CFG.Ny + 2 * CFG.Nm - 2
    assert C.shape == (n_rows, 2 * CFG.Nm * CFG.Ny)
    s = np.linalg.svd(C, compute_uv=False)
    assert s.min() > 1e-8


def test_leray_kernel_divergence_free_everywhere():
    # Kernel members have identically vanishing divergence — including at
    # the top node of the mean mode, whose row is implied and omitted.
    C = divfree_constraints(CFG)
    basis = null_space(C)
    Div = divergence_matrix(CFG)
    assert basis.shape[1] == 2 * CFG.Nm * CFG.Ny - C.shape[0]
    assert np.abs(Div @ basis).max() < 1e-10
    top = fluid_dof_index(CFG, 1, np.arange(CFG.Nm), CFG.Ny - 1)
    bottom = fluid_dof_index(CFG, 1, np.arange(CFG.Nm), 0)
    assert np.abs(basis[top, :]).max() < 1e-10
    assert np.abs(basis[bottom, :]).max() < 1e-10


def test_leray_fixed_point():
    tf = flat_transform(CFG, _sin_interface(CFG))
    w = _stream_field(CFG)
    p = leray_project(w, tf)
    assert _fluid_norm(FluidField(CFG, p.u - w.u)) < 1e-10 * _fluid_norm(w)


def test_leray_annihilates_gradients_flat():
    # On the flat chart the pairing of a gradient against any kernel member
    # reduces to exactly computed polynomial integrals, so the projection
    # kills gradients of arbitrary potentials to machine precision.
    tf = flat_transform(CFG)
    rng = np.random.default_rng(10)
    vec = rng.standard_normal(pressure_size(CFG)) + 1j * rng.standard_normal(pressure_size(CFG))
    g = apply_G(tf, unpack_pressure(CFG, vec))
    p = leray_project(g, tf)
    assert _fluid_norm(p) < 1e-11 * _fluid_norm(g)


def test_leray_annihilates_gradients_curved():
    # Smooth potential with wall-flat vertical profile (normal derivative
    # vanishes at the bottom wall); its transformed gradient is exactly
    # representable, so the projection annihilates it.
    tf = flat_transform(CFG, _sin_interface(CFG))
    phi = PressureField.from_callable(
        CFG, lambda s, y: np.cos(2.0 * s) * (3.0 * y**2 - 2.0 * y**3) + (y**3 - 1.5 * y**2)
    )
    g = apply_G(tf, phi)
    p = leray_project(g, tf)
    assert _fluid_norm(p) < 1e-10 * _fluid_norm(g)


def test_leray_idempotent_and_orthogonal():
    tf = flat_transform(CFG, _sin_interface(CFG))
    eta10 = _sin_interface(CFG)
    f = random_fluid(CFG, np.random.default_rng(11))
    p1 = leray_project(f, tf)
    p2 = leray_project(p1, tf)
    assert _fluid_norm(FluidField(CFG, p2.u - p1.u)) < 1e-10 * _fluid_norm(p1)
    # The residual is orthogonal to the projected field in the weighted product.
    resid = FluidField(CFG, f.u - p1.u)
    ip = weighted_fluid_inner(resid, p1, eta10)
    assert abs(ip) < 1e-9 * _fluid_norm(f) ** 2
