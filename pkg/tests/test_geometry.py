"""Tests for the channel change of variables and its transformed operators.

The central oracle is independent of the implementation: velocity and
pressure fields that are trigonometric polynomials in the horizontal
coordinate times true polynomials in the vertical one are differentiated
analytically on the deformed channel, composed with the map by direct
evaluation, and compared against the pointwise transformed operators on
the strip grid.
"""

from __future__ import annotations

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from beamflow.beam import BeamFunction
from beamflow.config import SpectralConfig
from beamflow.fields import FluidField, PressureField, grid_deriv_s, grid_deriv_y
from beamflow.geometry import (
    ContactError,
    apply_D_trace,
    apply_G,
    apply_L,
    build_transform,
    evaluate_appendix_jacobians,
    flat_transform,
)
from beamflow.spectral import chebyshev_nodes, fourier_nodes

CFG = SpectralConfig(Ns=32, Ny=16)


def _sin_beam(cfg: SpectralConfig, amp: float, harmonic: int = 1) -> BeamFunction:
    return BeamFunction.from_callable(cfg, lambda s: amp * np.sin(harmonic * s))


# ======================================================================
# Map construction and cached Jacobian fields
# ======================================================================


def test_identity_transform_caches() -> None:
    tf = flat_transform(CFG)
    f = tf.fields
    assert tf.strip_base
    assert np.allclose(f["a11"], 1.0) and np.allclose(f["b11"], 1.0)
    assert np.allclose(f["det"], 1.0) and np.allclose(f["dY22"], 1.0)
    for name in ("a21", "b21", "dY21", "da1_11", "da1_21", "da2_21",
                 "d2a11_11", "d2a11_21", "d2a12_21", "lapY2",
                 "dta_11", "dta_21", "dtY2"):
        assert np.allclose(f[name], 0.0), name


def test_cofactor_fields_match_closed_forms() -> None:
    cfg = CFG
    s = fourier_nodes(cfg)
    y = chebyshev_nodes(cfg.Ny)
    tf = flat_transform(cfg, _sin_beam(cfg, 0.1))
    zeta = 0.1 * np.sin(s)[:, None]
    dz = 0.1 * np.cos(s)[:, None]
    V = y[None, :]
    f = tf.fields
    assert np.allclose(f["det"], 1.0 + zeta, atol=1e-13)
    assert np.allclose(f["a11"], 1.0 / (1.0 + zeta), atol=1e-13)
    assert np.allclose(f["a21"], V * dz / (1.0 + zeta), atol=1e-13)
    assert np.allclose(f["b21"], -V * dz, atol=1e-13)
    # First space derivative of the cofactor matrix, (2,1) entry of the
    # vertical-direction derivative: dz / (1+zeta)^2.
    assert np.allclose(f["da2_21"], dz / (1.0 + zeta) ** 2, atol=1e-12)


def test_inverse_gradient_inverts_map_gradient() -> None:
    cfg = SpectralConfig(Ns=48, Ny=12)
    tf = flat_transform(cfg, BeamFunction.from_callable(cfg, lambda s: 0.3 * np.cos(2 * s)))
    f = tf.fields
    # [[1,0],[dY21,dY22]] @ [[1,0],[dX21,dX22]] == I.
    assert np.max(np.abs(f["dY21"] + f["dY22"] * f["dX21"])) < 1e-12
    assert np.max(np.abs(f["dY22"] * f["dX22"] - 1.0)) < 1e-12


def test_derivative_fields_satisfy_chain_rule() -> None:
    # Every cached derivative field must agree with differentiating the
    # cached parent grid through the map (spectral in s, exact in y).
    cfg = SpectralConfig(Ns=48, Ny=12)
    tf = flat_transform(cfg, _sin_beam(cfg, 0.2))
    f = tf.fields

    def fd1(g: np.ndarray) -> np.ndarray:
        return (grid_deriv_s(g, cfg) + f["dY21"] * grid_deriv_y(g, cfg)).real

    def fd2(g: np.ndarray) -> np.ndarray:
        return (f["dY22"] * grid_deriv_y(g, cfg)).real

    assert np.max(np.abs(fd1(f["a11"]) - f["da1_11"])) < 1e-9
    assert np.max(np.abs(fd1(f["a21"]) - f["da1_21"])) < 1e-9
    assert np.max(np.abs(fd2(f["a21"]) - f["da2_21"])) < 1e-9
    assert np.max(np.abs(fd1(f["da1_11"]) - f["d2a11_11"])) < 1e-8
    assert np.max(np.abs(fd1(f["da1_21"]) - f["d2a11_21"])) < 1e-8
    assert np.max(np.abs(fd2(f["da1_21"]) - f["d2a12_21"])) < 1e-8
    assert np.max(np.abs(fd1(f["da2_21"]) - f["d2a12_21"])) < 1e-8
    assert np.max(np.abs(fd1(f["dY21"]) + fd2(f["dY22"]) - f["lapY2"])) < 1e-9


def test_moving_map_uses_reference_vertical_grid() -> None:
    cfg = CFG
    eta_ref = _sin_beam(cfg, 0.1)
    eta_tgt = _sin_beam(cfg, 0.2)
    tf = build_transform(eta_tgt, eta_ref)
    assert not tf.strip_base
    s = fourier_nodes(cfg)
    y = chebyshev_nodes(cfg.Ny)
    assert np.allclose(tf.vertical, np.outer(1.0 + 0.1 * np.sin(s), y), atol=1e-13)
    expected_zeta = 0.1 * np.sin(s) / (1.0 + 0.1 * np.sin(s))
    assert np.allclose(tf.zeta, expected_zeta, atol=1e-13)
    for op in (lambda: apply_L(tf, FluidField.zero(cfg)),
               lambda: apply_G(tf, PressureField.zero(cfg)),
               lambda: apply_D_trace(tf, FluidField.zero(cfg))):
        with pytest.raises(ValueError):
            op()


def test_time_derivative_fields() -> None:
    cfg = CFG
    dt_eta = BeamFunction.from_callable(cfg, np.cos)
    tf = build_transform(BeamFunction.zero(cfg), BeamFunction.zero(cfg), dt_eta_target=dt_eta)
    s = fourier_nodes(cfg)
    y = chebyshev_nodes(cfg.Ny)
    f = tf.fields
    assert np.allclose(f["dta_11"], -np.cos(s)[:, None] * np.ones_like(y)[None, :], atol=1e-12)
    assert np.allclose(f["dta_21"], np.outer(-np.sin(s), y), atol=1e-12)
    assert np.allclose(f["dtY2"], np.outer(-np.cos(s), y), atol=1e-12)


def test_contact_detection() -> None:
    cfg = CFG
    closing = BeamFunction.from_callable(cfg, lambda s: -1.05 + 0.01 * np.cos(s))
    with pytest.raises(ContactError):
        build_transform(closing, BeamFunction.zero(cfg))
    with pytest.raises(ContactError):
        build_transform(BeamFunction.zero(cfg), closing)


def test_jacobian_bundle_is_complete() -> None:
    bundle = evaluate_appendix_jacobians(flat_transform(CFG))
    for key in ("a11", "a21", "b11", "b21", "det", "dY21", "dY22",
                "da1_11", "da1_21", "da2_21", "d2a11_11", "d2a11_21",
                "d2a12_21", "lapY2", "dta_11", "dta_21", "dtY2"):
        assert key in bundle and bundle[key].shape == (CFG.Ns, CFG.Ny)


# ======================================================================
# Flat-limit reductions of the transformed operators
# ======================================================================


def test_transformed_laplacian_flat_limit() -> None:
    tf = flat_transform(CFG)
    w = FluidField.from_callables(CFG, lambda s, y: np.sin(s) * y**2, lambda s, y: 0.0 * s)
    out = apply_L(tf, w)
    s = fourier_nodes(CFG)[:, None]
    y = chebyshev_nodes(CFG.Ny)[None, :]
    assert np.max(np.abs(out.u[0] - (-np.sin(s) * y**2 + 2.0 * np.sin(s)))) < 1e-10
    assert np.max(np.abs(out.u[1])) < 1e-12


def test_transformed_gradient_flat_limit() -> None:
    tf = flat_transform(CFG)
    q = PressureField.from_callable(CFG, lambda s, y: np.cos(s) * y)
    out = apply_G(tf, q)
    s = fourier_nodes(CFG)[:, None]
    y = chebyshev_nodes(CFG.Ny)[None, :]
    assert np.max(np.abs(out.u[0] - (-np.sin(s) * y))) < 1e-10
    assert np.max(np.abs(out.u[1] - np.cos(s) * np.ones_like(y))) < 1e-10
    const = apply_G(tf, PressureField.from_callable(CFG, lambda s, y: 3.0 + 0.0 * s))
    assert np.max(np.abs(const.u)) < 1e-12


def test_boundary_trace_flat_limit() -> None:
    tf = flat_transform(CFG)
    phi = FluidField.from_callables(CFG, lambda s, y: 0.0 * s, lambda s, y: y**2 + 0.0 * s)
    out = apply_D_trace(tf, phi)
    assert np.max(np.abs(out.real_values() - 2.0)) < 1e-10


def test_transformed_laplacian_is_linear() -> None:
    cfg = CFG
    tf = flat_transform(cfg, _sin_beam(cfg, 0.2))
    w1 = FluidField.from_callables(cfg, lambda s, y: np.sin(s) * y**2, lambda s, y: np.cos(s) * y)
    w2 = FluidField.from_callables(cfg, lambda s, y: np.cos(2 * s) * y, lambda s, y: y**3 + 0.0 * s)
    lhs = apply_L(tf, 2.0 * w1 + (-0.5) * w2)
    rhs = 2.0 * apply_L(tf, w1) + (-0.5) * apply_L(tf, w2)
    assert np.max(np.abs(lhs.u - rhs.u)) < 1e-10


# ======================================================================
# Analytic oracle on the deformed channel
# ======================================================================


def _random_analytic(rng: np.random.Generator, kmax: int = 3, deg: int = 4) -> list:
    """Scalar function sum_k trig(k x1) * P_k(x2) with exact derivatives."""
    terms = []
    for k in range(kmax + 1):
        for trig in ("cos", "sin"):
            if k == 0 and trig == "sin":
                continue
            poly = Polynomial(rng.standard_normal(deg + 1) / (1.0 + k) ** 2)
            terms.append((k, trig, poly))
    return terms


def _eval_analytic(terms: list, x1: np.ndarray, x2: np.ndarray, dx1: int = 0, dx2: int = 0) -> np.ndarray:
    out = np.zeros(np.broadcast(x1, x2).shape)
    for k, trig, poly in terms:
        p = poly.deriv(dx2) if dx2 else poly
        phase = 0.5 * np.pi * dx1
        tr = np.cos(k * x1 + phase) if trig == "cos" else np.sin(k * x1 + phase)
        out = out + (float(k) ** dx1 if dx1 else 1.0) * tr * p(x2)
    return out


def _image_points(tf) -> tuple:
    cfg = tf.cfg
    x1 = fourier_nodes(cfg)[:, None] * np.ones(cfg.Ny)[None, :]
    x2 = (1.0 + tf.zeta)[:, None] * chebyshev_nodes(cfg.Ny)[None, :]
    return x1, x2


def test_transformed_laplacian_matches_analytic_oracle() -> None:
    # Compose an analytic vector field with the map through the cofactor
    # weight and check that the pointwise transformed Laplacian reproduces
    # the analytic Laplacian seen through the same weight.
    cfg = SpectralConfig(Ns=48, Ny=48)
    rng = np.random.default_rng(7)
    tf = flat_transform(cfg, _sin_beam(cfg, 0.2))
    x1, x2 = _image_points(tf)
    b11, b21 = tf.field("b11"), tf.field("b21")

    comp = [_random_analytic(rng), _random_analytic(rng)]
    w_at = [_eval_analytic(c, x1, x2) for c in comp]
    lap_at = [_eval_analytic(c, x1, x2, dx1=2) + _eval_analytic(c, x1, x2, dx2=2) for c in comp]

    w_strip = FluidField(cfg, np.stack([b11 * w_at[0], b21 * w_at[0] + w_at[1]]))
    expected = np.stack([b11 * lap_at[0], b21 * lap_at[0] + lap_at[1]])
    got = apply_L(tf, w_strip)
    scale = np.max(np.abs(expected))
    assert np.max(np.abs(got.u - expected)) / scale < 1e-8


def test_transformed_gradient_matches_analytic_oracle() -> None:
    cfg = SpectralConfig(Ns=48, Ny=48)
    rng = np.random.default_rng(11)
    tf = flat_transform(cfg, _sin_beam(cfg, 0.2))
    x1, x2 = _image_points(tf)
    b11, b21 = tf.field("b11"), tf.field("b21")

    q_terms = _random_analytic(rng)
    q_strip = PressureField(cfg, _eval_analytic(q_terms, x1, x2))
    grad1 = _eval_analytic(q_terms, x1, x2, dx1=1)
    grad2 = _eval_analytic(q_terms, x1, x2, dx2=1)
    expected = np.stack([b11 * grad1, b21 * grad1 + grad2])
    got = apply_G(tf, q_strip)
    scale = np.max(np.abs(expected))
    assert np.max(np.abs(got.u - expected)) / scale < 1e-8


def test_boundary_trace_matches_analytic_oracle() -> None:
    # The trace operator must reproduce the second component of the
    # symmetrized gradient applied to the unnormalized interface normal,
    # computed analytically on the deformed channel.
    cfg = SpectralConfig(Ns=48, Ny=48)
    rng = np.random.default_rng(13)
    tf = flat_transform(cfg, _sin_beam(cfg, 0.2))
    x1, x2 = _image_points(tf)
    b11, b21 = tf.field("b11"), tf.field("b21")

    comp = [_random_analytic(rng), _random_analytic(rng)]
    v_at = [_eval_analytic(c, x1, x2) for c in comp]
    phi = FluidField(cfg, np.stack([b11 * v_at[0], b21 * v_at[0] + v_at[1]]))

    s = fourier_nodes(cfg)
    top = 1.0 + 0.2 * np.sin(s)
    dzeta = 0.2 * np.cos(s)
    d1v2 = _eval_analytic(comp[1], s, top, dx1=1)
    d2v1 = _eval_analytic(comp[0], s, top, dx2=1)
    d2v2 = _eval_analytic(comp[1], s, top, dx2=1)
    expected = 0.5 * (d1v2 + d2v1) * (-dzeta) + d2v2

    got = apply_D_trace(tf, phi).real_values()
    scale = np.max(np.abs(expected))
    assert np.max(np.abs(got - expected)) / scale < 1e-8
