"""Changes of variables between channel geometries and their Jacobian algebra.

One map covers both uses.  For mean-zero deflections ``eta_ref`` and
``eta_target`` (with both channels open), the vertical-scaling map sends the
channel under ``eta_ref`` onto the channel under ``eta_target``:

    (y1, y2) -> (y1, y2 * (1 + zeta(y1))),
    zeta = (eta_target - eta_ref) / (1 + eta_ref),

where ``y2`` is the vertical coordinate of the *base* channel.  With
``eta_ref = 0`` this is the flat-strip chart used by every linear operator;
with ``eta_ref = eta_target_reference`` it is the time-dependent map to the
moving domain used by the nonlinear terms.

All Jacobian-derived coefficient fields (the cofactor matrices ``a`` and
``b``, their first and second space derivatives composed with the map, the
inverse-map gradient and its derivatives, and the time-derivative variants)
are evaluated once on the tensor grid by spectral differentiation of
``zeta`` followed by pointwise algebra, and cached on the returned
:class:`TransformOps`.

With a strip base, the transformed Laplacian, pressure gradient, and
boundary-traction operators act pointwise via :func:`apply_L`,
:func:`apply_G`, and :func:`apply_D_trace`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .beam import BeamFunction
from .config import SpectralConfig
from .fields import (
    FluidField,
    PressureField,
    grid_deriv_s,
    grid_deriv_y,
)
from .spectral import chebyshev_nodes, deriv_s_values

CONTACT_TOL = 1e-6


class ContactError(RuntimeError):
    """The deformed channel degenerates: ``min(1 + zeta)`` below tolerance."""


# ======================================================================
# TransformOps
# ======================================================================


@dataclass(frozen=True)
class TransformOps:
    """Cached Jacobian fields of one vertical-scaling map on the tensor grid.

    Attributes
    ----------
    cfg : SpectralConfig
        Grid descriptor.
    zeta, dzeta, ddzeta, dddzeta : numpy.ndarray
        Relative deflection and its spectral s-derivatives, shape ``(Ns,)``.
    dt_zeta, dt_dzeta : numpy.ndarray
        Time derivative of ``zeta`` and its s-derivative (zero for
        stationary maps).
    vertical : numpy.ndarray
        Base-channel vertical coordinate at the grid points, ``(Ns, Ny)``;
        equals the Chebyshev nodes broadcast when the base is the strip.
    strip_base : bool
        True when the base channel is the flat strip (``eta_ref = 0``).
    fields : dict of str -> numpy.ndarray
        The cached coefficient grids, all shape ``(Ns, Ny)``.  Keys: the
        map gradient ``dX21, dX22``; cofactors ``a11, a21, b11, b21``
        (the omitted entries are the constants ``a12=0, a22=1, b12=0,
        b22=1``); ``det``; first derivatives ``da1_11, da1_21, da2_21``
        (``d a / d x_j`` composed with the map); second derivatives
        ``d2a11_11, d2a11_21, d2a12_21``; inverse-map gradient ``dY21,
        dY22``; its composed Laplacian ``lapY2``; time variants ``dta_11,
        dta_21, dtY2``.
    """

    cfg: SpectralConfig
    zeta: np.ndarray
    dzeta: np.ndarray
    ddzeta: np.ndarray
    dddzeta: np.ndarray
    dt_zeta: np.ndarray
    dt_dzeta: np.ndarray
    vertical: np.ndarray
    strip_base: bool
    fields: Dict[str, np.ndarray]

    def field(self, name: str) -> np.ndarray:
        return self.fields[name]

    @property
    def one_plus_zeta(self) -> np.ndarray:
        return 1.0 + self.zeta


def _spectral_s_derivs(cfg: SpectralConfig, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    d1 = deriv_s_values(values, cfg, 1).real
    d2 = deriv_s_values(values, cfg, 2).real
    d3 = deriv_s_values(values, cfg, 3).real
    return d1, d2, d3


def build_transform(
    eta_target: BeamFunction,
    eta_ref: BeamFunction,
    dt_eta_target: Optional[BeamFunction] = None,
) -> TransformOps:
    """Build the map from the channel under ``eta_ref`` to the one under
    ``eta_target`` and cache every Jacobian coefficient field.

    Parameters
    ----------
    eta_target, eta_ref : BeamFunction
        Deflections defining the two channels; both must keep the channel
        open (``1 + eta > contact tolerance`` on the grid).
    dt_eta_target : BeamFunction, optional
        Time derivative of the target deflection; enables the
        time-derivative coefficient fields (zero when omitted).

    Raises
    ------
    ContactError
        If either channel closes anywhere on the grid.
    """
    cfg = eta_target.cfg
    et = eta_target.values().real
    er = eta_ref.values().real
    for name, vals in (("target", et), ("reference", er)):
        if np.min(1.0 + vals) < CONTACT_TOL:
            raise ContactError(
                f"channel closes for the {name} deflection: min(1+eta) = {np.min(1.0 + vals):.3e}"
            )
    zeta = (et - er) / (1.0 + er)
    if np.min(1.0 + zeta) < CONTACT_TOL:
        raise ContactError(f"relative deflection closes the channel: min(1+zeta) = {np.min(1.0 + zeta):.3e}")

    dz, ddz, dddz = _spectral_s_derivs(cfg, zeta)
    if dt_eta_target is not None:
        dt_zeta = dt_eta_target.values().real / (1.0 + er)
        dt_dzeta = deriv_s_values(dt_zeta, cfg, 1).real
    else:
        dt_zeta = np.zeros(cfg.Ns)
        dt_dzeta = np.zeros(cfg.Ns)

    y = chebyshev_nodes(cfg.Ny)
    vertical = np.outer(1.0 + er, y)
    strip_base = bool(np.max(np.abs(er)) < 1e-14)

    # Broadcast s-only quantities to the grid once.
    op = (1.0 + zeta)[:, None]
    dzc = dz[:, None]
    ddzc = ddz[:, None]
    dddzc = dddz[:, None]
    dtzc = dt_zeta[:, None]
    dtdzc = dt_dzeta[:, None]
    V = vertical
    ones = np.ones_like(V)

    fields: Dict[str, np.ndarray] = {}
    # Map gradient (the lower row; the upper row is (1, 0)).
    fields["dX21"] = V * dzc
    fields["dX22"] = op * ones
    # Cofactor matrices.
    fields["a11"] = ones / op
    fields["a21"] = V * dzc / op
    fields["b11"] = op * ones
    fields["b21"] = -V * dzc
    fields["det"] = op * ones
    # d a / d x1 composed with the map.
    fields["da1_11"] = -dzc / op**2 * ones
    fields["da1_21"] = V * (ddzc * op - 2.0 * dzc**2) / op**2
    # d a / d x2 composed with the map (only the (2,1) entry is nonzero).
    fields["da2_21"] = dzc / op**2 * ones
    # Second derivatives composed with the map.  The (1,1) entry of
    # d^2 a / d x1^2 is re-derived from the explicit cofactor formula
    # (two chain-rule derivatives of 1/(1+zeta)).
    fields["d2a11_11"] = (-ddzc * op + 2.0 * dzc**2) / op**3 * ones
    fields["d2a11_21"] = V * (dddzc * op**2 - 6.0 * op * dzc * ddzc + 6.0 * dzc**3) / op**3
    fields["d2a12_21"] = (ddzc * op - 2.0 * dzc**2) / op**3 * ones
    # Inverse-map gradient composed with the map (lower row; upper is (1, 0)).
    fields["dY21"] = -V * dzc / op
    fields["dY22"] = ones / op
    # Composed Laplacian of the second inverse-map component.
    fields["lapY2"] = V * (-ddzc * op + 2.0 * dzc**2) / op**2
    # Time-derivative variants.
    fields["dta_11"] = -dtzc / op**2 * ones
    fields["dta_21"] = V * (dtdzc * op - 2.0 * dzc * dtzc) / op**2
    fields["dtY2"] = -V * dtzc / op

    for arr in fields.values():
        arr.flags.writeable = False

    return TransformOps(
        cfg=cfg,
        zeta=zeta,
        dzeta=dz,
        ddzeta=ddz,
        dddzeta=dddz,
        dt_zeta=dt_zeta,
        dt_dzeta=dt_dzeta,
        vertical=vertical,
        strip_base=strip_base,
        fields=fields,
    )


def flat_transform(cfg: SpectralConfig, eta10: Optional[BeamFunction] = None) -> TransformOps:
    """Strip chart for the channel under ``eta10`` (flat strip if omitted)."""
    if eta10 is None:
        eta10 = BeamFunction.zero(cfg)
    return build_transform(eta10, BeamFunction.zero(cfg))


def evaluate_appendix_jacobians(tf: TransformOps) -> Dict[str, np.ndarray]:
    """Return the cached Jacobian coefficient bundle (grids, read-only)."""
    return dict(tf.fields)


# ======================================================================
# Flat-strip operators (transformed Laplacian, gradient, traction)
# ======================================================================


def _require_strip(tf: TransformOps, op_name: str) -> None:
    if not tf.strip_base:
        raise ValueError(f"{op_name} acts on strip-based transforms; got a curved base")


def _metric(tf: TransformOps) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Entries of (grad Y)(grad Y)^T composed with the map: c11, c12, c22."""
    dY21, dY22 = tf.field("dY21"), tf.field("dY22")
    c11 = np.ones_like(dY21)
    c12 = dY21
    c22 = dY21**2 + dY22**2
    return c11, c12, c22


def apply_L(tf: TransformOps, w: FluidField) -> FluidField:
    """Transformed Laplacian of a strip velocity field (pointwise form).

    Reduces to the componentwise flat Laplacian when the deflection is
    zero.  The matrix form used by the solvers is assembled elsewhere and
    cross-checked against this pointwise evaluation.
    """
    _require_strip(tf, "apply_L")
    cfg = w.cfg
    f = tf.fields
    ws = [grid_deriv_s(w.u[i], cfg) for i in range(2)]
    wy = [grid_deriv_y(w.u[i], cfg) for i in range(2)]
    wss = [grid_deriv_s(w.u[i], cfg, 2) for i in range(2)]
    wyy = [grid_deriv_y(w.u[i], cfg, 2) for i in range(2)]
    wsy = [grid_deriv_y(grid_deriv_s(w.u[i], cfg), cfg) for i in range(2)]

    c11, c12, c22 = _metric(tf)
    b11, b21 = f["b11"], f["b21"]
    dY21, dY22 = f["dY21"], f["dY22"]

    # Sum over j of d^2 a / d x_j^2, composed: only the first column is
    # nonzero, and d^2 a / d x2^2 vanishes identically.
    d2a_11 = f["d2a11_11"]
    d2a_21 = f["d2a11_21"]

    # Sum over j of (d a / d x_j)(d Y_l / d x_j): rows i, columns l,
    # nonzero only against w_1.
    t_1l = [f["da1_11"], f["da1_11"] * dY21]
    t_2l = [f["da1_21"], f["da1_21"] * dY21 + f["da2_21"] * dY22]

    out = np.zeros_like(w.u)
    for alpha in range(2):
        # Row alpha of b: (b11, 0) for alpha=0, (b21, 1) for alpha=1.
        if alpha == 0:
            term1 = b11 * d2a_11 * w.u[0]
            term2 = 2.0 * b11 * (t_1l[0] * ws[0] + t_1l[1] * wy[0])
        else:
            term1 = (b21 * d2a_11 + d2a_21) * w.u[0]
            term2 = 2.0 * (
                (b21 * t_1l[0] + t_2l[0]) * ws[0] + (b21 * t_1l[1] + t_2l[1]) * wy[0]
            )
        term3 = c11 * wss[alpha] + 2.0 * c12 * wsy[alpha] + c22 * wyy[alpha]
        term4 = f["lapY2"] * wy[alpha]
        out[alpha] = term1 + term2 + term3 + term4
    return FluidField(cfg, out)


def apply_G(tf: TransformOps, q: PressureField) -> FluidField:
    """Transformed pressure gradient of a strip scalar (pointwise form)."""
    _require_strip(tf, "apply_G")
    cfg = q.cfg
    qs = grid_deriv_s(q.p, cfg)
    qy = grid_deriv_y(q.p, cfg)
    c11, c12, c22 = _metric(tf)
    det = tf.field("det")
    g1 = det * (c11 * qs + c12 * qy)
    g2 = det * (c12 * qs + c22 * qy)
    return FluidField(cfg, np.stack([g1, g2]))


def apply_D_trace(tf: TransformOps, phi: FluidField) -> BeamFunction:
    """Boundary operator: symmetrized-gradient trace at the top interface.

    Evaluates, at ``y = 1``, the second component of ``D(v) n_s`` where
    ``v`` is the physical field represented by ``phi`` and ``n_s`` is the
    unnormalized upward interface normal ``(-d eta10/ds, 1)``; the full
    viscous traction functional is ``2 nu`` times this minus the pressure
    trace.  Reduces to ``d phi_2 / d y`` at the top for a flat interface.
    """
    _require_strip(tf, "apply_D_trace")
    cfg = phi.cfg
    f = tf.fields
    ps = [grid_deriv_s(phi.u[i], cfg) for i in range(2)]
    py = [grid_deriv_y(phi.u[i], cfg) for i in range(2)]
    a11, a21 = f["a11"], f["a21"]
    dY21, dY22 = f["dY21"], f["dY22"]

    bracket = (
        f["da1_21"] * phi.u[0]
        + a21 * (ps[0] + py[0] * dY21)
        + (ps[1] + py[1] * dY21)
        + a11 * py[0] * dY22
    )
    rest = f["da2_21"] * phi.u[0] + dY22 * (a21 * py[0] + py[1])
    grid = 0.5 * (-tf.dzeta[:, None]) * bracket + rest
    top = grid[:, -1]
    return BeamFunction.from_values(cfg, top)


def physical_components(tf: TransformOps, w: FluidField) -> np.ndarray:
    """Grid samples of the deformed-channel field represented by ``w``.

    A strip field stores the cofactor transform of the physical velocity;
    undoing it gives the physical components, sampled at the chart images
    of the grid points.  Returns an array of shape ``(2, Ns, Ny)``.
    """
    _require_strip(tf, "physical_components")
    u1 = tf.field("a11") * w.u[0]
    u2 = tf.field("a21") * w.u[0] + w.u[1]
    return np.stack([u1, u2])


def physical_gradient(
    tf: TransformOps, grid: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Channel-coordinate derivatives of a scalar sampled through the chart.

    ``grid`` holds tensor-grid samples of ``f`` composed with the chart;
    the returned pair samples ``df/dx1`` and ``df/dx2`` the same way
    (chain rule through the inverse-map gradient).  Applying it to a
    first-derivative grid yields the corresponding second derivatives.
    """
    _require_strip(tf, "physical_gradient")
    cfg = tf.cfg
    gs = grid_deriv_s(grid, cfg)
    gy = grid_deriv_y(grid, cfg)
    return gs + tf.field("dY21") * gy, tf.field("dY22") * gy
