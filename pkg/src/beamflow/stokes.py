"""Resolvent Stokes solves on the strip: saddle systems, traces, projection.

The core problem, for a spectral parameter ``lam`` with nonnegative real
part, is the transformed velocity/pressure system

    lam * w - nu * (transformed Laplacian) w + (transformed gradient) q = f
    div w = 0
    w = 0 on the bottom wall
    w = (0, g) on the interface

posed on the reference strip.  Unknowns are the packed semi-spectral
velocity dofs and the packed pressure coefficients; equations are rows:
momentum at interior nodes, divergence at interior nodes, four Dirichlet
rows per mode, and one row pinning the vertical mean of the mean-mode
pressure.  The count is square by construction.

Two routes produce the same answer on a flat chart: the dense route
(assembled operator matrices, one LU for all right-hand sides at a given
``lam``) and an independently constructed mode-by-mode route used as a
correctness anchor and fast path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg

from .assembly import (
    divergence_matrix,
    fluid_dof_index,
    fluid_size,
    fluid_weighted_gram,
    gradient_matrix,
    laplacian_matrix,
    pack_fluid,
    pressure_pin_row,
    pressure_size,
    traction_rows,
    unpack_fluid,
    unpack_pressure,
)
from .beam import BeamFunction, beamvec_to_function, project_mean_zero
from .config import SpectralConfig
from .fields import FluidField, PressureField, strip_divergence
from .geometry import TransformOps, _require_strip, flat_transform
from .norms import fine_y_rule
from .spectral import (
    chebyshev_diff,
    chebyshev_nodes,
    chebyshev_vandermonde,
    clenshaw_curtis_weights,
    fourier_xi,
    operator_mode_indices,
)

RCOND_WARN = 1e-13


# ======================================================================
# Saddle system assembly (dense route)
# ======================================================================


@dataclass
class SaddleSystem:
    """Assembled and factored saddle matrix for one spectral parameter.

    Attributes
    ----------
    cfg : SpectralConfig
        Discretization.
    lam : complex
        Spectral parameter (nonnegative real part).
    tf : TransformOps
        Strip chart the operators were assembled on.
    matrix : ndarray
        The square saddle matrix (kept for diagnostics and residuals).
    rcond : float
        Reciprocal condition estimate from the factorization.
    """

    cfg: SpectralConfig
    lam: complex
    tf: TransformOps
    matrix: np.ndarray
    rcond: float
    _lu: Tuple[np.ndarray, np.ndarray] = field(repr=False, default=None)

    @property
    def n_w(self) -> int:
        return fluid_size(self.cfg)

    @property
    def n_q(self) -> int:
        return pressure_size(self.cfg)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve against one right-hand side or a stack of columns."""
        return scipy.linalg.lu_solve(self._lu, rhs)


def _interior_fluid_rows(cfg: SpectralConfig) -> np.ndarray:
    """Packed velocity dof indices at interior nodes, both components."""
    j = np.arange(1, cfg.Ny - 1)
    rows = []
    for comp in range(2):
        rows.append(
            (
                comp * cfg.Nm * cfg.Ny
                + (np.arange(cfg.Nm)[:, None] * cfg.Ny + j[None, :])
            ).reshape(-1)
        )
    return np.concatenate(rows)


def _interior_scalar_rows(cfg: SpectralConfig) -> np.ndarray:
    j = np.arange(1, cfg.Ny - 1)
    return ((np.arange(cfg.Nm)[:, None] * cfg.Ny + j[None, :])).reshape(-1)


def momentum_rhs_rows(cfg: SpectralConfig) -> np.ndarray:
    """Row indices of the momentum block inside the saddle system."""
    return np.arange(2 * cfg.Nm * (cfg.Ny - 2))


def bc_top_normal_rows(cfg: SpectralConfig) -> np.ndarray:
    """Saddle row indices of the interface normal-trace conditions per mode."""
    base = 3 * cfg.Nm * (cfg.Ny - 2)
    return base + 4 * np.arange(cfg.Nm) + 3


def build_saddle(lam: complex, tf: TransformOps) -> SaddleSystem:
    """Assemble and factor the saddle matrix for one parameter.

    Raises
    ------
    ValueError
        If the parameter has negative real part (outside the sector the
        solves are posed on) or the chart is not strip-based.
    """
    if complex(lam).real < 0:
        raise ValueError(f"lam must satisfy Re lam >= 0, got {lam}")
    _require_strip(tf, "build_saddle")
    cfg = tf.cfg
    n_w = fluid_size(cfg)
    n_q = pressure_size(cfg)
    n = n_w + n_q

    Lmat = laplacian_matrix(tf)
    Gmat = gradient_matrix(tf)
    Div = divergence_matrix(cfg)

    mom_sel = _interior_fluid_rows(cfg)
    div_sel = _interior_scalar_rows(cfg)
    n_mom = mom_sel.size
    n_div = div_sel.size

    A = np.zeros((n, n), dtype=complex)
    mom_block = -cfg.nu * Lmat[mom_sel, :]
    mom_block[np.arange(n_mom), mom_sel] += lam
    A[:n_mom, :n_w] = mom_block
    A[:n_mom, n_w:] = Gmat[mom_sel, :]
    A[n_mom : n_mom + n_div, :n_w] = Div[div_sel, :]

    r = n_mom + n_div
    for m in range(cfg.Nm):
        A[r + 0, fluid_dof_index(cfg, 0, m, 0)] = 1.0
        A[r + 1, fluid_dof_index(cfg, 0, m, cfg.Ny - 1)] = 1.0
        A[r + 2, fluid_dof_index(cfg, 1, m, 0)] = 1.0
        A[r + 3, fluid_dof_index(cfg, 1, m, cfg.Ny - 1)] = 1.0
        r += 4
    A[r, n_w:] = pressure_pin_row(cfg)

    lu = scipy.linalg.lu_factor(A)
    gecon = scipy.linalg.get_lapack_funcs(("gecon",), (A,))[0]
    rcond, _ = gecon(lu[0], np.linalg.norm(A, 1))
    rcond = float(rcond)
    if rcond < RCOND_WARN:
        warnings.warn(
            f"saddle system poorly conditioned at lam={lam}: rcond={rcond:.2e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return SaddleSystem(cfg=cfg, lam=complex(lam), tf=tf, matrix=A, rcond=rcond, _lu=lu)


_SADDLE_CACHE: dict = {}
_SADDLE_CACHE_MAX = 8


def cached_saddle(lam: complex, tf: TransformOps) -> SaddleSystem:
    """Build or reuse a factored saddle system (small FIFO cache).

    The cache holds references to its charts, so entry keys stay unique
    for as long as they are cached.
    """
    key = (id(tf), complex(lam))
    sys_ = _SADDLE_CACHE.get(key)
    if sys_ is None:
        sys_ = build_saddle(lam, tf)
        if len(_SADDLE_CACHE) >= _SADDLE_CACHE_MAX:
            _SADDLE_CACHE.pop(next(iter(_SADDLE_CACHE)))
        _SADDLE_CACHE[key] = sys_
    return sys_


# ======================================================================
# Right-hand sides
# ======================================================================


def rhs_forced(system: SaddleSystem, f: FluidField) -> np.ndarray:
    """Right-hand side for interior forcing with homogeneous traces."""
    cfg = system.cfg
    rhs = np.zeros(system.matrix.shape[0], dtype=complex)
    rhs[momentum_rhs_rows(cfg)] = pack_fluid(f)[_interior_fluid_rows(cfg)]
    return rhs


def rhs_lifted(system: SaddleSystem, eta: BeamFunction) -> np.ndarray:
    """Right-hand side for interface data ``(0, M eta)`` and no forcing."""
    cfg = system.cfg
    coeffs = project_mean_zero(eta).coeffs[operator_mode_indices(cfg)]
    rhs = np.zeros(system.matrix.shape[0], dtype=complex)
    rhs[bc_top_normal_rows(cfg)] = coeffs
    return rhs


# ======================================================================
# Solution container and postprocessing
# ======================================================================


@dataclass(frozen=True)
class StokesSolution:
    """Velocity, pressure, and interface traction of one resolvent solve.

    The pressure is normalized to zero weighted mean over the deformed
    channel; the amount removed is kept as ``pressure_offset``.  The
    traction is the mean-zero beam functional ``2 nu`` times the
    symmetrized-gradient trace minus the pressure trace.
    """

    w: FluidField
    q: PressureField
    traction_top: BeamFunction
    lam: complex
    div_residual: float
    bc_residual: float
    pressure_offset: complex
    rcond: float


def weighted_pressure_mean(q: PressureField, tf: TransformOps) -> complex:
    """Mean of a pressure grid against the deformed-channel volume element."""
    cfg = q.cfg
    _, wy, P = fine_y_rule(cfg)
    vol = tf.one_plus_zeta[:, None]
    num = np.sum((q.p @ P.T) * vol * wy[None, :])
    den = np.sum(np.ones_like(q.p @ P.T) * vol * wy[None, :])
    return complex(num / den)


def _bc_residual(cfg: SpectralConfig, w: FluidField, data_top: np.ndarray) -> float:
    """Largest trace violation: walls, tangential top, and normal top."""
    err = max(
        np.abs(w.u[0][:, 0]).max(),
        np.abs(w.u[1][:, 0]).max(),
        np.abs(w.u[0][:, -1]).max(),
    )
    return float(max(err, np.abs(w.u[1][:, -1] - data_top).max()))


def _finalize(
    system_tf: TransformOps,
    lam: complex,
    wvec: np.ndarray,
    qvec: np.ndarray,
    data_top: np.ndarray,
    rcond: float,
) -> StokesSolution:
    cfg = system_tf.cfg
    w = unpack_fluid(cfg, wvec)
    q = unpack_pressure(cfg, qvec)
    offset = weighted_pressure_mean(q, system_tf)
    q = PressureField(cfg, q.p - offset)
    Tw, Tq = traction_rows(system_tf)
    traction = beamvec_to_function(cfg, Tw @ wvec + Tq @ qvec)
    div = strip_divergence(w)
    div_res = float(np.abs(div[:, 1:-1]).max())
    return StokesSolution(
        w=w,
        q=q,
        traction_top=traction,
        lam=complex(lam),
        div_residual=div_res,
        bc_residual=_bc_residual(cfg, w, data_top),
        pressure_offset=offset,
        rcond=rcond,
    )


# ======================================================================
# Mode-by-mode route (flat chart)
# ======================================================================


def _permode_solve(
    cfg: SpectralConfig,
    lam: complex,
    top_coeffs: np.ndarray,
    f: Optional[FluidField],
) -> Tuple[np.ndarray, np.ndarray]:
    """Independently constructed per-mode solve on the flat strip.

    Builds each mode's coupled ODE collocation system from scratch
    (Helmholtz rows, divergence rows, boundary rows, and the mean-mode
    pin) and returns packed velocity and pressure vectors.
    """
    Ny = cfg.Ny
    D = chebyshev_diff(Ny)
    D2 = D @ D
    y = chebyshev_nodes(Ny)
    wy = clenshaw_curtis_weights(Ny)
    xi_all = fourier_xi(cfg)[operator_mode_indices(cfg)]
    interior = np.arange(1, Ny - 1)

    fhat = None
    if f is not None:
        fhat = (np.fft.fft(f.u, axis=1) / cfg.Ns)[:, operator_mode_indices(cfg), :]

    wvec = np.zeros(fluid_size(cfg), dtype=complex)
    qparts = []
    for mi in range(cfg.Nm):
        xi = xi_all[mi]
        nc = Ny - 1 if mi == 0 else Ny - 2
        V = chebyshev_vandermonde(y, nc)
        Vp = D @ V
        n = 2 * Ny + nc
        A = np.zeros((n, n), dtype=complex)
        rhs = np.zeros(n, dtype=complex)

        r = 0
        helm = -cfg.nu * D2[interior, :].astype(complex)
        helm[np.arange(Ny - 2), interior] += lam + cfg.nu * xi**2
        # First momentum component.
        A[r : r + Ny - 2, 0:Ny] = helm
        A[r : r + Ny - 2, 2 * Ny :] = 1j * xi * V[interior, :]
        if fhat is not None:
            rhs[r : r + Ny - 2] = fhat[0, mi, interior]
        r += Ny - 2
        # Second momentum component.
        A[r : r + Ny - 2, Ny : 2 * Ny] = helm
        A[r : r + Ny - 2, 2 * Ny :] = Vp[interior, :]
        if fhat is not None:
            rhs[r : r + Ny - 2] = fhat[1, mi, interior]
        r += Ny - 2
        # Divergence.
        A[r : r + Ny - 2, 0:Ny] = 1j * xi * np.eye(Ny)[interior, :]
        A[r : r + Ny - 2, Ny : 2 * Ny] = D[interior, :]
        r += Ny - 2
        # Boundary rows.
        A[r, 0] = 1.0
        A[r + 1, Ny - 1] = 1.0
        A[r + 2, Ny] = 1.0
        A[r + 3, 2 * Ny - 1] = 1.0
        rhs[r + 3] = top_coeffs[mi]
        r += 4
        if mi == 0:
            A[r, 2 * Ny :] = wy @ V
            r += 1

        sol = np.linalg.solve(A, rhs)
        wvec[0 * cfg.Nm * Ny + mi * Ny : 0 * cfg.Nm * Ny + (mi + 1) * Ny] = sol[0:Ny]
        wvec[1 * cfg.Nm * Ny + mi * Ny : 1 * cfg.Nm * Ny + (mi + 1) * Ny] = sol[Ny : 2 * Ny]
        qparts.append(sol[2 * Ny :])
    return wvec, np.concatenate(qparts)


def _is_flat(tf: TransformOps) -> bool:
    return tf.strip_base and float(np.max(np.abs(tf.zeta))) < 1e-14


def _resolve_method(method: str, tf: TransformOps) -> str:
    if method not in ("auto", "dense", "permode"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        return "permode" if _is_flat(tf) else "dense"
    if method == "permode" and not _is_flat(tf):
        raise ValueError("the mode-by-mode route requires a flat chart")
    return method


# ======================================================================
# Public solves
# ======================================================================


def solve_lifted(
    lam: complex,
    eta: BeamFunction,
    tf: TransformOps,
    method: str = "auto",
) -> StokesSolution:
    """Solve the resolvent problem with interface data ``(0, M eta)``.

    The mean of ``eta`` never enters (the lifted datum is mean-zero), so
    the compatibility condition of the mean mode holds automatically.
    """
    if complex(lam).real < 0:
        raise ValueError(f"lam must satisfy Re lam >= 0, got {lam}")
    cfg = tf.cfg
    route = _resolve_method(method, tf)
    coeffs = project_mean_zero(eta).coeffs[operator_mode_indices(cfg)]
    data_top = project_mean_zero(eta).values()
    if route == "permode":
        wvec, qvec = _permode_solve(cfg, lam, coeffs, None)
        return _finalize(tf, lam, wvec, qvec, data_top, rcond=float("nan"))
    system = cached_saddle(lam, tf)
    sol = system.solve(rhs_lifted(system, eta))
    return _finalize(tf, lam, sol[: system.n_w], sol[system.n_w :], data_top, system.rcond)


def solve_forced(
    lam: complex,
    f: FluidField,
    tf: TransformOps,
    method: str = "auto",
) -> StokesSolution:
    """Solve the resolvent problem with interior forcing and zero traces."""
    if complex(lam).real < 0:
        raise ValueError(f"lam must satisfy Re lam >= 0, got {lam}")
    cfg = tf.cfg
    route = _resolve_method(method, tf)
    zero_top = np.zeros(cfg.Ns)
    if route == "permode":
        wvec, qvec = _permode_solve(cfg, lam, np.zeros(cfg.Nm, dtype=complex), f)
        return _finalize(tf, lam, wvec, qvec, zero_top, rcond=float("nan"))
    system = cached_saddle(lam, tf)
    sol = system.solve(rhs_forced(system, f))
    return _finalize(tf, lam, sol[: system.n_w], sol[system.n_w :], zero_top, system.rcond)


# ======================================================================
# Projection onto the divergence-free subspace
# ======================================================================


def divfree_constraints(cfg: SpectralConfig) -> np.ndarray:
    """Constraint rows cutting out the divergence-free velocity subspace.

    The divergence is forced to vanish identically as a function (all
    nodes), not only at the interior collocation points: fields with a
    merely interior-vanishing divergence keep an order-one boundary
    oscillation that destroys the orthogonality of gradients to the
    subspace.  Rows are arranged per mode for full row rank:

    * mean mode: divergence at all but the top node, plus the bottom
      normal trace (these force the vertical velocity to vanish
      identically, so the top trace row would be redundant);
    * other modes: divergence at every node plus both normal traces.

    Every member of the kernel has identically zero divergence and zero
    normal traces, so transformed pressure gradients are orthogonal to
    the kernel up to quadrature accuracy in the horizontal direction.
    """
    Div = divergence_matrix(cfg)
    n_w = fluid_size(cfg)
    rows = []
    for m in range(cfg.Nm):
        block = Div[m * cfg.Ny : (m + 1) * cfg.Ny, :]
        if m == 0:
            rows.append(block[: cfg.Ny - 1, :])
        else:
            rows.append(block)
        bottom = np.zeros((1, n_w), dtype=complex)
        bottom[0, fluid_dof_index(cfg, 1, m, 0)] = 1.0
        rows.append(bottom)
        if m > 0:
            top = np.zeros((1, n_w), dtype=complex)
            top[0, fluid_dof_index(cfg, 1, m, cfg.Ny - 1)] = 1.0
            rows.append(top)
    return np.vstack(rows)


def leray_project(f: FluidField, tf: TransformOps) -> FluidField:
    """Orthogonal projection onto discretely divergence-free fields.

    Orthogonality is taken in the deformed-channel velocity inner product
    of the chart; the projection reproduces divergence-free fields and
    annihilates transformed pressure gradients (up to quadrature accuracy
    of the weight).
    """
    _require_strip(tf, "leray_project")
    cfg = tf.cfg
    eta10 = None if _is_flat(tf) else BeamFunction.from_values(cfg, tf.zeta)
    B = fluid_weighted_gram(cfg, eta10)
    C = divfree_constraints(cfg)
    vec = pack_fluid(f)
    cho = scipy.linalg.cho_factor(B)
    BiCt = scipy.linalg.cho_solve(cho, C.conj().T)
    S = C @ BiCt
    mu = scipy.linalg.solve(S, C @ vec, assume_a="pos")
    return unpack_fluid(cfg, vec - BiCt @ mu)
