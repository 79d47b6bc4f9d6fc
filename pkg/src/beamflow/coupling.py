"""Structure-side operators of the coupled channel--beam system.

Lifted Stokes solves turn the fluid into beam-space matrices: the added
mass, the viscous damping, the interface traction, and the quadratic
pencil they form.  The same ingredients assemble the coupled generator
on the discrete energy space together with its orthogonal projection,
dense resolvent, and the block elimination of the resolvent system.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from .assembly import (
    divergence_matrix,
    fluid_dof_index,
    fluid_size,
    fluid_weighted_gram,
    laplacian_matrix,
    state_gram,
    state_size,
    traction_rows,
    unpack_fluid,
)
from .beam import BeamFunction, beam_power_diagonal
from .config import SpectralConfig
from .fields import FluidField, grid_deriv_s, grid_deriv_y
from .geometry import TransformOps
from .norms import fine_y_rule
from .stokes import bc_top_normal_rows, cached_saddle, rhs_forced

__all__ = [
    "OperatorMatrix",
    "RhoConstants",
    "CoupledGenerator",
    "lifted_solution_matrix",
    "assemble_K",
    "assemble_G",
    "assemble_L",
    "assemble_V",
    "estimate_rho",
    "state_constraints",
    "tangential_clamp_rows",
    "assemble_A0",
    "resolvent_blocks",
    "apply_resolvent_blocks",
]


# ======================================================================
# Containers
# ======================================================================


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense operator with labeled domain/codomain and an optional parameter.

    Attributes
    ----------
    entries : ndarray
        Dense complex matrix.
    domain_desc, codomain_desc : str
        Space labels, including any fractional beam-operator weights.
    lam : complex or None
        Spectral parameter the assembly was taken at.
    hermitian : bool
        Set only after a numerical self-adjointness check has passed.
    """

    entries: np.ndarray
    domain_desc: str
    codomain_desc: str
    lam: Optional[complex] = None
    hermitian: bool = False

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    def save_npz(self, path: str) -> None:
        """Binary export: real/imaginary parts plus the labels."""
        np.savez(
            path,
            real=self.entries.real,
            imag=self.entries.imag,
            domain_desc=np.asarray(self.domain_desc),
            codomain_desc=np.asarray(self.codomain_desc),
            lam=np.asarray(complex(self.lam) if self.lam is not None else np.nan + 0j),
            hermitian=np.asarray(self.hermitian),
        )

    def save_csv(self, path: str) -> None:
        """Text export: header comments, then ``i,j,re,im`` per entry."""
        n, m = self.entries.shape
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# domain: {self.domain_desc}\n")
            fh.write(f"# codomain: {self.codomain_desc}\n")
            fh.write(f"# lambda: {self.lam}\n# shape: {n},{m}\n")
            fh.write("i,j,re,im\n")
            for i in range(n):
                for j in range(m):
                    v = self.entries[i, j]
                    fh.write(f"{i},{j},{float(v.real)!r},{float(v.imag)!r}\n")


def _verified_hermitian(entries: np.ndarray, tol: float = 1e-8) -> bool:
    scale = np.linalg.norm(entries)
    if scale == 0.0:
        return True
    return bool(np.linalg.norm(entries - entries.conj().T) <= tol * scale)


@dataclass(frozen=True)
class RhoConstants:
    """Empirical coercivity constants of the damping operator.

    ``rho1``/``rho2`` bound the damping form from below/above against the
    quarter-power beam norm; ``rho`` is the pencil shift parameter and
    must stay below ``rho1 / 4``.
    """

    rho1: float
    rho2: float
    rho: float

    def __post_init__(self) -> None:
        if not (0.0 < self.rho1 < self.rho2):
            raise ValueError(
                f"need 0 < rho1 < rho2, got rho1={self.rho1:.6g}, rho2={self.rho2:.6g}"
            )
        if not (0.0 < self.rho < 0.25 * self.rho1):
            raise ValueError(
                f"need rho in (0, rho1/4), got rho={self.rho:.6g}, rho1={self.rho1:.6g}"
            )

    @classmethod
    def with_default_shift(cls, rho1: float, rho2: float) -> "RhoConstants":
        """Pick the shift at ``rho1 / 8`` — safely inside ``(0, rho1/4)``."""
        return cls(rho1=rho1, rho2=rho2, rho=rho1 / 8.0)


# ======================================================================
# Lifted solution bank
# ======================================================================

_BANK_CACHE: "Dict[Tuple[int, complex], Tuple[TransformOps, np.ndarray, np.ndarray, np.ndarray]]" = {}
_BANK_MAX = 4


def lifted_solution_matrix(
    lam: complex, tf: TransformOps
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Velocity, pressure, and traction of all unit-mode lifted solves.

    Returns ``(U, Q, T)``: packed velocities (columns per beam mode),
    packed pressures, and the traction coefficients ``T`` — the interface
    force operator on beam modes.  One factorization is shared by every
    column; results are cached per ``(chart, lambda)``.
    """
    key = (id(tf), complex(lam))
    hit = _BANK_CACHE.get(key)
    if hit is not None and hit[0] is tf:
        return hit[1], hit[2], hit[3]
    cfg = tf.cfg
    system = cached_saddle(lam, tf)
    rhs = np.zeros((system.matrix.shape[0], cfg.Nb), dtype=complex)
    rhs[bc_top_normal_rows(cfg)[1:], np.arange(cfg.Nb)] = 1.0
    sol = system.solve(rhs)
    U = sol[: system.n_w, :]
    Q = sol[system.n_w :, :]
    Tw, Tq = traction_rows(tf)
    T = Tw @ U + Tq @ Q
    if len(_BANK_CACHE) >= _BANK_MAX:
        _BANK_CACHE.pop(next(iter(_BANK_CACHE)))
    _BANK_CACHE[key] = (tf, U, Q, T)
    return U, Q, T


def _weight_deflection(tf: TransformOps) -> Optional[BeamFunction]:
    """Deflection for the weighted inner product (None on a flat chart)."""
    if np.max(np.abs(tf.zeta)) < 1e-14:
        return None
    return BeamFunction.from_values(tf.cfg, tf.zeta)


# ======================================================================
# Added mass, damping, traction
# ======================================================================


def assemble_K(
    lam: complex,
    tf: TransformOps,
    method: str = "gram",
    modes: Optional[int] = None,
) -> OperatorMatrix:
    """Added-mass operator on mean-zero beam modes.

    ``method="gram"`` pairs the lifted velocities through the weighted
    fluid product.  ``method="adjoint"`` recovers each column from the
    interface traction of a dual solve forced by the lifted velocity;
    ``modes`` limits the columns computed on this slower route.
    """
    if complex(lam).real < 0:
        raise ValueError(f"spectral parameter needs Re >= 0, got {lam}")
    cfg = tf.cfg
    U, _, _ = lifted_solution_matrix(lam, tf)
    if method == "gram":
        Gw = fluid_weighted_gram(cfg, _weight_deflection(tf))
        K = U.conj().T @ Gw @ U / cfg.L
    elif method == "adjoint":
        cols = cfg.Nb if modes is None else min(modes, cfg.Nb)
        system = cached_saddle(np.conj(complex(lam)), tf)
        rhs = np.zeros((system.matrix.shape[0], cols), dtype=complex)
        for j in range(cols):
            rhs[:, j] = rhs_forced(system, unpack_fluid(cfg, U[:, j]))
        sol = system.solve(rhs)
        Tw, Tq = traction_rows(tf)
        K = -(Tw @ sol[: system.n_w, :] + Tq @ sol[system.n_w :, :])
    else:
        raise ValueError(f"unknown method {method!r}")
    return OperatorMatrix(
        entries=K,
        domain_desc="mean-zero beam coefficients",
        codomain_desc="mean-zero beam coefficients",
        lam=complex(lam),
        hermitian=_verified_hermitian(K) if K.shape[0] == K.shape[1] else False,
    )


def _physical_gradient_grids(
    tf: TransformOps, wvec: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Symmetrized-gradient components of one packed velocity column.

    The velocity is mapped to its physical components ``u = a w`` and
    differentiated with the chain rule; factor derivatives are applied by
    the product rule so no polynomial degree overflows the grid.
    """
    cfg = tf.cfg
    w = unpack_fluid(cfg, wvec)
    w1, w2 = w.u[0], w.u[1]
    op = tf.one_plus_zeta[:, None]
    dz = tf.dzeta[:, None]
    ddz = tf.ddzeta[:, None]
    V = tf.vertical
    a11 = tf.field("a11")
    a21 = tf.field("a21")
    dY21 = tf.field("dY21")
    dY22 = tf.field("dY22")
    a11_s = -dz / op**2
    a21_s = V * (ddz * op - dz**2) / op**2
    a21_y = dz / op

    w1_s = grid_deriv_s(w1, cfg)
    w1_y = grid_deriv_y(w1, cfg)
    w2_s = grid_deriv_s(w2, cfg)
    w2_y = grid_deriv_y(w2, cfg)

    u1_s = a11_s * w1 + a11 * w1_s
    u1_y = a11 * w1_y
    u2_s = a21_s * w1 + a21 * w1_s + w2_s
    u2_y = a21_y * w1 + a21 * w1_y + w2_y

    d11 = u1_s + u1_y * dY21
    d22 = u2_y * dY22
    d12 = 0.5 * (u1_y * dY22 + u2_s + u2_y * dY21)
    return d11, d22, d12


def assemble_G(lam: complex, tf: TransformOps) -> OperatorMatrix:
    """Viscous damping operator on mean-zero beam modes.

    Gram of the physical symmetrized gradients of the lifted velocities
    over the deformed channel; Hermitian positive definite by
    construction.
    """
    if complex(lam).real < 0:
        raise ValueError(f"spectral parameter needs Re >= 0, got {lam}")
    cfg = tf.cfg
    U, _, _ = lifted_solution_matrix(lam, tf)
    _, wy, P = fine_y_rule(cfg)
    vol = (cfg.L / cfg.Ns) * tf.one_plus_zeta[:, None] * wy[None, :]
    root = np.sqrt(vol)
    cols: List[np.ndarray] = []
    for j in range(cfg.Nb):
        d11, d22, d12 = _physical_gradient_grids(tf, U[:, j])
        parts = [
            (d11 @ P.T) * root,
            (d22 @ P.T) * root,
            np.sqrt(2.0) * (d12 @ P.T) * root,
        ]
        cols.append(np.concatenate([p.reshape(-1) for p in parts]))
    Z = np.stack(cols, axis=1)
    G = (2.0 * cfg.nu / cfg.L) * (Z.conj().T @ Z)
    return OperatorMatrix(
        entries=G,
        domain_desc="mean-zero beam coefficients",
        codomain_desc="mean-zero beam coefficients",
        lam=complex(lam),
        hermitian=_verified_hermitian(G),
    )


def assemble_L(lam: complex, tf: TransformOps) -> OperatorMatrix:
    """Interface traction operator: force coefficients of lifted solves."""
    if complex(lam).real < 0:
        raise ValueError(f"spectral parameter needs Re >= 0, got {lam}")
    _, _, T = lifted_solution_matrix(lam, tf)
    return OperatorMatrix(
        entries=T,
        domain_desc="mean-zero beam coefficients (interface velocity)",
        codomain_desc="mean-zero beam coefficients (interface force)",
        lam=complex(lam),
        hermitian=False,
    )


# ======================================================================
# Quadratic pencil
# ======================================================================


def assemble_V(
    lam: complex, tf: TransformOps, rho: RhoConstants
) -> Tuple[OperatorMatrix, OperatorMatrix]:
    """The beam pencil and its shifted comparison variant.

    Returns ``(V, Vtilde)`` with ``V = lam^2 (I + K) + lam G + A1`` and
    ``Vtilde = lam^2 (I + K) + 2 rho lam A1^{1/4} + A1``; they differ by
    ``lam`` times the damping shift ``G - 2 rho A1^{1/4}``.
    """
    cfg = tf.cfg
    K = assemble_K(lam, tf).entries
    G = assemble_G(lam, tf).entries
    m1 = beam_power_diagonal(cfg, 1.0)
    quarter = beam_power_diagonal(cfg, 0.25)
    lam = complex(lam)
    eye = np.eye(cfg.Nb)
    V = lam**2 * (eye + K) + lam * G + np.diag(m1)
    Vt = lam**2 * (eye + K) + 2.0 * rho.rho * lam * np.diag(quarter) + np.diag(m1)
    for name, M in (("V", V), ("Vtilde", Vt)):
        cond = np.linalg.cond(M)
        if cond > 1e13:
            warnings.warn(
                f"{name} at lambda={lam} is ill conditioned: cond ~ {cond:.3e}",
                stacklevel=2,
            )
    desc = "mean-zero beam coefficients"
    return (
        OperatorMatrix(V, desc, desc, lam, hermitian=_verified_hermitian(V)),
        OperatorMatrix(Vt, desc, desc, lam, hermitian=_verified_hermitian(Vt)),
    )


def estimate_rho(tf: TransformOps, lam: complex = 1.0 + 1.0j) -> RhoConstants:
    """Coercivity constants of the damping form at one parameter.

    ``rho1`` is the smallest Rayleigh quotient of the damping against the
    quarter-power beam form; ``rho2`` the largest against the same form
    augmented by ``|lam|`` times its dual-weight counterpart.
    """
    cfg = tf.cfg
    G = assemble_G(lam, tf).entries
    G = 0.5 * (G + G.conj().T)
    eighth = beam_power_diagonal(cfg, 0.125)
    lower = np.diag(eighth**2)
    upper = np.diag(eighth**2 + abs(complex(lam)) / eighth**2)
    rho1 = float(scipy.linalg.eigvalsh(G, lower)[0])
    rho2 = float(scipy.linalg.eigvalsh(G, upper)[-1])
    if rho2 <= rho1:
        rho2 = rho1 * (1.0 + 1e-6)
    return RhoConstants.with_default_shift(rho1=rho1, rho2=rho2)


# ======================================================================
# Discrete energy space and the generator
# ======================================================================


def state_constraints(cfg: SpectralConfig) -> np.ndarray:
    """Rows cutting the discrete energy space out of packed states.

    Velocity rows force an identically vanishing divergence and a zero
    bottom normal trace per mode; each oscillating mode's top normal
    trace is tied to the matching beam-velocity coefficient.  The mean
    mode needs no coupling row: its vertical velocity vanishes
    identically and the beam space is mean-free.
    """
    nf = fluid_size(cfg)
    n = state_size(cfg)
    Div = divergence_matrix(cfg)
    rows: List[np.ndarray] = []
    for m in range(cfg.Nm):
        take = cfg.Ny - 1 if m == 0 else cfg.Ny
        block = np.zeros((take, n), dtype=complex)
        block[:, :nf] = Div[m * cfg.Ny : m * cfg.Ny + take, :]
        rows.append(block)
        bottom = np.zeros((1, n), dtype=complex)
        bottom[0, fluid_dof_index(cfg, 1, m, 0)] = 1.0
        rows.append(bottom)
        if m > 0:
            couple = np.zeros((1, n), dtype=complex)
            couple[0, fluid_dof_index(cfg, 1, m, cfg.Ny - 1)] = 1.0
            couple[0, nf + cfg.Nb + (m - 1)] = -1.0
            rows.append(couple)
    return np.vstack(rows)


def tangential_clamp_rows(cfg: SpectralConfig) -> np.ndarray:
    """Unit rows pinning the horizontal velocity at both walls per mode.

    The generator's velocity arguments satisfy the wall conditions; these
    rows cut its discrete domain out of the energy space.
    """
    n = state_size(cfg)
    rows = np.zeros((2 * cfg.Nm, n), dtype=complex)
    for m in range(cfg.Nm):
        rows[2 * m, fluid_dof_index(cfg, 0, m, 0)] = 1.0
        rows[2 * m + 1, fluid_dof_index(cfg, 0, m, cfg.Ny - 1)] = 1.0
    return rows


def _orthonormal_basis(B: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Transform null-space columns to an energy-orthonormal basis."""
    G = B.conj().T @ W @ B
    G = 0.5 * (G + G.conj().T)
    chol = np.linalg.cholesky(G)
    return scipy.linalg.solve_triangular(chol, B.conj().T, lower=True).conj().T


@dataclass(frozen=True)
class CoupledGenerator:
    """Projected generator of the linearized coupled dynamics.

    Attributes
    ----------
    cfg : SpectralConfig
        Discretization.
    tf : TransformOps
        Strip chart the operators were assembled on.
    A0 : OperatorMatrix
        Generator on the energy-orthonormal coordinates of the clamped
        subspace (wall conditions included).
    P0 : OperatorMatrix
        Orthogonal projection onto the discrete energy space, as a map on
        packed states; self-adjoint in the weighted product, not in the
        Euclidean one.
    basis : ndarray
        Energy-orthonormal columns spanning the clamped subspace.
    space_basis : ndarray
        Energy-orthonormal columns spanning the full energy space.
    W : ndarray
        Gram of the energy inner product on packed states.
    basis_desc : str
        Human-readable description of the constraint space.
    """

    cfg: SpectralConfig
    tf: TransformOps
    A0: OperatorMatrix
    P0: OperatorMatrix
    basis: np.ndarray
    space_basis: np.ndarray
    W: np.ndarray
    basis_desc: str

    def to_coords(self, z: np.ndarray) -> np.ndarray:
        """Energy-orthogonal coordinates of a packed state on the domain."""
        return self.basis.conj().T @ (self.W @ z)

    def from_coords(self, c: np.ndarray) -> np.ndarray:
        return self.basis @ c

    def energy_norm(self, z: np.ndarray) -> float:
        return float(np.sqrt(abs(np.vdot(z, self.W @ z))))

    def spectrum(self) -> np.ndarray:
        return scipy.linalg.eigvals(self.A0.entries)

    def spectral_abscissa(self) -> float:
        return float(self.spectrum().real.max())

    def resolvent_dense(self, lam: complex) -> np.ndarray:
        """Dense inverse of ``lam - A0`` on the domain coordinates."""
        n = self.A0.entries.shape[0]
        return np.linalg.inv(lam * np.eye(n) - self.A0.entries)

    def apply_resolvent_dense(self, lam: complex, z: np.ndarray) -> np.ndarray:
        """Resolvent action on a packed state, returned as a packed state."""
        n = self.A0.entries.shape[0]
        c = np.linalg.solve(lam * np.eye(n) - self.A0.entries, self.to_coords(z))
        return self.from_coords(c)


def assemble_A0(tf: TransformOps) -> CoupledGenerator:
    """Build the discrete energy space, its projection, and the generator.

    The energy space couples divergence-free velocities to the beam
    through the top normal trace; the generator lives on its clamped
    subspace (wall conditions on the horizontal velocity), where the
    dissipation identity holds structurally.
    """
    cfg = tf.cfg
    W = state_gram(cfg, _weight_deflection(tf))
    C = state_constraints(cfg)
    B_space = scipy.linalg.null_space(C)
    expected_space = cfg.Nm * cfg.Ny
    if B_space.shape[1] != expected_space:
        raise ValueError(
            "energy-space constraints are rank deficient: expected "
            f"{expected_space} basis columns, got {B_space.shape[1]}"
        )
    C_dom = np.vstack([C, tangential_clamp_rows(cfg)])
    B_dom = scipy.linalg.null_space(C_dom)
    expected_dom = cfg.Nm * (cfg.Ny - 2)
    if B_dom.shape[1] != expected_dom:
        raise ValueError(
            "clamped-subspace constraints are rank deficient: expected "
            f"{expected_dom} basis columns, got {B_dom.shape[1]}"
        )
    B_space = _orthonormal_basis(B_space, W)
    B_dom = _orthonormal_basis(B_dom, W)

    nf = fluid_size(cfg)
    n = state_size(cfg)
    Atilde = np.zeros((n, n), dtype=complex)
    Atilde[:nf, :nf] = cfg.nu * laplacian_matrix(tf)
    Atilde[nf : nf + cfg.Nb, nf + cfg.Nb :] = np.eye(cfg.Nb)
    Tw, _ = traction_rows(tf)
    Atilde[nf + cfg.Nb :, :nf] = -Tw
    Atilde[nf + cfg.Nb :, nf : nf + cfg.Nb] = -np.diag(beam_power_diagonal(cfg, 1.0))

    A0_red = B_dom.conj().T @ (W @ (Atilde @ B_dom))
    P0_full = B_space @ (B_space.conj().T @ W)
    desc = (
        "divergence-free velocities with zero bottom normal trace, top "
        "normal trace tied to the beam velocity; domain additionally "
        "clamps the horizontal velocity at both walls"
    )
    return CoupledGenerator(
        cfg=cfg,
        tf=tf,
        A0=OperatorMatrix(
            A0_red,
            domain_desc="clamped energy-space coordinates (energy-orthonormal)",
            codomain_desc="clamped energy-space coordinates (energy-orthonormal)",
            lam=None,
            hermitian=False,
        ),
        P0=OperatorMatrix(
            P0_full,
            domain_desc="packed coupled states",
            codomain_desc="packed coupled states",
            lam=None,
            hermitian=False,
        ),
        basis=B_dom,
        space_basis=B_space,
        W=W,
        basis_desc=desc,
    )


# ======================================================================
# Block resolvent
# ======================================================================


def _blocks_apply(
    lam: complex, gen: CoupledGenerator, tf: TransformOps, Z: np.ndarray
) -> np.ndarray:
    """Apply the block elimination of the resolvent system to columns.

    Splits the data into a forced fluid solve and a beam-pencil solve,
    then reassembles the velocity from the lifted columns.
    """
    cfg = tf.cfg
    lam = complex(lam)
    nf = fluid_size(cfg)
    U, _, T = lifted_solution_matrix(lam, tf)
    m1 = beam_power_diagonal(cfg, 1.0)
    V = lam**2 * np.eye(cfg.Nb) + lam * T + np.diag(m1)
    condV = np.linalg.cond(V)
    if condV > 1e13:
        warnings.warn(
            f"beam pencil at lambda={lam} is ill conditioned: cond ~ {condV:.3e}",
            stacklevel=2,
        )
    Vlu = scipy.linalg.lu_factor(V)

    system = cached_saddle(lam, tf)
    F = Z[:nf, :]
    G1 = Z[nf : nf + cfg.Nb, :]
    G2 = Z[nf + cfg.Nb :, :]
    rhs = np.zeros((system.matrix.shape[0], Z.shape[1]), dtype=complex)
    for j in range(Z.shape[1]):
        rhs[:, j] = rhs_forced(system, unpack_fluid(cfg, F[:, j]))
    sol = system.solve(rhs)
    Wf = sol[: system.n_w, :]
    Qf = sol[system.n_w :, :]
    Tw, Tq = traction_rows(tf)
    Tf = Tw @ Wf + Tq @ Qf

    eta1 = scipy.linalg.lu_solve(Vlu, G2 - Tf + lam * G1 + T @ G1)
    eta2 = lam * eta1 - G1
    Wout = Wf + U @ eta2
    return np.vstack([Wout, eta1, eta2])


def apply_resolvent_blocks(
    lam: complex, gen: CoupledGenerator, tf: TransformOps, z: np.ndarray
) -> np.ndarray:
    """Resolvent action on one packed state through the block formula."""
    out = _blocks_apply(lam, gen, tf, np.asarray(z, dtype=complex).reshape(-1, 1))
    return out[:, 0]


def resolvent_blocks(
    lam: complex, gen: CoupledGenerator, tf: TransformOps
) -> OperatorMatrix:
    """Block-formula resolvent as a matrix on the domain coordinates."""
    out = _blocks_apply(lam, gen, tf, gen.basis)
    entries = gen.basis.conj().T @ (gen.W @ out)
    return OperatorMatrix(
        entries=entries,
        domain_desc="clamped energy-space coordinates (energy-orthonormal)",
        codomain_desc="clamped energy-space coordinates (energy-orthonormal)",
        lam=complex(lam),
        hermitian=False,
    )
