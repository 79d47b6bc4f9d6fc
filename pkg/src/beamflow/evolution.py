"""Time integration of the coupled dynamics and the local fixed point.

Linear flow
-----------
The linear coupled system is advanced in the energy-orthonormal
coordinates of the projected generator by implicit one-step schemes
(implicit Euler or the trapezoidal rule); each (generator, step size,
scheme) triple factors its stepping matrix once.  Because the generator
is dissipative in these coordinates, both schemes keep the energy norm
non-increasing for unforced steps, and the beam deflection stays
mean-zero to machine precision since the mean mode carries no degree of
freedom.

Pressure is not part of the evolved state.  At every node it is
recovered as the multiplier of a generalized saddle solve whose momentum
is driven by the generator's own derivative of the state, so the
recovery is free of finite-difference error and one factorization
serves every step size.

Nonlinear flow
--------------
The full system on the moving channel is pulled back to the channel of
the initial deflection, where it reads as the linear system driven by a
quadratic remainder: an interior forcing collecting the convective term
together with every Jacobian correction of the chart to the current
channel, and an interface forcing collecting the mismatch of the viscous
traction.  :func:`solve_nonlinear` iterates that forcing map: starting
from zero, each sweep solves the linear system under the current forcing
pair and re-evaluates the remainder on the resulting trajectory, with
all linear operators frozen on the initial chart.  The iteration stops
when the relative update of the forcing pair falls below tolerance; on
stalls the horizon is halved (the map contracts on short horizons) up to
a configured number of times.

Norm conventions
----------------
Velocity-level quantities (energy, forcing size, difference quotients)
use the weighted inner product of the deformed channel the strip data
represents; Sobolev-level trajectory diagnostics use the flat-strip
surrogate norms, which are equivalent for the fixed charts handled here.
Beam norms are graded by fractional powers of the beam operator, indexed
in eighths.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .assembly import (
    fluid_size,
    pack_fluid,
    pack_pressure,
    pack_state,
    state_size,
    traction_rows,
    unpack_pressure,
    unpack_state,
)
from .beam import (
    BeamFunction,
    BeamState,
    beam_norm,
    beam_power_diagonal,
    coeffs_to_beamvec,
    project_mean_zero,
)
from .config import SpectralConfig
from .coupling import CoupledGenerator, assemble_A0
from .fields import (
    CoupledState,
    FluidField,
    PressureField,
    grid_deriv_s,
    grid_deriv_y,
    strip_divergence,
)
from .geometry import (
    CONTACT_TOL,
    ContactError,
    TransformOps,
    apply_G,
    apply_L,
    build_transform,
    flat_transform,
    physical_components,
    physical_gradient,
)
from .norms import fluid_sobolev_norm, strip_l2_inner, weighted_fluid_inner
from .spectral import dealias_mask, dealias_values
from .stokes import cached_saddle, rhs_forced, rhs_lifted, weighted_pressure_mean

SCHEMA_VERSION = 1

_SCHEMES = ("implicit-euler", "crank-nicolson")

#: Node-indexed series written by :meth:`TrajectoryRecord.save_csv`.
_CSV_KEYS = (
    "w_l2",
    "w_h1",
    "w_h2",
    "q_h1",
    "eta1_78",
    "eta1_58",
    "eta2_38",
    "eta2_18",
    "mass",
    "div",
    "min_gap",
)


# ======================================================================
# Errors
# ======================================================================


class InitialDataError(ValueError):
    """Initial data violates a compatibility condition; see ``diagnostics``."""

    def __init__(self, diagnostics: "InitialDataDiagnostics") -> None:
        super().__init__(
            "initial data rejected: " + "; ".join(diagnostics.failures)
        )
        self.diagnostics = diagnostics


class TrajectoryContactError(ContactError):
    """The interface touched the wall during time integration."""

    def __init__(self, time: float, gap: float) -> None:
        super().__init__(
            f"channel closed at t = {time:.6g}: min(1 + eta1) = {gap:.3e}"
        )
        self.time = float(time)
        self.gap = float(gap)


class NonConvergenceError(RuntimeError):
    """The forcing-map iteration failed on every attempted horizon."""

    def __init__(self, message: str, attempts: List[Dict[str, object]]) -> None:
        super().__init__(message)
        self.attempts = attempts


# ======================================================================
# Configuration and forcing
# ======================================================================


@dataclass(frozen=True)
class EvolutionConfig:
    """Parameters of a time-integration run.

    Parameters
    ----------
    dt : float
        Requested step size; the effective step divides the horizon
        exactly and is reported in the record metadata.
    T : float
        Time horizon.
    scheme : str
        One of ``implicit-euler`` (first order, stiffly damped) or
        ``crank-nicolson`` (second order, energy-conservative limit).
    fp_tol : float
        Relative update tolerance of the forcing-map iteration.
    fp_max_iter : int
        Iteration cap per horizon attempt.
    R : float, optional
        Radius of the forcing ball the iteration must stay inside.  When
        omitted it defaults to twice ``1 +`` the initial-data norm, the
        smallest radius the local theory allows up to a factor.
    halving : int
        Maximum number of times the horizon is halved after a
        non-contracting attempt.
    """

    dt: float = 1.0e-2
    T: float = 0.1
    scheme: str = "implicit-euler"
    fp_tol: float = 1.0e-8
    fp_max_iter: int = 25
    R: Optional[float] = None
    halving: int = 6

    def __post_init__(self) -> None:
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.T > 0.0 and np.isfinite(self.T)):
            raise ValueError(f"T must be positive, got {self.T}")
        if self.scheme not in _SCHEMES:
            raise ValueError(
                f"scheme must be one of {_SCHEMES}, got {self.scheme!r}"
            )
        if not (0.0 < self.fp_tol < 1.0):
            raise ValueError(f"fp_tol must lie in (0, 1), got {self.fp_tol}")
        if self.fp_max_iter < 1:
            raise ValueError("fp_max_iter must be at least 1")
        if self.halving < 0:
            raise ValueError("halving must be non-negative")
        if self.R is not None and not (self.R > 0.0):
            raise ValueError(f"R must be positive when given, got {self.R}")


@dataclass(frozen=True)
class ForcingPair:
    """Time-sampled interior and interface forcing ``(F, G)``.

    ``fluid`` holds strip-represented interior forcing samples of shape
    ``(nt, 2, Ns, Ny)``; ``beam`` holds interface forcing coefficients of
    shape ``(nt, Ns)``, mean-zero at every sample.  Evaluation between
    nodes interpolates linearly and clamps beyond the ends.
    """

    cfg: SpectralConfig
    times: np.ndarray
    fluid: np.ndarray
    beam: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("times must be a non-empty 1D array")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        nt = times.size
        f = np.asarray(self.fluid, dtype=complex)
        g = np.asarray(self.beam, dtype=complex)
        if f.shape != (nt, 2, self.cfg.Ns, self.cfg.Ny):
            raise ValueError(
                f"fluid samples must have shape {(nt, 2, self.cfg.Ns, self.cfg.Ny)},"
                f" got {f.shape}"
            )
        if g.shape != (nt, self.cfg.Ns):
            raise ValueError(
                f"beam samples must have shape {(nt, self.cfg.Ns)}, got {g.shape}"
            )
        scale = 1.0 + float(np.max(np.abs(g))) if g.size else 1.0
        worst = float(np.max(np.abs(g[:, 0]))) if g.size else 0.0
        if worst > 1.0e-10 * scale:
            raise ValueError(
                f"interface forcing must be mean-zero at every sample; "
                f"worst mean magnitude {worst:.3e}"
            )
        for name, arr in (("times", times), ("fluid", f), ("beam", g)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------

    @classmethod
    def zero(cls, cfg: SpectralConfig, T: float, samples: int = 2) -> "ForcingPair":
        return cls.zero_on(cfg, np.linspace(0.0, float(T), max(2, samples)))

    @classmethod
    def zero_on(cls, cfg: SpectralConfig, times: np.ndarray) -> "ForcingPair":
        times = np.asarray(times, dtype=float)
        return cls(
            cfg,
            times,
            np.zeros((times.size, 2, cfg.Ns, cfg.Ny), dtype=complex),
            np.zeros((times.size, cfg.Ns), dtype=complex),
        )

    @classmethod
    def from_samples(
        cls,
        times: np.ndarray,
        fields: Sequence[FluidField],
        beams: Sequence[BeamFunction],
    ) -> "ForcingPair":
        times = np.asarray(times, dtype=float)
        if not (len(fields) == len(beams) == times.size):
            raise ValueError("times, fields, and beams must have equal length")
        cfg = fields[0].cfg
        return cls(
            cfg,
            times,
            np.stack([f.u for f in fields]),
            np.stack([b.coeffs for b in beams]),
        )

    # ------------------------------------------------------------------
    # Evaluation and norms
    # ------------------------------------------------------------------

    def at(self, t: float) -> Tuple[FluidField, BeamFunction]:
        """Linearly interpolated sample at time ``t`` (clamped at the ends)."""
        ts = self.times
        if ts.size == 1 or t <= ts[0]:
            j, th = 0, 0.0
        elif t >= ts[-1]:
            j, th = ts.size - 2, 1.0
        else:
            j = int(np.searchsorted(ts, t, side="right")) - 1
            th = (t - ts[j]) / (ts[j + 1] - ts[j])
        if th == 0.0:
            fu, bc = self.fluid[j], self.beam[j]
        else:
            fu = (1.0 - th) * self.fluid[j] + th * self.fluid[j + 1]
            bc = (1.0 - th) * self.beam[j] + th * self.beam[j + 1]
        return FluidField(self.cfg, fu), BeamFunction(self.cfg, bc)

    def scaled(self, factor: float) -> "ForcingPair":
        return ForcingPair(
            self.cfg, self.times, self.fluid * factor, self.beam * factor
        )

    def norm_series(
        self, chart: Optional[BeamFunction] = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Per-sample norms: weighted velocity norm of ``F`` and the
        eighth-power beam norm of ``G``."""
        cfg = self.cfg
        fn = np.empty(self.times.size)
        gn = np.empty(self.times.size)
        for i in range(self.times.size):
            f = FluidField(cfg, self.fluid[i])
            fn[i] = np.sqrt(max(weighted_fluid_inner(f, f, chart).real, 0.0))
            gn[i] = beam_norm(BeamFunction(cfg, self.beam[i]), 0.125)
        return fn, gn

    def ball_norm(self, chart: Optional[BeamFunction] = None) -> float:
        """Size of the pair in the fixed-point ball: the time-integrated
        velocity norm of ``F`` plus the time-integrated eighth-power beam
        norm of ``G``."""
        fn, gn = self.norm_series(chart)
        if self.times.size == 1:
            return float(fn[0] + gn[0])
        return float(
            np.sqrt(np.trapezoid(fn**2, self.times))
            + np.sqrt(np.trapezoid(gn**2, self.times))
        )


def _pair_distance(
    a: ForcingPair, b: ForcingPair, chart: Optional[BeamFunction]
) -> float:
    """Ball-norm distance between two pairs sampled on the same grid."""
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times):
        raise ValueError("forcing pairs must share one time grid")
    diff = ForcingPair(a.cfg, a.times, a.fluid - b.fluid, a.beam - b.beam)
    return diff.ball_norm(chart)


# ======================================================================
# Initial-data validation
# ======================================================================


@dataclass(frozen=True)
class InitialDataDiagnostics:
    """Residuals of the compatibility conditions on initial data.

    All residuals are maximum-magnitude defects on the grid: the mean of
    the two beam components, the channel gap ``min(1 + eta1)``, the strip
    divergence, the bottom-wall trace, and the mismatch of the top trace
    against the interface velocity (exact in the strip representation).
    """

    ok: bool
    failures: Tuple[str, ...]
    mean_defect: float
    min_gap: float
    div_residual: float
    wall_residual: float
    trace_residual: float
    tol: float
    contact_tol: float

    def raise_if_invalid(self) -> None:
        if not self.ok:
            raise InitialDataError(self)


def validate_initial_data(
    w0: FluidField,
    eta10: BeamFunction,
    eta20: BeamFunction,
    *,
    tol: float = 1.0e-6,
    contact_tol: float = CONTACT_TOL,
) -> InitialDataDiagnostics:
    """Check the compatibility conditions of coupled initial data.

    The velocity must be divergence-free in the strip representation,
    vanish on the bottom wall, and match the interface velocity on the
    top row (where the cofactor transform makes the condition read
    componentwise: first component zero, second equal to ``eta20``).
    Both beam components must be mean-zero and the channel must be open.

    The default tolerance admits fields produced by the discrete solvers,
    whose divergence defect concentrates on the uncollocated boundary
    rows; data built in closed form passes a much tighter ``tol``.
    """
    cfg = w0.cfg
    if eta10.cfg != cfg or eta20.cfg != cfg:
        raise ValueError("initial data components use different grids")
    failures: List[str] = []

    mean_defect = max(abs(eta10.mean()), abs(eta20.mean()))
    if mean_defect > 1.0e-12:
        failures.append(
            f"beam components must be mean-zero (defect {mean_defect:.3e})"
        )

    min_gap = 1.0 + float(np.min(eta10.real_values()))
    if min_gap < contact_tol:
        failures.append(f"channel is closed: min(1 + eta1) = {min_gap:.3e}")

    div_residual = float(np.max(np.abs(strip_divergence(w0))))
    if div_residual > tol:
        failures.append(
            f"velocity is not divergence-free (residual {div_residual:.3e})"
        )

    wall_residual = float(np.max(np.abs(w0.u[:, :, 0])))
    if wall_residual > tol:
        failures.append(
            f"velocity does not vanish on the bottom wall "
            f"(residual {wall_residual:.3e})"
        )

    top_mismatch = w0.u[1, :, -1] - eta20.values()
    trace_residual = float(
        max(np.max(np.abs(w0.u[0, :, -1])), np.max(np.abs(top_mismatch)))
    )
    if trace_residual > tol:
        failures.append(
            f"top trace does not match the interface velocity "
            f"(residual {trace_residual:.3e})"
        )

    return InitialDataDiagnostics(
        ok=not failures,
        failures=tuple(failures),
        mean_defect=mean_defect,
        min_gap=min_gap,
        div_residual=div_residual,
        wall_residual=wall_residual,
        trace_residual=trace_residual,
        tol=tol,
        contact_tol=contact_tol,
    )


# ======================================================================
# Linear stepping
# ======================================================================


@dataclass(frozen=True)
class _Propagator:
    """One factored stepping operator in generator coordinates."""

    gen: CoupledGenerator
    scheme: str
    dt: float
    lu: Tuple[np.ndarray, np.ndarray]
    explicit: Optional[np.ndarray]

    def step(self, c: np.ndarray, fc: np.ndarray) -> np.ndarray:
        if self.explicit is None:
            rhs = c + self.dt * fc
        else:
            rhs = self.explicit @ c + self.dt * fc
        return scipy.linalg.lu_solve(self.lu, rhs)


_PROP_CACHE: Dict[Tuple[int, str, float], _Propagator] = {}
_PROP_CACHE_MAX = 8


def _propagator(gen: CoupledGenerator, scheme: str, dt: float) -> _Propagator:
    key = (id(gen), scheme, float(dt))
    hit = _PROP_CACHE.get(key)
    if hit is not None and hit.gen is gen:
        return hit
    if scheme not in _SCHEMES:
        raise ValueError(f"scheme must be one of {_SCHEMES}, got {scheme!r}")
    A = gen.A0.entries
    eye = np.eye(A.shape[0])
    if scheme == "implicit-euler":
        lu = scipy.linalg.lu_factor(eye - dt * A)
        explicit = None
    else:
        lu = scipy.linalg.lu_factor(eye - 0.5 * dt * A)
        explicit = eye + 0.5 * dt * A
    prop = _Propagator(gen=gen, scheme=scheme, dt=float(dt), lu=lu, explicit=explicit)
    if len(_PROP_CACHE) >= _PROP_CACHE_MAX:
        _PROP_CACHE.pop(next(iter(_PROP_CACHE)))
    _PROP_CACHE[key] = prop
    return prop


def _forcing_vector(
    cfg: SpectralConfig, F: Optional[FluidField], G: Optional[BeamFunction]
) -> np.ndarray:
    """Packed state carrying interior forcing in the velocity block and
    interface forcing in the beam-velocity block."""
    vec = np.zeros(state_size(cfg), dtype=complex)
    if F is not None:
        vec[: fluid_size(cfg)] = pack_fluid(F)
    if G is not None:
        vec[fluid_size(cfg) + cfg.Nb :] = coeffs_to_beamvec(G)
    return vec


def _recover_pressure(
    gen: CoupledGenerator,
    state: CoupledState,
    F: Optional[FluidField],
    G: Optional[BeamFunction],
) -> PressureField:
    """Instantaneous pressure at a state of the projected dynamics.

    The projected trajectory satisfies the momentum equation up to the
    constraint force the projection absorbs; the pressure is the
    multiplier realizing that force.  It is recovered from a generalized
    saddle solve whose drive substitutes the generator's own derivative
    for the time derivative, so the recovery carries no
    finite-difference error and shares one factorization across all step
    sizes.  Normalized to zero weighted mean.
    """
    cfg = gen.cfg
    c = gen.to_coords(pack_state(state))
    if F is None and G is None:
        fc = np.zeros_like(c)
    else:
        fc = gen.to_coords(_forcing_vector(cfg, F, G))
    dstate = unpack_state(cfg, gen.from_coords(gen.A0.entries @ c + fc))
    lam = 1.0
    system = cached_saddle(lam, gen.tf)
    drive = lam * state.w.u - dstate.w.u
    if F is not None:
        drive = drive + F.u
    rhs = rhs_forced(system, FluidField(cfg, drive)) + rhs_lifted(system, state.eta2)
    sol = system.solve(rhs)
    q = unpack_pressure(cfg, sol[system.n_w :])
    offset = weighted_pressure_mean(q, gen.tf)
    return PressureField(cfg, q.p - offset)


def step_linear(
    gen: CoupledGenerator,
    state: CoupledState,
    forcing: Optional[Tuple[FluidField, BeamFunction]],
    dt: float,
    scheme: str = "implicit-euler",
    *,
    with_pressure: bool = True,
) -> Tuple[CoupledState, Optional[PressureField]]:
    """Advance one implicit step of the linear coupled system.

    The state is projected onto the generator coordinates, stepped, and
    reconstructed; the optional forcing pair ``(F, G)`` is held constant
    over the step.  When ``with_pressure`` is set, the pressure at the
    new time is recovered from the saddle solve.
    """
    cfg = gen.cfg
    prop = _propagator(gen, scheme, dt)
    c = gen.to_coords(pack_state(state))
    F = G = None
    if forcing is not None:
        F, G = forcing
    if F is None and G is None:
        fc = np.zeros_like(c)
    else:
        fc = gen.to_coords(_forcing_vector(cfg, F, G))
    new = unpack_state(cfg, gen.from_coords(prop.step(c, fc)))
    pressure = None
    if with_pressure:
        pressure = _recover_pressure(gen, new, F, G)
    return new, pressure


def _integrate(
    gen: CoupledGenerator,
    data: CoupledState,
    forcing: ForcingPair,
    scheme: str,
    times: np.ndarray,
) -> Tuple[List[CoupledState], List[PressureField]]:
    """March the linear system across ``times`` and recover pressures."""
    cfg = gen.cfg
    dt = float(times[1] - times[0])
    prop = _propagator(gen, scheme, dt)
    coords = [gen.to_coords(pack_state(data))]
    for k in range(times.size - 1):
        t_eval = times[k + 1] if scheme == "implicit-euler" else 0.5 * (
            times[k] + times[k + 1]
        )
        F, G = forcing.at(t_eval)
        fc = gen.to_coords(_forcing_vector(cfg, F, G))
        coords.append(prop.step(coords[-1], fc))
    states = [unpack_state(cfg, gen.from_coords(c)) for c in coords]

    pressures: List[PressureField] = []
    for k in range(times.size):
        F, G = forcing.at(times[k])
        pressures.append(_recover_pressure(gen, states[k], F, G))
    return states, pressures


# ======================================================================
# Trajectory record
# ======================================================================


@dataclass(frozen=True)
class TrajectoryRecord:
    """One time-integration run with its diagnostic series.

    Attributes
    ----------
    times : ndarray
        Node times, shape ``(n + 1,)``.
    states, pressures : tuples
        Coupled states and recovered pressures at the nodes.
    norm_history : dict of str -> ndarray
        Node series (length ``n + 1``): weighted velocity norm ``w_l2``,
        flat Sobolev surrogates ``w_h1``/``w_h2``, mean-removed pressure
        norm ``q_h1``, beam norms graded in eighths (``eta1_78`` is the
        deflection at power 7/8, and so on), the beam mean ``mass``, the
        divergence residual ``div``, and the channel gap ``min_gap``;
        plus interval series (length ``n``) ``dwdt_l2`` and
        ``deta2dt_m18`` for the difference quotients.
    energy_history : ndarray
        Energy norm of the state at the nodes.
    summary : dict of str -> float
        Aggregates: the composite trajectory norm, the composite
        data-plus-forcing norm, their ratio, and the invariant extremes.
    metadata : dict
        Scheme, steps, chart description, and solver-specific entries.
    """

    cfg: SpectralConfig
    times: np.ndarray
    states: Tuple[CoupledState, ...]
    pressures: Tuple[PressureField, ...]
    norm_history: Dict[str, np.ndarray]
    energy_history: np.ndarray
    summary: Dict[str, float]
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def final_state(self) -> CoupledState:
        return self.states[-1]

    def save_csv(self, path: str) -> None:
        """Write the node series as CSV with a commented header."""
        lines = [
            f"# schema_version,{SCHEMA_VERSION}",
            "# kind,trajectory",
            f"# scheme,{self.metadata.get('scheme', '?')}",
            f"# dt,{self.metadata.get('dt', '?')}",
            "time,energy," + ",".join(_CSV_KEYS),
        ]
        for i in range(self.times.size):
            row = [repr(float(self.times[i])), repr(float(self.energy_history[i]))]
            row += [repr(float(self.norm_history[k][i])) for k in _CSV_KEYS]
            lines.append(",".join(row))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    def save_npz(self, path: str) -> None:
        """Dump the full trajectory (states, pressures, grid) for restart."""
        cfg = self.cfg
        np.savez_compressed(
            path,
            schema_version=SCHEMA_VERSION,
            times=self.times,
            states=np.stack([pack_state(s) for s in self.states]),
            pressures=np.stack([q.p for q in self.pressures]),
            energy=self.energy_history,
            ns=cfg.Ns,
            ny=cfg.Ny,
            length=cfg.L,
            nu=cfg.nu,
            alpha1=cfg.alpha1,
            alpha2=cfg.alpha2,
            dealias=cfg.dealias,
            scheme=str(self.metadata.get("scheme", "")),
            dt=float(self.metadata.get("dt", 0.0)),
        )


def load_trajectory(
    path: str,
) -> Tuple[SpectralConfig, np.ndarray, Tuple[CoupledState, ...], Tuple[PressureField, ...], Dict[str, object]]:
    """Rebuild the states and pressures of a dumped trajectory."""
    with np.load(path, allow_pickle=False) as z:
        cfg = SpectralConfig(
            Ns=int(z["ns"]),
            Ny=int(z["ny"]),
            L=float(z["length"]),
            nu=float(z["nu"]),
            alpha1=float(z["alpha1"]),
            alpha2=float(z["alpha2"]),
            dealias=bool(z["dealias"]),
        )
        times = np.array(z["times"])
        smat = np.array(z["states"])
        pmat = np.array(z["pressures"])
        meta: Dict[str, object] = {
            "scheme": str(z["scheme"]),
            "dt": float(z["dt"]),
            "schema_version": int(z["schema_version"]),
        }
    states = tuple(unpack_state(cfg, row) for row in smat)
    pressures = tuple(PressureField(cfg, p) for p in pmat)
    return cfg, times, states, pressures, meta


# ======================================================================
# Norm series and record assembly
# ======================================================================


def _chart_deflection(gen: CoupledGenerator) -> Optional[BeamFunction]:
    """Deflection of the generator's chart, or None for the flat strip."""
    if float(np.max(np.abs(gen.tf.zeta))) < 1.0e-14:
        return None
    return BeamFunction.from_values(gen.cfg, gen.tf.zeta.astype(complex))


def _pressure_h1(q: PressureField) -> float:
    """Flat Sobolev norm of the pressure with its flat mean removed."""
    cfg = q.cfg
    mean = strip_l2_inner(q.p, np.ones_like(q.p), cfg) / cfg.L
    p0 = q.p - mean
    total = strip_l2_inner(p0, p0, cfg).real
    ps = grid_deriv_s(p0, cfg)
    py = grid_deriv_y(p0, cfg)
    total += strip_l2_inner(ps, ps, cfg).real + strip_l2_inner(py, py, cfg).real
    return float(np.sqrt(max(total, 0.0)))


def _norm_series(
    gen: CoupledGenerator,
    times: np.ndarray,
    states: Sequence[CoupledState],
    pressures: Sequence[PressureField],
) -> Dict[str, np.ndarray]:
    cfg = gen.cfg
    chart = _chart_deflection(gen)
    n_nodes = times.size
    keys = list(_CSV_KEYS) + ["energy"]
    out = {k: np.zeros(n_nodes) for k in keys}
    for i, (st, q) in enumerate(zip(states, pressures)):
        out["w_l2"][i] = np.sqrt(
            max(weighted_fluid_inner(st.w, st.w, chart).real, 0.0)
        )
        out["w_h1"][i] = fluid_sobolev_norm(st.w, 1)
        out["w_h2"][i] = fluid_sobolev_norm(st.w, 2)
        out["q_h1"][i] = _pressure_h1(q)
        out["eta1_78"][i] = beam_norm(st.eta1, 0.875)
        out["eta1_58"][i] = beam_norm(st.eta1, 0.625)
        out["eta2_38"][i] = beam_norm(st.eta2, 0.375)
        out["eta2_18"][i] = beam_norm(st.eta2, 0.125)
        out["mass"][i] = max(abs(st.eta1.mean()), abs(st.eta2.mean()))
        out["div"][i] = float(np.max(np.abs(strip_divergence(st.w))))
        out["min_gap"][i] = 1.0 + float(np.min(st.eta1.real_values()))
        out["energy"][i] = gen.energy_norm(pack_state(st))

    n_steps = n_nodes - 1
    dwdt = np.zeros(max(n_steps, 0))
    deta2 = np.zeros(max(n_steps, 0))
    for k in range(n_steps):
        dt_k = times[k + 1] - times[k]
        dw = FluidField(cfg, (states[k + 1].w.u - states[k].w.u) / dt_k)
        dwdt[k] = np.sqrt(max(weighted_fluid_inner(dw, dw, chart).real, 0.0))
        de = (states[k + 1].eta2 - states[k].eta2) * (1.0 / dt_k)
        deta2[k] = beam_norm(de, -0.125)
    out["dwdt_l2"] = dwdt
    out["deta2dt_m18"] = deta2
    return out


def _interval_l2(times: np.ndarray, vals: np.ndarray) -> float:
    """Root of the step-weighted squares of an interval series."""
    if vals.size == 0:
        return 0.0
    dts = np.diff(times)
    return float(np.sqrt(np.sum(dts * vals**2)))


def _summarize(
    gen: CoupledGenerator,
    times: np.ndarray,
    series: Dict[str, np.ndarray],
    forcing: ForcingPair,
) -> Dict[str, float]:
    chart = _chart_deflection(gen)

    def int_l2(key: str) -> float:
        return float(np.sqrt(max(np.trapezoid(series[key] ** 2, times), 0.0)))

    lhs = (
        int_l2("w_h2")
        + float(np.max(series["w_h1"]))
        + _interval_l2(times, series["dwdt_l2"])
        + int_l2("q_h1")
        + int_l2("eta1_78")
        + float(np.max(series["eta1_58"]))
        + int_l2("eta2_38")
        + float(np.max(series["eta2_18"]))
        + _interval_l2(times, series["deta2dt_m18"])
    )
    fn, gn = forcing.norm_series(chart)
    if forcing.times.size > 1:
        f_int = float(np.sqrt(max(np.trapezoid(fn**2, forcing.times), 0.0)))
        g_int = float(np.sqrt(max(np.trapezoid(gn**2, forcing.times), 0.0)))
    else:
        f_int, g_int = float(fn[0]), float(gn[0])
    rhs = (
        series["w_h1"][0]
        + series["eta1_78"][0]
        + series["eta2_38"][0]
        + f_int
        + g_int
    )
    energy = series["energy"]
    increase = float(np.max(np.diff(energy))) if energy.size > 1 else 0.0
    return {
        "trajectory_norm": float(lhs),
        "data_forcing_norm": float(rhs),
        "stability_ratio": float(lhs / rhs) if rhs > 1.0e-14 else 0.0,
        "mass_max": float(np.max(series["mass"])),
        "div_max": float(np.max(series["div"])),
        "min_gap": float(np.min(series["min_gap"])),
        "energy_initial": float(energy[0]),
        "energy_final": float(energy[-1]),
        "energy_increase_max": increase,
    }


def _build_record(
    gen: CoupledGenerator,
    times: np.ndarray,
    states: Sequence[CoupledState],
    pressures: Sequence[PressureField],
    forcing: ForcingPair,
    scheme: str,
    dt_requested: float,
    extra: Optional[Dict[str, object]] = None,
) -> TrajectoryRecord:
    series = _norm_series(gen, times, states, pressures)
    summary = _summarize(gen, times, series, forcing)
    metadata: Dict[str, object] = {
        "scheme": scheme,
        "dt": float(times[1] - times[0]) if times.size > 1 else float(dt_requested),
        "dt_requested": float(dt_requested),
        "horizon": float(times[-1]),
        "steps": int(times.size - 1),
        "chart": "flat" if _chart_deflection(gen) is None else "curved",
    }
    if extra:
        metadata.update(extra)
    return TrajectoryRecord(
        cfg=gen.cfg,
        times=np.asarray(times, dtype=float),
        states=tuple(states),
        pressures=tuple(pressures),
        norm_history=series,
        energy_history=series["energy"],
        summary=summary,
        metadata=metadata,
    )


def solve_linear(
    data: CoupledState,
    forcing: Optional[ForcingPair],
    evo: EvolutionConfig,
    gen: Optional[CoupledGenerator] = None,
    *,
    validate: bool = True,
) -> TrajectoryRecord:
    """Integrate the linear coupled system over ``[0, T]``.

    When no generator is supplied, the operators are assembled on the
    chart of the initial deflection (the configuration the nonlinear
    solver uses).  The step divides the horizon exactly; the forcing is
    sampled at the end of each step (implicit Euler) or at midpoints
    (trapezoidal rule) by linear interpolation of its node values.
    """
    cfg = data.cfg
    if validate:
        validate_initial_data(data.w, data.eta1, data.eta2).raise_if_invalid()
    if gen is None:
        gen = assemble_A0(flat_transform(cfg, data.eta1))
    if gen.cfg != cfg:
        raise ValueError("generator and initial data use different grids")
    if forcing is None:
        forcing = ForcingPair.zero(cfg, evo.T)
    n = max(1, int(round(evo.T / evo.dt)))
    times = np.linspace(0.0, evo.T, n + 1)
    states, pressures = _integrate(gen, data, forcing, evo.scheme, times)
    return _build_record(gen, times, states, pressures, forcing, evo.scheme, evo.dt)


# ======================================================================
# Transformed nonlinear terms
# ======================================================================


def _require_strip_chart(tf: TransformOps, name: str) -> None:
    if not tf.strip_base:
        raise ValueError(f"{name} expects the strip chart of the reference channel")


def _mask_grid(grid: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """Two-thirds-rule mask along the periodic direction of a grid."""
    return dealias_values(grid.T, cfg).T


def _time_chart(
    beam: BeamState, tf: TransformOps
) -> Tuple[TransformOps, BeamFunction]:
    """Chart from the reference channel to the current one, plus the
    reference deflection as a function."""
    cfg = tf.cfg
    ref = BeamFunction.from_values(cfg, tf.zeta.astype(complex))
    return build_transform(beam.eta1, ref, beam.eta2), ref


def evaluate_Fhat(
    beam: BeamState,
    w: FluidField,
    q: PressureField,
    tf: TransformOps,
    dealias: Optional[bool] = None,
) -> FluidField:
    """Interior forcing of the fixed-channel formulation.

    Evaluates, on the channel of the reference deflection, the quadratic
    remainder of the pulled-back momentum equation: the convective term
    together with every Jacobian correction (viscous, pressure, and
    chart-velocity terms) of the map onto the channel of ``beam.eta1``
    moving with velocity ``beam.eta2``.  Inputs and output are strip
    fields on the reference chart ``tf``; the deviation terms vanish
    identically when the current deflection equals the reference one and
    the interface is at rest, leaving exactly the transported convection.

    The two-thirds rule is applied to the field inputs and to the output
    along the periodic direction (defaulting to the grid's dealias flag);
    the smooth rational coefficient fields are left unmasked.
    """
    cfg = tf.cfg
    _require_strip_chart(tf, "evaluate_Fhat")
    if dealias is None:
        dealias = cfg.dealias
    tt, _ = _time_chart(beam, tf)

    u = w.u
    qgrid = q.p
    if dealias:
        u = np.stack([_mask_grid(u[0], cfg), _mask_grid(u[1], cfg)])
        qgrid = _mask_grid(qgrid, cfg)

    v = physical_components(tf, FluidField(cfg, u))
    dv = [physical_gradient(tf, v[k]) for k in (0, 1)]
    d2v = [physical_gradient(tf, dv[k][1]) for k in (0, 1)]
    dq1, dq2 = physical_gradient(tf, qgrid)

    f = tt.fields
    nu = cfg.nu
    b11, b21 = f["b11"], f["b21"]
    a11, a21 = f["a11"], f["a21"]
    det = f["det"]
    dY21, dY22 = f["dY21"], f["dY22"]
    da1_11, da1_21, da2_21 = f["da1_11"], f["da1_21"], f["da2_21"]
    d2a_11, d2a_21 = f["d2a11_11"], f["d2a11_21"]
    c22 = dY21**2 + dY22**2
    t_1l = (da1_11, da1_11 * dY21)
    t_2l = (da1_21, da1_21 * dY21 + da2_21 * dY22)

    out_phys = []
    for alpha in (0, 1):
        if alpha == 0:
            visc_zero = nu * b11 * d2a_11 * v[0]
            visc_first = 2.0 * nu * b11 * (t_1l[0] * dv[0][0] + t_1l[1] * dv[0][1])
            press_dev = -(dq1 * (det - 1.0) + dq2 * det * dY21)
            conv_coeff = -(b11 * da1_11 * a11) * v[0] * v[0]
            chart_rate = -(b11 * f["dta_11"]) * v[0]
        else:
            visc_zero = nu * (b21 * d2a_11 + d2a_21) * v[0]
            visc_first = 2.0 * nu * (
                (b21 * t_1l[0] + t_2l[0]) * dv[0][0]
                + (b21 * t_1l[1] + t_2l[1]) * dv[0][1]
            )
            press_dev = -(dq1 * det * dY21 + dq2 * (det * c22 - 1.0))
            conv_coeff = -(
                (b21 * da1_11 * a11 + da1_21 * a11 + da2_21 * a21) * v[0] * v[0]
                + da2_21 * v[0] * v[1]
            )
            chart_rate = -(b21 * f["dta_11"] + f["dta_21"]) * v[0]
        visc_dev = nu * (2.0 * dY21 * d2v[alpha][0] + (c22 - 1.0) * d2v[alpha][1])
        visc_curv = nu * f["lapY2"] * dv[alpha][1]
        convect = -(v[0] * dv[alpha][0] + v[1] * dv[alpha][1]) / det
        frame_rate = -f["dtY2"] * dv[alpha][1]
        out_phys.append(
            visc_zero
            + visc_first
            + visc_dev
            + visc_curv
            + press_dev
            + conv_coeff
            + convect
            + chart_rate
            + frame_rate
        )

    F1 = tf.field("b11") * out_phys[0]
    F2 = tf.field("b21") * out_phys[0] + out_phys[1]
    if dealias:
        F1, F2 = _mask_grid(F1, cfg), _mask_grid(F2, cfg)
    return FluidField(cfg, np.stack([F1, F2]))


def evaluate_Ghat(
    beam: BeamState,
    w: FluidField,
    tf: TransformOps,
    dealias: Optional[bool] = None,
) -> BeamFunction:
    """Interface forcing of the fixed-channel formulation.

    Evaluates the mean-projected mismatch of the viscous traction on the
    top row: the symmetrized-gradient corrections of the chart onto the
    current channel, each group an identity-deviation that vanishes when
    the current deflection equals the reference one.  The output is
    mean-zero exactly.
    """
    cfg = tf.cfg
    _require_strip_chart(tf, "evaluate_Ghat")
    if dealias is None:
        dealias = cfg.dealias
    tt, ref = _time_chart(beam, tf)

    u = w.u
    if dealias:
        u = np.stack([_mask_grid(u[0], cfg), _mask_grid(u[1], cfg)])
    v = physical_components(tf, FluidField(cfg, u))
    dv = [physical_gradient(tf, v[k]) for k in (0, 1)]

    f = tt.fields
    a11, a21 = f["a11"][:, -1], f["a21"][:, -1]
    dY21, dY22 = f["dY21"][:, -1], f["dY22"][:, -1]
    da1_21, da2_21 = f["da1_21"][:, -1], f["da2_21"][:, -1]
    d1 = [(dv[k][0][:, -1], dv[k][1][:, -1]) for k in (0, 1)]
    v_top = v[0][:, -1]

    ds_eta = beam.eta1.derivative().values()
    ds_rel = (beam.eta1 - ref).derivative().values()

    g_normal = 2.0 * (-(a21 * dY22) * d1[0][1] + (1.0 - dY22) * d1[1][1])
    g_shear = ds_rel * (d1[1][0] + d1[0][1])
    g_slope = ds_eta * (
        a21 * d1[0][0]
        + a21 * dY21 * d1[0][1]
        + dY21 * d1[1][1]
        + (a11 * dY22 - 1.0) * d1[0][1]
    )
    g_coeff = (ds_eta * da1_21 - 2.0 * da2_21) * v_top

    vals = cfg.nu * (g_normal + g_shear + g_slope + g_coeff)
    out = project_mean_zero(BeamFunction.from_values(cfg, vals))
    if dealias:
        out = BeamFunction(cfg, np.where(dealias_mask(cfg), out.coeffs, 0.0))
    return out


# ======================================================================
# Residual diagnostics
# ======================================================================


def transformed_residual(
    record: TrajectoryRecord,
    gen: CoupledGenerator,
    forcing: Optional[ForcingPair],
) -> Dict[str, float]:
    """Pointwise residuals of the fixed-channel system along a trajectory.

    Uses centered difference quotients at the interior nodes, so the
    values combine the spatial defect with the time-discretization
    error of the scheme.  Returns relative residuals for the momentum
    rows (interior collocation points), the beam acceleration law (with
    the recovered pressure in the traction), and the kinematic identity
    between the deflection rate and the beam velocity.  ``forcing=None``
    measures the unforced flow.
    """
    cfg = gen.cfg
    if forcing is None:
        forcing = ForcingPair.zero_on(cfg, record.times)
    times = record.times
    n = times.size - 1
    if n < 2:
        return {
            "momentum_residual": float("nan"),
            "beam_residual": float("nan"),
            "kinematic_residual": float("nan"),
        }
    tf = gen.tf
    Tw, Tq = traction_rows(tf)
    m1 = beam_power_diagonal(cfg, 1.0)

    mom_defect = 0.0
    mom_scale = 0.0
    beam_defect = 0.0
    beam_scale = 0.0
    kin_defect = 0.0
    kin_scale = 0.0
    for k in range(1, n):
        dt2 = times[k + 1] - times[k - 1]
        st = record.states[k]
        dwdt = (record.states[k + 1].w.u - record.states[k - 1].w.u) / dt2
        visc = cfg.nu * apply_L(tf, st.w).u
        pres = apply_G(tf, record.pressures[k]).u
        F, G = forcing.at(times[k])
        resid = dwdt - visc + pres - F.u
        interior = (slice(None), slice(None), slice(1, -1))
        mom_defect = max(mom_defect, float(np.max(np.abs(resid[interior]))))
        mom_scale = max(
            mom_scale,
            float(
                np.max(
                    np.abs(dwdt[interior])
                    + np.abs(visc[interior])
                    + np.abs(pres[interior])
                    + np.abs(F.u[interior])
                )
            ),
        )

        e2dot = (
            coeffs_to_beamvec(record.states[k + 1].eta2)
            - coeffs_to_beamvec(record.states[k - 1].eta2)
        ) / dt2
        stiff = m1 * coeffs_to_beamvec(st.eta1)
        tract = Tw @ pack_fluid(st.w) + Tq @ pack_pressure(record.pressures[k])
        gvec = coeffs_to_beamvec(G)
        bres = e2dot + stiff + tract - gvec
        beam_defect = max(beam_defect, float(np.max(np.abs(bres))))
        beam_scale = max(
            beam_scale,
            float(
                np.max(
                    np.abs(e2dot) + np.abs(stiff) + np.abs(tract) + np.abs(gvec)
                )
            ),
        )

        e1dot = (
            coeffs_to_beamvec(record.states[k + 1].eta1)
            - coeffs_to_beamvec(record.states[k - 1].eta1)
        ) / dt2
        kres = e1dot - coeffs_to_beamvec(st.eta2)
        kin_defect = max(kin_defect, float(np.max(np.abs(kres))))
        kin_scale = max(
            kin_scale,
            float(np.max(np.abs(e1dot) + np.abs(coeffs_to_beamvec(st.eta2)))),
        )

    tiny = 1.0e-300
    return {
        "momentum_residual": mom_defect / max(mom_scale, tiny),
        "beam_residual": beam_defect / max(beam_scale, tiny),
        "kinematic_residual": kin_defect / max(kin_scale, tiny),
    }


# ======================================================================
# Nonlinear solver
# ======================================================================


def _check_contact(times: np.ndarray, states: Sequence[CoupledState]) -> None:
    for t, st in zip(times, states):
        gap = 1.0 + float(np.min(st.eta1.real_values()))
        if gap < CONTACT_TOL:
            raise TrajectoryContactError(float(t), gap)


def _nonlinear_forcing(
    times: np.ndarray,
    states: Sequence[CoupledState],
    pressures: Sequence[PressureField],
    tf: TransformOps,
    dealias: Optional[bool],
) -> ForcingPair:
    """Evaluate the forcing map on a trajectory, node by node."""
    cfg = tf.cfg
    fields: List[FluidField] = []
    beams: List[BeamFunction] = []
    for t, st, q in zip(times, states, pressures):
        beam = BeamState(st.eta1, st.eta2)
        try:
            fields.append(evaluate_Fhat(beam, st.w, q, tf, dealias=dealias))
            beams.append(evaluate_Ghat(beam, st.w, tf, dealias=dealias))
        except ContactError as exc:
            gap = 1.0 + float(np.min(st.eta1.real_values()))
            raise TrajectoryContactError(float(t), gap) from exc
    return ForcingPair.from_samples(times, fields, beams)


def _picard_attempt(
    data: CoupledState,
    gen: CoupledGenerator,
    evo: EvolutionConfig,
    horizon: float,
    radius: float,
    feedback_scale: float,
    dealias: Optional[bool],
) -> Dict[str, object]:
    """Run the forcing-map iteration on one horizon."""
    cfg = gen.cfg
    chart = _chart_deflection(gen)
    n = max(1, int(round(horizon / evo.dt)))
    times = np.linspace(0.0, horizon, n + 1)
    pair = ForcingPair.zero_on(cfg, times)
    history: List[Dict[str, float]] = []
    prev_update = np.inf
    grew = 0
    z00: Optional[float] = None

    for it in range(1, evo.fp_max_iter + 1):
        states, pressures = _integrate(gen, data, pair, evo.scheme, times)
        _check_contact(times, states)
        new_pair = _nonlinear_forcing(times, states, pressures, gen.tf, dealias)
        if feedback_scale != 1.0:
            new_pair = new_pair.scaled(feedback_scale)
        map_norm = new_pair.ball_norm(chart)
        if z00 is None:
            z00 = map_norm
        update = _pair_distance(new_pair, pair, chart)
        rel = update / max(map_norm, 1.0e-14)
        history.append(
            {
                "iteration": float(it),
                "map_norm": map_norm,
                "update": update,
                "relative_update": rel,
            }
        )
        if rel <= evo.fp_tol:
            states, pressures = _integrate(gen, data, new_pair, evo.scheme, times)
            return {
                "converged": True,
                "reason": "relative update below tolerance",
                "history": history,
                "zero_image_norm": z00,
                "times": times,
                "states": states,
                "pressures": pressures,
                "pair": new_pair,
                "iterations": it,
            }
        if map_norm > radius:
            return {
                "converged": False,
                "reason": f"forcing left the radius-{radius:.3g} ball",
                "history": history,
                "zero_image_norm": z00,
            }
        grew = grew + 1 if update > prev_update else 0
        if grew >= 2:
            return {
                "converged": False,
                "reason": "updates stopped contracting",
                "history": history,
                "zero_image_norm": z00,
            }
        prev_update = update
        pair = new_pair
    return {
        "converged": False,
        "reason": "iteration limit reached",
        "history": history,
        "zero_image_norm": z00,
    }


def solve_nonlinear(
    data: CoupledState,
    evo: EvolutionConfig,
    gen: Optional[CoupledGenerator] = None,
    *,
    feedback_scale: float = 1.0,
    dealias: Optional[bool] = None,
    validate: bool = True,
) -> TrajectoryRecord:
    """Local-in-time solve of the full system on the moving channel.

    Iterates the quadratic forcing map through the linear solver with
    all operators frozen on the chart of the initial deflection; the
    moving geometry enters through the Jacobian fields of the chart onto
    the current channel, rebuilt at every node of every sweep.  When an
    attempt stops contracting (the forcing leaves the configured ball,
    the updates grow twice in a row, or the iteration cap is hit), the
    horizon is halved and the iteration restarts, up to ``evo.halving``
    times; contact during any sweep aborts the solve.

    ``feedback_scale`` multiplies the evaluated forcing before it is fed
    back — 1 is the full system, 0 reproduces the linear flow exactly —
    and is a homotopy knob for diagnostics.

    The returned record carries the iteration history, the norm of the
    image of the zero pair, the horizon actually integrated, and the
    pointwise residuals of the fixed-channel system in its metadata.
    """
    cfg = data.cfg
    if validate:
        validate_initial_data(data.w, data.eta1, data.eta2).raise_if_invalid()
    if gen is None:
        gen = assemble_A0(flat_transform(cfg, data.eta1))
    if gen.cfg != cfg:
        raise ValueError("generator and initial data use different grids")

    data_norm = (
        fluid_sobolev_norm(data.w, 1)
        + beam_norm(data.eta1, 0.875)
        + beam_norm(data.eta2, 0.375)
    )
    radius = evo.R if evo.R is not None else 2.0 * (1.0 + data_norm)
    if radius < 1.0 + data_norm:
        raise ValueError(
            f"ball radius {radius:.3g} is below 1 + data norm = "
            f"{1.0 + data_norm:.3g}"
        )

    attempts: List[Dict[str, object]] = []
    horizon = float(evo.T)
    for halvings in range(evo.halving + 1):
        outcome = _picard_attempt(
            data, gen, evo, horizon, radius, feedback_scale, dealias
        )
        attempts.append(
            {
                "horizon": horizon,
                "reason": outcome["reason"],
                "history": outcome["history"],
                "zero_image_norm": outcome["zero_image_norm"],
            }
        )
        if outcome["converged"]:
            times = outcome["times"]
            states = outcome["states"]
            pressures = outcome["pressures"]
            pair = outcome["pair"]
            record = _build_record(
                gen,
                times,
                states,
                pressures,
                pair,
                evo.scheme,
                evo.dt,
                extra={
                    "fp_iterations": int(outcome["iterations"]),
                    "fp_converged": True,
                    "fp_history": outcome["history"],
                    "zero_image_norm": float(outcome["zero_image_norm"]),
                    "halvings": halvings,
                    "ball_radius": float(radius),
                    "data_norm": float(data_norm),
                    "feedback_scale": float(feedback_scale),
                    "attempts": attempts,
                },
            )
            residuals = transformed_residual(record, gen, pair)
            record.metadata.update(residuals)
            return record
        if halvings < evo.halving:
            warnings.warn(
                f"forcing-map iteration did not contract on horizon "
                f"{horizon:.3g} ({outcome['reason']}); halving",
                RuntimeWarning,
                stacklevel=2,
            )
        horizon *= 0.5
    raise NonConvergenceError(
        "fixed-point iteration failed on every horizon down to "
        f"{horizon * 2.0:.3g}",
        attempts,
    )
