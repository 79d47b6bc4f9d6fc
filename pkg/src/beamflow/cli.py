"""Command-line entry points: scenario files, run dispatch, artifacts.

A scenario is a strict JSON document naming the grid configuration, the
reference interface shape, the run kind with its parameters, and a seed;
unknown keys anywhere are rejected before any compute starts.  Each run
writes its artifacts (report JSON, CSV tables, a manifest pinning the
resolved scenario, versions, seed, and tolerances) into a fresh output
directory and is deterministic given the seed.

Exit codes: 0 success, 2 configuration error, 3 contact, 4 the nonlinear
iteration did not converge, 5 numerical failure.  Failures also leave a
machine-readable ``error.json`` in the output directory when possible.

Thread control: ``--threads`` (or the ``BEAMFLOW_THREADS`` environment
variable) is applied to the BLAS/OpenMP pools before the numerical
modules are imported, so it must be handled here — this module imports
no array libraries at module level.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .config import ConfigError, SpectralConfig

ENV_THREADS = "BEAMFLOW_THREADS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONTACT = 3
EXIT_NONCONVERGENCE = 4
EXIT_NUMERICAL = 5

RUN_KINDS = (
    "simulate-linear",
    "simulate-nonlinear",
    "sweep-gevrey",
    "sweep-V",
    "sweep-Vtilde",
    "check-commutator",
    "battery",
    "spectrum",
)

_SIMULATE_KINDS = ("simulate-linear", "simulate-nonlinear")

_CONFIG_KEYS = ("L", "Ns", "Ny", "nu", "alpha1", "alpha2", "dealias")

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


class ScenarioError(ValueError):
    """Raised when a scenario file violates the schema."""


# ======================================================================
# Strict scenario validation
# ======================================================================


def _check_keys(
    obj: Dict[str, object],
    allowed: Sequence[str],
    required: Sequence[str],
    where: str,
) -> None:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    missing = sorted(set(required) - set(obj))
    if missing:
        raise ScenarioError(f"missing key(s) in {where}: {', '.join(missing)}")


def _number(obj: Dict[str, object], key: str, where: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}.{key} must be a number, got {v!r}")
    return float(v)


def _integer(obj: Dict[str, object], key: str, where: str) -> int:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{where}.{key} must be an integer, got {v!r}")
    return int(v)


def _boolean(obj: Dict[str, object], key: str, where: str) -> bool:
    v = obj[key]
    if not isinstance(v, bool):
        raise ScenarioError(f"{where}.{key} must be true/false, got {v!r}")
    return v


def _string(obj: Dict[str, object], key: str, where: str) -> str:
    v = obj[key]
    if not isinstance(v, str):
        raise ScenarioError(f"{where}.{key} must be a string, got {v!r}")
    return v


def _band(obj: Dict[str, object], key: str, where: str) -> List[float]:
    v = obj[key]
    if (
        not isinstance(v, list)
        or len(v) != 2
        or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v)
    ):
        raise ScenarioError(f"{where}.{key} must be [lo, hi]")
    lo, hi = float(v[0]), float(v[1])
    if not 0.0 < lo < hi:
        raise ScenarioError(f"{where}.{key} needs 0 < lo < hi, got {v}")
    return [lo, hi]


def _validate_config(raw: Dict[str, object]) -> Dict[str, object]:
    _check_keys(raw, _CONFIG_KEYS, (), "config")
    resolved: Dict[str, object] = {
        "L": 2.0 * 3.141592653589793,
        "Ns": 32,
        "Ny": 32,
        "nu": 1.0,
        "alpha1": 1.0,
        "alpha2": 0.5,
        "dealias": True,
    }
    for key in raw:
        if key in ("Ns", "Ny"):
            resolved[key] = _integer(raw, key, "config")
        elif key == "dealias":
            resolved[key] = _boolean(raw, key, "config")
        else:
            resolved[key] = _number(raw, key, "config")
    # construct once so every documented invariant is enforced up front
    try:
        SpectralConfig(**resolved)  # type: ignore[arg-type]
    except ConfigError as exc:
        raise ScenarioError(f"config: {exc}") from exc
    return resolved


def _validate_shape(
    raw: Dict[str, object], where: str, default_seed: int
) -> Dict[str, object]:
    _check_keys(
        raw,
        ("preset", "amplitude", "wavenumber", "decay", "seed"),
        ("preset",),
        where,
    )
    preset = _string(raw, "preset", where)
    if preset == "flat":
        _check_keys(raw, ("preset",), ("preset",), where)
        return {"preset": "flat"}
    if preset == "sin":
        _check_keys(raw, ("preset", "amplitude", "wavenumber"), ("preset", "amplitude"), where)
        resolved = {
            "preset": "sin",
            "amplitude": _number(raw, "amplitude", where),
            "wavenumber": 1,
        }
        if "wavenumber" in raw:
            k = _integer(raw, "wavenumber", where)
            if k < 1:
                raise ScenarioError(f"{where}.wavenumber must be >= 1")
            resolved["wavenumber"] = k
        return resolved
    if preset == "random-smooth":
        _check_keys(raw, ("preset", "amplitude", "decay", "seed"), ("preset",), where)
        return {
            "preset": "random-smooth",
            "amplitude": _number(raw, "amplitude", where) if "amplitude" in raw else 0.1,
            "decay": _number(raw, "decay", where) if "decay" in raw else 3.0,
            "seed": _integer(raw, "seed", where) if "seed" in raw else default_seed,
        }
    raise ScenarioError(
        f"{where}.preset must be one of flat, sin, random-smooth; got {preset!r}"
    )


def _validate_initial(
    raw: Dict[str, object], seed: int
) -> Dict[str, object]:
    where = "initial_data"
    _check_keys(
        raw,
        ("preset", "velocity", "duration", "amplitude"),
        ("preset",),
        where,
    )
    preset = _string(raw, "preset", where)
    if preset == "rest":
        _check_keys(raw, ("preset",), ("preset",), where)
        return {"preset": "rest"}
    default_velocity = {"preset": "sin", "amplitude": 0.01, "wavenumber": 1}
    if preset == "lifted":
        _check_keys(raw, ("preset", "velocity"), ("preset",), where)
        velocity = (
            _validate_shape(raw["velocity"], f"{where}.velocity", seed)
            if "velocity" in raw
            else default_velocity
        )
        return {"preset": "lifted", "velocity": velocity}
    if preset == "spun":
        velocity = (
            _validate_shape(raw["velocity"], f"{where}.velocity", seed)
            if "velocity" in raw
            else default_velocity
        )
        duration = _number(raw, "duration", where) if "duration" in raw else 0.5
        amplitude = _number(raw, "amplitude", where) if "amplitude" in raw else 0.02
        if duration <= 0 or amplitude <= 0:
            raise ScenarioError(f"{where}: duration and amplitude must be positive")
        return {
            "preset": "spun",
            "velocity": velocity,
            "duration": duration,
            "amplitude": amplitude,
        }
    raise ScenarioError(
        f"{where}.preset must be one of rest, lifted, spun; got {preset!r}"
    )


_PAIR_DEFAULTS = {
    "sweep-V": [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]],
    "sweep-Vtilde": [[0.0, 0.0], [1.0, 0.0], [0.5, 0.5], [-0.125, -0.125]],
}


def _validate_parameters(run: str, raw: Dict[str, object]) -> Dict[str, object]:
    where = "parameters"
    if run in _SIMULATE_KINDS:
        allowed = ["dt", "T", "scheme"]
        if run == "simulate-nonlinear":
            allowed += ["fp_tol", "fp_max_iter", "halving", "ball_radius", "feedback_scale"]
        _check_keys(raw, allowed, (), where)
        out: Dict[str, object] = {
            "dt": 1e-2,
            "T": 0.1,
            "scheme": "implicit-euler",
        }
        if run == "simulate-nonlinear":
            out.update(
                {
                    "fp_tol": 1e-8,
                    "fp_max_iter": 25,
                    "halving": 6,
                    "ball_radius": None,
                    "feedback_scale": 1.0,
                }
            )
        for key in raw:
            if key == "scheme":
                out[key] = _string(raw, key, where)
            elif key in ("fp_max_iter", "halving"):
                out[key] = _integer(raw, key, where)
            elif key == "ball_radius":
                if raw[key] is not None:
                    out[key] = _number(raw, key, where)
            else:
                out[key] = _number(raw, key, where)
        if out["scheme"] not in ("implicit-euler", "crank-nicolson"):
            raise ScenarioError(f"{where}.scheme: unknown scheme {out['scheme']!r}")
        if out["dt"] <= 0 or out["T"] <= 0:
            raise ScenarioError(f"{where}: dt and T must be positive")
        return out
    if run == "sweep-gevrey":
        _check_keys(raw, ("band", "n", "sigma"), (), where)
        return {
            "band": _band(raw, "band", where) if "band" in raw else [1.0, 100.0],
            "n": _integer(raw, "n", where) if "n" in raw else 12,
            "sigma": _number(raw, "sigma", where) if "sigma" in raw else 0.0,
        }
    if run in ("sweep-V", "sweep-Vtilde"):
        _check_keys(raw, ("band", "n", "pairs"), (), where)
        pairs = _PAIR_DEFAULTS[run]
        if "pairs" in raw:
            v = raw["pairs"]
            ok = isinstance(v, list) and v and all(
                isinstance(p, list)
                and len(p) == 2
                and all(not isinstance(x, bool) and isinstance(x, (int, float)) for x in p)
                for p in v
            )
            if not ok:
                raise ScenarioError(f"{where}.pairs must be a list of [theta, beta]")
            pairs = [[float(p[0]), float(p[1])] for p in v]
        return {
            "band": _band(raw, "band", where) if "band" in raw else [1.0, 100.0],
            "n": _integer(raw, "n", where) if "n" in raw else 10,
            "pairs": pairs,
        }
    if run == "check-commutator":
        _check_keys(raw, ("band", "n", "epsilon"), (), where)
        return {
            "band": _band(raw, "band", where) if "band" in raw else [1.0, 1000.0],
            "n": _integer(raw, "n", where) if "n" in raw else 10,
            "epsilon": _number(raw, "epsilon", where) if "epsilon" in raw else 0.1,
        }
    if run == "battery":
        _check_keys(raw, ("decades",), (), where)
        decades = [1.0, 10.0, 100.0]
        if "decades" in raw:
            v = raw["decades"]
            if not isinstance(v, list) or not v or any(
                isinstance(x, bool) or not isinstance(x, (int, float)) or x <= 0
                for x in v
            ):
                raise ScenarioError(f"{where}.decades must be positive numbers")
            decades = [float(x) for x in v]
        return {"decades": decades}
    if run == "spectrum":
        _check_keys(raw, (), (), where)
        return {}
    raise ScenarioError(f"unknown run kind {run!r}")


def load_scenario(path: str, run: str, seed_override: Optional[int]) -> Dict[str, object]:
    """Parse, strictly validate, and fully resolve a scenario file.

    The returned dictionary has every default filled in; it is the
    object that gets hashed into the manifest, so two scenario files
    that resolve identically produce identical artifacts.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc

    _check_keys(
        raw,
        ("run", "config", "interface", "initial_data", "parameters", "output_dir", "seed"),
        ("run",),
        "scenario",
    )
    declared = _string(raw, "run", "scenario")
    if declared != run:
        raise ScenarioError(
            f"scenario declares run {declared!r} but the {run!r} command was invoked"
        )
    seed = seed_override
    if seed is None:
        seed = _integer(raw, "seed", "scenario") if "seed" in raw else 0
    if seed < 0:
        raise ScenarioError("seed must be a non-negative integer")

    scenario: Dict[str, object] = {
        "run": run,
        "seed": int(seed),
        "config": _validate_config(raw.get("config", {})),
        "interface": _validate_shape(
            raw.get("interface", {"preset": "flat"}), "interface", int(seed)
        ),
        "parameters": _validate_parameters(run, raw.get("parameters", {})),
    }
    if run in _SIMULATE_KINDS:
        scenario["initial_data"] = _validate_initial(
            raw.get("initial_data", {"preset": "rest"}), int(seed)
        )
    elif "initial_data" in raw:
        raise ScenarioError(f"initial_data is not accepted by the {run} run")
    if "output_dir" in raw:
        scenario["output_dir"] = _string(raw, "output_dir", "scenario")
    return scenario


# ======================================================================
# Run execution (array libraries imported lazily, after thread setup)
# ======================================================================


def _build_shape(cfg: SpectralConfig, spec: Dict[str, object]):
    import numpy as np

    from .beam import BeamFunction, random_beam

    preset = spec["preset"]
    if preset == "flat":
        return BeamFunction.zero(cfg)
    if preset == "sin":
        amp = float(spec["amplitude"])
        k = int(spec["wavenumber"])
        return BeamFunction.from_callable(
            cfg, lambda s: amp * np.sin(2.0 * np.pi * k * s / cfg.L)
        )
    rng = np.random.default_rng(int(spec["seed"]))
    return random_beam(
        cfg, rng, decay=float(spec["decay"]), amplitude=float(spec["amplitude"])
    )


def _build_initial(cfg: SpectralConfig, tf, eta10, spec: Dict[str, object], gen):
    import numpy as np

    from .beam import BeamFunction
    from .evolution import EvolutionConfig, solve_linear
    from .fields import CoupledState, FluidField
    from .stokes import solve_lifted

    preset = spec["preset"]
    if preset == "rest":
        return CoupledState(FluidField.zero(cfg), eta10, BeamFunction.zero(cfg))
    eta2 = _build_shape(cfg, spec["velocity"])
    seeded = CoupledState(solve_lifted(1.0, eta2, tf).w, eta10, eta2)
    if preset == "lifted":
        return seeded
    duration = float(spec["duration"])
    spin = solve_linear(
        seeded,
        None,
        EvolutionConfig(dt=duration / 100.0, T=duration, scheme="crank-nicolson"),
        gen,
    )
    st = spin.final_state
    top = max(np.max(np.abs(st.w.u)), np.max(np.abs(st.eta1.values())))
    scale = float(spec["amplitude"]) / max(top, 1e-300)
    return CoupledState(st.w * scale, st.eta1 * scale, st.eta2 * scale)


def _run_simulate(scenario: Dict[str, object], outdir: Path) -> Dict[str, object]:
    from .coupling import assemble_A0
    from .evolution import EvolutionConfig, solve_linear, solve_nonlinear
    from .geometry import CONTACT_TOL, flat_transform
    from .reporting import emit_plotdata, write_report

    cfg = SpectralConfig(**scenario["config"])  # type: ignore[arg-type]
    eta10 = _build_shape(cfg, scenario["interface"])
    tf = flat_transform(cfg, eta10)
    gen = assemble_A0(tf)
    data = _build_initial(cfg, tf, eta10, scenario["initial_data"], gen)
    p = scenario["parameters"]
    if scenario["run"] == "simulate-linear":
        evo = EvolutionConfig(dt=p["dt"], T=p["T"], scheme=p["scheme"])
        record = solve_linear(data, None, evo, gen)
    else:
        evo = EvolutionConfig(
            dt=p["dt"],
            T=p["T"],
            scheme=p["scheme"],
            fp_tol=p["fp_tol"],
            fp_max_iter=p["fp_max_iter"],
            halving=p["halving"],
            R=p["ball_radius"],
        )
        record = solve_nonlinear(data, evo, gen, feedback_scale=p["feedback_scale"])
    record.save_csv(str(outdir / "trajectory.csv"))
    record.save_npz(str(outdir / "trajectory.npz"))
    emit_plotdata(record, outdir / "plot.csv")
    write_report(
        outdir,
        {
            "kind": scenario["run"],
            "summary": record.summary,
            "metadata": record.metadata,
        },
    )
    return {"validation_tol": 1e-6, "contact_tol": CONTACT_TOL}


def _run_sweep(scenario: Dict[str, object], outdir: Path) -> Dict[str, object]:
    from .coupling import assemble_A0, estimate_rho
    from .geometry import flat_transform
    from .lab import battery_WKP, check_commutator, sweep_V, sweep_Vtilde, sweep_gevrey
    from .reporting import emit_plotdata

    cfg = SpectralConfig(**scenario["config"])  # type: ignore[arg-type]
    tf = flat_transform(cfg, _build_shape(cfg, scenario["interface"]))
    run = scenario["run"]
    p = scenario["parameters"]
    if run == "sweep-gevrey":
        report = sweep_gevrey(
            assemble_A0(tf), band=tuple(p["band"]), n=p["n"], sigma=p["sigma"]
        )
    elif run in ("sweep-V", "sweep-Vtilde"):
        rho = estimate_rho(tf)
        fn = sweep_V if run == "sweep-V" else sweep_Vtilde
        pairs = [tuple(pair) for pair in p["pairs"]]
        report = fn(tf, rho, pairs, band=tuple(p["band"]), n=p["n"])
    elif run == "check-commutator":
        report = check_commutator(
            tf,
            band=tuple(p["band"]),
            n=p["n"],
            epsilon=p["epsilon"],
            seed=scenario["seed"],
        )
    else:
        report = battery_WKP(tf, decades=tuple(p["decades"]))
    report.save_json(str(outdir / "report.json"))
    emit_plotdata(report, outdir / "sweep.csv")
    return dict(report.fit or {})


def _run_spectrum(scenario: Dict[str, object], outdir: Path) -> Dict[str, object]:
    import numpy as np

    from .coupling import assemble_A0
    from .geometry import flat_transform
    from .reporting import write_report

    cfg = SpectralConfig(**scenario["config"])  # type: ignore[arg-type]
    tf = flat_transform(cfg, _build_shape(cfg, scenario["interface"]))
    gen = assemble_A0(tf)
    vals = gen.spectrum()
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    abscissa = float(vals.real.max())
    with open(outdir / "spectrum.csv", "w", encoding="utf-8") as fh:
        fh.write("# schema_version,1\n# kind,spectrum\nlam_re,lam_im\n")
        for z in vals:
            fh.write(f"{z.real!r},{z.imag!r}\n")
    write_report(
        outdir,
        {
            "kind": "spectrum",
            "count": int(vals.size),
            "spectral_abscissa": abscissa,
            "verdict": bool(abscissa < 0.0),
            "verdict_text": f"max Re eig = {abscissa!r}; stable iff negative",
        },
    )
    return {"stability": "max Re eig < 0"}


def _execute(scenario: Dict[str, object], outdir: Path) -> Tuple[int, Optional[Dict[str, object]]]:
    """Run the scenario; return (exit code, error record or None)."""
    import numpy as np

    from .evolution import InitialDataError, NonConvergenceError, TrajectoryContactError
    from .geometry import ContactError
    from .reporting import error_record, write_manifest

    run = scenario["run"]
    try:
        if run in _SIMULATE_KINDS:
            tolerances = _run_simulate(scenario, outdir)
        elif run == "spectrum":
            tolerances = _run_spectrum(scenario, outdir)
        else:
            tolerances = _run_sweep(scenario, outdir)
    except TrajectoryContactError as exc:
        return EXIT_CONTACT, error_record(
            EXIT_CONTACT, "contact", str(exc), time=exc.time, gap=exc.gap
        )
    except ContactError as exc:
        return EXIT_CONTACT, error_record(EXIT_CONTACT, "contact", str(exc))
    except NonConvergenceError as exc:
        return EXIT_NONCONVERGENCE, error_record(
            EXIT_NONCONVERGENCE,
            "non-convergence",
            str(exc),
            attempts=[
                {
                    "horizon": a["horizon"],
                    "reason": a["reason"],
                    "zero_image_norm": a["zero_image_norm"],
                }
                for a in exc.attempts
            ],
        )
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        return EXIT_NUMERICAL, error_record(EXIT_NUMERICAL, "numerical", str(exc))
    except (ConfigError, InitialDataError, ScenarioError, ValueError) as exc:
        return EXIT_CONFIG, error_record(EXIT_CONFIG, "config", str(exc))

    manifest_scenario = {k: v for k, v in scenario.items() if k != "output_dir"}
    write_manifest(outdir, manifest_scenario, scenario["seed"], tolerances)
    return EXIT_OK, None


# ======================================================================
# Argument parsing and entry point
# ======================================================================


def _apply_threads(threads: Optional[int]) -> None:
    if threads is None:
        env = os.environ.get(ENV_THREADS, "").strip()
        if not env:
            return
        try:
            threads = int(env)
        except ValueError as exc:
            raise ScenarioError(f"{ENV_THREADS} must be an integer, got {env!r}") from exc
    if threads < 1:
        raise ScenarioError("thread count must be >= 1")
    for var in _THREAD_VARS:
        os.environ[var] = str(threads)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamflow",
        description="Spectral toolkit runs for the fluid-beam interaction system.",
    )
    sub = parser.add_subparsers(dest="run", metavar="run-kind")
    for kind in RUN_KINDS:
        p = sub.add_parser(kind, help=f"execute a {kind} scenario")
        p.add_argument("--scenario", required=True, help="path to the scenario JSON")
        p.add_argument("--out", default=None, help="output directory (fresh per run)")
        p.add_argument("--threads", type=int, default=None,
                       help=f"BLAS/OpenMP thread count (default: ${ENV_THREADS})")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    return parser


def _fail(record: Dict[str, object], outdir: Optional[Path]) -> int:
    from .reporting import write_error

    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
    if outdir is not None and outdir.is_dir():
        write_error(outdir, record)
    return int(record["code"])  # type: ignore[return-value]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.run is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG

    outdir: Optional[Path] = None
    try:
        _apply_threads(args.threads)
        scenario = load_scenario(args.scenario, args.run, args.seed)
        target = args.out if args.out is not None else scenario.get("output_dir")
        if target is None:
            raise ScenarioError("no output directory: pass --out or set output_dir")
        outdir = Path(target)
        if outdir.exists() and any(outdir.iterdir()):
            raise ScenarioError(
                f"output directory {outdir} is not empty; runs are never overwritten"
            )
        outdir.mkdir(parents=True, exist_ok=True)
    except ScenarioError as exc:
        from .reporting import error_record

        return _fail(error_record(EXIT_CONFIG, "config", str(exc)), outdir)

    code, record = _execute(scenario, outdir)
    if record is not None:
        return _fail(record, outdir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
