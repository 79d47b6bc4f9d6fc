"""Result persistence: manifests, plot-data emission, error records.

Every run directory receives a ``manifest.json`` that pins the fully
resolved scenario, a hash of it, the package and library versions, the
seed, and the tolerances the verdicts used — enough to regenerate every
artifact bit-exactly.  Failures are written as machine-readable error
records next to whatever partial output exists.  All floating-point
output uses ``repr`` round-trip formatting.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import platform
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import scipy

from . import __version__
from .evolution import TrajectoryRecord
from .lab import SweepReport

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "canonical_json",
    "config_hash",
    "emit_plotdata",
    "error_record",
    "jsonable",
    "library_versions",
    "write_error",
    "write_manifest",
    "write_report",
]


# ======================================================================
# JSON canonicalization
# ======================================================================


def jsonable(obj: object) -> object:
    """Recursively convert numpy scalars/arrays and complex numbers.

    Complex values become ``[real, imag]`` pairs; arrays become nested
    lists; mappings and sequences are rebuilt with converted leaves.
    """
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(dataclasses.asdict(obj))
    return obj


def canonical_json(payload: object) -> str:
    """Minimal, key-sorted JSON encoding used for hashing."""
    return json.dumps(jsonable(payload), sort_keys=True, separators=(",", ":"))


def config_hash(scenario: Dict[str, object]) -> str:
    """SHA-256 of the canonical encoding of a resolved scenario."""
    return hashlib.sha256(canonical_json(scenario).encode("utf-8")).hexdigest()


def library_versions() -> Dict[str, str]:
    return {
        "package": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


# ======================================================================
# Run-directory artifacts
# ======================================================================


def write_manifest(
    outdir: Union[str, Path],
    scenario: Dict[str, object],
    seed: int,
    tolerances: Optional[Dict[str, object]] = None,
) -> Path:
    """Write ``manifest.json``: everything needed to regenerate the run."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "scenario": jsonable(scenario),
        "config_hash": config_hash(scenario),
        "seed": int(seed),
        "versions": library_versions(),
        "tolerances": jsonable(tolerances or {}),
    }
    path = Path(outdir) / "manifest.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")
    return path


def write_report(
    outdir: Union[str, Path],
    payload: Dict[str, object],
    name: str = "report.json",
) -> Path:
    """Write a JSON report with converted leaves and a schema version."""
    body = {"schema_version": SCHEMA_VERSION}
    body.update(jsonable(payload))
    path = Path(outdir) / name
    path.write_text(json.dumps(body, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")
    return path


def emit_plotdata(
    report: Union[SweepReport, TrajectoryRecord],
    path: Union[str, Path],
) -> Path:
    """Write the log-log- or time-series-ready columns of a report.

    Sweep reports produce ``(lam_re, lam_im, abs_lam, <measured...>)``
    rows — header-only when the sweep is empty.  Trajectory records
    produce ``(time, energy, mass, min_gap)`` rows, the columns a
    stability plot needs.
    """
    path = Path(path)
    if isinstance(report, SweepReport):
        report.save_csv(str(path))
        return path
    if isinstance(report, TrajectoryRecord):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# schema_version,{SCHEMA_VERSION}\n# kind,trajectory-plot\n")
            fh.write("time,energy,mass,min_gap\n")
            mass = report.norm_history["mass"]
            gap = report.norm_history["min_gap"]
            for i, t in enumerate(report.times):
                row = (t, report.energy_history[i], mass[i], gap[i])
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        return path
    raise TypeError(f"no plot-data emission for {type(report).__name__}")


# ======================================================================
# Error records
# ======================================================================


def error_record(code: int, kind: str, message: str, **details: object) -> Dict[str, object]:
    """Machine-readable failure record mirrored to the exit code."""
    record: Dict[str, object] = {
        "schema_version": SCHEMA_VERSION,
        "code": int(code),
        "kind": kind,
        "message": message,
    }
    if details:
        record["details"] = jsonable(details)
    return record


def write_error(outdir: Union[str, Path], record: Dict[str, object]) -> Path:
    path = Path(outdir) / "error.json"
    path.write_text(json.dumps(jsonable(record), sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")
    return path
