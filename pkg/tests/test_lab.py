"""Sweep reports, scaling-exponent fits, and the estimate batteries."""

from __future__ import annotations

import json

import numpy as np
import pytest

from beamflow.assembly import pack_fluid
from beamflow.beam import BeamFunction, beam_power_diagonal
from beamflow.config import SpectralConfig
from beamflow.coupling import assemble_A0, assemble_K, estimate_rho
from beamflow.fields import random_fluid
from beamflow.geometry import flat_transform
from beamflow.lab import (
    SweepReport,
    battery_WKP,
    check_commutator,
    fluid_sobolev_gram,
    resolved_band_limit,
    resolvent_spectral_consistency,
    sweep_gevrey,
    sweep_regularity,
    sweep_V,
    sweep_Vtilde,
)
from beamflow.norms import fluid_sobolev_norm, weighted_operator_norm

CFG = SpectralConfig(Ns=24, Ny=12)

_CACHE: dict = {}


def _sin_interface(cfg: SpectralConfig, amp: float = 0.2) -> BeamFunction:
    return BeamFunction.from_callable(cfg, lambda s: amp * np.sin(2.0 * np.pi * s / cfg.L))


def _chart(curved: bool):
    key = ("chart", curved)
    if key not in _CACHE:
        _CACHE[key] = flat_transform(CFG, _sin_interface(CFG)) if curved else flat_transform(CFG)
    return _CACHE[key]


def _generator(curved: bool):
    key = ("gen", curved)
    if key not in _CACHE:
        _CACHE[key] = assemble_A0(_chart(curved))
    return _CACHE[key]


def _rho():
    if "rho" not in _CACHE:
        _CACHE["rho"] = estimate_rho(_chart(True))
    return _CACHE["rho"]


# ======================================================================
# Band control and report plumbing
# ======================================================================


def test_resolved_band_limit_value():
    # Top beam mode k = 11 at unit length scale: symbol k^4 + alpha2 k^2.
    expected = 0.5 * np.sqrt(CFG.alpha1 * 11.0**4 + CFG.alpha2 * 11.0**2)
    assert resolved_band_limit(CFG) == pytest.approx(expected, rel=1e-12)


def test_band_exceeding_limit_warns_and_truncates():
    gen = _generator(curved=True)
    with pytest.warns(UserWarning, match="resolved limit"):
        rep = sweep_gevrey(gen, band=(1.0, 1e6), n=6)
    assert rep.fit["window_hi"] == pytest.approx(resolved_band_limit(CFG))
    with pytest.raises(ValueError):
        sweep_gevrey(gen, band=(5.0, 2.0), n=6)


def test_report_serialization_roundtrip(tmp_path):
    gen = _generator(curved=True)
    rep = sweep_gevrey(gen, band=(1.0, 50.0), n=5)
    payload = json.loads(rep.to_json())
    assert payload["schema_version"] == 1
    assert payload["name"] == "gevrey"
    assert len(payload["lambdas"]) == 5
    # Identical inputs give bit-identical output.
    rep2 = sweep_gevrey(gen, band=(1.0, 50.0), n=5)
    assert rep.to_json() == rep2.to_json()
    csv_path = tmp_path / "sweep.csv"
    rep.save_csv(str(csv_path))
    lines = csv_path.read_text().splitlines()
    header = lines[2].split(",")
    assert header[:3] == ["lam_re", "lam_im", "abs_lam"]
    assert len(lines) == 3 + 5
    json_path = tmp_path / "sweep.json"
    rep.save_json(str(json_path))
    assert json.loads(json_path.read_text())["verdict"] == rep.verdict


# ======================================================================
# Gevrey sweep
# ======================================================================


def test_gevrey_slope_matches_square_root_decay():
    for curved in (False, True):
        rep = sweep_gevrey(_generator(curved), band=(1.0, 60.0), n=10)
        assert rep.verdict, rep.verdict_text
        assert abs(rep.fit["slope"] + 0.5) <= 0.15
        scaled = rep.norms["sqrt_scaled_norm"]
        assert max(scaled) / min(scaled) < 2.0


def test_gevrey_rejects_negative_sigma():
    with pytest.raises(ValueError):
        sweep_gevrey(_generator(True), band=(1.0, 10.0), n=4, sigma=-1.0)


def test_resolvent_norm_consistent_with_eigendecomposition():
    gen = _generator(curved=True)
    probes = [200.0 + 0.0j, 500.0 + 100.0j, 50.0 - 300.0j]
    out = resolvent_spectral_consistency(gen, probes)
    for nrm, lower, upper in zip(out["norm"], out["lower"], out["upper"]):
        assert lower <= nrm * (1.0 + 1e-9)
        assert nrm <= upper * (1.0 + 1e-9)


# ======================================================================
# Weighted regularity sweep
# ======================================================================


def test_regularity_norms_bounded():
    gen = _generator(curved=True)
    rep = sweep_regularity(gen, _chart(True), band=(1.0, 60.0), n=6)
    assert rep.verdict
    assert all(np.isfinite(v) for v in rep.norms["smoothing_norm"])
    assert all(np.isfinite(v) for v in rep.norms["dual_scaled_norm"])
    sup = max(rep.norms["smoothing_norm"])
    assert sup / min(rep.norms["smoothing_norm"]) < 2.0


def test_sobolev_gram_matches_field_norm():
    rng = np.random.default_rng(1)
    f = random_fluid(CFG, rng, decay=1.0)
    v = pack_fluid(f)
    for sigma in (1, 2):
        G = fluid_sobolev_gram(CFG, sigma)
        gram_route = float(np.sqrt((v.conj() @ (G @ v)).real))
        assert gram_route == pytest.approx(fluid_sobolev_norm(f, sigma), rel=1e-12)


def test_weighted_operator_norm_monotone_in_weights():
    rng = np.random.default_rng(2)
    B = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    gram_t = 2.0 * np.eye(6)
    gram_s = 0.5 * np.eye(6)
    plain = float(np.linalg.svd(B, compute_uv=False)[0])
    weighted = weighted_operator_norm(B, gram_t, gram_s)
    assert weighted == pytest.approx(2.0 * plain, rel=1e-12)


# ======================================================================
# Pencil sweeps
# ======================================================================


def test_pencil_range_validation():
    tf = _chart(True)
    rc = _rho()
    with pytest.raises(ValueError, match="outside"):
        sweep_Vtilde(tf, rc, [(1.2, 0.0)], band=(1.0, 30.0), n=4)
    with pytest.raises(ValueError, match="theta \\+ beta"):
        sweep_Vtilde(tf, rc, [(0.6, 0.5)], band=(1.0, 30.0), n=4)
    with pytest.raises(ValueError, match="outside"):
        sweep_V(tf, rc, [(0.9, 0.0)], band=(1.0, 30.0), n=4)


def test_shifted_pencil_exponents():
    rep = sweep_Vtilde(
        _chart(True),
        _rho(),
        [(0.0, 0.0), (1.0, 0.0), (0.5, 0.5), (-0.125, -0.125)],
        band=(1.0, 60.0),
        n=12,
    )
    assert rep.verdict, rep.verdict_text
    assert min(rep.norms["min_singular_value"]) > 0.0


def test_full_pencil_exponents_and_invertibility():
    rep = sweep_V(
        _chart(True),
        _rho(),
        [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)],
        band=(1.0, 60.0),
        n=12,
    )
    assert rep.verdict, rep.verdict_text
    assert min(rep.norms["min_singular_value"]) > 0.0
    assert all(np.isfinite(c) for c in rep.norms["condition_number"])
    assert max(rep.norms["condition_number"]) < 1e10


# ======================================================================
# Commutator
# ======================================================================


def test_commutator_vanishes_on_flat_chart():
    rep = check_commutator(_chart(False), band=(1.0, 1000.0), n=5, epsilon=0.1, seed=0)
    assert max(rep.norms["commutator_norm"]) < 1e-10


def test_commutator_ratio_bounded_on_curved_chart():
    rep = check_commutator(_chart(True), band=(1.0, 1000.0), n=8, epsilon=0.1, seed=0)
    assert rep.verdict
    assert max(rep.norms["ratio"]) < 1.0
    # Reproducibility: the seed pins the data, so the report is identical.
    rep2 = check_commutator(_chart(True), band=(1.0, 1000.0), n=8, epsilon=0.1, seed=0)
    assert rep.to_json() == rep2.to_json()


def test_commutator_is_linear():
    tf = _chart(True)
    K = assemble_K(1.0 + 10.0j, tf).entries
    d = beam_power_diagonal(CFG, 0.375)
    comm = d[:, None] * K - K * d[None, :]
    rng = np.random.default_rng(9)
    a = rng.standard_normal(CFG.Nb) + 1j * rng.standard_normal(CFG.Nb)
    b = rng.standard_normal(CFG.Nb) + 1j * rng.standard_normal(CFG.Nb)
    assert np.allclose(comm @ (a + b), comm @ a + comm @ b, atol=1e-12)


def test_commutator_epsilon_validation():
    with pytest.raises(ValueError):
        check_commutator(_chart(True), epsilon=0.3)


# ======================================================================
# Interface-solution battery
# ======================================================================


def test_battery_constants_stable_and_contractive():
    rep = battery_WKP(_chart(True))
    assert rep.verdict, rep.verdict_text
    assert max(rep.norms["inverse_shift_norm"]) <= 1.0 + 1e-8
    w = rep.norms["interface_solution_const"]
    k = rep.norms["added_mass_quarter_const"]
    assert max(w) / min(w) < 2.0
    assert max(k) / min(k) < 2.0
