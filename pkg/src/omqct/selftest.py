"""Reduced-scale acceptance checks runnable from the CLI.

Each check mirrors one acceptance criterion of the full test suite (see
tests/test_acceptance.py) at a scale that finishes in well under a minute.
"""

from __future__ import annotations

import math
import tempfile
from pathlib import Path

import numpy as np

from . import dsp, model
from .config import parse_config, default_config_text
from .params import ProbeParams, nbar_for_cooperativity, paper_device
from .pipeline import run_chain
from .synth import SynthConfig, synth_heterodyne_record


def _check(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else ""))
    return bool(ok)


def run_selftest(outdir=None) -> bool:
    ok = True
    p = paper_device()
    pr = ProbeParams(nbar=nbar_for_cooperativity(0.01, p), delta_p=0.0,
                     delta_lo=2 * math.pi * 4.8e6, eps=0.045, t_bath=294.0)
    grid = p.omega_m + np.linspace(-5, 5, 801) * p.gamma_m

    # analytic identities
    sq = model.quantum_correlation_spectrum(grid, p, pr)
    st = model.thermal_correlation_spectrum(grid, p, pr)
    ok &= _check("Im thermal == Im quantum (1e-12)",
                 np.allclose(st.values.imag, sq.values.imag, rtol=1e-12))
    coth = model.coth_vec(grid, pr.t_bath)
    ok &= _check("Re/Im == coth (1e-9)",
                 np.allclose(st.values.real / st.values.imag, coth, rtol=1e-9))
    sg = model.general_cross_spectrum(0.0, math.pi / 2, grid, p, pr)
    ok &= _check("detuned solution reduces to closed form (1e-9)",
                 np.allclose(sg.values, sq.values, rtol=1e-9))

    # magnitude checks
    ratio = model.quantum_thermal_peak_ratio(p, pr)
    ok &= _check("quantum/thermal peak ratio ~ 2e-4 (factor 2)",
                 1e-4 <= ratio <= 4e-4, f"{ratio:.2e}")
    rpsn = model.rpsn_thermal_motion_ratio(p, pr)
    ok &= _check("RPSN/thermal motion ratio ~ 3e-6 (factor 2)",
                 1.5e-6 <= rpsn <= 6e-6, f"{rpsn:.2e}")
    nth = model.thermal_occupation(p.omega_m, 294.0)
    from .constants import HBAR, KB
    approx = KB * 294.0 / (HBAR * p.omega_m)
    ok &= _check("n_th matches kT/hbar-omega to 0.1%",
                 abs(nth / approx - 1) < 1e-3, f"n_th = {nth:.1f}")

    # reduced end-to-end chain at 294 K
    pr12 = ProbeParams(nbar=nbar_for_cooperativity(12.0, p), delta_p=0.0,
                       delta_lo=2 * math.pi * 4.8e6, eps=0.045, t_bath=294.0)
    cfg = SynthConfig(duration=0.03, sample_rate=40e6, seed=11, drift_rms=1.0)
    res = run_chain(p, pr12, cfg)
    t_est = res.t_ratio_exact
    ok &= _check("end-to-end T within 4 sigma of 294 K",
                 abs(t_est.t - 294.0) < 4 * t_est.sigma_t,
                 f"T = {t_est.t:.0f} +- {t_est.sigma_t:.0f} K")

    # reduced phi-scan at sideband-resolved parameters
    p2 = paper_device(kappa=2 * math.pi * 1e9, kappa_out=2 * math.pi * 0.38e9,
                      gamma_m=2 * math.pi * 0.2e6)
    pr2 = ProbeParams(nbar=nbar_for_cooperativity(80.0, p2),
                      delta_p=0.001 * p2.kappa, delta_lo=2 * math.pi * 4.8e6,
                      eps=0.045, t_bath=77.0)
    cfg2 = SynthConfig(duration=0.03, sample_rate=40e6, seed=5, drift_rms=1.0,
                       block_len=16384, band_halfwidth=2.0e6)
    rec = synth_heterodyne_record(p2, pr2, cfg2)
    pair = dsp.demodulate(rec, dsp.track_carrier_phase(rec))
    scan = dsp.scan_rotation_null(pair, np.linspace(-0.004, 0.004, 9),
                                  segment_len=4096)
    ok &= _check("null angle tracks 2 delta_p/kappa",
                 abs(scan.phi_star - 0.002) < 6 * max(scan.sigma_phi_star, 1e-4),
                 f"phi* = {scan.phi_star:+.5f} (expected +0.00200)")

    # determinism of the full CLI chain
    from .cli import cmd_analyze, cmd_simulate
    cfg_run = parse_config(default_config_text().replace(
        "synth.duration: 55 ms", "synth.duration: 12 ms"))
    with tempfile.TemporaryDirectory() as tmp:
        d1 = cmd_simulate(cfg_run, Path(tmp) / "a")
        d2 = cmd_simulate(cfg_run, Path(tmp) / "b")
        same = all((Path(d1) / f).read_bytes() == (Path(d2) / f).read_bytes()
                   for f in ("lo_plus.omqc", "lo_minus.omqc", "manifest.json"))
        ok &= _check("byte-identical records from one config", same)
    print("selftest:", "all checks passed" if ok else "FAILURES present")
    return bool(ok)
