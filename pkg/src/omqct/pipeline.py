"""End-to-end measurement chains: records -> spectra -> temperature.

Mirrors the experimental procedure: synthesize (or load) a +/-LO record pair,
track and demodulate each, apply electronics corrections, locate the thermal
null angle, rotate both sets to their nulls, lock-in combine, fit the line
pair, and convert to temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import dsp, fits, thermometry
from .errors import ConfigError
from .params import DeviceParams, ProbeParams
from .records import PhotocurrentRecord
from .spectra import ComplexSpectrum
from .synth import ElectronicResponse, SynthConfig, synth_lo_pair


@dataclass
class AnalysisConfig:
    """Demod/estimation/fit knobs shared by the CLI and the test suites."""

    window: str = "hann"
    segment_len: int = 512
    overlap: float = 0.5
    fit_halfwidth: Optional[float] = None     # rad/s around line center; None = 3 gamma
    exclusions: tuple = ()                    # ((lo, hi) rad/s, ...) dropped from fits
    phi_grid: Optional[Sequence[float]] = None  # None: skip the null scan
    scan_banded: bool = True
    normalization: Optional[float] = None
    baseline_exclude: Optional[float] = None
    apply_gain: bool = True
    apply_phase: bool = True


@dataclass
class ChainResult:
    quantum: ComplexSpectrum
    thermal: ComplexSpectrum
    joint_fit: fits.FitResult
    t_ratio_approx: thermometry.TemperatureEstimate
    t_ratio_exact: thermometry.TemperatureEstimate
    t_coth: Optional[thermometry.TemperatureEstimate]
    phi_star: Optional[dict]
    spectra_sets: dict = field(default_factory=dict)


def _fit_band(spec: ComplexSpectrum, analysis: AnalysisConfig, gamma: float):
    hw = analysis.fit_halfwidth if analysis.fit_halfwidth else 3.0 * gamma
    center = spec.meta.get("omega_center", spec.freqs[len(spec) // 2])
    return center - hw, center + hw


def analyze_record_pair(rec_plus: PhotocurrentRecord, rec_minus: PhotocurrentRecord,
                        analysis: AnalysisConfig,
                        gain: Optional[dsp.GainCurve] = None,
                        phase_cal: Optional[dsp.PhaseCurve] = None):
    """Demodulate, null-rotate and lock-in combine a +/-LO record pair.

    Returns (quantum, thermal, scan_info, sets): the half-difference and
    half-sum spectra at the analysis angle, the per-sign null-scan results,
    and the phi-resolved CrossSpectra sets.
    """
    if rec_plus.meta.lo_sign != 1 or rec_minus.meta.lo_sign != -1:
        raise ConfigError("analyze_record_pair expects records ordered (+LO, -LO)")
    welch = dict(window=analysis.window, segment_len=analysis.segment_len,
                 overlap=analysis.overlap, normalization=analysis.normalization,
                 baseline_exclude=analysis.baseline_exclude)
    pairs = {}
    for rec in (rec_plus, rec_minus):
        phase = dsp.track_carrier_phase(rec)
        pair = dsp.demodulate(rec, phase)
        if gain is not None or phase_cal is not None:
            pair = dsp.apply_electronics_correction(
                pair, gain if analysis.apply_gain else None,
                phase_cal if analysis.apply_phase else None)
        pairs[rec.meta.lo_sign] = pair
    scan_info = {}
    spec_q = {}   # dial (0, pi/2): amplitude-phase cross correlation
    spec_t = {}   # dial (pi/4, 3pi/4): rotated-quadrature cross correlation
    sets = {}
    for sign, pair in pairs.items():
        gamma = pair.meta.get("gamma_m", 0.0)
        if analysis.phi_grid is not None:
            fb = None
            if analysis.scan_banded and gamma:
                fb = (pair.omega_center - 3 * gamma, pair.omega_center + 3 * gamma)
            scan = dsp.scan_rotation_null(pair, analysis.phi_grid,
                                          fit_band=fb, **welch)
            scan_info[sign] = dict(phi_star=scan.phi_star,
                                   sigma=scan.sigma_phi_star)
            sets[sign] = scan.spectra_set
            pair = dsp.rotate_quadratures(pair, scan.phi_star)
        spec_q[sign] = dsp.estimate_cross_spectrum(pair, **welch)
        # the pi/4 dial has thermal power in both channels, so its shot level
        # must come from the true amplitude quadrature measured at dial 0
        welch_t = dict(welch, normalization=spec_q[sign].meta["baseline"])
        spec_t[sign] = dsp.estimate_cross_spectrum(
            dsp.rotate_quadratures(pair, 0.25 * math.pi), **welch_t)
    # lock-in projections: the quantum correlation is odd under the LO flip,
    # the thermal correlation even in Re (its Im is the odd quantum part)
    quantum, _ = dsp.combine_spectra(spec_q[1], spec_q[-1])
    odd_t, even_t = dsp.combine_spectra(spec_t[1], spec_t[-1])
    thermal = ComplexSpectrum(
        even_t.freqs, even_t.values.real + 1j * odd_t.values.imag,
        even_t.norm,
        sigma=None if even_t.sigma is None else
        even_t.sigma.real + 1j * odd_t.sigma.imag,
        n_avg=even_t.n_avg, meta=dict(even_t.meta, channel="thermal"))
    quantum.meta["channel"] = "quantum"
    return quantum, thermal, scan_info, sets


def thermometry_from_spectra(quantum: ComplexSpectrum, thermal: ComplexSpectrum,
                             analysis: AnalysisConfig, gamma: float,
                             delta_p: float = 0.0, want_coth: bool = True):
    band = _fit_band(thermal, analysis, gamma)
    th = thermal.exclude(analysis.exclusions) if analysis.exclusions else thermal
    qu = quantum.exclude(analysis.exclusions) if analysis.exclusions else quantum
    joint = fits.fit_thermal_quantum_joint(th, qu, band=band)
    t_approx, t_exact = thermometry.temperature_from_ratio(joint)
    t_coth = None
    if want_coth and delta_p == 0.0:
        reim = fits.fit_reim_joint(th, band=band)
        t_coth = thermometry.temperature_from_coth(reim, delta_p=delta_p)
    return joint, t_approx, t_exact, t_coth


def run_chain(device: DeviceParams, probe: ProbeParams, synth_cfg: SynthConfig,
              analysis: Optional[AnalysisConfig] = None,
              electronics: Optional[ElectronicResponse] = None,
              gain: Optional[dsp.GainCurve] = None,
              phase_cal: Optional[dsp.PhaseCurve] = None,
              want_coth: bool = True) -> ChainResult:
    """Synthesize a +/-LO pair and run the full analysis to temperature."""
    analysis = analysis or AnalysisConfig()
    rec_p, rec_m = synth_lo_pair(device, probe, synth_cfg, electronics)
    quantum, thermal, scan_info, sets = analyze_record_pair(
        rec_p, rec_m, analysis, gain=gain, phase_cal=phase_cal)
    joint, t_approx, t_exact, t_coth = thermometry_from_spectra(
        quantum, thermal, analysis, device.gamma_m,
        delta_p=probe.delta_p, want_coth=want_coth)
    return ChainResult(quantum=quantum, thermal=thermal, joint_fit=joint,
                       t_ratio_approx=t_approx, t_ratio_exact=t_exact,
                       t_coth=t_coth, phi_star=scan_info or None,
                       spectra_sets=sets)
