"""Synthesis tests: statistical fidelity against the analytic model, exact
reproducibility, and the injectable imperfections."""

import dataclasses
import math

import numpy as np
import pytest

from omqct import dsp, model
from omqct.errors import ConfigError, SynthesisError
from omqct.params import ProbeParams, nbar_for_cooperativity, paper_device
from omqct.synth import (ElectronicResponse, SynthConfig,
                         dispersion_for_rotation_slope,
                         inject_detector_nonlinearity,
                         inject_electronic_dispersion, phase_comb_record,
                         shot_noise_record, synth_baseband_quadratures,
                         synth_heterodyne_record, synth_lo_pair)

from conftest import fast_synth_config


def _welch(pair, seg=1024, **kw):
    return dsp.estimate_cross_spectrum(pair, segment_len=seg, **kw)


def test_reproducibility_bit_identical(fast_device, fast_probe):
    cfg = fast_synth_config(seed=77)
    r1 = synth_heterodyne_record(fast_device, fast_probe, cfg)
    r2 = synth_heterodyne_record(fast_device, fast_probe, cfg)
    for ch in ("carrier", "sideband_i", "sideband_q"):
        assert np.array_equal(getattr(r1, ch), getattr(r2, ch))


def test_vacuum_limit_flat_and_uncorrelated(fast_device, fast_probe):
    pr0 = dataclasses.replace(fast_probe, nbar=0.0)
    pair = synth_baseband_quadratures(fast_device, pr0, fast_synth_config(seed=3))
    spec = _welch(pair, normalization=1.0)
    # raw (unnormalized) spectra sit at the shot level 1 across the band
    assert abs(np.mean(spec.values.real)) < 5e-3
    auto = dsp.estimate_cross_spectrum(
        dsp.QuadraturePair(
            sample_rate=pair.sample_rate, x_a=pair.x_a, x_b=pair.x_a,
            angle_a=0.0, angle_b=0.5 * math.pi, lo_sign=1, f_if=pair.f_if,
            omega_center=pair.omega_center, band_halfwidth=pair.band_halfwidth,
            block_len=pair.block_len, meta=pair.meta),
        segment_len=1024, normalization=1.0)
    assert np.mean(auto.values.real) == pytest.approx(1.0, abs=0.01)
    # cross-spectrum zero within statistics
    z = spec.values.real / spec.sigma.real
    assert abs(np.mean(z)) < 0.35


def test_statistics_match_model(fast_device, fast_probe):
    cfg = fast_synth_config(seed=5, duration=0.03)
    pair = synth_baseband_quadratures(fast_device, fast_probe, cfg)
    spec = _welch(pair)
    sm = model.general_cross_spectrum(0.0, math.pi / 2, spec.freqs,
                                      fast_device, fast_probe)
    z_re = (spec.values.real - sm.values.real) / spec.sigma.real
    z_im = (spec.values.imag - sm.values.imag) / spec.sigma.imag
    for z in (z_re, z_im):
        assert abs(np.mean(z)) < 0.3
        assert 0.6 < np.std(z) < 1.5


def test_q_variance_scales_with_temperature(fast_device, fast_probe):
    """Lorentzian area in the phase quadrature doubles with T (high-T)."""
    areas = {}
    for t in (150.0, 300.0):
        pr = dataclasses.replace(fast_probe, t_bath=t)
        pair = synth_baseband_quadratures(fast_device, pr,
                                          fast_synth_config(seed=9, duration=0.025))
        auto = dsp.estimate_cross_spectrum(
            dataclasses.replace(pair, x_a=pair.x_b), segment_len=1024,
            normalization=1.0)
        areas[t] = np.sum(auto.values.real - np.median(auto.values.real))
    assert areas[300.0] / areas[150.0] == pytest.approx(2.0, rel=0.1)


def test_gaussianity(fast_device, fast_probe):
    cfg = fast_synth_config(seed=21, duration=0.06)
    pair = synth_baseband_quadratures(fast_device, fast_probe, cfg)
    assert pair.n_samples >= 1e6
    for x in (pair.x_a, pair.x_b):
        xc = x - x.mean()
        kurt = np.mean(xc**4) / np.mean(xc**2) ** 2 - 3.0
        assert abs(kurt) < 0.05


def test_memory_cap(fast_device, fast_probe):
    with pytest.raises(SynthesisError):
        synth_heterodyne_record(fast_device, fast_probe,
                                fast_synth_config(duration=10.0, max_samples=1 << 20))


def test_band_must_clear_lo(fast_device, fast_probe):
    with pytest.raises(ConfigError):
        synth_heterodyne_record(fast_device, fast_probe,
                                fast_synth_config(band_halfwidth=3.0e6))


def test_heterodyne_roundtrip_same_seed(fast_device, fast_probe):
    """Demod of an ideal record reproduces the direct baseband pair."""
    cfg = fast_synth_config(seed=13, drift_rms=0.0, carrier_snr_db=300.0)
    rec = synth_heterodyne_record(fast_device, fast_probe, cfg)
    direct = synth_baseband_quadratures(fast_device, fast_probe, cfg).trim_blocks(1)
    pair = dsp.demodulate(rec, dsp.track_carrier_phase(rec))
    rms = direct.x_a.std()
    assert np.abs(pair.x_a - direct.x_a).max() < 1e-3 * rms
    assert np.abs(pair.x_b - direct.x_b).max() < 1e-3 * direct.x_b.std()


def test_lo_flip_matched_negates_phase_quadrature(fast_device, fast_probe):
    cfg = fast_synth_config(seed=4, pair_mode="matched")
    rp, rm = synth_lo_pair(fast_device, fast_probe, cfg)
    pp = dsp.demodulate(rp, dsp.track_carrier_phase(rp))
    pm = dsp.demodulate(rm, dsp.track_carrier_phase(rm))
    assert np.abs(pp.x_a - pm.x_a).max() < 0.02 * pp.x_a.std()
    assert np.abs(pp.x_b + pm.x_b).max() < 0.02 * pp.x_b.std()
    # quantum correlation inverts between the raw records
    sp = _welch(pp)
    sm_ = _welch(pm)
    q, _ = dsp.combine_spectra(sp, sm_)
    smod = model.general_cross_spectrum(0.0, math.pi / 2, q.freqs,
                                        fast_device, fast_probe)
    z = (q.values.imag - smod.values.imag) / q.sigma.imag
    assert abs(np.mean(z)) < 0.5


def test_drift_is_common_mode(fast_device, fast_probe):
    cfg_off = fast_synth_config(seed=31, drift_rms=0.0, carrier_snr_db=300.0)
    cfg_on = fast_synth_config(seed=31, drift_rms=1.5, carrier_snr_db=80.0)
    specs = []
    for cfg in (cfg_off, cfg_on):
        rec = synth_heterodyne_record(fast_device, fast_probe, cfg)
        pair = dsp.demodulate(rec, dsp.track_carrier_phase(rec))
        specs.append(_welch(pair))
    z = np.abs(specs[0].values - specs[1].values) / np.abs(specs[0].sigma)
    assert z.max() < 1.0  # same noise realization: only tracking residuals differ


# ------------------------------------------------------------- imperfections


def test_dispersion_identity_is_noop(fast_device, fast_probe):
    rec = synth_heterodyne_record(fast_device, fast_probe, fast_synth_config(seed=2))
    out = inject_electronic_dispersion(rec, ElectronicResponse())
    assert out is rec


def test_dispersion_double_application_rejected(fast_device, fast_probe):
    rec = synth_heterodyne_record(fast_device, fast_probe, fast_synth_config(seed=2))
    resp = dispersion_for_rotation_slope(1e-9, fast_device.omega_m, 2.4e6)
    out = inject_electronic_dispersion(rec, resp)
    with pytest.raises(ConfigError):
        inject_electronic_dispersion(out, resp)


def test_dispersion_creates_dispersive_feature(fast_device, fast_probe):
    """Apparent-rotation slope on a thermal line leaks slope * A * (Gamma/2)
    peak-to-peak into Re of the cross spectrum (small-angle oracle)."""
    slope = 2.0 / fast_device.gamma_m   # ~2 rad across the half-linewidth
    resp = dispersion_for_rotation_slope(slope, fast_device.omega_m, 2.4e6)
    cfg = fast_synth_config(seed=8, duration=0.04)
    rec = synth_heterodyne_record(fast_device, fast_probe, cfg, electronics=resp)
    pair = dsp.demodulate(rec, dsp.track_carrier_phase(rec))
    spec = _welch(pair)
    from omqct.fits import fit_line_components
    r = fit_line_components(spec, shape=(fast_device.omega_m, fast_device.gamma_m))
    chi2 = abs(model.cavity_susceptibility(fast_device.omega_m, fast_device,
                                           fast_probe)) ** 2
    a_true = (0.045 * 3.0 * fast_device.kappa**2 * chi2
              * model.coth_ratio(fast_device.omega_m, 294.0))
    expected_pp = slope * a_true * 0.5 * fast_device.gamma_m
    assert r.amplitude_b == pytest.approx(-expected_pp, rel=0.2)


def test_lo_toggling_rejects_artifact(fast_device, fast_probe):
    """Matched-seed pair with a big injected dispersion: the artifact lands in
    the even (half-sum) channel, the quantum part in the odd channel."""
    slope = 1.0 / fast_device.gamma_m
    resp = dispersion_for_rotation_slope(slope, fast_device.omega_m, 2.4e6)
    cfg = fast_synth_config(seed=6, duration=0.04, pair_mode="matched")
    rp, rm = synth_lo_pair(fast_device, fast_probe, cfg, electronics=resp)
    sp = _welch(dsp.demodulate(rp, dsp.track_carrier_phase(rp)))
    sm_ = _welch(dsp.demodulate(rm, dsp.track_carrier_phase(rm)))
    quantum, artifact = dsp.combine_spectra(sp, sm_)
    smod = model.general_cross_spectrum(0.0, math.pi / 2, quantum.freqs,
                                        fast_device, fast_probe)
    # artifact resides in the even channel and dwarfs the quantum correlation
    assert np.abs(artifact.values.real).max() > 10 * np.abs(smod.values.real).max()
    # the odd channel recovers the true quantum correlation
    from omqct.fits import fit_line_components
    shape = (fast_device.omega_m, fast_device.gamma_m)
    r_q = fit_line_components(quantum, shape=shape)
    smod.sigma = quantum.sigma
    r_m = fit_line_components(smod, shape=shape)
    assert r_q.amplitude_b == pytest.approx(r_m.amplitude_b, rel=0.05)


def test_nonlinearity_identity_and_bounds(fast_device, fast_probe):
    rec = synth_heterodyne_record(fast_device, fast_probe, fast_synth_config(seed=2))
    assert inject_detector_nonlinearity(rec, 0.0) is rec
    with pytest.raises(ConfigError):
        inject_detector_nonlinearity(rec, 0.5)


def test_nonlinearity_intermod_level(fast_device, fast_probe):
    """-35 dB coefficient produces intermodulation images at -35 +- 2 dB."""
    from scipy import fft as sfft
    r = 10 ** (-35.0 / 20.0)
    cfg = fast_synth_config(seed=12, duration=0.02, drift_rms=0.0)
    rec = synth_heterodyne_record(fast_device, fast_probe, cfg)
    rec_nl = inject_detector_nonlinearity(rec, r)
    c = rec_nl.sideband_complex
    f = sfft.fftfreq(c.size, 1.0 / rec.meta.sample_rate)
    spec = np.abs(sfft.fft(c)) ** 2
    f_line = rec.meta.f_if + rec.meta.f_lo     # upper heterodyne sideband
    f_imag = f_line - 2 * rec.meta.f_lo        # intermod image
    def band_power(fc):
        sel = np.abs(f - fc) <= 0.5 * fast_device.gamma_m / (2 * math.pi)
        return spec[sel].sum()
    level_db = 10 * math.log10(band_power(f_imag) / band_power(f_line))
    assert level_db == pytest.approx(-35.0, abs=2.0)
    # cross-correlation floor between 1e-4 and 1e-3 of shot noise
    pair = dsp.demodulate(rec_nl, dsp.track_carrier_phase(rec_nl))
    spec_x = _welch(pair)
    smod = model.general_cross_spectrum(0.0, math.pi / 2, spec_x.freqs,
                                        fast_device, fast_probe)
    resid = spec_x.values - smod.values
    off = np.abs(spec_x.freqs - fast_device.omega_m) > 5 * fast_device.gamma_m
    floor = np.sqrt(np.mean(np.abs(resid[off]) ** 2))
    # statistical floor at this averaging is ~2e-2; the distortion floor must
    # not push it above the documented 1e-3-of-shot-scale by orders
    assert floor < 0.05


def test_shot_record_flat_and_filterable(fast_device, fast_probe):
    cfg = fast_synth_config(seed=14, duration=0.02)
    rec = shot_noise_record(fast_device, fast_probe, cfg)
    pair = dsp.demodulate(rec, dsp.track_carrier_phase(rec))
    auto = dsp.estimate_cross_spectrum(
        dataclasses.replace(pair, x_b=pair.x_a), segment_len=1024,
        normalization=1.0)
    lvl = np.mean(auto.values.real)
    assert np.allclose(auto.values.real / lvl, 1.0, atol=0.1)
    cross = _welch(pair, normalization=1.0)
    assert np.abs(cross.values.real / lvl).max() < 0.05
    # after a known gain filter the spectrum follows |H|^2
    resp = ElectronicResponse(gain_coeffs=(1.0, 0.1 / fast_device.gamma_m),
                              omega_ref=fast_device.omega_m, resp_id="tilt")
    rec2 = inject_electronic_dispersion(shot_noise_record(fast_device, fast_probe, cfg),
                                        resp)
    pair2 = dsp.demodulate(rec2, dsp.track_carrier_phase(rec2))
    auto2 = dsp.estimate_cross_spectrum(
        dataclasses.replace(pair2, x_b=pair2.x_a), segment_len=1024,
        normalization=1.0)
    h2 = resp.gain(auto2.freqs) ** 2
    ratio = auto2.values.real / lvl / h2
    assert np.abs(np.mean(ratio) - 1.0) < 0.05


def test_phase_comb_properties(fast_device, fast_probe):
    tones = fast_device.omega_m + 2 * math.pi * np.array([-1.5e6, -0.5e6, 0.7e6, 1.6e6])
    cfg = fast_synth_config(seed=15, duration=0.02)
    rec = phase_comb_record(fast_device, fast_probe, cfg, tones)
    pair = dsp.demodulate(rec, dsp.track_carrier_phase(rec))
    from scipy import fft as sfft
    n = pair.n_samples
    sa = sfft.fft(pair.x_a) / n
    sb = sfft.fft(pair.x_b) / n
    f = sfft.fftfreq(n, 1.0 / pair.sample_rate)
    for w_j in rec.meta.comb_tones:
        f_j = pair.f_if + (w_j - pair.omega_center) / (2 * math.pi)
        k = np.argmin(np.abs(f - f_j))
        # pure phase-quadrature tones: amplitude leakage below -40 dB
        leak_db = 20 * math.log10(abs(sa[k]) / abs(sb[k]))
        assert leak_db < -40.0
    with pytest.raises(ConfigError):
        phase_comb_record(fast_device, fast_probe, cfg,
                          [fast_device.omega_m + 2 * math.pi * 50e6])
