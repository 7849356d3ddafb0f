"""Synthetic photodetector records.

Frequency-domain synthesis on independent circulant blocks: for every FFT bin
of a block, independent complex Gaussians are drawn for the three noise ports
(input shot noise, loss-port vacuum, FDT thermal force), the linearized
transfer functions are applied, and the quadrature envelopes are inverse
transformed. The same shot-noise draw feeds both quadratures, which is what
creates the amplitude-phase quantum correlation. Statistics converge to
``model.general_cross_spectrum`` exactly (no discretization bias).

The heterodyne record assembles the envelopes onto the complex IF capture

    c(t) = [M e^{i psi(t)} + conj(P) e^{-i psi(t)}] e^{2 pi i f_if t}

with psi = 2 pi f_lo t - theta_lo(t), plus a carrier-channel beat note
cos(psi + theta_out) carrying the slow LO path drift, so that demodulating
against the tracked beat phase measures quadratures referenced to the detected
output carrier - including the static detuning-induced rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft

from .constants import HBAR
from .errors import ConfigError, SynthesisError
from .model import fdt_force_psd, quadrature_coeffs
from .params import DeviceParams, ProbeParams
from .records import PhotocurrentRecord, QuadraturePair, RecordMeta
from . import streams

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# electronics response


@dataclass(frozen=True)
class ElectronicResponse:
    """Complex SISO response of the detector + mixdown chain.

    |H| and arg H are polynomials in (omega - omega_ref) with ascending
    coefficients; omega_ref defaults to the analysis band center. Gain must
    stay positive over the band it is applied to.
    """

    gain_coeffs: tuple = (1.0,)
    phase_coeffs: tuple = (0.0,)
    omega_ref: float = 0.0
    resp_id: str = "custom"

    def gain(self, omega):
        x = np.asarray(omega, dtype=float) - self.omega_ref
        return np.polynomial.polynomial.polyval(x, np.asarray(self.gain_coeffs))

    def phase(self, omega):
        x = np.asarray(omega, dtype=float) - self.omega_ref
        return np.polynomial.polynomial.polyval(x, np.asarray(self.phase_coeffs))

    def h(self, omega):
        return self.gain(omega) * np.exp(1j * self.phase(omega))

    @property
    def is_identity(self) -> bool:
        return (tuple(self.gain_coeffs) == (1.0,)
                and all(c == 0.0 for c in self.phase_coeffs))


def dispersion_for_rotation_slope(slope: float, omega_ref: float,
                                  f_lo: float) -> ElectronicResponse:
    """Quadratic-phase response whose apparent quadrature rotation is
    ``slope`` rad per rad/s of offset from ``omega_ref``.

    A linear arg H rotates all quadratures by a constant; the
    linear-in-frequency apparent rotation that turns a thermal Lorentzian into
    a spurious dispersive feature requires quadratic phase: the demodulator
    compares arg H at the two heterodyne sidebands, giving an apparent angle
    theta(nu) = -2 s2 omega_lo nu for arg H = s2 (omega - omega_ref)^2.
    """
    omega_lo = 2 * math.pi * abs(f_lo)
    s2 = -slope / (2.0 * omega_lo)
    return ElectronicResponse(gain_coeffs=(1.0,), phase_coeffs=(0.0, 0.0, s2),
                              omega_ref=omega_ref,
                              resp_id=f"rotation-slope:{slope:g}")


# ---------------------------------------------------------------------------
# synthesis configuration and layout


@dataclass(frozen=True)
class SynthConfig:
    """Record synthesis knobs. Frequencies in Hz, duration in seconds."""

    duration: float = 0.05
    sample_rate: float = 40e6
    seed: int = 0
    f_lo: float = 4.8e6              # signed default; probe.delta_lo overrides sign
    f_if: float = 10e6
    band_halfwidth: Optional[float] = None   # default: min(10*gamma, 0.93*|f_lo|)
    block_len: int = 4096
    drift_rms: float = 1.0           # rad over the record
    drift_bandwidth: float = 1e3     # Hz
    carrier_amp: float = 1.0
    carrier_snr_db: float = 70.0     # carrier power over full-band noise power
    comb_tone_amp: float = 1.0
    pair_mode: str = "independent"   # independent | matched
    max_samples: int = 1 << 25

    def __post_init__(self):
        if self.pair_mode not in ("independent", "matched"):
            raise ConfigError("synth.pair_mode must be 'independent' or 'matched'")
        if self.block_len < 16 or self.block_len & (self.block_len - 1):
            raise ConfigError("synth.block_len must be a power of two >= 16")


@dataclass(frozen=True)
class _Layout:
    fs: float
    n_samples: int
    block_len: int
    n_blocks: int
    f_if: float      # grid-snapped
    f_lo: float      # grid-snapped, signed
    w: float         # envelope half band (Hz)
    omega_center: float


def _snap(f: float, df: float) -> float:
    return round(f / df) * df


def _layout(p: DeviceParams, pr: ProbeParams, cfg: SynthConfig) -> _Layout:
    fs = cfg.sample_rate
    b = cfg.block_len
    df = fs / b
    f_lo = _snap(math.copysign(cfg.f_lo if cfg.f_lo > 0 else abs(cfg.f_lo),
                               pr.delta_lo if pr.delta_lo != 0 else 1.0), df)
    f_lo = math.copysign(abs(f_lo), pr.lo_sign)
    f_if = _snap(cfg.f_if, df)
    gamma_hz = p.gamma_m / (2 * math.pi)
    w = cfg.band_halfwidth if cfg.band_halfwidth else min(10 * gamma_hz,
                                                          0.93 * abs(f_lo))
    w = max(w, 6 * df)
    if fs <= 4 * abs(f_lo):
        raise ConfigError("sample_rate must exceed 4x the LO offset "
                          f"({fs:g} Hz vs f_lo {f_lo:g} Hz)")
    if w >= abs(f_lo):
        raise ConfigError(
            f"band_halfwidth {w:g} Hz must stay below |f_lo| = {abs(f_lo):g} Hz "
            "so demodulation is image-free")
    if f_if - abs(f_lo) - w <= 0:
        raise ConfigError("lower heterodyne sideband would cross DC; raise f_if")
    if f_if + abs(f_lo) + w >= fs / 2:
        raise ConfigError("upper heterodyne sideband would alias; raise sample_rate")
    n_blocks = max(1, round(cfg.duration * fs / b))
    n = n_blocks * b
    if n > cfg.max_samples:
        raise SynthesisError(
            f"record of {n} samples exceeds max_samples = {cfg.max_samples}; "
            "shorten the duration or raise the cap")
    return _Layout(fs=fs, n_samples=n, block_len=b, n_blocks=n_blocks,
                   f_if=f_if, f_lo=f_lo, w=w, omega_center=p.omega_m)


# ---------------------------------------------------------------------------
# envelope synthesis


def _band(layout: _Layout):
    nu = sfft.fftfreq(layout.block_len, 1.0 / layout.fs)
    sel = np.abs(nu) <= layout.w
    return nu[sel], sel


def _envelope_coeffs(p: DeviceParams, pr: ProbeParams, layout: _Layout):
    """Per-bin transfer coefficients for the I/Q envelope synthesis."""
    nu, sel = _band(layout)
    omega = layout.omega_center + 2 * math.pi * nu
    u_i, v_i, w_i = quadrature_coeffs(0.0, omega, p, pr)
    u_q, v_q, w_q = quadrature_coeffs(0.5 * math.pi, omega, p, pr)
    sff = np.sqrt(fdt_force_psd(omega, p, pr.t_bath))
    return sel, dict(u_i=u_i, v_i=v_i, wf_i=w_i * sff,
                     u_q=u_q, v_q=v_q, wf_q=w_q * sff)


def _synth_envelopes(p: DeviceParams, pr: ProbeParams, layout: _Layout,
                     seed: int, salt: int):
    """Full-record complex quadrature envelopes (E_I, E_Q) in shot units."""
    sel, co = _envelope_coeffs(p, pr, layout)
    nbin = int(np.count_nonzero(sel))
    nb, b = layout.n_blocks, layout.block_len
    z1 = np.empty((nb, nbin), dtype=complex)
    z2 = np.empty_like(z1)
    z4 = np.empty_like(z1)
    z5 = np.empty_like(z1)
    zf = np.empty_like(z1)
    for blk in range(nb):
        z1[blk] = streams.complex_normal(streams.stream(seed, salt, blk, streams.SHOT), nbin)
        z2[blk] = streams.complex_normal(streams.stream(seed, salt, blk, streams.SHOT + 16), nbin)
        z4[blk] = streams.complex_normal(streams.stream(seed, salt, blk, streams.LOSS), nbin)
        z5[blk] = streams.complex_normal(streams.stream(seed, salt, blk, streams.LOSS + 16), nbin)
        zf[blk] = streams.complex_normal(streams.stream(seed, salt, blk, streams.THERMAL), nbin)
    se, sl = math.sqrt(pr.eps), math.sqrt(1.0 - pr.eps)
    z2c, z5c = np.conj(z2), np.conj(z5)
    a_i = se * ((co["u_i"] * z1 + co["v_i"] * z2c) / SQRT2 + co["wf_i"] * zf) \
        + sl * (z4 + z5c) / SQRT2
    a_q = se * ((co["u_q"] * z1 + co["v_q"] * z2c) / SQRT2 + co["wf_q"] * zf) \
        + sl * (-1j) * (z4 - z5c) / SQRT2
    scale = math.sqrt(b * layout.fs)
    spec_i = np.zeros((nb, b), dtype=complex)
    spec_q = np.zeros((nb, b), dtype=complex)
    spec_i[:, sel] = a_i * scale
    spec_q[:, sel] = a_q * scale
    e_i = sfft.ifft(spec_i, axis=1).reshape(-1)
    e_q = sfft.ifft(spec_q, axis=1).reshape(-1)
    return e_i, e_q


def _drift(layout: _Layout, cfg: SynthConfig, seed: int, salt: int) -> np.ndarray:
    """Band-limited Gaussian random-walk LO path phase, scaled to drift_rms.

    The walk is smoothed to ``drift_bandwidth`` and sampled-and-held at the
    synthesis block rate: the phase reference is constant within each analysis
    block, which keeps the whole record exactly block-circulant (drift stays
    perfectly common-mode through block-aligned demodulation).
    """
    if cfg.drift_rms == 0.0:
        return np.zeros(layout.n_samples)
    gen = streams.stream(seed, salt, 0, streams.DRIFT)
    n_b = layout.n_blocks
    walk = np.cumsum(gen.standard_normal(n_b))
    block_rate = layout.fs / layout.block_len
    k = max(1, int(round(block_rate / (2.0 * cfg.drift_bandwidth))))
    if k > 1 and n_b > 2:
        from scipy.ndimage import uniform_filter1d
        walk = uniform_filter1d(walk, min(k, n_b), mode="nearest")
    walk -= walk.mean()
    rms = math.sqrt(np.mean(walk**2))
    if rms > 0:
        walk *= cfg.drift_rms / rms
    return np.repeat(walk, layout.block_len)


def _carrier_noise_std(cfg: SynthConfig) -> float:
    # carrier tone power A^2/2 over total noise power sigma^2 across the band
    return cfg.carrier_amp / math.sqrt(2.0) * 10 ** (-cfg.carrier_snr_db / 20.0)


def _theta_in_out(p: DeviceParams, pr: ProbeParams):
    th_in = math.atan(2.0 * pr.delta_p / p.kappa)
    th_out = math.pi - th_in
    return th_in, th_out


def _meta(p, pr, cfg, layout, *, salt, kind, tones=()) -> RecordMeta:
    device = dict(m=p.m, omega_m=p.omega_m, gamma_m=p.gamma_m, g0=p.g0,
                  kappa=p.kappa, kappa_out=p.kappa_out)
    probe = dict(nbar=pr.nbar, delta_p=pr.delta_p, delta_lo=pr.delta_lo,
                 eps=pr.eps, t_bath=pr.t_bath)
    th_in, th_out = _theta_in_out(p, pr)
    return RecordMeta(
        sample_rate=layout.fs, n_samples=layout.n_samples,
        block_len=layout.block_len, f_if=layout.f_if, f_lo=layout.f_lo,
        omega_center=layout.omega_center, band_halfwidth=layout.w,
        seed=cfg.seed, stream_salt=salt, lo_sign=pr.lo_sign, kind=kind,
        drift_rms=cfg.drift_rms, drift_bandwidth=cfg.drift_bandwidth,
        carrier_amp=cfg.carrier_amp, carrier_noise_std=_carrier_noise_std(cfg),
        theta_static=th_out - th_in, comb_tones=tuple(tones),
        device=device, probe=probe)


def synth_baseband_quadratures(p: DeviceParams, pr: ProbeParams,
                               cfg: SynthConfig, salt: int = 0) -> QuadraturePair:
    """Directly synthesized quadrature pair (no heterodyne chain, no drift).

    Real series at the record IF, in the detected-carrier frame (the same
    static rotation a beat-referenced demodulation applies), so the statistics
    match ``model.general_cross_spectrum`` at angles (0, pi/2) and the series
    reproduce a demodulated clean record sample-for-sample on the same seed
    path. Shot units: the vacuum level estimates to 1.
    """
    layout = _layout(p, pr, cfg)
    e_i, e_q = _synth_envelopes(p, pr, layout, cfg.seed, salt)
    _, th_out = _theta_in_out(p, pr)
    c_o, s_o = math.cos(th_out), math.sin(th_out)
    e_det_i = c_o * e_i + s_o * e_q
    e_det_q = -s_o * e_i + c_o * e_q
    t = np.arange(layout.n_samples) / layout.fs
    ph = np.exp(2j * math.pi * layout.f_if * t)
    x_a = SQRT2 * (e_det_i * ph).real
    # a negative-LO acquisition measures the phase quadrature negated
    x_b = pr.lo_sign * SQRT2 * (e_det_q * ph).real
    return QuadraturePair(
        sample_rate=layout.fs, x_a=x_a, x_b=x_b, angle_a=0.0,
        angle_b=0.5 * math.pi, lo_sign=pr.lo_sign, f_if=layout.f_if,
        omega_center=layout.omega_center, band_halfwidth=layout.w,
        block_len=layout.block_len,
        meta=dict(gamma_m=p.gamma_m, delta_p=pr.delta_p, seed=cfg.seed, salt=salt))


def _assemble_record(p, pr, cfg, layout, e_i, e_q, *, salt, kind,
                     tones=(), tone_nus=()) -> PhotocurrentRecord:
    n = layout.n_samples
    t = np.arange(n) / layout.fs
    if tone_nus:
        for nu_j in tone_nus:
            e_q = e_q + cfg.comb_tone_amp * np.exp(2j * math.pi * nu_j * t)
    p_env = 0.5 * (e_i + 1j * e_q)
    m_env = np.conj(0.5 * (e_i - 1j * e_q))
    th_in, th_out = _theta_in_out(p, pr)
    theta_l = _drift(layout, cfg, cfg.seed, salt)
    psi = 2 * math.pi * layout.f_lo * t - th_in - theta_l
    c = (m_env * np.exp(1j * psi) + np.conj(p_env) * np.exp(-1j * psi)) \
        * np.exp(2j * math.pi * layout.f_if * t)
    beat = psi + th_out
    gen = streams.stream(cfg.seed, salt, 0, streams.CARRIER)
    carrier = cfg.carrier_amp * np.cos(beat) \
        + _carrier_noise_std(cfg) * gen.standard_normal(n)
    meta = _meta(p, pr, cfg, layout, salt=salt, kind=kind, tones=tones)
    return PhotocurrentRecord(
        meta=meta, carrier=carrier.astype(np.float32),
        sideband_i=c.real.astype(np.float32),
        sideband_q=c.imag.astype(np.float32))


def synth_heterodyne_record(p: DeviceParams, pr: ProbeParams, cfg: SynthConfig,
                            electronics: Optional[ElectronicResponse] = None,
                            salt: int = 0) -> PhotocurrentRecord:
    """Full three-channel heterodyne record for one LO sign.

    The LO sign is taken from ``pr.delta_lo``. Flipping it with everything
    else fixed maps the demodulated phase quadrature to its negative while
    electronics artifacts (attached to the IF axis) stay put.
    """
    layout = _layout(p, pr, cfg)
    e_i, e_q = _synth_envelopes(p, pr, layout, cfg.seed, salt)
    rec = _assemble_record(p, pr, cfg, layout, e_i, e_q, salt=salt,
                           kind="heterodyne")
    if electronics is not None and not electronics.is_identity:
        rec = inject_electronic_dispersion(rec, electronics)
    return rec


def synth_lo_pair(p: DeviceParams, pr: ProbeParams, cfg: SynthConfig,
                  electronics: Optional[ElectronicResponse] = None):
    """(+LO, -LO) record pair.

    pair_mode 'independent': the two records draw distinct physical-noise
    streams (as in the experiment, where they are separate acquisitions).
    'matched': all streams shared, so the LO flip is the only difference -
    the matched-seed oracle for common-mode-rejection tests.
    """
    recs = []
    for idx, sign in enumerate((1, -1)):
        pr_s = pr.with_lo_sign(sign)
        salt = 0 if cfg.pair_mode == "matched" else idx
        recs.append(synth_heterodyne_record(p, pr_s, cfg, electronics, salt=salt))
    return tuple(recs)


def shot_noise_record(p: DeviceParams, pr: ProbeParams, cfg: SynthConfig,
                      salt: int = 8) -> PhotocurrentRecord:
    """Transduction-off record (flat unit spectra) for gain calibration."""
    pr0 = replace(pr, nbar=0.0)
    layout = _layout(p, pr0, cfg)
    e_i, e_q = _synth_envelopes(p, pr0, layout, cfg.seed, salt)
    return _assemble_record(p, pr0, cfg, layout, e_i, e_q, salt=salt, kind="shot")


def phase_comb_record(p: DeviceParams, pr: ProbeParams, cfg: SynthConfig,
                      tone_freqs: Sequence[float], salt: int = 9) -> PhotocurrentRecord:
    """Equal-phase comb of pure phase-quadrature tones for arg H calibration.

    ``tone_freqs`` are physical angular frequencies; each is snapped to the
    block grid so tones are leakage-free. Tones outside the synthesis band are
    rejected.
    """
    pr0 = replace(pr, nbar=0.0)
    layout = _layout(p, pr0, cfg)
    df = layout.fs / layout.block_len
    nus = []
    for w_j in tone_freqs:
        nu = (w_j - layout.omega_center) / (2 * math.pi)
        if abs(nu) > layout.w:
            raise ConfigError(
                f"comb tone at {w_j:g} rad/s lies {nu:g} Hz from band center, "
                f"outside the +-{layout.w:g} Hz synthesis band")
        nus.append(_snap(nu, df))
    tones = tuple(layout.omega_center + 2 * math.pi * nu for nu in nus)
    e_i, e_q = _synth_envelopes(p, pr0, layout, cfg.seed, salt)
    return _assemble_record(p, pr0, cfg, layout, e_i, e_q, salt=salt,
                            kind="comb", tones=tones, tone_nus=nus)


# ---------------------------------------------------------------------------
# imperfection injection


def _beat_phase_from_meta(meta: RecordMeta) -> np.ndarray:
    """Reconstruct the deterministic beat phase used at assembly time.

    beat = psi + theta_out = 2 pi f_lo t + theta_static - theta_L(t); the drift
    series regenerates bit-exactly from its stream key.
    """
    n = meta.n_samples
    t = np.arange(n) / meta.sample_rate
    cfg = SynthConfig(duration=meta.duration_s, sample_rate=meta.sample_rate,
                      seed=meta.seed, drift_rms=meta.drift_rms,
                      drift_bandwidth=meta.drift_bandwidth,
                      block_len=meta.block_len)
    layout = _Layout(fs=meta.sample_rate, n_samples=n, block_len=meta.block_len,
                     n_blocks=n // meta.block_len, f_if=meta.f_if,
                     f_lo=meta.f_lo, w=meta.band_halfwidth,
                     omega_center=meta.omega_center)
    theta_l = _drift(layout, cfg, meta.seed, meta.stream_salt)
    return 2 * math.pi * meta.f_lo * t + meta.theta_static - theta_l


def inject_electronic_dispersion(record: PhotocurrentRecord,
                                 resp: ElectronicResponse) -> PhotocurrentRecord:
    """Filter the sideband channels by H_el. Refuses double application."""
    if record.meta.electronics_applied != "none":
        raise ConfigError(
            f"record already has electronics {record.meta.electronics_applied!r} applied")
    if resp.is_identity:
        return record
    meta = record.meta
    c = record.sideband_complex
    f = sfft.fftfreq(c.size, 1.0 / meta.sample_rate)
    omega = meta.omega_center + 2 * math.pi * (f - meta.f_if)
    h = resp.h(omega)
    # only the occupied IF bands matter; keep everything else untouched
    occupied = (np.abs(f - (meta.f_if + meta.f_lo)) <= meta.band_halfwidth) \
        | (np.abs(f - (meta.f_if - meta.f_lo)) <= meta.band_halfwidth)
    if np.any(resp.gain(omega[occupied]) <= 0):
        raise ConfigError("electronic gain must stay positive over the record band")
    h = np.where(occupied, h, 1.0)
    c_f = sfft.ifft(sfft.fft(c) * h)
    return record.with_sidebands(c_f, electronics_applied=resp.resp_id)


def inject_detector_nonlinearity(record: PhotocurrentRecord,
                                 quad_coeff: float) -> PhotocurrentRecord:
    """Quadratic photodetector distortion.

    ``quad_coeff`` is the amplitude ratio of the intermodulation images
    (displaced by +-2 f_lo from each heterodyne sideband) to the sidebands
    themselves; -35 dB tones correspond to quad_coeff ~ 0.018.
    """
    if not 0 <= quad_coeff <= 0.1:
        raise ConfigError("quad_coeff must be in [0, 0.1] "
                          "(the distortion model is perturbative)")
    if quad_coeff == 0.0:
        return record
    meta = record.meta
    beat = _beat_phase_from_meta(meta)
    c = record.sideband_complex
    c_nl = c + quad_coeff * c * (2.0 * np.cos(2.0 * beat))
    return record.with_sidebands(c_nl, nonlinearity=quad_coeff)
