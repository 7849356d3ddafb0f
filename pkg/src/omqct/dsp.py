"""Measurement pipeline: carrier tracking, digital demodulation, electronics
calibration, Welch cross-spectral estimation, quadrature rotation and nulling,
and LO-sign lock-in separation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import signal as ssig
from scipy.ndimage import uniform_filter1d

from .errors import CalibrationError, ConfigError, EstimationError, TrackingError
from .records import PhotocurrentRecord, QuadraturePair
from .spectra import NORM_SHOT, ComplexSpectrum

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# carrier tracking


def track_carrier_phase(record: PhotocurrentRecord,
                        bandwidth: Optional[float] = None,
                        snr_threshold_db: float = 20.0) -> np.ndarray:
    """Unwrapped instantaneous phase of the carrier beat note.

    Analytic-signal extraction through a brick-wall band-pass around |f_lo|,
    then a quadrature arctangent. The returned phase contains the full
    2*pi*|f_lo|*t ramp plus drift. Raises TrackingError if the carrier SNR in
    a 1 kHz band falls below ``snr_threshold_db`` - no silent fallback.
    """
    meta = record.meta
    n = meta.n_samples
    fs = meta.sample_rate
    f_c = abs(meta.f_lo)
    bw = bandwidth if bandwidth else min(1e6, 0.5 * f_c)
    x = record.carrier.astype(np.float64)
    spec = sfft.rfft(x)
    f = sfft.rfftfreq(n, 1.0 / fs)
    in_band = np.abs(f - f_c) <= bw
    if not np.any(in_band):
        raise TrackingError("carrier band-pass selects no bins; check f_lo")
    # SNR: carrier power vs noise PSD measured in a clean annulus
    p_carrier = np.sum(np.abs(spec[in_band]) ** 2)
    annulus = (np.abs(f - f_c) > 2 * bw) & (np.abs(f - f_c) <= 4 * bw)
    if not np.any(annulus):
        raise TrackingError("no noise-estimation bins around the carrier")
    noise_per_bin = np.median(np.abs(spec[annulus]) ** 2)
    df = fs / n
    snr_1khz = p_carrier / (noise_per_bin * max(1e3 / df, 1.0))
    snr_db = 10 * math.log10(snr_1khz) if snr_1khz > 0 else -math.inf
    if snr_db < snr_threshold_db:
        raise TrackingError(
            f"carrier SNR {snr_db:.1f} dB (1 kHz band) below the "
            f"{snr_threshold_db:.1f} dB threshold")
    full = np.zeros(n, dtype=complex)
    full[np.nonzero(in_band)[0]] = spec[in_band]
    analytic = sfft.ifft(full)   # one-sided spectrum -> analytic signal
    return np.unwrap(np.angle(analytic))


# ---------------------------------------------------------------------------
# demodulation


def _blockwise_lpf(z: np.ndarray, block_len: int, fs: float, w: float) -> np.ndarray:
    """Brick-wall low-pass |f| <= w applied per synthesis block."""
    nb = z.size // block_len
    zb = z[:nb * block_len].reshape(nb, block_len)
    spec = sfft.fft(zb, axis=1)
    f = sfft.fftfreq(block_len, 1.0 / fs)
    spec[:, np.abs(f) > w] = 0.0
    return sfft.ifft(spec, axis=1).reshape(-1)


def block_phase_reference(phase: np.ndarray, f_ramp: float, fs: float,
                          block_len: int, edge_fraction: float = 0.05) -> np.ndarray:
    """Distill a tracked phase series into ramp + per-block constant offsets.

    The known IF ramp 2*pi*f_ramp*t is subtracted, the residual offset is
    averaged circularly over each block interior (edges excluded to skip
    filter transients), and the ramp is rebuilt. The result is exactly
    block-circulant, so block-aligned demodulation never leaks the image band.
    """
    n = phase.size
    t = np.arange(n) / fs
    resid = phase - TWO_PI * f_ramp * t
    nb = n // block_len
    phasor = np.exp(1j * resid[:nb * block_len]).reshape(nb, block_len)
    k = int(block_len * edge_fraction)
    interior = phasor[:, k:block_len - k] if block_len > 2 * k else phasor
    theta_b = np.angle(interior.mean(axis=1))
    out = TWO_PI * f_ramp * t
    out[:nb * block_len] += np.repeat(theta_b, block_len)
    if nb * block_len < n:
        out[nb * block_len:] += theta_b[-1]
    return out


def demodulate(record: PhotocurrentRecord, phase: np.ndarray,
               lpf_halfwidth: Optional[float] = None,
               trim_edge_blocks: int = 1,
               phase_mode: str = "block") -> QuadraturePair:
    """Digitally demodulate the sideband channels against the tracked phase.

    Produces the orthogonal quadrature pair at angles (0, pi/2) referenced to
    the detected carrier, as real series at the record IF. With a negative-LO
    record the same recipe returns the phase quadrature negated, which is the
    lock-in handle used by ``combine_lo_signs``.

    phase_mode 'block' (default) collapses the tracked phase to the known IF
    ramp plus one offset per synthesis block (see ``block_phase_reference``);
    'sample' uses the raw tracked series. The first/last ``trim_edge_blocks``
    blocks are dropped, where the tracker's analytic-signal extraction rings.
    """
    meta = record.meta
    if phase.shape != (meta.n_samples,):
        raise ConfigError("phase series length must match the record")
    fs = meta.sample_rate
    w = lpf_halfwidth if lpf_halfwidth else meta.band_halfwidth
    if phase_mode == "block":
        phase = block_phase_reference(phase, abs(meta.f_lo), fs, meta.block_len)
    elif phase_mode != "sample":
        raise ConfigError("phase_mode must be 'block' or 'sample'")
    t = np.arange(meta.n_samples) / fs
    b = record.sideband_complex * np.exp(-2j * math.pi * meta.f_if * t)
    rot = np.exp(-1j * phase)
    w1 = _blockwise_lpf(b * rot, meta.block_len, fs, w)
    w2 = _blockwise_lpf(np.conj(b) * rot, meta.block_len, fs, w)
    e_i = w2 + np.conj(w1)
    e_q = -1j * (w2 - np.conj(w1))
    ph_if = np.exp(2j * math.pi * meta.f_if * t)
    x_a = math.sqrt(2.0) * (e_i * ph_if).real
    x_b = math.sqrt(2.0) * (e_q * ph_if).real
    n_blocks = meta.n_samples // meta.block_len
    k = trim_edge_blocks if n_blocks > 2 * trim_edge_blocks else 0
    lo, hi = k * meta.block_len, (n_blocks - k) * meta.block_len
    return QuadraturePair(
        sample_rate=fs, x_a=x_a[lo:hi], x_b=x_b[lo:hi], angle_a=0.0,
        angle_b=0.5 * math.pi,
        lo_sign=meta.lo_sign, f_if=meta.f_if, omega_center=meta.omega_center,
        band_halfwidth=w, block_len=meta.block_len,
        meta=dict(gamma_m=meta.device.get("gamma_m", 0.0),
                  delta_p=meta.probe.get("delta_p", 0.0),
                  kind=meta.kind, comb_tones=meta.comb_tones,
                  trimmed_blocks=k,
                  electronics_applied=meta.electronics_applied))


def rotate_quadratures(pair: QuadraturePair, phi: float) -> QuadraturePair:
    """Exact 2D rotation of the analyzed quadrature pair by ``phi``."""
    c, s = math.cos(phi), math.sin(phi)
    return replace(pair,
                   x_a=c * pair.x_a + s * pair.x_b,
                   x_b=-s * pair.x_a + c * pair.x_b,
                   angle_a=pair.angle_a + phi,
                   angle_b=pair.angle_b + phi)


# ---------------------------------------------------------------------------
# Welch cross-spectral estimation


def _segment_starts(n: int, seg: int, step: int, block_len: Optional[int]):
    if block_len is None or block_len < seg:
        return np.arange(0, n - seg + 1, step)
    starts = []
    per_block = range(0, block_len - seg + 1, step)
    for b0 in range(0, n - block_len + 1, block_len):
        starts.extend(b0 + j for j in per_block)
    return np.asarray(starts, dtype=int)


def _overlap_neff(window: np.ndarray, n_seg: int, step: int) -> float:
    if n_seg <= 1:
        return float(n_seg)
    shifted = np.zeros_like(window)
    if step < window.size:
        shifted[:window.size - step] = window[step:]
    rho = (np.dot(window, shifted) / np.dot(window, window)) ** 2
    return n_seg / (1.0 + 2.0 * rho * (n_seg - 1) / n_seg)


def estimate_cross_spectrum(pair: QuadraturePair, window: str = "hann",
                            segment_len: int = 512, overlap: float = 0.5,
                            analysis_halfwidth: Optional[float] = None,
                            normalization: Optional[float] = None,
                            baseline_exclude: Optional[float] = None,
                            rbw_max_fraction: float = 0.1,
                            min_segments: int = 16) -> ComplexSpectrum:
    """Welch-averaged cross-spectrum S_{a,b}(omega) of a quadrature pair.

    Cosine-family windows are accepted; the power normalization makes the
    shot-noise level window-independent. The spectrum is normalized to shot
    noise using the off-line amplitude-quadrature baseline (default) or an
    externally measured shot level (``normalization``). Per-bin standard
    errors carry the cross-term correction and the overlap-corrected number
    of averages.

    baseline_exclude: half-width (rad/s) around the line center excluded from
    the baseline; defaults to min(5 gamma_m, 0.75 * band).
    """
    if not 0.0 <= overlap < 1.0:
        raise ConfigError("overlap must be in [0, 1)")
    fs = pair.sample_rate
    seg = int(segment_len)
    step = max(1, int(round(seg * (1.0 - overlap))))
    win = ssig.get_window(window, seg, fftbins=True)
    enbw = fs * np.sum(win**2) / np.sum(win) ** 2
    gamma = pair.meta.get("gamma_m", 0.0)
    if gamma and enbw > rbw_max_fraction * gamma / TWO_PI:
        raise EstimationError(
            f"resolution bandwidth {enbw:.3g} Hz exceeds "
            f"{rbw_max_fraction:g} of the mechanical linewidth "
            f"{gamma / TWO_PI:.3g} Hz; increase segment_len")
    starts = _segment_starts(pair.n_samples, seg, step, pair.block_len)
    if starts.size < min_segments:
        raise EstimationError(
            f"only {starts.size} Welch segments available (< {min_segments}); "
            "lengthen the record or shorten segments")
    idx = starts[:, None] + np.arange(seg)[None, :]
    a = sfft.rfft(pair.x_a[idx] * win, axis=1)
    b = sfft.rfft(pair.x_b[idx] * win, axis=1)
    scale = 2.0 / (fs * np.sum(win**2))
    s_ab = scale * np.mean(np.conj(a) * b, axis=0)
    s_aa = scale * np.mean(np.abs(a) ** 2, axis=0)
    s_bb = scale * np.mean(np.abs(b) ** 2, axis=0)
    f = sfft.rfftfreq(seg, 1.0 / fs)
    w_an = analysis_halfwidth if analysis_halfwidth else pair.band_halfwidth
    w_an_hz = w_an if w_an < fs else pair.band_halfwidth
    # stay clear of the capture band edge by a few resolution bandwidths:
    # bins whose kernel hangs off the synthesized band read low
    w_an_hz = min(w_an_hz, pair.band_halfwidth - 3.0 * enbw)
    band = np.abs(f - pair.f_if) <= w_an_hz
    if not np.any(band):
        raise EstimationError("analysis band selects no frequency bins")
    nu = f[band] - pair.f_if
    omega = pair.omega_center + TWO_PI * nu
    s_ab, s_aa, s_bb = s_ab[band], s_aa[band], s_bb[band]
    # shot normalization
    if normalization is not None:
        base = float(normalization)
    else:
        if baseline_exclude is None:
            baseline_exclude = min(5.0 * gamma, 0.75 * TWO_PI * w_an_hz) \
                if gamma else 0.75 * TWO_PI * w_an_hz
        base_bins = np.abs(omega - pair.omega_center) >= baseline_exclude
        if not np.any(base_bins):
            raise EstimationError(
                "no baseline bins outside the exclusion band; pass an explicit "
                "shot normalization or reduce baseline_exclude")
        base = float(np.mean(s_aa[base_bins]))
    if base <= 0:
        raise EstimationError("nonpositive shot baseline")
    s_ab, s_aa, s_bb = s_ab / base, s_aa / base, s_bb / base
    n_seg = starts.size
    n_eff = _overlap_neff(win, n_seg, step)
    # window-induced correlation between neighbouring bins: for Gaussian data
    # cov(S_i, S_j) ~ |c_k|^2 with c_k the normalized DFT of w^2. Fits on the
    # dense grid must inflate parameter covariances by sum_k |c_k|^2.
    wsq = win**2
    ks = np.arange(1, 5)
    phases = np.exp(-2j * math.pi * np.outer(ks, np.arange(seg)) / seg)
    c_k = np.abs(phases @ wsq) / np.sum(wsq)
    fit_inflation = float(1.0 + 2.0 * np.sum(c_k**2))
    # cross-term-corrected per-bin standard errors from smoothed spectra
    k = min(17, max(3, s_ab.size // 8) | 1)
    sm_aa = uniform_filter1d(s_aa, k, mode="nearest")
    sm_bb = uniform_filter1d(s_bb, k, mode="nearest")
    sm_re = uniform_filter1d(s_ab.real, k, mode="nearest")
    sm_im = uniform_filter1d(s_ab.imag, k, mode="nearest")
    var_re = (sm_aa * sm_bb + sm_re**2 - sm_im**2) / (2.0 * n_eff)
    var_im = (sm_aa * sm_bb - sm_re**2 + sm_im**2) / (2.0 * n_eff)
    sigma = np.sqrt(np.maximum(var_re, 0.0)) + 1j * np.sqrt(np.maximum(var_im, 0.0))
    return ComplexSpectrum(
        omega, s_ab, NORM_SHOT, sigma=sigma, n_avg=float(n_seg),
        meta=dict(n_eff=n_eff, rbw_hz=enbw, window=window, overlap=overlap,
                  lo_sign=pair.lo_sign, phi=pair.angle_a, baseline=base,
                  omega_center=pair.omega_center,
                  fit_variance_inflation=fit_inflation,
                  corrections=sorted(pair.corrections_applied)))


def measure_shot_level(pair: QuadraturePair, window: str = "hann",
                       segment_len: int = 512) -> float:
    """Mean raw spectral level of a shot-noise-only pair, for normalization."""
    spec = estimate_cross_spectrum(pair, window=window, segment_len=segment_len,
                                   normalization=1.0)
    # baseline stored before normalization is 1, so recompute from autos
    fs = pair.sample_rate
    win = ssig.get_window(window, segment_len, fftbins=True)
    starts = _segment_starts(pair.n_samples, segment_len,
                             segment_len // 2, pair.block_len)
    idx = starts[:, None] + np.arange(segment_len)[None, :]
    a = sfft.rfft(pair.x_a[idx] * win, axis=1)
    b = sfft.rfft(pair.x_b[idx] * win, axis=1)
    scale = 2.0 / (fs * np.sum(win**2))
    f = sfft.rfftfreq(segment_len, 1.0 / fs)
    band = np.abs(f - pair.f_if) <= pair.band_halfwidth
    return float(np.mean(scale * 0.5 * (np.abs(a[:, band]) ** 2
                                        + np.abs(b[:, band]) ** 2)))


# ---------------------------------------------------------------------------
# phi scan, null finding, LO combination


@dataclass
class CrossSpectraSet:
    """Map phi -> S_{phi, phi+pi/2} on a shared grid."""

    phi_grid: np.ndarray
    spectra: list
    lo_sign: int
    resolution_bandwidth: float
    n_avg: float

    def __post_init__(self):
        self.phi_grid = np.asarray(self.phi_grid, dtype=float)
        if len(self.spectra) != self.phi_grid.size:
            raise ConfigError("phi grid / spectra length mismatch")

    def spectrum(self, phi: float) -> ComplexSpectrum:
        i = int(np.argmin(np.abs(self.phi_grid - phi)))
        if abs(self.phi_grid[i] - phi) > 1e-9:
            raise ConfigError(f"no spectrum at phi = {phi:g} in this set")
        return self.spectra[i]


@dataclass
class PhiScanResult:
    phi_star: float
    sigma_phi_star: float
    amplitudes: np.ndarray        # fitted Lorentzian component per phi
    amplitude_sigmas: np.ndarray
    spectra_set: CrossSpectraSet


def estimate_cross_spectra_set(pair: QuadraturePair, phi_grid: Sequence[float],
                               **welch_kw) -> CrossSpectraSet:
    specs = []
    for phi in phi_grid:
        rp = rotate_quadratures(pair, phi)
        specs.append(estimate_cross_spectrum(rp, **welch_kw))
    rbw = specs[0].meta["rbw_hz"]
    return CrossSpectraSet(np.asarray(phi_grid, float), specs, pair.lo_sign,
                           rbw, specs[0].n_avg)


def scan_rotation_null(pair: QuadraturePair, phi_grid: Sequence[float],
                       fit_band: Optional[tuple] = None,
                       **welch_kw) -> PhiScanResult:
    """Locate the analysis angle that nulls the thermal Lorentzian.

    Fits (Lorentzian + dispersive + offset) to Re S_{phi,phi+pi/2} at every
    grid angle, regresses the Lorentzian amplitude linearly on phi, and
    returns the zero crossing with propagated uncertainty. Raises if the
    crossing lies outside the scanned grid.
    """
    from .fits import fit_line_components, fit_lorentzian

    phi_grid = np.asarray(phi_grid, dtype=float)
    if phi_grid.size < 5:
        raise ConfigError("phi scan needs at least 5 grid points")
    sset = estimate_cross_spectra_set(pair, phi_grid, **welch_kw)
    # Line shape from the absorptive imaginary channel: it is independent of
    # the scan angle and always a clean positive Lorentzian, whereas near the
    # null every Re component vanishes and a free-shape Re fit is degenerate.
    shape = None
    mid = phi_grid.size // 2
    s_mid = sset.spectra[mid] if fit_band is None else sset.spectra[mid].band(*fit_band)
    gamma = pair.meta.get("gamma_m") or None
    try:
        ref = fit_lorentzian(s_mid, use="im", center0=pair.omega_center,
                             width0=gamma)
        shape = (ref.center, ref.width)
    except Exception:
        # fall back to the most thermal-dominated end of the grid
        best = -np.inf
        for i in (0, phi_grid.size - 1):
            s = sset.spectra[i] if fit_band is None else sset.spectra[i].band(*fit_band)
            try:
                r = fit_line_components(s)
            except Exception:
                continue
            signif = abs(r.amplitude) / max(r.amplitude_sigma, 1e-300)
            if signif > best:
                best = signif
                shape = (r.center, r.width)
    if shape is None:
        raise EstimationError(
            "no scan angle showed a fittable line; widen the phi grid or "
            "lengthen the record")
    amps, sigs = [], []
    for spec in sset.spectra:
        s = spec if fit_band is None else spec.band(*fit_band)
        res = fit_line_components(s, shape=shape)
        amps.append(res.amplitude)
        sigs.append(res.amplitude_sigma)
    amps = np.asarray(amps)
    sigs = np.asarray(sigs)
    wgt = 1.0 / sigs**2
    # weighted linear regression amps = a0 + a1 phi
    sw = wgt.sum()
    sx = (wgt * phi_grid).sum()
    sy = (wgt * amps).sum()
    sxx = (wgt * phi_grid**2).sum()
    sxy = (wgt * phi_grid * amps).sum()
    det = sw * sxx - sx * sx
    a0 = (sxx * sy - sx * sxy) / det
    a1 = (sw * sxy - sx * sy) / det
    var_a0 = sxx / det
    var_a1 = sw / det
    cov01 = -sx / det
    if a1 == 0:
        raise EstimationError("thermal amplitude shows no phi dependence")
    phi_star = -a0 / a1
    var = (var_a0 / a1**2 + a0**2 * var_a1 / a1**4
           - 2.0 * a0 * cov01 / a1**3)
    sigma_phi = math.sqrt(max(var, 0.0))
    lo, hi = phi_grid.min(), phi_grid.max()
    if not (lo <= phi_star <= hi):
        raise EstimationError(
            f"null outside grid: phi_star = {phi_star:.4g} not in "
            f"[{lo:.4g}, {hi:.4g}]")
    return PhiScanResult(phi_star, sigma_phi, amps, sigs, sset)


def combine_spectra(s_plus: ComplexSpectrum, s_minus: ComplexSpectrum):
    """(quantum, thermal) = half difference / half sum of +/-LO spectra.

    The phase quadrature inverts with the LO sign, so the physical
    amplitude-phase correlation adds in the difference while
    electronics-dispersion artifacts (even under the flip) cancel into the sum.
    """
    quantum = s_plus.half_difference(s_minus)
    thermal = s_plus.half_sum(s_minus)
    quantum.meta["channel"] = "quantum"
    thermal.meta["channel"] = "thermal"
    return quantum, thermal


def combine_lo_signs(set_plus: CrossSpectraSet, set_minus: CrossSpectraSet,
                     phi: float = 0.0):
    """LO lock-in separation at the analysis angle (post null rotation)."""
    if set_plus.lo_sign != 1 or set_minus.lo_sign != -1:
        raise ConfigError("combine_lo_signs expects (+LO, -LO) sets in order")
    return combine_spectra(set_plus.spectrum(phi), set_minus.spectrum(phi))


# ---------------------------------------------------------------------------
# electronics calibration


@dataclass
class GainCurve:
    """Smooth |H| estimate over the band, normalized to unit band mean."""

    omega_ref: float
    coeffs: np.ndarray
    coeff_sigma: np.ndarray
    baseline: float

    def __call__(self, omega):
        x = np.asarray(omega, dtype=float) - self.omega_ref
        return np.polynomial.polynomial.polyval(x, self.coeffs)


@dataclass
class PhaseCurve:
    """Apparent quadrature rotation angle vs frequency from comb calibration."""

    omega_ref: float
    coeffs: np.ndarray
    coeff_sigma: np.ndarray
    tone_omegas: np.ndarray
    tone_angles: np.ndarray
    tone_sigmas: np.ndarray

    def __call__(self, omega):
        x = np.asarray(omega, dtype=float) - self.omega_ref
        return np.polynomial.polynomial.polyval(x, self.coeffs)


def calibrate_gain(shot_record: PhotocurrentRecord, poly_order: int = 4,
                   segment_len: int = 512,
                   residual_tolerance: float = 4.0) -> GainCurve:
    """Electronics gain curve from a shot-noise-only record.

    The transduced optical shot noise is flat, so any spectral shape in the
    mean quadrature power is |H_el|^2 (RMS over the two heterodyne sidebands).
    Warns when post-fit residuals exceed the statistical expectation, which
    usually means the record is contaminated (e.g. a mechanical line).
    """
    if shot_record.meta.kind not in ("shot", "heterodyne"):
        raise CalibrationError("gain calibration expects a shot-noise record")
    phase = track_carrier_phase(shot_record)
    pair = demodulate(shot_record, phase)
    spec_a = estimate_cross_spectrum(pair, segment_len=segment_len,
                                     normalization=1.0)
    # mean quadrature power; autospectra live in meta-free ComplexSpectrum, so
    # re-estimate S_aa and S_bb directly
    fs = pair.sample_rate
    win = ssig.get_window("hann", segment_len, fftbins=True)
    starts = _segment_starts(pair.n_samples, segment_len, segment_len // 2,
                             pair.block_len)
    idx = starts[:, None] + np.arange(segment_len)[None, :]
    a = sfft.rfft(pair.x_a[idx] * win, axis=1)
    b = sfft.rfft(pair.x_b[idx] * win, axis=1)
    scale = 2.0 / (fs * np.sum(win**2))
    s_mean = scale * 0.5 * (np.mean(np.abs(a) ** 2, axis=0)
                            + np.mean(np.abs(b) ** 2, axis=0))
    f = sfft.rfftfreq(segment_len, 1.0 / fs)
    band = np.abs(f - pair.f_if) <= pair.band_halfwidth
    omega = pair.omega_center + TWO_PI * (f[band] - pair.f_if)
    s_band = s_mean[band]
    baseline = float(np.mean(s_band))
    g = np.sqrt(s_band / baseline)
    n_eff = _overlap_neff(win, starts.size, segment_len // 2)
    sigma_g = g / math.sqrt(8.0 * n_eff)   # var(sqrt(S)) ~ S/(4*2*n) for two autos
    x = omega - pair.omega_center
    coeffs, cov = _weighted_polyfit(x, g, sigma_g, poly_order)
    resid = (g - np.polynomial.polynomial.polyval(x, coeffs)) / sigma_g
    chi2_dof = float(np.mean(resid**2))
    if chi2_dof > residual_tolerance:
        warnings.warn(
            f"gain calibration residual chi2/dof = {chi2_dof:.2f}: the shot "
            "record looks contaminated (mechanical line or tone in band)",
            stacklevel=2)
    return GainCurve(pair.omega_center, coeffs, np.sqrt(np.diag(cov)), baseline)


def calibrate_phase(comb_record: PhotocurrentRecord, max_order: int = 4,
                    snr_threshold: float = 100.0) -> PhaseCurve:
    """Apparent quadrature rotation vs frequency from a phase-modulation comb.

    Each tone is injected purely in the phase quadrature with a common phase;
    electronics phase dispersion rotates the detected tone by half the arg H
    difference between the two heterodyne sidebands. The per-tone angles are
    interpolated with a polynomial of order min(n_tones - 1, ``max_order``).
    """
    meta = comb_record.meta
    if not meta.comb_tones:
        raise CalibrationError("record carries no comb tones")
    phase = track_carrier_phase(comb_record)
    pair = demodulate(comb_record, phase)
    n = pair.n_samples
    t_spec_a = sfft.fft(pair.x_a * (2.0 / n))
    t_spec_b = sfft.fft(pair.x_b * (2.0 / n))
    f = sfft.fftfreq(n, 1.0 / pair.sample_rate)
    noise_floor = np.median(np.abs(t_spec_b) ** 2)
    angles, sigmas, omegas = [], [], []
    for w_j in meta.comb_tones:
        f_j = pair.f_if + (w_j - pair.omega_center) / TWO_PI
        k = int(np.argmin(np.abs(f - f_j)))
        a_j, b_j = t_spec_a[k], t_spec_b[k]
        snr = (abs(a_j) ** 2 + abs(b_j) ** 2) / max(noise_floor, 1e-300)
        if snr < snr_threshold:
            raise CalibrationError(
                f"comb tone at {w_j:.6g} rad/s below SNR threshold "
                f"({10 * math.log10(max(snr, 1e-12)):.1f} dB)")
        ratio = a_j / b_j
        theta = math.atan(ratio.real)
        angles.append(theta)
        sigmas.append(1.0 / math.sqrt(snr))
        omegas.append(w_j)
    omegas = np.asarray(omegas)
    angles = np.asarray(angles)
    sigmas = np.maximum(np.asarray(sigmas), 1e-6)
    order = min(len(omegas) - 1, max_order)
    x = omegas - pair.omega_center
    coeffs, cov = _weighted_polyfit(x, angles, sigmas, order)
    return PhaseCurve(pair.omega_center, coeffs, np.sqrt(np.diag(cov)),
                      omegas, angles, sigmas)


def _weighted_polyfit(x, y, sigma, order):
    v = np.polynomial.polynomial.polyvander(x, order)
    w = 1.0 / np.asarray(sigma)
    a = v * w[:, None]
    b = np.asarray(y) * w
    coeffs, *_ = np.linalg.lstsq(a, b, rcond=None)
    cov = np.linalg.inv(a.T @ a)
    return coeffs, cov


def apply_electronics_correction(pair: QuadraturePair,
                                 gain: Optional[GainCurve] = None,
                                 phase: Optional[PhaseCurve] = None) -> QuadraturePair:
    """Undo the calibrated electronics response on a quadrature pair.

    Counter-rotates the analytic envelopes by the apparent rotation angle per
    frequency bin and divides out the common gain.
    """
    if gain is None and phase is None:
        return pair
    n = pair.n_samples
    f = sfft.fftfreq(n, 1.0 / pair.sample_rate)
    band = np.abs(f - pair.f_if) <= pair.band_halfwidth * 1.05
    neg_band = np.abs(f + pair.f_if) <= pair.band_halfwidth * 1.05
    omega = pair.omega_center + TWO_PI * (np.abs(f) - pair.f_if)
    spec_a = sfft.fft(pair.x_a)
    spec_b = sfft.fft(pair.x_b)
    sel = band | neg_band
    th = phase(omega[sel]) if phase is not None else 0.0
    g = gain(omega[sel]) if gain is not None else 1.0
    if np.any(np.asarray(g) <= 0):
        raise CalibrationError("gain correction curve is nonpositive in band")
    c, s = np.cos(th), np.sin(th)
    a_new = (c * spec_a[sel] + s * spec_b[sel]) / g
    b_new = (-s * spec_a[sel] + c * spec_b[sel]) / g
    spec_a[sel], spec_b[sel] = a_new, b_new
    corr = set(pair.corrections_applied)
    if gain is not None:
        corr.add("gain")
    if phase is not None:
        corr.add("phase")
    return replace(pair,
                   x_a=sfft.ifft(spec_a).real, x_b=sfft.ifft(spec_b).real,
                   corrections_applied=frozenset(corr))
