"""Closed-form model of the heterodyne-probed optomechanical system.

Everything downstream (synthesis, estimation, thermometry) is tested against
the functions in this module. The model is the linearized single-mode cavity
optomechanics solution in Fourier space, including finite probe detuning,
dynamical backaction, a vacuum loss port folded into the detection efficiency,
and the fluctuation-dissipation thermal force.

Conventions
-----------
* Angular frequencies (rad/s) throughout.
* Spectra are symmetrized (classical-equivalent) and two-sided internally;
  shot-noise-normalized, i.e. the vacuum spectrum of every quadrature is 1.
* Quadrature angles passed to :func:`general_cross_spectrum` are referenced to
  the detected output carrier, which is what a beat-note-referenced
  demodulation measures. At zero detuning this reference coincides (up to an
  overall sign flip of both quadratures, which leaves every correlation
  spectrum unchanged) with the frame in which the intracavity amplitude is
  real, so the closed forms below hold verbatim.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .constants import HBAR, KB
from .errors import ConfigError, UnphysicalResultError
from .params import DeviceParams, ProbeParams, cooperativity
from .spectra import NORM_DISPLACEMENT, NORM_SHOT, ComplexSpectrum

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# susceptibilities and elementary quantities


def mech_susceptibility(omega, p: DeviceParams):
    """chi_m(omega) = 1 / (m (omega_m^2 - omega^2 - i gamma_m omega)).

    Units 1/(kg (rad/s)^2); finite everywhere for gamma_m > 0.
    """
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (p.m * (p.omega_m**2 - omega**2 - 1j * p.gamma_m * omega))


def cavity_susceptibility(omega, p: DeviceParams, pr: ProbeParams):
    """chi_c(omega) = 1 / (kappa/2 - i (omega - delta_p)), units 1/(rad/s)."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (0.5 * p.kappa - 1j * (omega - pr.delta_p))


def _cavity_susceptibility_mirror(omega, p: DeviceParams, pr: ProbeParams):
    # chi_c*(-omega) as an explicit function of +omega
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (0.5 * p.kappa - 1j * (omega + pr.delta_p))


def thermal_occupation(omega: float, t: float) -> float:
    """Bose occupation 1/(exp(hbar omega / kB T) - 1); 0 at T = 0."""
    if omega <= 0:
        raise ConfigError(f"thermal_occupation requires omega > 0, got {omega!r}")
    if t < 0:
        raise ConfigError("temperature must be >= 0")
    if t == 0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega / (KB * t))


def coth_ratio(omega: float, t: float) -> float:
    """coth(hbar omega / 2 kB T): the thermal-to-quantum line-height ratio.

    Equals Re/Im of the thermal correlation at every in-band frequency.
    T = 0 returns the vacuum limit 1; negative T is rejected.
    """
    if omega <= 0:
        raise ConfigError("coth_ratio requires omega > 0")
    if t < 0:
        raise ConfigError("coth_ratio requires T >= 0")
    if t == 0:
        return 1.0
    return 1.0 / math.tanh(HBAR * omega / (2.0 * KB * t))


def fdt_force_psd(omega, p: DeviceParams, t: float, one_sided: bool = False):
    """Thermal Langevin force spectral density m gamma_m hbar omega coth(hbar omega/2kT).

    Default is the symmetrized two-sided density in N^2 s/rad (high-T limit
    2 m gamma_m kB T, T=0 floor m gamma_m hbar omega). ``one_sided=True``
    returns the one-sided N^2/Hz convention, a factor 2 larger.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ConfigError("fdt_force_psd requires omega >= 0")
    if t < 0:
        raise ConfigError("temperature must be >= 0")
    if t == 0:
        s = p.m * p.gamma_m * HBAR * omega
    else:
        x = HBAR * omega / (2.0 * KB * t)
        # omega*coth(x) -> 2 kB T / hbar as omega -> 0
        small = x < 1e-8
        with np.errstate(divide="ignore", invalid="ignore"):
            wcoth = np.where(small, (2.0 * KB * t / HBAR) * (1.0 + x * x / 3.0),
                             omega / np.tanh(np.where(small, 1.0, x)))
        s = p.m * p.gamma_m * HBAR * wcoth
    return 2.0 * s if one_sided else s


def transduction_strength(omega, p: DeviceParams, pr: ProbeParams):
    """Optomechanical transduction D = 2 hbar eps nbar G^2 kappa / (kappa^2/4 + omega^2).

    Valid at delta_p = 0 (the closed-form spectra below use it); units kg/s^2,
    so D*chi_m is dimensionless. Algebraically identical to
    4 eps kappa g0^2 nbar m omega_m |chi_c|^2 on resonance.
    """
    omega = np.asarray(omega, dtype=float)
    g_big = p.big_g
    return 2.0 * HBAR * pr.eps * pr.nbar * g_big**2 * p.kappa / (
        0.25 * p.kappa**2 + omega**2)


def _require_resonant(pr: ProbeParams, what: str):
    if pr.delta_p != 0.0:
        raise ConfigError(
            f"{what} is a delta_p = 0 closed form; use general_cross_spectrum "
            f"for detuned probes (delta_p = {pr.delta_p:g} rad/s)")


# ---------------------------------------------------------------------------
# closed-form correlation spectra (delta_p = 0)


def quantum_correlation_spectrum(grid, p: DeviceParams, pr: ProbeParams) -> ComplexSpectrum:
    """Amplitude-phase cross-spectrum S_{0,pi/2}(omega) = D(omega) chi_m(omega).

    Real part dispersive, imaginary part the absorptive Lorentzian; shot units.
    """
    _require_resonant(pr, "quantum_correlation_spectrum")
    grid = np.asarray(grid, dtype=float)
    vals = transduction_strength(grid, p, pr) * mech_susceptibility(grid, p)
    return ComplexSpectrum(grid, vals, NORM_SHOT)


def thermal_correlation_spectrum(grid, p: DeviceParams, pr: ProbeParams,
                                 include_rpsn: bool = False) -> ComplexSpectrum:
    """Rotated-quadrature cross-spectrum S_{pi/4,3pi/4}(omega).

    Re: thermal Lorentzian 2 D Im{chi_m} (n_th + 1/2), plus the radiation
    pressure backaction term eps|beta|^2/2 when ``include_rpsn`` is set.
    Im: identically the imaginary part of the quantum correlation.
    """
    _require_resonant(pr, "thermal_correlation_spectrum")
    grid = np.asarray(grid, dtype=float)
    d = transduction_strength(grid, p, pr)
    chi = mech_susceptibility(grid, p)
    nth_half = 0.5 * coth_vec(grid, pr.t_bath)
    re = 2.0 * d * chi.imag * nth_half
    if include_rpsn:
        beta = d * chi / pr.eps  # pre-detection backaction transfer
        re = re + 0.5 * pr.eps * np.abs(beta) ** 2
    im = d * chi.imag
    return ComplexSpectrum(grid, re + 1j * im, NORM_SHOT)


def coth_vec(omega, t: float):
    """Vectorized coth(hbar omega / 2 kB T) for positive omega arrays."""
    omega = np.asarray(omega, dtype=float)
    if t == 0:
        return np.ones_like(omega)
    x = HBAR * omega / (2.0 * KB * t)
    return 1.0 / np.tanh(x)


# ---------------------------------------------------------------------------
# full detuned solution


def _output_field_coeffs(omega, p: DeviceParams, pr: ProbeParams):
    """Transfer coefficients of the detected output fluctuation field.

    d_out(omega) = A xi(omega) + B xi^dag(omega) + C dF_th(omega), in the frame
    where the intracavity amplitude is real. Includes the dynamical-backaction
    denominator.
    """
    chi_m = mech_susceptibility(omega, p)
    chi_c = cavity_susceptibility(omega, p, pr)
    chi_cm = _cavity_susceptibility_mirror(omega, p, pr)
    g_big = p.big_g
    gn = HBAR * g_big**2 * pr.nbar
    chi_eff = chi_m / (1.0 - 1j * gn * chi_m * (chi_c - chi_cm))
    a = (1.0 - p.kappa * chi_c) - 1j * p.kappa * gn * chi_c**2 * chi_eff
    b = -1j * p.kappa * gn * chi_c * chi_cm * chi_eff
    c = 1j * math.sqrt(p.kappa) * g_big * pr.abar * chi_c * chi_eff
    return a, b, c


def quadrature_coeffs(phi, omega, p: DeviceParams, pr: ProbeParams):
    """(u, v, w) such that X_phi(omega) = u xi + v xi^dag + w dF_th.

    Angles here are in the intracavity (abar real) frame; the public spectrum
    functions shift them to the detected-carrier reference.
    """
    omega = np.asarray(omega, dtype=float)
    a, b, c = _output_field_coeffs(omega, p, pr)
    am, bm, cm = _output_field_coeffs(-omega, p, pr)
    amc, bmc, cmc = np.conj(am), np.conj(bm), np.conj(cm)
    cphi, sphi = math.cos(phi), math.sin(phi)
    u = cphi * (a + bmc) - 1j * sphi * (a - bmc)
    v = cphi * (b + amc) - 1j * sphi * (b - amc)
    w = cphi * (c + cmc) - 1j * sphi * (c - cmc)
    return u, v, w


def carrier_reference_angle(p: DeviceParams, pr: ProbeParams) -> float:
    """Angle of the detected output carrier in the intracavity frame.

    arg(a_out/|a_in|) = pi - atan(2 delta_p / kappa): the promptly reflected
    carrier picks up the static cavity rotation. Demodulating against the beat
    note references all measured quadratures to this angle.
    """
    return math.pi - math.atan(2.0 * pr.delta_p / p.kappa)


def general_cross_spectrum(phi1: float, phi2: float, grid, p: DeviceParams,
                           pr: ProbeParams) -> ComplexSpectrum:
    """Symmetrized cross-spectrum of detected quadratures X_phi1, X_phi2.

    Full finite-detuning solution: dynamical backaction, vacuum loss port at
    efficiency eps, FDT thermal force. Reduces to the closed forms at
    delta_p = 0. Warns when |delta_p| is not small compared to kappa, where
    the linearized weak-probe treatment degrades.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise ConfigError("general_cross_spectrum expects a positive frequency band")
    if abs(pr.delta_p) > 0.02 * p.kappa:
        warnings.warn(
            f"|delta_p| = {abs(pr.delta_p):.3g} rad/s exceeds 2% of kappa; "
            "the weak-detuning model is unreliable this far off resonance",
            stacklevel=2)
    theta = carrier_reference_angle(p, pr)
    a1, a2 = phi1 + theta, phi2 + theta
    u1m, v1m, w1m = quadrature_coeffs(a1, -grid, p, pr)
    u2, v2, w2 = quadrature_coeffs(a2, grid, p, pr)
    u2m, v2m, w2m = quadrature_coeffs(a2, -grid, p, pr)
    u1, v1, w1 = quadrature_coeffs(a1, grid, p, pr)
    sff = fdt_force_psd(grid, p, pr.t_bath)
    shot = 0.5 * (u1m * v2 + u2 * v1m)
    therm = w1m * w2 * sff
    vals = pr.eps * (shot + therm) + (1.0 - pr.eps) * math.cos(phi2 - phi1)
    return ComplexSpectrum(grid, vals, NORM_SHOT)


def quadrature_spectral_matrix(phis, grid, p: DeviceParams, pr: ProbeParams):
    """Map phi -> S_{phi, phi+pi/2} for a list of analysis angles."""
    return {phi: general_cross_spectrum(phi, phi + 0.5 * math.pi, grid, p, pr)
            for phi in phis}


# ---------------------------------------------------------------------------
# conversions and derived figures


def to_displacement_units(spec: ComplexSpectrum, p: DeviceParams,
                          pr: ProbeParams) -> ComplexSpectrum:
    """Convert a shot-normalized spectrum to one-sided displacement units m^2/Hz.

    The transduction gain from displacement PSD to shot units is D(omega)/hbar,
    so values are multiplied by hbar/D (two-sided, per rad/s) and then by 4*pi
    (factor 2 one-sided, factor 2*pi per Hz).
    """
    if spec.norm != NORM_SHOT:
        raise ConfigError("expected a shot-noise-normalized spectrum")
    d = transduction_strength(spec.freqs, p, pr)
    scale = HBAR / d * 4.0 * math.pi
    sigma = None if spec.sigma is None else spec.sigma * scale
    return ComplexSpectrum(spec.freqs.copy(), spec.values * scale,
                           NORM_DISPLACEMENT, sigma=sigma, n_avg=spec.n_avg,
                           meta=dict(spec.meta))


def rpsn_force_psd(omega, p: DeviceParams, pr: ProbeParams):
    """Symmetrized two-sided radiation-pressure shot-noise force density (N^2 s/rad)."""
    omega = np.asarray(omega, dtype=float)
    chi_c = cavity_susceptibility(omega, p, pr)
    return (HBAR * p.big_g * pr.abar) ** 2 * p.kappa * np.abs(chi_c) ** 2


def rpsn_thermal_motion_ratio(p: DeviceParams, pr: ProbeParams) -> float:
    """Backaction-driven to thermally driven motion PSD ratio at omega_m.

    Equals C kappa^2 |chi_c(omega_m)|^2 / (2 coth(hbar omega_m / 2 kB T)); the
    same susceptibility filters both forces, so this is a pure force-PSD ratio.
    """
    num = rpsn_force_psd(p.omega_m, p, pr)
    den = fdt_force_psd(p.omega_m, p, pr.t_bath)
    return float(num / den)


def quantum_thermal_peak_ratio(p: DeviceParams, pr: ProbeParams) -> float:
    """Peak |Im S_{0,pi/2}| over the thermal Lorentzian height: 1/coth."""
    return 1.0 / coth_ratio(p.omega_m, pr.t_bath)


def noise_budget(omega, p: DeviceParams, pr: ProbeParams) -> dict:
    """Displacement-referred noise budget (two-sided, m^2 s/rad).

    imprecision: shot-noise measurement floor hbar/D(omega)
    backaction:  RPSN-driven motion |chi_m|^2 S_FF^rpsn
    brownian:    thermally driven motion |chi_m|^2 S_FF^th
    The imprecision-backaction product is hbar^2 |chi_m|^2 / (2 eps),
    independent of probe power.
    """
    omega = np.asarray(omega, dtype=float)
    chi2 = np.abs(mech_susceptibility(omega, p)) ** 2
    imp = HBAR / transduction_strength(omega, p, pr)
    ba = chi2 * rpsn_force_psd(omega, p, pr)
    th = chi2 * fdt_force_psd(omega, p, pr.t_bath)
    return {"imprecision": imp, "backaction": ba, "brownian": th,
            "total": imp + ba + th, "product": imp * ba}


def displacement_variance(p: DeviceParams, t: float, n_sigma_band: float = None) -> float:
    """<x^2> from quadrature of |chi_m|^2 S_FF over the full band (m^2).

    Equals (n_th + 1/2) * hbar / (m omega_m) up to O(1/Q) corrections.
    """
    from scipy.integrate import quad

    def integrand(w):
        chi2 = abs(mech_susceptibility(w, p)) ** 2
        return chi2 * float(fdt_force_psd(w, p, t))

    # the line carries almost all the variance; integrate it separately
    w_lo = max(p.omega_m - 50 * p.gamma_m, 0.0)
    w_hi = p.omega_m + 50 * p.gamma_m
    v_line, _ = quad(integrand, w_lo, w_hi, limit=400,
                     points=[p.omega_m - p.gamma_m, p.omega_m, p.omega_m + p.gamma_m])
    v_left, _ = quad(integrand, 0.0, w_lo, limit=400)
    v_right, _ = quad(integrand, w_hi, 20 * p.omega_m, limit=400)
    # two-sided: spectrum is even in omega
    return 2.0 * (v_line + v_left + v_right) / TWO_PI
