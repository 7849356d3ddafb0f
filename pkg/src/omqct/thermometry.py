"""Temperature extraction and stability statistics.

Two thermometry readings from the fitted line amplitudes:

ratio methods   A/2B (thermal Lorentzian height over twice the quantum
                dispersive peak-to-peak). Within the model A/2B = n + 1/2
                exactly at line center, so besides the high-temperature
                approximation T ~ (A/2B) hbar w / kB the exact Bose inversion
                is available.
coth method     Re/Im height ratio of the thermal correlation equals
                coth(hbar w / 2 kB T); valid on resonant-probe data only.

Plus the overlapping Allan deviation of temperature sequences and the
zero-power self-heating extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constants import HBAR, KB
from .errors import ConfigError, FitError, UnphysicalResultError
from .fits import FitResult
from .spectra import ComplexSpectrum


@dataclass
class TemperatureEstimate:
    t: float
    sigma_t: float
    method: str                  # ratio_approx | ratio_exact | coth | extrapolation
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.t > 0):
            raise UnphysicalResultError(f"nonpositive temperature {self.t!r}")
        if not (self.sigma_t > 0):
            raise UnphysicalResultError("temperature uncertainty must be > 0")


def _ratio_sigma(a, b, var_a, var_b, cov_ab):
    r = a / (2.0 * b)
    var_r = r * r * (var_a / a**2 + var_b / b**2 - 2.0 * cov_ab / (a * b))
    return r, math.sqrt(max(var_r, 0.0))


def temperature_from_ratio(joint: FitResult, omega_m: Optional[float] = None,
                           min_significance: float = 3.0):
    """(approximate, exact) temperature estimates from a joint A/B fit.

    ratio_approx: T = (A/2B) hbar omega_m / kB.
    ratio_exact:  A/2B = n + 1/2 -> T = hbar omega_m / (kB ln(1 + 1/n)).
    Requires the dispersive amplitude significant at ``min_significance`` sigma.
    """
    if joint.amplitude_b is None:
        raise FitError("temperature_from_ratio needs a joint fit with A and B")
    a, b = joint.amplitude, joint.amplitude_b
    cov = joint.amplitude_covariance()
    sig_b = math.sqrt(max(cov[1, 1], 0.0))
    if not (b > 0) or b < min_significance * sig_b:
        raise UnphysicalResultError(
            f"quantum correlation amplitude B = {b:.3g} +- {sig_b:.3g} is not "
            f"significant at {min_significance:g} sigma")
    w = omega_m if omega_m is not None else joint.center
    r, sigma_r = _ratio_sigma(a, b, cov[0, 0], cov[1, 1], cov[0, 1])
    t_scale = HBAR * w / KB
    approx = TemperatureEstimate(
        t=r * t_scale, sigma_t=sigma_r * t_scale, method="ratio_approx",
        inputs=dict(a=a, b=b, ratio=r, sigma_ratio=sigma_r, omega_m=w))
    nbar = r - 0.5
    if nbar <= 0:
        raise UnphysicalResultError(
            f"A/2B = {r:.4g} <= 1/2: occupation would be nonpositive "
            "(vacuum limit reached)")
    log_term = math.log1p(1.0 / nbar)
    t_exact = t_scale / log_term
    # dT/dn = t_scale / (log^2) * 1/(n(n+1))
    dt_dn = t_scale / (log_term**2 * nbar * (nbar + 1.0))
    exact = TemperatureEstimate(
        t=t_exact, sigma_t=abs(dt_dn) * sigma_r, method="ratio_exact",
        inputs=dict(a=a, b=b, ratio=r, sigma_ratio=sigma_r, nbar=nbar, omega_m=w))
    return approx, exact


def temperature_from_coth(reim: FitResult, min_significance: float = 3.0,
                          delta_p: float = 0.0) -> TemperatureEstimate:
    """Temperature from the Re/Im height ratio of the thermal correlation.

    The imaginary channel is purely quantum only for a resonant probe, so
    detuned data is rejected (there is no postprocessing rotation that can
    separate it, unlike the real channel).
    """
    if delta_p != 0.0:
        raise ConfigError(
            "coth thermometry requires resonant-probe data (delta_p = 0); the "
            "imaginary channel cannot be rotation-nulled at finite detuning")
    if reim.amplitude_b is None:
        raise FitError("temperature_from_coth needs the joint Re/Im fit")
    a, h = reim.amplitude, reim.amplitude_b
    cov = reim.amplitude_covariance()
    sig_h = math.sqrt(max(cov[1, 1], 0.0))
    if not (h > 0) or h < min_significance * sig_h:
        raise UnphysicalResultError(
            f"imaginary line height {h:.3g} +- {sig_h:.3g} is not significant")
    r, sigma_r = _ratio_sigma(a, h, cov[0, 0], cov[1, 1], cov[0, 1])
    r, sigma_r = 2.0 * r, 2.0 * sigma_r   # _ratio_sigma returns a/(2b)
    if r <= 1.0:
        raise UnphysicalResultError(
            f"Re/Im ratio {r:.4g} <= 1 is unphysical (coth >= 1); check "
            "normalization and fit band")
    x = math.atanh(1.0 / r)               # hbar w / 2 kB T
    t = HBAR * reim.center / (2.0 * KB * x)
    # dT/dr via dx/dr = -1/(r^2 - 1)
    dt_dr = t / x * (1.0 / (r * r - 1.0))
    return TemperatureEstimate(
        t=t, sigma_t=abs(dt_dr) * sigma_r, method="coth",
        inputs=dict(re_height=a, im_height=h, ratio=r, sigma_ratio=sigma_r,
                    omega_m=reim.center))


# ---------------------------------------------------------------------------
# Allan deviation


@dataclass
class AllanResult:
    taus: np.ndarray
    adev: np.ndarray
    adev_sigma: np.ndarray
    white_coeff: float           # a in adev ~ a / sqrt(tau), units K/sqrt(Hz)
    white_coeff_sigma: float

    def as_rows(self):
        return np.column_stack([self.taus, self.adev, self.adev_sigma])


def allan_deviation(t_series: Sequence[float], interval: float,
                    tau_grid: Optional[Sequence[int]] = None,
                    min_points: int = 8) -> AllanResult:
    """Overlapping Allan deviation of a uniformly spaced temperature series.

    ``tau_grid`` lists averaging factors m (tau = m * interval); default is an
    octave grid. Requires at least ``min_points`` differences at the largest
    tau. Also fits a/sqrt(tau), the white-noise signature; for white noise of
    standard deviation sigma the expected coefficient is sigma*sqrt(interval).
    """
    y = np.asarray(t_series, dtype=float)
    n = y.size
    if n < 4:
        raise ConfigError("Allan deviation needs at least 4 points")
    if interval <= 0:
        raise ConfigError("interval must be positive")
    if tau_grid is None:
        tau_grid = []
        m = 1
        while n - 2 * m + 1 >= min_points:
            tau_grid.append(m)
            m *= 2
    ms = [int(m) for m in tau_grid]
    if not ms:
        raise ConfigError("no tau values allowed by the series length")
    if n - 2 * max(ms) + 1 < min_points:
        raise ConfigError(
            f"fewer than {min_points} differences at the largest tau; "
            "shorten tau_grid or lengthen the series")
    csum = np.concatenate([[0.0], np.cumsum(y)])
    taus, adevs, sigmas = [], [], []
    for m in ms:
        block = (csum[m:] - csum[:-m]) / m   # running m-sample means, len n-m+1
        d = block[m:] - block[:-m]           # overlapping two-sample differences
        avar = 0.5 * np.mean(d**2)
        adev = math.sqrt(avar)
        n_d = d.size
        # white-noise estimator scatter ~ adev / sqrt(2 (n_d - 1) / m-ish)
        n_indep = max(n_d / m, 1.0)
        sigma = adev / math.sqrt(2.0 * n_indep)
        taus.append(m * interval)
        adevs.append(adev)
        sigmas.append(sigma)
    taus = np.asarray(taus)
    adevs = np.asarray(adevs)
    sigmas = np.asarray(sigmas)
    # weighted fit of a / sqrt(tau)
    basis = 1.0 / np.sqrt(taus)
    w = 1.0 / sigmas**2
    a = float(np.sum(w * basis * adevs) / np.sum(w * basis**2))
    sig_a = float(1.0 / math.sqrt(np.sum(w * basis**2)))
    return AllanResult(taus, adevs, sigmas, a, sig_a)


# ---------------------------------------------------------------------------
# zero-power extrapolation


def extrapolate_zero_power(points: Sequence[tuple]) -> TemperatureEstimate:
    """Weighted linear extrapolation of T(P) to zero probe power.

    ``points`` is a sequence of (power, T, sigma_T); at least three points
    with positive powers are required. The slope is reported as the heating
    coefficient in the estimate's inputs.
    """
    pts = list(points)
    if len(pts) < 3:
        raise ConfigError("zero-power extrapolation needs at least 3 power points")
    p = np.array([q[0] for q in pts], dtype=float)
    t = np.array([q[1] for q in pts], dtype=float)
    s = np.array([q[2] for q in pts], dtype=float)
    if np.any(p <= 0):
        raise ConfigError("powers must be positive")
    if np.any(s <= 0):
        raise ConfigError("temperature uncertainties must be positive")
    w = 1.0 / s**2
    sw, sx = w.sum(), (w * p).sum()
    sxx, sy, sxy = (w * p * p).sum(), (w * t).sum(), (w * p * t).sum()
    det = sw * sxx - sx * sx
    intercept = (sxx * sy - sx * sxy) / det
    slope = (sw * sxy - sx * sy) / det
    var_intercept = sxx / det
    return TemperatureEstimate(
        t=float(intercept), sigma_t=math.sqrt(var_intercept),
        method="extrapolation",
        inputs=dict(heating_coeff=float(slope),
                    heating_coeff_sigma=math.sqrt(sw / det),
                    n_points=len(pts)))
