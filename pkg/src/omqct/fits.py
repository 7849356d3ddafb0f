"""Weighted line fits: thermal Lorentzian and quantum dispersive shapes.

Damped least squares (Levenberg-Marquardt via scipy) with analytic Jacobians,
relative step tolerance 1e-10, 200-evaluation cap. Frequencies are scaled by
the initial linewidth internally so the solver sees O(1) parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError
from .spectra import ComplexSpectrum

XTOL = 1e-10
MAX_NFEV = 200


def lorentzian(omega, amp, center, width, offset=0.0):
    """amp * (w/2)^2 / ((omega-center)^2 + (w/2)^2) + offset; width is FWHM."""
    h = 0.5 * width
    return amp * h * h / ((omega - center) ** 2 + h * h) + offset


def dispersive(omega, amp, center, width, offset=0.0):
    """amp * (center-omega)(w/2) / ((omega-center)^2 + (w/2)^2) + offset.

    Peak-to-peak equals ``amp`` (extrema +-amp/2 at center -+ w/2).
    """
    h = 0.5 * width
    return amp * (center - omega) * h / ((omega - center) ** 2 + h * h) + offset


def _shape_columns(omega, center, width):
    """(L, Dsp, dL/dc, dL/dw, dD/dc, dD/dw) for the analytic Jacobians."""
    h = 0.5 * width
    d = (omega - center) ** 2 + h * h
    lor = h * h / d
    dsp = (center - omega) * h / d
    # analytic derivatives with dh/dw = 1/2, dD/dw = h, dD/dc = 2(c - x)
    dl_dc = 2.0 * h * h * (omega - center) / d**2
    dl_dw = h * (omega - center) ** 2 / d**2
    dd_dc = h * (h * h - (center - omega) ** 2) / d**2
    dd_dw = (center - omega) * (0.5 * d - h * h) / d**2
    return lor, dsp, dl_dc, dl_dw, dd_dc, dd_dw


@dataclass
class FitResult:
    """Line-fit output; ``width`` is the FWHM."""

    amplitude: float
    center: float
    width: float
    offset: float
    covariance: np.ndarray
    residual_chi2: float
    n_dof: int
    model_tag: str
    amplitude_b: Optional[float] = None     # dispersive amplitude in joint fits
    offset_b: Optional[float] = None
    param_names: tuple = ()

    @property
    def amplitude_sigma(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    @property
    def amplitude_b_sigma(self) -> float:
        if self.amplitude_b is None:
            raise FitError("fit has no dispersive component")
        i = self.param_names.index("B")
        return math.sqrt(max(self.covariance[i, i], 0.0))

    @property
    def chi2_per_dof(self) -> float:
        return self.residual_chi2 / max(self.n_dof, 1)

    def amplitude_covariance(self) -> np.ndarray:
        """2x2 covariance of (A, B) for joint fits."""
        ia = self.param_names.index("A")
        ib = self.param_names.index("B")
        idx = np.array([ia, ib])
        return self.covariance[np.ix_(idx, idx)]


def _prepare(spec: ComplexSpectrum, band, use: str):
    s = spec if band is None else spec.band(*band)
    if len(s) < 8:
        raise FitError("fit band contains fewer than 8 bins")
    y = s.values.real if use == "re" else s.values.imag
    if s.sigma is not None:
        sig = s.sigma.real if use == "re" else s.sigma.imag
        sig = np.where(sig > 0, sig, np.max(sig) if np.max(sig) > 0 else 1.0)
    else:
        sig = np.ones_like(y)
    return s.freqs, y, sig


def _cov_inflation(*specs) -> float:
    # estimator bins are window-correlated; parameter covariances scale by
    # the stored inflation factor (1 for analytic/uncorrelated spectra)
    vals = [s.meta.get("fit_variance_inflation", 1.0) for s in specs]
    return float(max(vals))


def _initial_line_guess(x, y, center0=None, width0=None):
    from scipy.ndimage import uniform_filter1d

    n = x.size
    edge = max(2, n // 10)
    offset = float(np.median(np.concatenate([y[:edge], y[-edge:]])))
    k = max(3, n // 40) | 1
    ys = uniform_filter1d(y - offset, k, mode="nearest")
    i_pk = int(np.argmax(np.abs(ys)))
    amp = ys[i_pk]
    if center0 is None:
        center0 = x[i_pk]
    if width0 is None:
        half = np.abs(ys) >= 0.5 * abs(amp)
        width0 = max((x[half].max() - x[half].min()), 4 * (x[1] - x[0]))
    return amp, center0, width0, offset


def _run_lm(residual_jac, p0, x_scale, names, n_points):
    try:
        res = least_squares(lambda p: residual_jac(p)[0], p0,
                            jac=lambda p: residual_jac(p)[1],
                            method="lm", xtol=XTOL, ftol=1e-12, gtol=1e-12,
                            max_nfev=MAX_NFEV, x_scale=x_scale)
    except Exception as exc:  # singular Jacobians etc.
        raise FitError(f"least-squares solver failed: {exc}") from exc
    if not res.success and res.status <= 0:
        raise FitError(f"fit did not converge within {MAX_NFEV} evaluations")
    jac = res.jac
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError as exc:
        raise FitError("degenerate fit: covariance is singular") from exc
    chi2 = float(np.sum(res.fun**2))
    return res.x, cov, chi2, n_points - len(p0)


def _check_line_sanity(center, width, x, tag):
    span = x[-1] - x[0]
    spacing = np.median(np.diff(x))
    if not (x[0] <= center <= x[-1]):
        raise FitError(f"{tag} fit center {center:.6g} escaped the fit band "
                       "(no line in band?)")
    if width < 2.0 * spacing:
        raise FitError(f"{tag} fit width collapsed to the grid spacing")
    if width > 4.0 * span:
        raise FitError(f"{tag} fit width diverged beyond the fit band")


def fit_lorentzian(spec: ComplexSpectrum, band=None, use: str = "re",
                   center0=None, width0=None) -> FitResult:
    """Weighted Lorentzian + offset fit of Re (or Im) of a spectrum.

    ``center0``/``width0`` seed the solver (e.g. the nominal line position
    and linewidth) when the per-bin SNR is too low for blind peak finding.
    """
    x, y, sig = _prepare(spec, band, use)
    a0, c0, w0, off0 = _initial_line_guess(x, y, center0, width0)
    scale = w0

    def residual_jac(p):
        amp, cen, wid, off = p[0], c0 + p[1] * scale, abs(p[2]) * scale, p[3]
        lor, _, dl_dc, dl_dw, _, _ = _shape_columns(x, cen, wid)
        r = (amp * lor + off - y) / sig
        jac = np.empty((x.size, 4))
        jac[:, 0] = lor / sig
        jac[:, 1] = amp * dl_dc * scale / sig
        jac[:, 2] = amp * dl_dw * scale * np.sign(p[2]) / sig
        jac[:, 3] = 1.0 / sig
        return r, jac

    p, cov, chi2, dof = _run_lm(residual_jac, [a0, 0.0, w0 / scale, off0],
                                [max(abs(a0), 1e-12), 0.1, 0.1, max(abs(a0), 1e-12)],
                                ("A", "center", "width", "offset"), x.size)
    center = c0 + p[1] * scale
    width = abs(p[2]) * scale
    _check_line_sanity(center, width, x, "lorentzian")
    # covariance back to physical units
    scale_vec = np.array([1.0, scale, scale, 1.0])
    cov = cov * np.outer(scale_vec, scale_vec) * _cov_inflation(spec)
    return FitResult(p[0], center, width, p[3], cov, chi2, dof, "lorentzian",
                     param_names=("A", "center", "width", "offset"))


def fit_dispersive(spec: ComplexSpectrum, band=None, use: str = "re") -> FitResult:
    """Weighted dispersive-shape fit; ``amplitude`` is the peak-to-peak value."""
    x, y, sig = _prepare(spec, band, use)
    edge = max(2, x.size // 10)
    off0 = float(np.median(np.concatenate([y[:edge], y[-edge:]])))
    yc = y - off0
    i_max, i_min = int(np.argmax(yc)), int(np.argmin(yc))
    b0 = yc[i_max] - yc[i_min]
    c0 = 0.5 * (x[i_max] + x[i_min])
    w0 = max(abs(x[i_min] - x[i_max]), 4 * (x[1] - x[0]))
    scale = w0

    def residual_jac(p):
        amp, cen, wid, off = p[0], c0 + p[1] * scale, abs(p[2]) * scale, p[3]
        _, dsp, _, _, dd_dc, dd_dw = _shape_columns(x, cen, wid)
        r = (amp * dsp + off - y) / sig
        jac = np.empty((x.size, 4))
        jac[:, 0] = dsp / sig
        jac[:, 1] = amp * dd_dc * scale / sig
        jac[:, 2] = amp * dd_dw * scale * np.sign(p[2]) / sig
        jac[:, 3] = 1.0 / sig
        return r, jac

    p, cov, chi2, dof = _run_lm(residual_jac, [b0, 0.0, 1.0, off0],
                                [max(abs(b0), 1e-12), 0.1, 0.1, max(abs(b0), 1e-12)],
                                ("B", "center", "width", "offset"), x.size)
    center = c0 + p[1] * scale
    width = abs(p[2]) * scale
    _check_line_sanity(center, width, x, "dispersive")
    scale_vec = np.array([1.0, scale, scale, 1.0])
    cov = cov * np.outer(scale_vec, scale_vec) * _cov_inflation(spec)
    return FitResult(p[0], center, width, p[3], cov, chi2, dof, "dispersive",
                     param_names=("B", "center", "width", "offset"))


def fit_line_components(spec: ComplexSpectrum, band=None,
                        shape: Optional[tuple] = None,
                        center_hint: Optional[float] = None) -> FitResult:
    """Joint (Lorentzian A + dispersive B + offset) decomposition of Re{S}.

    With ``shape`` = (center, width) given, the problem is linear and solved
    exactly; otherwise the shape parameters are fitted too. Used by the
    phi-scan null finder, where the shape comes from the most
    thermal-dominated scan angle.
    """
    x, y, sig = _prepare(spec, band, "re")
    if shape is not None:
        center, width = shape
        lor, dsp, *_ = _shape_columns(x, center, width)
        basis = np.vstack([lor, dsp, np.ones_like(x)]).T
        a = basis / sig[:, None]
        b = y / sig
        coef, *_ = np.linalg.lstsq(a, b, rcond=None)
        cov = np.linalg.inv(a.T @ a) * _cov_inflation(spec)
        chi2 = float(np.sum((a @ coef - b) ** 2))
        return FitResult(coef[0], center, width, coef[2], cov, chi2,
                         x.size - 3, "joint",
                         amplitude_b=coef[1],
                         param_names=("A", "B", "offset"))

    a0, c0g, w0, off0 = _initial_line_guess(x, y, center_hint, None)
    scale = w0

    def residual_jac(p):
        amp_a, amp_b = p[0], p[1]
        cen, wid, off = c0g + p[2] * scale, abs(p[3]) * scale, p[4]
        lor, dsp, dl_dc, dl_dw, dd_dc, dd_dw = _shape_columns(x, cen, wid)
        r = (amp_a * lor + amp_b * dsp + off - y) / sig
        jac = np.empty((x.size, 5))
        jac[:, 0] = lor / sig
        jac[:, 1] = dsp / sig
        jac[:, 2] = (amp_a * dl_dc + amp_b * dd_dc) * scale / sig
        jac[:, 3] = (amp_a * dl_dw + amp_b * dd_dw) * scale * np.sign(p[3]) / sig
        jac[:, 4] = 1.0 / sig
        return r, jac

    s0 = max(abs(a0), 1e-12)
    p, cov, chi2, dof = _run_lm(residual_jac, [a0, 0.0, 0.0, 1.0, off0],
                                [s0, s0, 0.1, 0.1, s0],
                                ("A", "B", "center", "width", "offset"), x.size)
    center = c0g + p[2] * scale
    width = abs(p[3]) * scale
    _check_line_sanity(center, width, x, "joint")
    scale_vec = np.array([1.0, 1.0, scale, scale, 1.0])
    cov = cov * np.outer(scale_vec, scale_vec) * _cov_inflation(spec)
    return FitResult(p[0], center, width, p[4], cov, chi2, dof, "joint",
                     amplitude_b=p[1],
                     param_names=("A", "B", "center", "width", "offset"))


def fit_thermal_quantum_joint(thermal: ComplexSpectrum, quantum: ComplexSpectrum,
                              band=None) -> FitResult:
    """Simultaneous fit of the thermal Lorentzian height A (Re of the thermal
    spectrum) and the quantum dispersive peak-to-peak B (Re of the quantum
    spectrum) with shared center and width.

    This is the thermometry default: both observables come from the same
    mechanical line, so sharing (center, width) uses the data fully and makes
    the A/B covariance explicit.
    """
    x1, y1, s1 = _prepare(thermal, band, "re")
    x2, y2, s2 = _prepare(quantum, band, "re")
    a0, c0, w0, off1 = _initial_line_guess(x1, y1)
    scale = w0
    yc2 = y2 - np.median(y2)
    b0 = float(yc2.max() - yc2.min())
    n1 = x1.size

    def residual_jac(p):
        amp_a, amp_b = p[0], p[1]
        cen, wid = c0 + p[2] * scale, abs(p[3]) * scale
        o1, o2 = p[4], p[5]
        l1, _, dl_dc1, dl_dw1, _, _ = _shape_columns(x1, cen, wid)
        _, d2, _, _, dd_dc2, dd_dw2 = _shape_columns(x2, cen, wid)
        r = np.concatenate([(amp_a * l1 + o1 - y1) / s1,
                            (amp_b * d2 + o2 - y2) / s2])
        jac = np.zeros((x1.size + x2.size, 6))
        jac[:n1, 0] = l1 / s1
        jac[n1:, 1] = d2 / s2
        jac[:n1, 2] = amp_a * dl_dc1 * scale / s1
        jac[n1:, 2] = amp_b * dd_dc2 * scale / s2
        jac[:n1, 3] = amp_a * dl_dw1 * scale * np.sign(p[3]) / s1
        jac[n1:, 3] = amp_b * dd_dw2 * scale * np.sign(p[3]) / s2
        jac[:n1, 4] = 1.0 / s1
        jac[n1:, 5] = 1.0 / s2
        return r, jac

    s0 = max(abs(a0), 1e-12)
    p, cov, chi2, dof = _run_lm(
        residual_jac, [a0, b0, 0.0, 1.0, off1, float(np.median(y2))],
        [s0, max(abs(b0), s0 * 1e-6), 0.1, 0.1, s0, s0],
        ("A", "B", "center", "width", "offset", "offset_b"),
        x1.size + x2.size)
    center = c0 + p[2] * scale
    width = abs(p[3]) * scale
    _check_line_sanity(center, width, x1, "joint")
    scale_vec = np.array([1.0, 1.0, scale, scale, 1.0, 1.0])
    cov = cov * np.outer(scale_vec, scale_vec) * _cov_inflation(thermal, quantum)
    return FitResult(p[0], center, width, p[4], cov, chi2, dof, "joint",
                     amplitude_b=p[1], offset_b=p[5],
                     param_names=("A", "B", "center", "width", "offset", "offset_b"))


def fit_reim_joint(spec: ComplexSpectrum, band=None) -> FitResult:
    """Joint Lorentzian fits of Re and Im of one spectrum with shared shape.

    Returns amplitude = Re height (A) and amplitude_b = Im height (h); their
    ratio feeds the coth thermometry relation.
    """
    x1, y1, s1 = _prepare(spec, band, "re")
    _, y2, s2 = _prepare(spec, band, "im")
    a0, c0, w0, off1 = _initial_line_guess(x1, y1)
    h0, _, _, off2 = _initial_line_guess(x1, y2)
    scale = w0
    n1 = x1.size

    def residual_jac(p):
        amp_a, amp_h = p[0], p[1]
        cen, wid = c0 + p[2] * scale, abs(p[3]) * scale
        o1, o2 = p[4], p[5]
        lor, _, dl_dc, dl_dw, _, _ = _shape_columns(x1, cen, wid)
        r = np.concatenate([(amp_a * lor + o1 - y1) / s1,
                            (amp_h * lor + o2 - y2) / s2])
        jac = np.zeros((2 * n1, 6))
        jac[:n1, 0] = lor / s1
        jac[n1:, 1] = lor / s2
        jac[:n1, 2] = amp_a * dl_dc * scale / s1
        jac[n1:, 2] = amp_h * dl_dc * scale / s2
        jac[:n1, 3] = amp_a * dl_dw * scale * np.sign(p[3]) / s1
        jac[n1:, 3] = amp_h * dl_dw * scale * np.sign(p[3]) / s2
        jac[:n1, 4] = 1.0 / s1
        jac[n1:, 5] = 1.0 / s2
        return r, jac

    s0 = max(abs(a0), 1e-12)
    p, cov, chi2, dof = _run_lm(
        residual_jac, [a0, h0, 0.0, 1.0, off1, off2],
        [s0, max(abs(h0), s0 * 1e-6), 0.1, 0.1, s0, max(abs(h0), s0 * 1e-6)],
        ("A", "B", "center", "width", "offset", "offset_b"), 2 * n1)
    center = c0 + p[2] * scale
    width = abs(p[3]) * scale
    _check_line_sanity(center, width, x1, "joint")
    scale_vec = np.array([1.0, 1.0, scale, scale, 1.0, 1.0])
    cov = cov * np.outer(scale_vec, scale_vec) * _cov_inflation(spec)
    return FitResult(p[0], center, width, p[4], cov, chi2, dof, "joint",
                     amplitude_b=p[1], offset_b=p[5],
                     param_names=("A", "B", "center", "width", "offset", "offset_b"))
