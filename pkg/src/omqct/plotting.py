"""Static vector figures for spectra, fits, Allan curves and power sweeps."""

from __future__ import annotations

import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import fits as fitmod
from .spectra import ComplexSpectrum

_GHZ = 1e9 * 2 * math.pi


def _freq_axis(spec: ComplexSpectrum):
    return spec.freqs / _GHZ


def plot_spectrum(spec: ComplexSpectrum, path, fit: dict = None, title: str = ""):
    """Re/Im panels of a correlation spectrum, with optional fit overlay.

    ``fit`` carries line parameters as stored in a thermometry report:
    {a, b, center, width, offset, offset_b} (missing entries are skipped).
    """
    f = _freq_axis(spec)
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.0))
    for ax, comp, lbl in ((axes[0], spec.values.real, "Re"),
                          (axes[1], spec.values.imag, "Im")):
        ax.plot(f, comp, lw=0.7, color="C0")
        if spec.sigma is not None:
            s = spec.sigma.real if lbl == "Re" else spec.sigma.imag
            ax.fill_between(f, comp - s, comp + s, alpha=0.25, color="C0", lw=0)
        ax.set_ylabel(f"{lbl} S (shot units)")
        ax.axhline(0.0, color="0.6", lw=0.5)
    if fit:
        w = spec.freqs
        if fit.get("a") is not None:
            axes[0].plot(f, fitmod.lorentzian(w, fit["a"], fit["center"],
                                              fit["width"], fit.get("offset", 0.0)),
                         "k-", lw=1.0, label="Lorentzian fit")
            axes[0].legend(loc="best", fontsize=8)
        if fit.get("b") is not None:
            axes[0].plot(f, fitmod.dispersive(w, fit["b"], fit["center"],
                                              fit["width"], fit.get("offset_b", 0.0)),
                         "k--", lw=1.0)
    axes[1].set_xlabel("frequency (GHz, cyclic)")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_correlation_pair(quantum: ComplexSpectrum, thermal: ComplexSpectrum,
                          path, fit: dict = None):
    """Thermal correlation (top) and quantum correlation (bottom) panels."""
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.0))
    f_t, f_q = _freq_axis(thermal), _freq_axis(quantum)
    axes[0].plot(f_t, thermal.values.real, lw=0.7, color="C3",
                 label="thermal correlation")
    axes[1].plot(f_q, quantum.values.real, lw=0.7, color="C0",
                 label="quantum correlation (Re)")
    axes[1].plot(f_q, quantum.values.imag, lw=0.7, color="C2",
                 label="quantum correlation (Im)")
    if fit:
        w = thermal.freqs
        axes[0].plot(f_t, fitmod.lorentzian(w, fit["a"], fit["center"],
                                            fit["width"], fit.get("offset", 0.0)),
                     "k-", lw=1.0)
        wq = quantum.freqs
        axes[1].plot(f_q, fitmod.dispersive(wq, fit["b"], fit["center"],
                                            fit["width"], fit.get("offset_b", 0.0)),
                     "k-", lw=1.0)
    for ax in axes:
        ax.axhline(0.0, color="0.6", lw=0.5)
        ax.legend(loc="best", fontsize=8)
        ax.set_ylabel("S (shot units)")
    axes[1].set_xlabel("frequency (GHz, cyclic)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_phi_scan(phi_grid, spectra, path, lo_sign=1):
    """Stacked Re S_{phi,phi+pi/2} traces over the scan grid."""
    fig, ax = plt.subplots(figsize=(5.0, 4.5))
    offset = 0.0
    span = max(np.ptp(s.values.real) for s in spectra)
    for phi, s in zip(phi_grid, spectra):
        ax.plot(_freq_axis(s), s.values.real + offset, lw=0.7,
                label=f"phi = {phi:+.3f}")
        offset -= 1.2 * span
    ax.set_xlabel("frequency (GHz, cyclic)")
    ax.set_ylabel(f"Re S (offset traces), LO sign {lo_sign:+d}")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_allan(taus, adev, adev_sigma, white_coeff, path):
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.errorbar(taus, adev, yerr=adev_sigma, fmt="s", ms=4, color="C1")
    tt = np.linspace(min(taus), max(taus), 200)
    ax.plot(tt, white_coeff / np.sqrt(tt), "k-", lw=1.0,
            label=f"{white_coeff:.3g} K/sqrt(Hz)")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("averaging time (s)")
    ax.set_ylabel("Allan deviation (K)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_power_sweep(powers, temps, sigmas, intercept, slope, path):
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.errorbar(np.asarray(powers) * 1e6, temps, yerr=sigmas, fmt="o", ms=4)
    pp = np.linspace(0, max(powers), 100)
    ax.plot(pp * 1e6, intercept + slope * pp, "k-", lw=1.0)
    ax.set_xlabel("probe power (uW)")
    ax.set_ylabel("temperature (K)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_temperature_comparison(setpoints, measured, sigmas, path):
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.errorbar(setpoints, measured, yerr=sigmas, fmt="o", color="C3", ms=4)
    lim = [0, 1.1 * max(max(setpoints), max(measured))]
    ax.plot(lim, lim, "--", color="0.5", lw=1.0)
    ax.set_xlabel("setpoint temperature (K)")
    ax.set_ylabel("correlation thermometry (K)")
    ax.set_xlim(lim)
    ax.set_ylim(lim)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_noise_budget(omega, budget: dict, path):
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    f = omega / _GHZ
    for key, color in (("imprecision", "C4"), ("backaction", "C1"),
                       ("brownian", "C3"), ("total", "k")):
        ax.plot(f, budget[key], color=color, lw=1.0, label=key)
    ax.set_yscale("log")
    ax.set_xlabel("frequency (GHz, cyclic)")
    ax.set_ylabel("displacement PSD (m^2 s/rad, two-sided)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
