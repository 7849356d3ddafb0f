"""Complex spectrum container shared by the analytic model and the estimators."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError

#: Normalization tags. Shot units: the vacuum spectrum of any quadrature is 1.
NORM_SHOT = "shot-noise-normalized"
NORM_DISPLACEMENT = "displacement-m2/Hz"


@dataclass
class ComplexSpectrum:
    """Frequency grid + complex values + normalization tag + optional errors.

    freqs   angular frequencies (rad/s), strictly increasing
    values  complex values on the grid
    norm    NORM_SHOT or NORM_DISPLACEMENT; preserved through arithmetic
    sigma   optional per-bin standard errors, stored as sigma_re + 1j*sigma_im
    n_avg   number of averaged periodograms behind the estimate (None if analytic)
    """

    freqs: np.ndarray
    values: np.ndarray
    norm: str = NORM_SHOT
    sigma: Optional[np.ndarray] = None
    n_avg: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.freqs.shape != self.values.shape:
            raise ConfigError("spectrum freqs/values length mismatch")
        if self.freqs.size > 1 and not np.all(np.diff(self.freqs) > 0):
            raise ConfigError("spectrum frequency grid must be strictly increasing")
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=complex)
            if self.sigma.shape != self.freqs.shape:
                raise ConfigError("spectrum sigma length mismatch")
        if self.norm not in (NORM_SHOT, NORM_DISPLACEMENT):
            raise ConfigError(f"unknown spectrum norm {self.norm!r}")

    def __len__(self):
        return self.freqs.size

    def band(self, lo: float, hi: float) -> "ComplexSpectrum":
        """Restrict to lo <= omega <= hi."""
        sel = (self.freqs >= lo) & (self.freqs <= hi)
        return replace(
            self,
            freqs=self.freqs[sel],
            values=self.values[sel],
            sigma=None if self.sigma is None else self.sigma[sel],
        )

    def exclude(self, bands) -> "ComplexSpectrum":
        """Drop bins inside any (lo, hi) interval of ``bands``."""
        keep = np.ones(self.freqs.size, dtype=bool)
        for lo, hi in bands:
            keep &= ~((self.freqs >= lo) & (self.freqs <= hi))
        return replace(
            self,
            freqs=self.freqs[keep],
            values=self.values[keep],
            sigma=None if self.sigma is None else self.sigma[keep],
        )

    def _check_compatible(self, other: "ComplexSpectrum"):
        if self.norm != other.norm:
            raise ConfigError("spectrum norm tags differ")
        if self.freqs.shape != other.freqs.shape or not np.allclose(
                self.freqs, other.freqs, rtol=0, atol=1e-6):
            raise ConfigError("spectrum frequency grids differ")

    def _combine_sigma(self, other: "ComplexSpectrum", scale: float):
        if self.sigma is None or other.sigma is None:
            return None
        re = np.hypot(self.sigma.real, other.sigma.real) * scale
        im = np.hypot(self.sigma.imag, other.sigma.imag) * scale
        return re + 1j * im

    def half_sum(self, other: "ComplexSpectrum") -> "ComplexSpectrum":
        self._check_compatible(other)
        return ComplexSpectrum(
            self.freqs.copy(), 0.5 * (self.values + other.values), self.norm,
            sigma=self._combine_sigma(other, 0.5),
            n_avg=self.n_avg, meta=dict(self.meta))

    def half_difference(self, other: "ComplexSpectrum") -> "ComplexSpectrum":
        self._check_compatible(other)
        return ComplexSpectrum(
            self.freqs.copy(), 0.5 * (self.values - other.values), self.norm,
            sigma=self._combine_sigma(other, 0.5),
            n_avg=self.n_avg, meta=dict(self.meta))
