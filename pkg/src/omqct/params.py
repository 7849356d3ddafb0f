"""Physical parameter sets for the device and the optical probe.

All frequencies and rates are angular (rad/s) internally. The CLI config layer
converts cyclic-frequency inputs ("10 GHz") to rad/s at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .constants import HBAR
from .errors import ConfigError


@dataclass(frozen=True)
class DeviceParams:
    """Mechanical resonator and optical cavity parameters.

    m         effective mass (kg); free input, shot-noise-normalized observables
              depend only on g0, so the default 1e-15 kg is arbitrary
    omega_m   mechanical angular frequency (rad/s)
    gamma_m   mechanical damping rate (rad/s), treated as constant over the
              analysis band
    g0        vacuum optomechanical coupling rate (rad/s)
    kappa     total optical decay rate (rad/s)
    kappa_out decay into the collected output port (rad/s)
    """

    m: float
    omega_m: float
    gamma_m: float
    g0: float
    kappa: float
    kappa_out: float

    def __post_init__(self):
        for name in ("m", "omega_m", "gamma_m", "g0", "kappa", "kappa_out"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"device.{name} must be finite and > 0, got {v!r}")
        if self.gamma_m >= self.omega_m:
            raise ConfigError(
                f"device.gamma_m ({self.gamma_m:g}) must be < omega_m "
                f"({self.omega_m:g}): oscillator must be underdamped"
            )
        if self.kappa_out > self.kappa:
            raise ConfigError(
                f"device.kappa_out ({self.kappa_out:g}) must not exceed kappa "
                f"({self.kappa:g})"
            )

    @property
    def x_zp(self) -> float:
        """Zero-point motion sqrt(hbar / 2 m omega_m) in meters."""
        return math.sqrt(HBAR / (2.0 * self.m * self.omega_m))

    @property
    def big_g(self) -> float:
        """Cavity-pull coupling constant G = g0 / x_zp (rad/s per meter)."""
        return self.g0 / self.x_zp

    @property
    def quality(self) -> float:
        return self.omega_m / self.gamma_m


@dataclass(frozen=True)
class ProbeParams:
    """Optical probe, local oscillator, detection and bath parameters.

    nbar      mean intracavity photon number
    delta_p   probe-cavity detuning (rad/s); the wavelength lock is modeled
              only as this residual detuning
    delta_lo  heterodyne LO detuning (rad/s, signed)
    eps       overall detection efficiency including the factor 0.5 heterodyne
              penalty (eps1*eps2*eps3*eps4*0.5)
    t_bath    bath temperature (K)
    """

    nbar: float
    delta_p: float
    delta_lo: float
    eps: float
    t_bath: float

    def __post_init__(self):
        if not (math.isfinite(self.nbar) and self.nbar >= 0):
            raise ConfigError(f"probe.nbar must be >= 0, got {self.nbar!r}")
        if not (0.0 < self.eps <= 1.0):
            raise ConfigError(f"probe.eps must be in (0, 1], got {self.eps!r}")
        if not (math.isfinite(self.t_bath) and self.t_bath >= 0):
            raise ConfigError(f"probe.t_bath must be >= 0 K, got {self.t_bath!r}")
        for name in ("delta_p", "delta_lo"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"probe.{name} must be finite")

    @property
    def abar(self) -> float:
        """Intracavity coherent amplitude sqrt(nbar) (real by phase convention)."""
        return math.sqrt(self.nbar)

    @property
    def lo_sign(self) -> int:
        return 1 if self.delta_lo >= 0 else -1

    def with_lo_sign(self, sign: int) -> "ProbeParams":
        return replace(self, delta_lo=sign * abs(self.delta_lo))


def cooperativity(device: DeviceParams, probe: ProbeParams) -> float:
    """C = 4 nbar g0^2 / (kappa gamma_m)."""
    return 4.0 * probe.nbar * device.g0**2 / (device.kappa * device.gamma_m)


def nbar_for_cooperativity(c: float, device: DeviceParams) -> float:
    """Intracavity photon number that realizes cooperativity ``c``."""
    return c * device.kappa * device.gamma_m / (4.0 * device.g0**2)


def detection_efficiency(eps1: float, eps2: float, eps3: float, eps4: float,
                         heterodyne: bool = True) -> float:
    """Overall efficiency from the individual loss factors.

    ``heterodyne`` folds in the extra factor 0.5 for measuring both quadratures
    of a single spatial mode simultaneously.
    """
    eps = eps1 * eps2 * eps3 * eps4
    return 0.5 * eps if heterodyne else eps


# Device of the experiment this toolkit reproduces, room-temperature values.
# The mass is arbitrary (see DeviceParams docstring).
PAPER_DEVICE = dict(
    m=1e-15,
    omega_m=2 * math.pi * 3.62e9,
    gamma_m=2 * math.pi * 1.4e6,
    g0=2 * math.pi * 70e3,
    kappa=2 * math.pi * 10e9,
    kappa_out=2 * math.pi * 3.8e9,
)


def paper_device(**overrides) -> DeviceParams:
    return DeviceParams(**{**PAPER_DEVICE, **overrides})
