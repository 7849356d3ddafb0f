"""Independent displacement-variance oracles.

Two routes to <x^2> of the thermal oscillator that share nothing with the
frequency-domain record synthesis:

* ``em_displacement_variance``: a literal Euler-Maruyama integration of the
  Langevin equations with the white-force level fixed by the FDT at the
  mechanical frequency. Kept at moderate Q: the explicit Euler step pumps
  energy at a rate ~ omega^2 dt, so the step must satisfy
  omega*dt << 1/Q for percent accuracy.
* ``fd_displacement_variance``: circulant synthesis of the displacement
  envelope from |chi_m|^2 S_FF over a wide band around the line.

Both are compared against (n_th + 1/2) * hbar / (m omega_m).
"""

from __future__ import annotations

import math

import numpy as np

from .constants import HBAR
from .model import fdt_force_psd, mech_susceptibility, thermal_occupation
from .params import DeviceParams
from . import streams


def quanta_variance(p: DeviceParams, t: float) -> float:
    """(n_th + 1/2) * hbar / (m omega_m): the equipartition target in m^2."""
    n = thermal_occupation(p.omega_m, t)
    return (n + 0.5) * HBAR / (p.m * p.omega_m)


def em_displacement_variance(p: DeviceParams, t: float, seed: int = 0,
                             n_traj: int = 1024, n_correlation_times: float = 12.0,
                             steps_per_period: int = 0,
                             burn_correlation_times: float = 4.0) -> float:
    """<x^2> from an ensemble Euler-Maruyama integration (m^2).

    The thermal force is white at the FDT level evaluated at omega_m: with the
    two-sided convention S(omega), <F(t)F(t')> = S_FF * delta(t-t'), so the
    per-step impulse variance is S_FF * dt. The explicit Euler step pumps
    oscillator energy at the rate omega^2 dt, giving a stationary-variance
    excess of about Q*omega*dt; dt defaults to 0.004/(Q*omega) so the bias
    stays near one percent. Use moderate Q (runtime scales with Q^2).
    """
    q = p.quality
    if steps_per_period <= 0:
        w_dt = min(0.01, 0.004 / q)
        steps_per_period = int(math.ceil(2.0 * math.pi / w_dt))
    dt = 2.0 * math.pi / (p.omega_m * steps_per_period)
    s_ff = float(fdt_force_psd(p.omega_m, p, t))       # two-sided, N^2 s/rad
    f_std = math.sqrt(s_ff / dt) / p.m                 # acceleration per step
    tau_c = 2.0 / p.gamma_m
    n_burn = int(burn_correlation_times * tau_c / dt)
    n_run = int(n_correlation_times * tau_c / dt)
    gen = streams.stream(seed, 0, 0, streams.THERMAL)
    x = np.zeros(n_traj)
    v = np.zeros(n_traj)
    w2 = p.omega_m**2
    acc = 0.0
    count = 0
    for step in range(n_burn + n_run):
        f = f_std * gen.standard_normal(n_traj)
        x_new = x + v * dt
        v_new = v + (-w2 * x - p.gamma_m * v + f) * dt
        x, v = x_new, v_new
        if step >= n_burn:
            acc += float(np.mean(x * x))
            count += 1
    return acc / count


def fd_displacement_variance(p: DeviceParams, t: float, seed: int = 0,
                             band_linewidths: float = 200.0,
                             n_correlation_times: float = 20000.0) -> float:
    """<x^2> from circulant synthesis of the displacement envelope (m^2).

    Synthesizes x(t) = Re[X(t) e^{i omega_m t}] with X drawn per frequency bin
    from |chi_m|^2 S_FF over omega_m +- band_linewidths*gamma_m; the variance
    is <|X|^2>/2 plus the real-part average.
    """
    w_half = min(band_linewidths * p.gamma_m, 0.95 * p.omega_m)
    fs = 2.5 * w_half / (2 * math.pi)       # envelope sample rate, Hz
    n = int(n_correlation_times / p.gamma_m * fs)
    n = int(2 ** math.ceil(math.log2(max(n, 1 << 14))))
    nu = np.fft.fftfreq(n, 1.0 / fs)
    omega = p.omega_m + 2 * math.pi * nu
    sel = np.abs(2 * math.pi * nu) <= w_half
    s_xx = np.zeros(n)
    s_xx[sel] = (np.abs(mech_susceptibility(omega[sel], p)) ** 2
                 * fdt_force_psd(omega[sel], p, t))
    gen = streams.stream(seed, 1, 0, streams.THERMAL)
    z = streams.complex_normal(gen, int(np.count_nonzero(sel)))
    coeff = np.zeros(n, dtype=complex)
    # x = Re[X e^{iwt}]: x's positive-band PSD is PSD_X/4, and the negative
    # band mirrors it, so PSD_X = 4 S_xx and <x^2> = <|X|^2>/2
    coeff[sel] = z * np.sqrt(4.0 * s_xx[sel] * n * fs)
    env = np.fft.ifft(coeff)
    return 0.5 * float(np.mean(np.abs(env) ** 2))
