"""Analytic-model tests: every expected value is computed from an independent
inline evaluation (direct arithmetic, quadrature, or an exact limit), never
from the function under test."""

import math

import numpy as np
import pytest

from omqct import model
from omqct.constants import HBAR, KB
from omqct.errors import ConfigError
from omqct.params import DeviceParams, ProbeParams, cooperativity, nbar_for_cooperativity, paper_device
from omqct.spectra import NORM_DISPLACEMENT


# ---------------------------------------------------------------------- types

def test_device_invariants():
    p = paper_device()
    assert p.gamma_m < p.omega_m
    assert p.kappa_out <= p.kappa
    # g0 = G * x_zp must reconstruct to double precision
    assert p.big_g * p.x_zp == pytest.approx(p.g0, rel=1e-12)
    assert p.x_zp == pytest.approx(math.sqrt(HBAR / (2 * p.m * p.omega_m)), rel=1e-14)


def test_device_rejects_bad_params():
    with pytest.raises(ConfigError):
        paper_device(kappa_out=2 * math.pi * 11e9)  # kappa_out > kappa
    with pytest.raises(ConfigError):
        paper_device(gamma_m=2 * math.pi * 4e9)  # overdamped
    with pytest.raises(ConfigError):
        paper_device(m=-1.0)


def test_probe_invariants():
    with pytest.raises(ConfigError):
        ProbeParams(nbar=-1, delta_p=0, delta_lo=0, eps=0.5, t_bath=300)
    with pytest.raises(ConfigError):
        ProbeParams(nbar=1, delta_p=0, delta_lo=0, eps=1.5, t_bath=300)
    pr = ProbeParams(nbar=4.0, delta_p=0, delta_lo=-1.0, eps=0.5, t_bath=300)
    assert pr.abar == 2.0
    assert pr.lo_sign == -1


def test_cooperativity_roundtrip():
    p = paper_device()
    nbar = nbar_for_cooperativity(0.01, p)
    # spec's derivation: C=0.01 corresponds to N ~ 7.1e3 for the paper device
    assert nbar == pytest.approx(7.1e3, rel=0.02)
    pr = ProbeParams(nbar=nbar, delta_p=0, delta_lo=0, eps=0.045, t_bath=294)
    assert cooperativity(p, pr) == pytest.approx(0.01, rel=1e-12)


# ----------------------------------------------------------- susceptibilities

def test_mech_susceptibility_static_limit(device):
    val = model.mech_susceptibility(0.0, device)
    assert val == pytest.approx(1.0 / (device.m * device.omega_m**2), rel=1e-14)
    assert val.imag == 0.0


def test_mech_susceptibility_on_resonance(device):
    val = complex(model.mech_susceptibility(device.omega_m, device))
    expect = 1j / (device.m * device.gamma_m * device.omega_m)
    assert val == pytest.approx(expect, rel=1e-14)


def test_mech_susceptibility_paper_point(device):
    # independent direct arithmetic at omega_m + gamma_m/2
    w = device.omega_m + 0.5 * device.gamma_m
    expect = 1.0 / (device.m * (device.omega_m**2 - w**2 - 1j * device.gamma_m * w))
    assert complex(model.mech_susceptibility(w, device)) == pytest.approx(expect, rel=1e-14)


def test_cavity_susceptibility_points(device, probe):
    assert complex(model.cavity_susceptibility(0.0, device, probe)) == pytest.approx(
        2.0 / device.kappa, rel=1e-14)
    # 45-degree point: 1/(kappa/2 - i kappa/2) = (1+i)/kappa per the model formula
    val = complex(model.cavity_susceptibility(0.5 * device.kappa, device, probe))
    assert val == pytest.approx((1 + 1j) / device.kappa, rel=1e-14)
    w = 2 * math.pi * 3.62e9
    expect = 1.0 / (0.5 * device.kappa - 1j * w)
    assert complex(model.cavity_susceptibility(w, device, probe)) == pytest.approx(
        expect, rel=1e-14)


# ----------------------------------------------------------------- occupation

def test_thermal_occupation_limits(device):
    assert model.thermal_occupation(device.omega_m, 0.0) == 0.0
    # hbar w / kB T = ln 2  ->  n = 1 exactly
    t = HBAR * device.omega_m / (KB * math.log(2.0))
    assert model.thermal_occupation(device.omega_m, t) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ConfigError):
        model.thermal_occupation(-1.0, 300.0)
    with pytest.raises(ConfigError):
        model.thermal_occupation(0.0, 300.0)


def test_thermal_occupation_room_temperature(device):
    n = model.thermal_occupation(device.omega_m, 294.0)
    expect = 1.0 / (math.exp(HBAR * device.omega_m / (KB * 294.0)) - 1.0)
    assert n == pytest.approx(expect, rel=1e-12)
    assert n == pytest.approx(1692.0, abs=1.0)
    # high-T approximation used for the A/2B reading
    assert abs(n / (KB * 294.0 / (HBAR * device.omega_m)) - 1.0) < 1e-3


def test_coth_points(device):
    # hbar w = 2 kB T atanh(1/2) -> coth = 2
    t = HBAR * device.omega_m / (2 * KB * math.atanh(0.5))
    assert model.coth_ratio(device.omega_m, t) == pytest.approx(2.0, rel=1e-12)
    assert model.coth_ratio(device.omega_m, 0.0) == 1.0
    n = model.thermal_occupation(device.omega_m, 294.0)
    assert model.coth_ratio(device.omega_m, 294.0) == pytest.approx(2 * n + 1, rel=1e-12)
    with pytest.raises(ConfigError):
        model.coth_ratio(device.omega_m, -1.0)


# ----------------------------------------------------------------- transduction

def test_transduction_forms_agree(device, probe, line_grid):
    d_main = model.transduction_strength(line_grid, device, probe)
    chi_c = model.cavity_susceptibility(line_grid, device, probe)
    d_supp = (4 * probe.eps * device.kappa * device.g0**2 * probe.nbar
              * device.m * device.omega_m * np.abs(chi_c) ** 2)
    np.testing.assert_allclose(d_main, d_supp, rtol=1e-12)


def test_transduction_static_limit(device, probe):
    d0 = float(model.transduction_strength(0.0, device, probe))
    expect = 8 * HBAR * probe.eps * probe.nbar * device.big_g**2 / device.kappa
    assert d0 == pytest.approx(expect, rel=1e-12)


def test_transduction_derived_point(device):
    nbar = nbar_for_cooperativity(0.01, device)
    pr = ProbeParams(nbar=nbar, delta_p=0, delta_lo=0, eps=0.045, t_bath=294)
    d = float(model.transduction_strength(device.omega_m, device, pr))
    expect = (2 * HBAR * pr.eps * nbar * device.big_g**2 * device.kappa
              / (device.kappa**2 / 4 + device.omega_m**2))
    assert d == pytest.approx(expect, rel=1e-12)


# ------------------------------------------------------------ closed spectra

def test_quantum_correlation_oscillator_identity(device, probe):
    # peak-to-peak of Re equals peak of Im to O((gamma/omega)^2)
    grid = device.omega_m + np.linspace(-3, 3, 400001) * device.gamma_m
    s = model.quantum_correlation_spectrum(grid, device, probe)
    pp = s.values.real.max() - s.values.real.min()
    assert pp / s.values.imag.max() == pytest.approx(1.0, abs=1e-6)


def test_quantum_correlation_rejects_detuned(device, probe, line_grid):
    import dataclasses
    pr = dataclasses.replace(probe, delta_p=0.001 * device.kappa)
    with pytest.raises(ConfigError):
        model.quantum_correlation_spectrum(line_grid, device, pr)


def test_quantum_correlation_power_invariance_in_displacement_units(device, probe, line_grid):
    import dataclasses
    s1 = model.to_displacement_units(
        model.quantum_correlation_spectrum(line_grid, device, probe), device, probe)
    pr2 = dataclasses.replace(probe, nbar=2 * probe.nbar)
    s2 = model.to_displacement_units(
        model.quantum_correlation_spectrum(line_grid, device, pr2), device, pr2)
    np.testing.assert_allclose(s1.values, s2.values, rtol=1e-12)
    assert s1.norm == NORM_DISPLACEMENT


def test_quantum_thermal_peak_ratio_matches_paper_figure(device, probe):
    # reported as "about 2e-4"; the model gives 1/coth = 2.96e-4 at 294 K
    ratio = model.quantum_thermal_peak_ratio(device, probe)
    assert 1e-4 <= ratio <= 4e-4
    grid = device.omega_m + np.linspace(-5, 5, 20001) * device.gamma_m
    sq = model.quantum_correlation_spectrum(grid, device, probe)
    st = model.thermal_correlation_spectrum(grid, device, probe)
    direct = sq.values.imag.max() / st.values.real.max()
    assert direct == pytest.approx(ratio, rel=1e-6)


def test_thermal_correlation_structure(device, probe, line_grid):
    sq = model.quantum_correlation_spectrum(line_grid, device, probe)
    st = model.thermal_correlation_spectrum(line_grid, device, probe)
    np.testing.assert_allclose(st.values.imag, sq.values.imag, rtol=1e-12)
    coth = model.coth_vec(line_grid, probe.t_bath)
    np.testing.assert_allclose(st.values.real / st.values.imag, coth, rtol=1e-9)


def test_thermal_correlation_zero_temperature_limit(device, probe):
    import dataclasses
    pr = dataclasses.replace(probe, t_bath=0.0)
    st = model.thermal_correlation_spectrum(
        np.array([device.omega_m]), device, pr, include_rpsn=False)
    d = float(model.transduction_strength(device.omega_m, device, pr))
    chi_im = model.mech_susceptibility(device.omega_m, device).imag
    # 2 D Im{chi} * (0 + 1/2): the vacuum half-quantum survives
    assert st.values.real[0] == pytest.approx(d * chi_im, rel=1e-12)


def test_rpsn_term_magnitude(device):
    # motion-PSD ratio at C = 0.01, 294 K: paper quotes "about 3e-6"
    nbar = nbar_for_cooperativity(0.01, device)
    pr = ProbeParams(nbar=nbar, delta_p=0, delta_lo=0, eps=0.045, t_bath=294.0)
    ratio = model.rpsn_thermal_motion_ratio(device, pr)
    assert 1.5e-6 <= ratio <= 6e-6
    # independent evaluation: C kappa^2 |chi_c|^2 / (2 coth)
    chi_c2 = abs(model.cavity_susceptibility(device.omega_m, device, pr)) ** 2
    expect = (0.01 * device.kappa**2 * chi_c2
              / (2 * model.coth_ratio(device.omega_m, 294.0)))
    assert ratio == pytest.approx(expect, rel=1e-9)
    # and the spectrum-level RPSN term equals the motion ratio times thermal
    grid = np.array([device.omega_m])
    s_with = model.thermal_correlation_spectrum(grid, device, pr, include_rpsn=True)
    s_wo = model.thermal_correlation_spectrum(grid, device, pr, include_rpsn=False)
    rel = (s_with.values.real[0] - s_wo.values.real[0]) / s_wo.values.real[0]
    assert rel == pytest.approx(ratio, rel=1e-6)


# ------------------------------------------------------------- full solution

def test_general_reduces_to_closed_forms(device, probe, line_grid):
    sq = model.quantum_correlation_spectrum(line_grid, device, probe)
    sg = model.general_cross_spectrum(0.0, math.pi / 2, line_grid, device, probe)
    np.testing.assert_allclose(sg.values, sq.values, rtol=1e-9)
    st = model.thermal_correlation_spectrum(line_grid, device, probe, include_rpsn=True)
    sg2 = model.general_cross_spectrum(math.pi / 4, 3 * math.pi / 4, line_grid, device, probe)
    np.testing.assert_allclose(sg2.values, st.values, rtol=1e-9)


def test_general_vacuum_limits(device, probe, line_grid):
    pr0 = ProbeParams(nbar=0.0, delta_p=0.0, delta_lo=probe.delta_lo,
                      eps=probe.eps, t_bath=probe.t_bath)
    s_auto = model.general_cross_spectrum(0.0, 0.0, line_grid, device, pr0)
    np.testing.assert_allclose(s_auto.values, 1.0, atol=1e-12)
    s_cross = model.general_cross_spectrum(0.0, math.pi / 2, line_grid, device, pr0)
    np.testing.assert_allclose(s_cross.values, 0.0, atol=1e-12)


def test_amplitude_quadrature_carries_no_signal_on_resonance(device, probe, line_grid):
    s_ii = model.general_cross_spectrum(0.0, 0.0, line_grid, device, probe)
    np.testing.assert_allclose(s_ii.values, 1.0, atol=1e-12)


def test_imaginary_part_angle_independent(device, probe, line_grid):
    ims = [model.general_cross_spectrum(phi, phi + math.pi / 2, line_grid,
                                        device, probe).values.imag
           for phi in (-0.004, 0.0, 0.003)]
    np.testing.assert_allclose(ims[0], ims[1], rtol=1e-10)
    np.testing.assert_allclose(ims[2], ims[1], rtol=1e-10)


def test_detuned_scan_null_tracks_detuning():
    """Fig. S4 behaviour: in the sideband-resolved regime the thermal Lorentzian
    component of Re S_{phi,phi+pi/2} nulls at phi = 2 delta_p / kappa."""
    p = paper_device(kappa=2 * math.pi * 1e9, kappa_out=2 * math.pi * 0.38e9,
                     gamma_m=2 * math.pi * 0.2e6)
    pr_base = ProbeParams(nbar=nbar_for_cooperativity(5.0, p), delta_p=0.0,
                          delta_lo=2 * math.pi * 5e6, eps=0.045, t_bath=22.0)
    grid = p.omega_m + np.linspace(-5, 5, 2001) * p.gamma_m
    lor = model.mech_susceptibility(grid, p).imag
    lor /= lor.max()
    dsp = model.mech_susceptibility(grid, p).real
    dsp /= np.abs(dsp).max()
    basis = np.vstack([lor, dsp, np.ones_like(lor)]).T
    phis = np.linspace(-0.004, 0.004, 9)
    import dataclasses
    for two_dp_over_kappa in (-0.002, 0.0, 0.002):
        pr = dataclasses.replace(pr_base, delta_p=0.5 * two_dp_over_kappa * p.kappa)
        amps = []
        for phi in phis:
            s = model.general_cross_spectrum(phi, phi + math.pi / 2, grid, p, pr)
            coef, *_ = np.linalg.lstsq(basis, s.values.real, rcond=None)
            amps.append(coef[0])
        slope, intercept = np.polyfit(phis, amps, 1)
        null = -intercept / slope
        assert null == pytest.approx(two_dp_over_kappa, abs=5e-5)


def test_detuned_warns_far_off_resonance(device, probe, line_grid):
    import dataclasses
    pr = dataclasses.replace(probe, delta_p=0.05 * device.kappa)
    with pytest.warns(UserWarning):
        model.general_cross_spectrum(0.0, math.pi / 2, line_grid, device, pr)


# ----------------------------------------------------------------- FDT force

def test_fdt_limits(device):
    w = device.omega_m
    # high-T classical white level 2 m gamma kB T (two-sided)
    s_hot = float(model.fdt_force_psd(2 * math.pi * 1e3, device, 294.0))
    assert s_hot == pytest.approx(2 * device.m * device.gamma_m * KB * 294.0, rel=1e-6)
    # T = 0 vacuum floor
    s_cold = float(model.fdt_force_psd(w, device, 0.0))
    assert s_cold == pytest.approx(device.m * device.gamma_m * HBAR * w, rel=1e-12)
    assert float(model.fdt_force_psd(w, device, 294.0, one_sided=True)) == pytest.approx(
        2 * float(model.fdt_force_psd(w, device, 294.0)), rel=1e-12)


def test_equipartition_by_quadrature():
    # m omega_m^2 <x^2> / kB T -> 1 within 1% for Q > 100 at 294 K
    p = paper_device(gamma_m=2 * math.pi * 3.62e9 / 500.0)  # Q = 500
    v = model.displacement_variance(p, 294.0)
    assert p.m * p.omega_m**2 * v / (KB * 294.0) == pytest.approx(1.0, abs=0.01)


def test_noise_budget_product_power_independent(device, probe):
    import dataclasses
    grid = np.array([device.omega_m - device.gamma_m, device.omega_m])
    b1 = model.noise_budget(grid, device, probe)
    b2 = model.noise_budget(grid, device, dataclasses.replace(probe, nbar=3 * probe.nbar))
    np.testing.assert_allclose(b1["product"], b2["product"], rtol=1e-12)
    chi2 = np.abs(model.mech_susceptibility(grid, device)) ** 2
    np.testing.assert_allclose(b1["product"], HBAR**2 * chi2 / (2 * probe.eps), rtol=1e-12)
