"""Run configuration: flat typed text format with explicit units.

Every physical quantity carries a unit on its config line ("kappa: 10 GHz"),
and cyclic frequencies are converted to angular rad/s at this boundary, which
removes the Hz / rad/s ambiguity from the entire pipeline. The canonical
serialization is key-sorted with all quantities reduced to SI, so its SHA-256
identifies a run.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ConfigError
from .params import DeviceParams, ProbeParams, nbar_for_cooperativity
from .pipeline import AnalysisConfig
from .synth import SynthConfig

TWO_PI = 2.0 * math.pi

# unit name -> (scale, kind); cyclic frequencies become rad/s via 2*pi
_FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12}
_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
_MASS = {"kg": 1.0, "g": 1e-3, "ng": 1e-12, "pg": 1e-15, "fg": 1e-18}
_POWER = {"w": 1.0, "mw": 1e-3, "uw": 1e-6, "nw": 1e-9}


def _parse_number(tok: str, key: str) -> float:
    try:
        return float(tok)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse number {tok!r}") from exc


def _parse_quantity(value: str, kind: str, key: str):
    """Parse '<numbers> [unit]' according to the declared kind."""
    toks = value.split()
    if not toks:
        raise ConfigError(f"{key}: empty value")
    unit = toks[-1].lower() if not _is_number(toks[-1]) else None
    nums = toks[:-1] if unit else toks
    vals = [_parse_number(t, key) for t in nums]
    if not vals:
        raise ConfigError(f"{key}: no numeric value")

    def scaled(table, default_ok=False):
        if unit is None:
            if default_ok:
                return vals
            raise ConfigError(f"{key}: a unit is required (got bare number)")
        if unit not in table:
            raise ConfigError(f"{key}: unknown unit {unit!r}")
        return [v * table[unit] for v in vals]

    if kind == "angular_freq":      # cyclic input -> rad/s
        if unit in ("rad/s", "rads"):
            return vals
        return [v * TWO_PI for v in scaled(_FREQ)]
    if kind == "freq_hz":           # stays cyclic (sample rates, IF layout)
        return scaled(_FREQ)
    if kind == "time":
        return scaled(_TIME)
    if kind == "mass":
        return scaled(_MASS)
    if kind == "power":
        return scaled(_POWER)
    if kind == "kelvin":
        if unit not in (None, "k"):
            raise ConfigError(f"{key}: temperature must be in K")
        return vals
    if kind == "db":
        if unit not in (None, "db"):
            raise ConfigError(f"{key}: expected dB")
        return vals
    if kind == "rad":
        if unit not in (None, "rad"):
            raise ConfigError(f"{key}: expected rad")
        return vals
    if kind == "plain":
        if unit is not None:
            raise ConfigError(f"{key}: dimensionless value must not carry a unit")
        return vals
    raise ConfigError(f"{key}: unhandled kind {kind}")


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


@dataclass
class ThermometryConfig:
    method: str = "both"            # ratio | coth | both
    powers: tuple = ()              # W, for the self-heating sweep
    heating_coeff: float = 0.0      # K/W applied when synthesizing the sweep


@dataclass
class OutputConfig:
    directory: str = "omqct-out"


@dataclass
class RunConfig:
    device: DeviceParams
    probe: ProbeParams
    synth: SynthConfig
    analysis: AnalysisConfig
    thermometry: ThermometryConfig = field(default_factory=ThermometryConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    artifacts: dict = field(default_factory=dict)   # dispersion_slope, nonlinearity
    comb_tone_count: int = 5

    def canonical_text(self) -> str:
        d, pr, sy, an = self.device, self.probe, self.synth, self.analysis
        items = {
            "device.mass": d.m, "device.omega_m": d.omega_m,
            "device.gamma_m": d.gamma_m, "device.g0": d.g0,
            "device.kappa": d.kappa, "device.kappa_out": d.kappa_out,
            "probe.nbar": pr.nbar, "probe.delta_p": pr.delta_p,
            "probe.delta_lo": pr.delta_lo, "probe.efficiency": pr.eps,
            "probe.t_bath": pr.t_bath,
            "synth.duration": sy.duration, "synth.sample_rate": sy.sample_rate,
            "synth.seed": sy.seed, "synth.f_lo": sy.f_lo, "synth.f_if": sy.f_if,
            "synth.band_halfwidth": sy.band_halfwidth or 0.0,
            "synth.block_len": sy.block_len, "synth.drift_rms": sy.drift_rms,
            "synth.drift_bandwidth": sy.drift_bandwidth,
            "synth.carrier_amp": sy.carrier_amp,
            "synth.carrier_snr_db": sy.carrier_snr_db,
            "synth.pair_mode": sy.pair_mode,
            "analysis.window": an.window,
            "analysis.segment_len": an.segment_len,
            "analysis.overlap": an.overlap,
            "analysis.fit_halfwidth": an.fit_halfwidth or 0.0,
            "analysis.phi_grid": " ".join(f"{x!r}" for x in (an.phi_grid or ())),
            "analysis.exclusions": " ".join(
                f"{lo!r}..{hi!r}" for lo, hi in an.exclusions),
            "thermometry.method": self.thermometry.method,
            "thermometry.powers": " ".join(f"{x!r}" for x in self.thermometry.powers),
            "thermometry.heating_coeff": self.thermometry.heating_coeff,
            "artifacts.dispersion_slope": self.artifacts.get("dispersion_slope", 0.0),
            "artifacts.nonlinearity": self.artifacts.get("nonlinearity", 0.0),
            "comb.tone_count": self.comb_tone_count,
        }
        lines = []
        for k in sorted(items):
            v = items[k]
            lines.append(f"{k}: {v!r}" if isinstance(v, float) else f"{k}: {v}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


_DEFAULT_TEXT = """\
# omqct run configuration (defaults)
device.mass: 1e-15 kg
device.omega_m: 3.62 GHz
device.gamma_m: 1.4 MHz
device.g0: 70 kHz
device.kappa: 10 GHz
device.kappa_out: 3.8 GHz
probe.cooperativity: 12
probe.delta_p: 0 Hz
probe.delta_lo: 4.8 MHz
probe.efficiency: 0.045
probe.t_bath: 294 K
synth.duration: 55 ms
synth.sample_rate: 40 MHz
synth.f_if: 10 MHz
synth.seed: 1234
synth.block_len: 4096
synth.drift_rms: 1 rad
synth.drift_bandwidth: 1 kHz
synth.carrier_snr_db: 70 dB
synth.pair_mode: independent
analysis.window: hann
analysis.segment_len: 512
analysis.overlap: 0.5
thermometry.method: both
outputs.directory: omqct-out
"""


def default_config_text() -> str:
    return _DEFAULT_TEXT


def parse_config(text: str) -> RunConfig:
    """Parse the flat key: value config format into a validated RunConfig."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key: value'")
        key, _, val = line.partition(":")
        key, val = key.strip(), val.strip()
        if key in raw:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        raw[key] = val

    def pop(key, kind=None, default=None, required=False):
        if key not in raw:
            if required:
                raise ConfigError(f"missing required config key {key!r}")
            return default
        val = raw.pop(key)
        if kind is None:
            return val
        vals = _parse_quantity(val, kind, key)
        return vals[0] if len(vals) == 1 else vals

    device = DeviceParams(
        m=pop("device.mass", "mass", 1e-15),
        omega_m=pop("device.omega_m", "angular_freq", required=True),
        gamma_m=pop("device.gamma_m", "angular_freq", required=True),
        g0=pop("device.g0", "angular_freq", required=True),
        kappa=pop("device.kappa", "angular_freq", required=True),
        kappa_out=pop("device.kappa_out", "angular_freq", required=True),
    )
    nbar = pop("probe.nbar", "plain", None)
    coop = pop("probe.cooperativity", "plain", None)
    if nbar is None:
        if coop is None:
            raise ConfigError("one of probe.nbar / probe.cooperativity is required")
        nbar = nbar_for_cooperativity(coop, device)
    probe = ProbeParams(
        nbar=nbar,
        delta_p=pop("probe.delta_p", "angular_freq", 0.0),
        delta_lo=pop("probe.delta_lo", "angular_freq", TWO_PI * 4.8e6),
        eps=pop("probe.efficiency", "plain", required=True),
        t_bath=pop("probe.t_bath", "kelvin", required=True),
    )
    synth = SynthConfig(
        duration=pop("synth.duration", "time", 0.055),
        sample_rate=pop("synth.sample_rate", "freq_hz", 40e6),
        seed=int(pop("synth.seed", "plain", 0)),
        f_lo=abs(probe.delta_lo) / TWO_PI,
        f_if=pop("synth.f_if", "freq_hz", 10e6),
        band_halfwidth=pop("synth.band_halfwidth", "freq_hz", None),
        block_len=int(pop("synth.block_len", "plain", 4096)),
        drift_rms=pop("synth.drift_rms", "rad", 1.0),
        drift_bandwidth=pop("synth.drift_bandwidth", "freq_hz", 1e3),
        carrier_snr_db=pop("synth.carrier_snr_db", "db", 70.0),
        pair_mode=pop("synth.pair_mode", None, "independent"),
    )
    phi_spec = pop("analysis.phi_scan", None, None)
    phi_grid = None
    if phi_spec and phi_spec != "none":
        try:
            lo, hi, n = phi_spec.split(":")
            import numpy as np
            phi_grid = tuple(np.linspace(float(lo), float(hi), int(n)))
        except ValueError as exc:
            raise ConfigError(
                f"analysis.phi_scan: expected 'lo:hi:n', got {phi_spec!r}") from exc
    exclusions = []
    i = 1
    while f"analysis.exclude_{i}" in raw:
        pair = pop(f"analysis.exclude_{i}", "angular_freq")
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"analysis.exclude_{i}: expected 'lo hi unit'")
        exclusions.append((pair[0], pair[1]))
        i += 1
    analysis = AnalysisConfig(
        window=pop("analysis.window", None, "hann"),
        segment_len=int(pop("analysis.segment_len", "plain", 512)),
        overlap=pop("analysis.overlap", "plain", 0.5),
        fit_halfwidth=pop("analysis.fit_halfwidth", "angular_freq", None),
        exclusions=tuple(exclusions),
        phi_grid=phi_grid,
    )
    powers = pop("thermometry.powers", "power", ())
    if isinstance(powers, float):
        powers = (powers,)
    thermo = ThermometryConfig(
        method=pop("thermometry.method", None, "both"),
        powers=tuple(powers),
        heating_coeff=pop("thermometry.heating_coeff", "plain", 0.0),
    )
    if thermo.method not in ("ratio", "coth", "both"):
        raise ConfigError("thermometry.method must be ratio, coth or both")
    outputs = OutputConfig(directory=pop("outputs.directory", None, "omqct-out"))
    artifacts = {}
    slope = pop("artifacts.dispersion_slope", "plain", 0.0)
    nl = pop("artifacts.nonlinearity", "plain", 0.0)
    if slope:
        artifacts["dispersion_slope"] = slope
    if nl:
        artifacts["nonlinearity"] = nl
    tone_count = int(pop("comb.tone_count", "plain", 5))
    if raw:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(raw))}")
    return RunConfig(device=device, probe=probe, synth=synth, analysis=analysis,
                     thermometry=thermo, outputs=outputs, artifacts=artifacts,
                     comb_tone_count=tone_count)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
