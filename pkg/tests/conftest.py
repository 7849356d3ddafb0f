import math

import numpy as np
import pytest

from omqct.params import DeviceParams, ProbeParams, nbar_for_cooperativity, paper_device


@pytest.fixture(scope="session")
def device():
    """Room-temperature device of the reproduced experiment."""
    return paper_device()


@pytest.fixture(scope="session")
def probe(device):
    """Resonant probe at C = 0.01, room temperature, overall efficiency 0.045."""
    return ProbeParams(
        nbar=nbar_for_cooperativity(0.01, device),
        delta_p=0.0,
        delta_lo=2 * math.pi * 5e6,
        eps=0.045,
        t_bath=294.0,
    )


@pytest.fixture
def line_grid(device):
    """Dense grid over +-5 linewidths around the mechanical resonance."""
    return device.omega_m + np.linspace(-5, 5, 2001) * device.gamma_m


@pytest.fixture(scope="session")
def fast_device():
    """Narrow-line variant for cheap synthesis tests (cryo-like linewidth)."""
    return paper_device(gamma_m=2 * math.pi * 0.35e6)


@pytest.fixture(scope="session")
def fast_probe(fast_device):
    return ProbeParams(
        nbar=nbar_for_cooperativity(3.0, fast_device),
        delta_p=0.0,
        delta_lo=2 * math.pi * 2.4e6,
        eps=0.045,
        t_bath=294.0,
    )


def fast_synth_config(**kw):
    from omqct.synth import SynthConfig
    base = dict(duration=0.02, sample_rate=20e6, seed=1, f_lo=2.4e6, f_if=5e6,
                block_len=4096, drift_rms=0.5, carrier_snr_db=80.0)
    base.update(kw)
    return SynthConfig(**base)


@pytest.fixture
def fast_cfg():
    return fast_synth_config
