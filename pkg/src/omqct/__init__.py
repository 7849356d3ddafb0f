"""omqct: simulator and analysis toolkit for optomechanical quantum-correlation thermometry.

The package is organized around the measurement chain of a heterodyne-probed
cavity optomechanical system:

``model``        closed-form correlation spectra (the analytic oracle)
``synth``        synthetic photodetector records with injectable imperfections
``dsp``          carrier tracking, demodulation, calibration, cross-spectral estimation
``fits``         Lorentzian / dispersive line fits
``thermometry``  temperature extraction, Allan deviation, zero-power extrapolation
``cli``          reproducible runs: simulate / analyze / thermometry / plot / selftest
"""

__version__ = "0.1.0"

from .params import DeviceParams, ProbeParams
from .spectra import ComplexSpectrum

__all__ = ["DeviceParams", "ProbeParams", "ComplexSpectrum", "__version__"]
