"""Exception hierarchy. The CLI maps these onto exit codes (see cli.py)."""


class OmqctError(Exception):
    """Base class for all package errors."""


class ConfigError(OmqctError):
    """Invalid configuration or parameter set (CLI exit code 2)."""


class SynthesisError(OmqctError):
    """Record synthesis failed or exceeded resource caps (exit code 3)."""


class TrackingError(OmqctError):
    """Carrier phase tracking failed (e.g. SNR below threshold) (exit code 3)."""


class CalibrationError(OmqctError):
    """Gain/phase calibration failed (exit code 3)."""


class EstimationError(OmqctError):
    """Spectral estimation precondition violated (exit code 3)."""


class FitError(OmqctError):
    """Line fit did not converge or is degenerate (exit code 3)."""


class UnphysicalResultError(OmqctError):
    """A derived quantity fell outside its physical domain (exit code 3)."""
