"""Physical constants (CODATA 2018, exact SI values). Single source of truth."""

HBAR = 1.054571817e-34  # J s
KB = 1.380649e-23       # J/K
