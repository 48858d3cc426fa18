"""obmimo: 1-bit quantized, dynamically oversampled large-scale MIMO uplink.

Library layout:

- ``config``: scenario parameters.
- ``signal_model``: pulses, Toeplitz operators, equivalent channel,
  random realizations, unquantized receive chain.
- ``quantization``: 1-bit quantizer and its closed-form second-order
  statistics (statistical linearization, arcsine law).
- ``reduction``: ratio-trace solvers for the dimension-reduction matrix
  (generalized eigendecomposition, submatrix-level selection searches).
- ``detection``: sliding-window low-resolution-aware MMSE detection.
- ``metrics``: sum-rate lower bound, error rates, flop counters, power.
- ``harness``: seeded Monte Carlo sweeps, presets and CSV output.
"""

__version__ = "0.1.0"

from .config import ConfigurationError, SystemConfig

__all__ = ["SystemConfig", "ConfigurationError", "__version__"]
