"""MIMO-OFDM channel-estimation laboratory.

Submodules:
  signal_model  - constellations, subframe layout, pilot grids
  channel_sim   - tapped-delay-line Rayleigh fading simulator
  estimators    - LS / genie-LMMSE / empirical-LMMSE baselines
  structnet     - online channel learner with interference-invariant layers
  evaluation    - equalization, MSE/BER metrics, SNR conversion
  harness       - experiment sweeps, IIL benchmark, CSV persistence
"""

from . import channel_sim, errors, estimators, evaluation, harness, signal_model, structnet

__all__ = [
    "channel_sim",
    "errors",
    "estimators",
    "evaluation",
    "harness",
    "signal_model",
    "structnet",
]

__version__ = "0.1.0"
