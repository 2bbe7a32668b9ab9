"""Euler-scheme Monte Carlo with non-asymptotic Gaussian concentration bounds.

Subpackages:
  model         SDE models, time grids, assumption checks, growth specs
  simulate      scheme steps, reproducible terminal batches, MC deviations
  gaussianref   Gaussian reference kernels, kinetic metric, tail constants
  concentration deviation-bound constants, entropy/transport helpers
  control       minimum-energy steering of the kinetic transport system
  parametrix    discrete parametrix density engine (scalar, non-degenerate)
  harness       experiment orchestration (configs in, CSV/JSON out)
  cli           command line front end
"""

from .model import (
    Case,
    GaussParams,
    GrowthSpec,
    SdeModel,
    SchemeGrid,
    check_growth,
    model_preset,
    validate_assumptions,
)
from .simulate import RngSpec, TerminalBatch, mc_deviation, simulate_terminal

__all__ = [
    "Case",
    "GaussParams",
    "GrowthSpec",
    "SdeModel",
    "SchemeGrid",
    "RngSpec",
    "TerminalBatch",
    "check_growth",
    "mc_deviation",
    "model_preset",
    "simulate_terminal",
    "validate_assumptions",
]

__version__ = "0.1.0"
