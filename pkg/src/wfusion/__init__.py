"""Simulation and verification of cavity-QED W-state fusion protocols."""

__version__ = "0.1.0"

from .cavity import (
    CavityParams,
    coeff_AB,
    dispersive_error,
    effective_propagator,
    lambda_from,
    magic_time,
)
from .linalg import NumericalError, embed_operator, integrate_schrodinger, matrix_exponential
from .pipeline import StrategyConfig, expected_cost, feasibility_report, simulate_pipeline
from .protocols import (
    OutcomeClass,
    classify_outcome,
    fuse_three,
    fuse_two,
    phase_correction,
    success_probability_three,
    success_probability_two,
)
from .registers import (
    CompactFusionState,
    expand_to_full,
    fidelity,
    initial_three_fusion_state,
    initial_two_fusion_state,
    measure,
    standard_w,
)
