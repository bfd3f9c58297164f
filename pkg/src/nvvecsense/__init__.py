"""Vector magnetometry with NV-center ensembles along the four diamond axes.

Conventional sequential sensing is compared with parallel multi-frequency
control, including shot-noise sensitivities and compensation of
inhomogeneous ensembles.
"""
from .model import (
    AXIS_IDS,
    EnsembleParams,
    PhysicalConstants,
    axis_direction,
    axis_directions,
    check_selectivity,
    resonance_frequencies,
)
from .dynamics import (
    echo_phase,
    echo_populations,
    filter_factor,
    integrate_master_equation,
    ramsey_phase,
    ramsey_populations,
    run_sequence,
)
from .protocols import (
    Kind,
    ProtocolPlan,
    SensitivityReport,
    ac_sensitivity,
    dc_sensitivity,
    estimate_component,
    estimate_vector,
    make_plan,
    optimize_theta,
    sensitivity,
)
from .compensation import sensitivity_ratio_curve, solve_schedule

__version__ = "0.1.0"
