"""Sterile insect technique control models and campaign design tools."""

from sitcontrol.model import (
    ExtendedState,
    Params,
    State,
    basic_offspring_number,
    dominating_point,
    jacobian,
    sit_rhs,
    wild_equilibrium,
    wild_rhs,
)
from sitcontrol.equilibria import (
    EquilibriumAnalysis,
    classify_stability,
    periodic_threshold,
    sit_equilibria,
    sit_thresholds,
    verify_equilibrium_by_bisection,
)
from sitcontrol.integrator import (
    Constant,
    Impulsive,
    Trajectory,
    first_entry_time,
    integrate,
    integrate_impulsive,
    periodic_mt,
)
from sitcontrol.entry_time import (
    AnalyticBound,
    TargetSpec,
    analytic_time_bound,
    comparison_modes,
    comparison_solution,
    epsilon_ratio,
    minimal_entry_time,
    target_point,
)
from sitcontrol.strategies import (
    CampaignConfig,
    CampaignResult,
    adulticide_pretreatment,
    mc_adjusted_params,
    run_campaign,
    sweep,
)
from sitcontrol.scenario_io import emit_trajectory, parse_scenario
from sitcontrol.tables import TableArtifact, reproduce_table

__version__ = "0.1.0"

__all__ = [
    "AnalyticBound",
    "CampaignConfig",
    "CampaignResult",
    "Constant",
    "EquilibriumAnalysis",
    "ExtendedState",
    "Impulsive",
    "Params",
    "State",
    "TargetSpec",
    "TableArtifact",
    "Trajectory",
    "adulticide_pretreatment",
    "analytic_time_bound",
    "basic_offspring_number",
    "classify_stability",
    "comparison_modes",
    "comparison_solution",
    "dominating_point",
    "emit_trajectory",
    "epsilon_ratio",
    "first_entry_time",
    "integrate",
    "integrate_impulsive",
    "jacobian",
    "mc_adjusted_params",
    "minimal_entry_time",
    "periodic_mt",
    "parse_scenario",
    "periodic_threshold",
    "reproduce_table",
    "run_campaign",
    "sit_equilibria",
    "sit_rhs",
    "sit_thresholds",
    "sweep",
    "target_point",
    "verify_equilibrium_by_bisection",
    "wild_equilibrium",
    "wild_rhs",
]
