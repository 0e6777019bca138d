"""Optimal-transport cell association and power allocation for ISAC multi-UAV networks."""

from ._kernels import backend
from .aibot import RunResult, run_aibot, run_baseline
from .association import Partition, run_alg1, theorem1_score, voronoi_partition, weighted_voronoi
from .errors import (ConfigError, DegenerateGeometry, InfeasibleBudget, InfiniteCrb, IsacOtError,
                     OracleTooLarge, PerfectSensing)
from .objective import ObjectiveReport, Solution, evaluate_gtol, project_feasible
from .power import grid_search_oracle, run_alg2, water_filling
from .scenario import Scenario, ScenarioConfig, build_scenario, desk_config, load_config

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateGeometry", "InfeasibleBudget", "InfiniteCrb", "IsacOtError",
    "ObjectiveReport", "OracleTooLarge", "Partition", "PerfectSensing", "RunResult", "Scenario",
    "ScenarioConfig", "Solution", "backend", "build_scenario", "desk_config", "evaluate_gtol",
    "grid_search_oracle", "load_config", "project_feasible", "run_aibot", "run_alg1", "run_alg2",
    "run_baseline", "theorem1_score", "voronoi_partition", "water_filling", "weighted_voronoi",
]
