"""Sensor selection, sink prediction and adaptive routing for temperature WSNs."""

__version__ = "0.1.0"

from .errors import (ContractError, DimensionError, EmptyDatasetError, FoldTooSmallError,
                     ParseError, UnderdeterminedError, WindowError, WsnError)
from .evaluation import ExperimentReport, FoldPlan, cross_validate, make_folds, rmse, run_scenario
from .ingest import (DataMatrix, SensorPosition, SensorReading, align_epochs, load_positions,
                     parse_sensor_log, take_window)
from .regression import LinearModel, aic_of, fit_ols, predict, stepwise_eliminate
from .selection import SelectionResult, best_first_select, locally_predictive_pass, merit_of
from .sim import RoutingPlan, adaptive_loop, build_routing, ltef, simulate_epochs
from .stats import CorrelationMatrix, correlation_matrix, pearson, standardize
