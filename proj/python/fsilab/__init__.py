"""Partitioned FSI coupling lab: cost model, coupling runs and sweeps."""

from ._fsilab import (
    CostFactors,
    Error,
    InvalidInput,
    ParseError,
    RankDeficient,
    contour,
    equivalent_time,
    fit,
    fit_coupling_cost,
    fit_solver_cost,
    framework_factors,
    linear_toy_oracle,
    mape_maxape,
    replay,
    rmse,
    rrmse,
    run,
    sweep,
)

__all__ = [
    "CostFactors",
    "Error",
    "InvalidInput",
    "ParseError",
    "RankDeficient",
    "contour",
    "equivalent_time",
    "fit",
    "fit_coupling_cost",
    "fit_solver_cost",
    "framework_factors",
    "linear_toy_oracle",
    "mape_maxape",
    "replay",
    "rmse",
    "rrmse",
    "run",
    "sweep",
]
