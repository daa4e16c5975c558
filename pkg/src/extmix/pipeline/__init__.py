"""End-to-end workflows: data loading, detrending, scenarios, predictive checks, reports."""

from .config import RunConfig, load_config, load_schema
from .detrend import DetrendModel, detrend
from .io import DroppedRowsWarning, load_csv, write_csv
from .ppc import dependence_replicates, dependence_table, posterior_predictive, qq_table
from .report import REPORT_FILES, RunArtifacts, build_artifacts, model_scores, report
from .scenario import RunReport, ScenarioSpec, run_scenario

__all__ = [
    "RunConfig", "load_config", "load_schema", "DetrendModel", "detrend", "DroppedRowsWarning",
    "load_csv", "write_csv", "dependence_replicates", "dependence_table",
    "posterior_predictive", "qq_table", "REPORT_FILES", "RunArtifacts", "build_artifacts",
    "model_scores", "report", "RunReport", "ScenarioSpec", "run_scenario",
]
