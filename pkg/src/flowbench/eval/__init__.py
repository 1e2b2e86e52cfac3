from .experiments import (
    Cell,
    DatasetFlows,
    DeltaRow,
    delta_experiments,
    evaluate_cells,
    flow_header_correlations,
    header_correlations,
    pearson,
    run_cells,
)
from .report import EvalReport
from .roc import RocResult, auc_from_labels, error_bar, roc_auc
from .tuning import TUNING_MODES, SweepResult, default_hyper, fit_default, hyper_grid, sweep_opt

__all__ = [
    "Cell", "DatasetFlows", "DeltaRow", "EvalReport", "RocResult", "SweepResult", "TUNING_MODES",
    "auc_from_labels", "default_hyper", "delta_experiments", "error_bar", "evaluate_cells",
    "fit_default", "flow_header_correlations", "header_correlations", "hyper_grid", "pearson",
    "roc_auc", "run_cells", "sweep_opt",
]
