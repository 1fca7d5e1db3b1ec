"""Random competing-risks forests for large right-censored datasets."""

from .data import (Column, CompetingRiskResponse, ConfigurationError, DataParseError, Dataset,
                   SchemaError, event_count, load_csv, risk_set_size)
from .estimator import CompetingRiskForest
from .estimators import (NodeSummary, aalen_johansen, kaplan_meier, nelson_aalen, summarize,
                         terminal_node_functions)
from .forest import Forest, PredictionSet, TrainingParameters, predict_oob, predict_row, train
from .metrics import (cif_error, extract_mortality, naive_concordance,
                      standardized_tuning_error)
from .simulation import generate, true_cif
from .splitting import (SplitFinderSpec, composite_gray, composite_log_rank, find_best_split,
                        gray_risk_set, log_rank_score_single)
from .stepfunction import (CompetingRiskFunctions, StepFunction, average, evaluate, integrate,
                           integrated_squared_difference)

__version__ = "0.1.0"

__all__ = [
    "Column", "CompetingRiskResponse", "ConfigurationError", "DataParseError", "Dataset",
    "SchemaError", "event_count", "load_csv", "risk_set_size",
    "CompetingRiskForest",
    "NodeSummary", "aalen_johansen", "kaplan_meier", "nelson_aalen", "summarize",
    "terminal_node_functions",
    "Forest", "PredictionSet", "TrainingParameters", "predict_oob", "predict_row", "train",
    "cif_error", "extract_mortality", "naive_concordance", "standardized_tuning_error",
    "generate", "true_cif",
    "SplitFinderSpec", "composite_gray", "composite_log_rank", "find_best_split",
    "gray_risk_set", "log_rank_score_single",
    "CompetingRiskFunctions", "StepFunction", "average", "evaluate", "integrate",
    "integrated_squared_difference",
]
