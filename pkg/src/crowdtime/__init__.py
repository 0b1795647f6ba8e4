"""Time-aware Bayesian aggregation of crowdsourced labels.

The package aggregates noisy worker judgments into task-label posteriors.
Beyond the classic confusion-matrix treatment it models each worker's
propensity to make genuine labelling attempts and a latent per-task
completion-time window, so judgments submitted suspiciously fast or slow are
discounted and each task gets a duration estimate.
"""

from .baselines import majority_vote, random_baseline, vote_distribution
from .bcc import BccState, bcc_gibbs, cbcc_gibbs
from .bcctime import (
    BccTimeState,
    bccpropensity_gibbs,
    bcctime_gibbs,
    extract_durations,
)
from .data import (
    Dataset,
    DatasetStats,
    Hyperparameters,
    Judgment,
    LabelSpace,
    dataset_stats,
    load_gold_csv,
    load_judgments_csv,
    save_gold_csv,
    save_judgments_csv,
    transform_times,
)
from .metrics import (
    EvaluationReport,
    average_recall,
    evaluate_summary,
    per_task_quality_time,
    roc_auc,
    subsample_curve,
    time_binned_quality,
)
from .onecoin import OneCoinModel, onecoin_em
from .results import PosteriorSummary, TaskDuration
from .rng import (
    RandomSource,
    sample_beta,
    sample_categorical,
    sample_dirichlet,
    sample_truncated_gaussian,
)
from .synthgen import GroundTruth, SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "BccState",
    "BccTimeState",
    "Dataset",
    "DatasetStats",
    "EvaluationReport",
    "GroundTruth",
    "Hyperparameters",
    "Judgment",
    "LabelSpace",
    "OneCoinModel",
    "PosteriorSummary",
    "RandomSource",
    "SynthConfig",
    "TaskDuration",
    "average_recall",
    "bcc_gibbs",
    "bccpropensity_gibbs",
    "bcctime_gibbs",
    "cbcc_gibbs",
    "dataset_stats",
    "evaluate_summary",
    "extract_durations",
    "generate",
    "load_gold_csv",
    "load_judgments_csv",
    "majority_vote",
    "onecoin_em",
    "per_task_quality_time",
    "random_baseline",
    "roc_auc",
    "sample_beta",
    "sample_categorical",
    "sample_dirichlet",
    "sample_truncated_gaussian",
    "save_gold_csv",
    "save_judgments_csv",
    "subsample_curve",
    "time_binned_quality",
    "transform_times",
    "vote_distribution",
]
