"""Learning from annotator vote distributions, with calibration metrics."""

from .calibration import (Predictions, apply_temperature, assign_bins, calibration_report, ece,
                          fit_temperature, mce, reliability_data, sce)
from .data import Dataset, load_dataset, save_dataset
from .experiment import (ExperimentConfig, benchmark_config, compare, load_config,
                         run_experiment)
from .labels import (MajorityResult, VoteRecord, distributional_label, majority_label,
                     smooth_label, tally_votes, vote_entropy, voter_confusion)
from .metrics import ScoreReport, accuracy_suite, confusion, generalization_ce, kappa, score
from .network import (Network, NetworkSpec, TrainConfig, batch_loss, forward, gradient,
                      loss_ce, loss_kl, predict, softmax, train)
from .synth import GeneratorConfig, GroupSpec, SplitSpec, generate, split

__version__ = "0.1.0"

__all__ = [
    "Dataset", "ExperimentConfig", "GeneratorConfig", "GroupSpec", "MajorityResult", "Network", "NetworkSpec",
    "Predictions", "ScoreReport", "SplitSpec", "TrainConfig", "VoteRecord",
    "accuracy_suite", "apply_temperature", "assign_bins", "batch_loss", "benchmark_config", "calibration_report",
    "compare", "confusion", "distributional_label", "ece", "fit_temperature", "forward", "generalization_ce",
    "generate", "gradient", "kappa", "load_dataset", "load_config", "loss_ce", "loss_kl", "majority_label", "mce",
    "predict", "reliability_data", "run_experiment", "save_dataset", "sce", "score", "smooth_label", "softmax",
    "split", "tally_votes", "train", "vote_entropy", "voter_confusion",
]
