"""Three-channel image recognition: raw pixels, uniform LBP, and HOG,
each PCA-reduced and classified by a small network, combined by decision
fusion (sum rule or a trainable fused hybrid network)."""

from .config import (ArchitectureConfig, ChannelConfig, ExperimentConfig,
                     TrainingConfig, config_to_dict, load_config)
from .dataset import (FixedFirstKScheme, FractionScheme, ImageSet,
                      PerCategoryScheme, SplitPlan, load_dataset, make_split)
from .errors import (BiorecError, BundleError, ConfigError, DatasetError,
                     TrainingDivergedError)
from .features import HogConfig, LbpConfig, hog_descriptor, lbp_descriptor
from .fusion import (FusedHybridNetwork, build_fhn, decide, fuse_sum,
                     sum_rule_fuse, train_fhn)
from .metrics import (Metrics, RocCurve, accuracy, aggregate_splits,
                      auc_one_vs_rest, compute_metrics, confusion_matrix,
                      roc_one_vs_rest)
from .mlp import (MlpArch, MlpModel, TrainReport, forward, init_weights,
                  loss_and_gradient, scg_train)
from .modelsearch import SearchResult, SearchSpace, grid_search
from .pca import PcaModel, fit_pca, project
from .pipeline import (ExperimentResult, ModelBundle, load_bundle, predict,
                       run_experiment, save_bundle, write_results)
from .preprocess import NormalizationMode

__version__ = "0.1.0"

__all__ = [
    "ArchitectureConfig", "BiorecError", "BundleError", "ChannelConfig",
    "ConfigError", "DatasetError", "ExperimentConfig", "ExperimentResult",
    "FixedFirstKScheme", "FractionScheme", "FusedHybridNetwork", "HogConfig",
    "ImageSet", "LbpConfig", "Metrics", "MlpArch", "MlpModel", "ModelBundle",
    "NormalizationMode", "PcaModel", "PerCategoryScheme", "RocCurve",
    "SearchResult", "SearchSpace", "SplitPlan", "TrainReport",
    "TrainingConfig", "TrainingDivergedError", "accuracy", "aggregate_splits",
    "auc_one_vs_rest", "build_fhn", "compute_metrics", "config_to_dict",
    "confusion_matrix", "decide", "fit_pca", "forward", "fuse_sum",
    "grid_search", "hog_descriptor", "init_weights", "lbp_descriptor",
    "load_bundle", "load_config", "load_dataset", "loss_and_gradient",
    "make_split", "predict", "project", "roc_one_vs_rest", "run_experiment",
    "save_bundle", "scg_train", "sum_rule_fuse", "train_fhn", "write_results",
    "__version__",
]
