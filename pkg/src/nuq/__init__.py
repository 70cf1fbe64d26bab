"""Kernel-regression class probabilities with a disentangled uncertainty split.

Fit once over labeled embedding vectors, then query class probabilities,
aleatoric/epistemic/total uncertainty, reject-option decisions, and
OOD/selective-classification metrics.
"""

__version__ = "0.1.0"

from .errors import ConfigError, InputError, NumericalError, NuqError, ParseError
from .kernels import (
    KERNEL_KINDS,
    KernelSpec,
    eval_product,
    eval_profile,
    norm_sq,
    square_integral_per_dim,
)
from .knn import IndexConfig, NeighborSet, build_index
from .density import ClassGaussians, fit_class_gaussians, gmm_density, gmm_log_density, kde_density
from .model import (
    DENSITY_FLOOR,
    EPISTEMIC_COEF,
    ClassProbabilities,
    EmbeddingDataset,
    NuqModel,
    UncertaintyReport,
    fit,
    make_dataset,
)
from .metrics import (
    accuracy_rejection_curve,
    agreement,
    ood_prefix_curve,
    rcc_auc,
    risk_coverage_points,
    roc_auc,
    roc_points,
)
from .reject import (
    ExcessRiskPoint,
    RejectConfig,
    RejectDecision,
    abstain,
    abstain_batch,
    chow_plugin_abstain,
    chow_plugin_abstain_batch,
    evaluate_chow_risk,
    excess_risk_curve,
    normal_quantile,
)
from .tuning import TuneConfig, cv_accuracy, default_bandwidth_grid, tune_bandwidth
from .storage import load_model, read_embeddings, save_model, write_embeddings
from .toys import (
    Gauss3Toy,
    StepToy,
    gen_gauss3_1d,
    gen_ring_ood,
    gen_step_reject,
    gen_two_moons,
    moon_arcs,
)

__all__ = [name for name in dir() if not name.startswith("_")]
