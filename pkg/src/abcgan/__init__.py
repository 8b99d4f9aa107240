"""Adversarial correction of misspecified prior regression models."""

from .data import (
    Dataset,
    SplitDataset,
    Standardizer,
    gen_friedman3,
    load_boston,
    load_csv,
    load_energy,
    split_80_20,
    standardize_apply,
    standardize_fit,
)
from .experiments import (
    AggregateResult,
    DataConfig,
    ExperimentSpec,
    RunResult,
    emit_boxplot_stats,
    emit_table,
    mae,
    run_grid,
    run_single,
)
from .gan import (
    GanConfig,
    GanModel,
    SkipState,
    TrainingDivergedError,
    build_gan,
    posterior_predictive,
    predict,
    train,
)
from .misspec import (
    MisspecGrid,
    NoiseSpec,
    enumerate_grid,
    perturb_coefficients,
    perturb_predictions,
    simulate_responses,
)
from .neuralcore import Network, adam_step, backward, bce_loss, forward, init_network
from .priors import (
    GBTConfig,
    LinearFit,
    PriorModel,
    TreeEnsemble,
    fit_gbt,
    fit_ols,
    fit_prior,
    predict_gbt,
    predict_linear,
    prior_point_predictions,
)

__version__ = "0.1.0"
