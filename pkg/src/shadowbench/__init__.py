"""Classical shadows versus Bayesian mean estimation of quantum observables."""

from .bayes import (
    BornLikelihood,
    ChainConfig,
    FrobeniusShadowLikelihood,
    ObservableLikelihood,
    PosteriorSamples,
    bme_expectation,
    log_likelihood,
    overlap_with_shadow,
    pcn_propose,
    run_chain,
)
from .errors import (
    ConfigError,
    DatasetFormatError,
    DiagnosticCapExceeded,
    DimensionMismatchError,
    InvariantViolation,
    ShadowBenchError,
)
from .experiments import (
    ExperimentPlan,
    TrialResult,
    canonical_observables,
    mse,
    random_observable,
    run_experiment,
)
from .hilbert import hermitian_eigenvalues, inner_product, normalize
from .shadow import (
    Observable,
    Shadow,
    closest_physical_state,
    shadow_expectation,
    shadow_expectation_grid,
    shadow_matrix,
    shadow_self_overlap,
)
from .simulate import (
    Dataset,
    RngStream,
    load_dataset,
    sample_haar_unit_vector,
    save_dataset,
    simulate_dataset,
    simulate_shot,
)

__version__ = "0.1.0"

__all__ = [
    "hermitian_eigenvalues",
    "inner_product",
    "normalize",
    "BornLikelihood",
    "ChainConfig",
    "FrobeniusShadowLikelihood",
    "ObservableLikelihood",
    "PosteriorSamples",
    "bme_expectation",
    "log_likelihood",
    "overlap_with_shadow",
    "pcn_propose",
    "run_chain",
    "ConfigError",
    "DatasetFormatError",
    "DiagnosticCapExceeded",
    "DimensionMismatchError",
    "InvariantViolation",
    "ShadowBenchError",
    "ExperimentPlan",
    "TrialResult",
    "canonical_observables",
    "mse",
    "random_observable",
    "run_experiment",
    "Observable",
    "Shadow",
    "closest_physical_state",
    "shadow_expectation",
    "shadow_expectation_grid",
    "shadow_matrix",
    "shadow_self_overlap",
    "Dataset",
    "RngStream",
    "load_dataset",
    "sample_haar_unit_vector",
    "save_dataset",
    "simulate_dataset",
    "simulate_shot",
]
