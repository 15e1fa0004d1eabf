"""Cepstral Fisher's discriminant analysis of replicated time series."""

from .baselines import (
    GroupSpectrumTemplate,
    SpectrumEstimate,
    chernoff_measure,
    classify_information,
    kl_measure,
    smoothed_spectrum,
    tune_chernoff_alpha,
)
from .cepstral import (
    CepstralVector,
    LabeledCepstralCorpus,
    cepstral_coefficients,
    corpus_from_epochs,
)
from .discriminant import (
    ClassificationResult,
    CVResult,
    DiscriminantModel,
    classify,
    fit,
    leave_one_out,
    scores,
    select_L_cv,
    weight_function,
)
from .errors import (
    CepfdaError,
    DegenerateSpectrumError,
    IllConditionedError,
    InvalidArgumentError,
    ParseError,
    SchemaError,
    UnsupportedVersionError,
)
from .simulation import (
    Ar2GroupSpec,
    ExperimentConfig,
    ExperimentReport,
    analytic_ma1_cepstrum,
    analytic_ma1_group_moments,
    gen_conditional_ar2,
    gen_conditional_ma1,
    run_experiment,
    study_group_specs,
)
from .spectral import (
    EstimatorConfig,
    LogSpectrumEstimate,
    TaperBank,
    TimeSeriesEpoch,
    direct_log_spectrum,
    gcv_span,
    multitaper_log_spectrum,
    sine_tapers,
    smoothed_log_spectrum,
    tapered_periodogram,
)

__version__ = "0.1.0"
