"""imbkit: class-imbalance corrections and evaluation for soft-score classifiers.

Data-level corrections (downsampling, oversampling, synthetic
upsampling), decision-level Bayes thresholding, an evaluation suite
(per-class/balanced/worst-class accuracy, exact ROC, calibration
curves) and a reproducible experiment grid runner. Classifiers follow
the scikit-learn estimator surface (fit / predict_proba / get_params),
so anything scoring in [0, 1] plugs in, including external model
processes via a line-delimited JSON protocol.
"""

from .classifiers import (
    DiagonalGaussianNB,
    KernelICLClassifier,
    KNNProportionClassifier,
    SidecarClassifier,
    SoftClassifierSpec,
    SoftScores,
    build_classifier,
    kernel_icl_score,
    median_bandwidth,
    predict_proba,
)
from .data import (
    ContextSet,
    Dataset,
    Split,
    induce_imbalance,
    load_csv,
    load_manifest,
    make_split,
    round_half_up,
    standardize,
)
from .decision import (
    CostMatrix,
    ThresholdRule,
    apply_threshold,
    bayes_threshold,
    empirical_risk,
    threshold_from_costs,
)
from .errors import ImbkitError
from .experiment import (
    ExperimentConfig,
    ResultRow,
    SweepResult,
    aggregate,
    demo_config,
    downsample_sweep,
    run_grid,
    stable_seed,
    threshold_sweep,
)
from .metrics import (
    CalibrationCurve,
    Confusion,
    EvalReport,
    RocCurve,
    average_curves,
    best_balanced_threshold,
    calibration_curve,
    evaluate,
    operating_point,
    roc_curve,
)
from .sampling import (
    MajorityDownsampler,
    MinorityOversampler,
    SamplingMethod,
    SyntheticMinorityUpsampler,
    downsample,
    downsample_to,
    oversample,
    synthetic_upsample,
)
from .synthetic import make_two_gaussians, sample_context, true_posterior

__version__ = "0.1.0"
