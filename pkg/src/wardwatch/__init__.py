"""Daily deterioration-risk scoring, explanation, and triage alerting."""

from .alerting import (
    AlertRecord,
    AlertStore,
    FeedbackEntry,
    FeedbackLedger,
    Tier,
    TierThresholds,
    assign_tier,
    daily_run,
    threshold_whatif,
)
from .cohort import (
    CohortConfig,
    PatientDayKey,
    PatientStay,
    apply_cohort_filters,
    enumerate_patient_days,
    generate_cohort,
    label_day,
)
from .errors import (
    ConfigurationError,
    CorpusError,
    InputValidationError,
    SplitError,
    TrainingError,
    UndefinedMetricError,
    WardwatchError,
)
from .evaluate import ablation_table, auroc, calibration_curve, threshold_sweep
from .explain import brute_force_shapley, tree_shap, tree_shap_batch, top_drivers
from .features import FeatureConfig, FeatureMatrix, featurize_cohort
from .ingest import leakage_audit, parse_cohort_file
from .model import (
    HyperParams,
    SplitSpec,
    TreeEnsemble,
    chronological_split,
    grid_search,
    load_model,
    save_model,
    train_gbt,
    train_rf,
)
from .textembed import HashingEmbedder, PromptTemplate, embed_text, pool_day

__version__ = "0.1.0"
