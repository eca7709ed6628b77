"""Time-aware defect-prediction datasets and dormant-defect noise analysis.

Mines Git and Jira histories into release-annotated datasets, measures how
many defective classes an early labeling misses because their defects were
still dormant, and evaluates dropping recent non-defective rows as a
countermeasure, with the full statistical protocol and a synthetic-project
generator for exactly controlled experiments.
"""

__version__ = "0.1.0"

from .history import (
    CommitRecord,
    FileChange,
    ProjectHistory,
    Release,
    ingest_history,
    link_tickets,
    load_history,
    release_of,
    save_history,
)
from .issues import Ticket, av_availability, fetch_issues, load_issues
from .labeling import (
    CellAssessment,
    LabeledCell,
    ObservationPoint,
    assess_cells,
    defect_interval,
    end_of_project,
    label_at,
    snoring_loss,
)
from .szz import (
    CosmeticFilter,
    DEFAULT_FILTER,
    IntroductionEstimate,
    deleted_defect_lines,
    resolve_introduction,
    resolve_introductions,
    trace_last_touch,
)
from .features import FEATURE_NAMES, FeatureVector, compute_features
from .dataset import (
    Dataset,
    DatasetRow,
    assemble,
    drop_nondefective_tail,
    export_csv,
    import_csv,
    ordered_holdout,
    training_views,
    truncate_recent,
)
from .learners import LearnerKind, Prediction, TrainedModel, cfs_select, predict, train
from .stats import (
    ConfusionMatrix,
    PerformanceReport,
    TestResult,
    auc,
    cliffs_delta_paired,
    confusion,
    holm_adjust,
    permutation_test_repeated,
    relative_loss,
    score,
    spearman,
    wilcoxon_signed_rank,
)
from .synth import GroundTruthEntry, SynthConfig, generate
