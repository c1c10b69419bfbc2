"""Training-free incremental prototype classification with hybrid
cosine/Mahalanobis calibration, plus the cross-domain variable-shot
benchmark protocol, metrics, synthetic domain generators, and
independence diagnostics."""

from .core import (
    ClassRegistry,
    DomainTask,
    EmbeddingVector,
    FusedEmbedding,
    FusionMode,
    LabeledSample,
    RegistryEntry,
    Split,
    TaskStream,
    assemble_stream,
    fuse_embedding,
)
from .dataio import Dataset, read_dataset, read_snapshot, write_dataset, write_snapshot
from .diagnostics import (
    IndependenceReport,
    MiGainReport,
    SurrogateSampleSet,
    binned_mi,
    calibrate_independence_epsilon,
    calibrate_label_epsilon,
    default_xor_labeler,
    draw_surrogate,
    independence_check,
    mi_gain_check,
)
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    FileIOError,
    FormatError,
    HycalError,
    IntegrityError,
    ProtocolError,
    SingularCovarianceError,
    TruncatedError,
    ValidationError,
    ZeroVectorError,
)
from .harness import (
    PredictionRecord,
    SessionOutcome,
    SettingKind,
    SettingSpec,
    SweepSpec,
    recommended_gate,
    run_session,
    run_session_multi,
    run_sweep,
    sample_shots,
)
from .inference import (
    HybridConfig,
    MahaNormalization,
    ScoreBreakdown,
    ScoreEntry,
    Scorer,
    classify,
    classify_batch,
    cosine_sim,
    dynamic_weight,
    mahalanobis_sq,
)
from .metrics import (
    SessionResult,
    average_acc,
    last_acc,
    s_adapt,
    s_cde,
    s_last,
    session_report,
    task_weights,
)
from .prototypes import (
    ClassPrototype,
    PrototypeStore,
    RegularizationConfig,
    ingest_task,
    learn_prototype,
)
from .synthetic import (
    SyntheticDomainSpec,
    domain_gravity_scenario,
    gaussian_entropy_nats,
    generate_domain,
    generate_domains,
)

__version__ = "0.1.0"
