"""Deterministic federated-averaging simulator with a clustering-based
poisoning defense: k-means over submitted updates flags outlier clients,
a reward ledger accumulates verdicts, and clients past the score threshold
are eliminated permanently.
"""

from .adversary import AdversaryPlan, LaplaceParams, build_plan, poison_update, sample_laplace
from .clustering import (
    Clustering,
    ClusterVerdict,
    PointSet,
    assign_points,
    dissimilarity,
    kmeans,
    label_clusters,
    select_cluster_count,
    update_centroids,
    wcss,
    wcss_curve,
)
from .config import (
    AdversaryConfig,
    CsvSource,
    ExperimentConfig,
    SyntheticSource,
    config_from_dict,
    config_to_dict,
    validate_config,
    with_defense,
    with_seed,
)
from .data import (
    ClientShard,
    Dataset,
    PartitionSpec,
    generate_synthetic,
    load_csv,
    partition,
    train_test_split,
)
from .defense import DefenseConfig, ScoreLedger, apply_rewards, eliminate
from .federation import (
    ExperimentTrace,
    FederationState,
    RoundContext,
    RoundRecord,
    RoundReport,
    average_weights,
    run_round,
    run_training,
)
from .harness import run_experiment
from .model import (
    Metrics,
    ParameterVector,
    TrainConfig,
    evaluate,
    init_params,
    local_train,
    logistic_gradient,
    logistic_loss,
    predict_proba,
)
from .presets import PRESET_NAMES, preset
from .seeds import derive_seed

__version__ = "0.1.0"
