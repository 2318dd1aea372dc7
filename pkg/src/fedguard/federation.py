"""Server-side federated averaging loop.

Each round: broadcast the global weights, let every active client train
locally (adversaries poison what they send back), cluster the submitted
updates, reward/penalize clients, eliminate those past the score threshold,
average the admitted updates unweighted, and evaluate the new global model
on the held-out test split.

Clustering runs every round as telemetry regardless of whether the defense
is enabled; only the reward/elimination/exclusion side effects are gated on
``defense.enabled``. That keeps the defense a pure filter: with no flags it
never changes the parameter trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .adversary import AdversaryPlan, build_plan, poison_update
from .clustering import PointSet, kmeans, label_clusters, select_cluster_count, wcss_curve
from .config import CsvSource, ExperimentConfig, SyntheticSource
from .data import ClientShard, Dataset, NSL_KDD_COLUMNS, generate_synthetic, load_csv, partition, train_test_split
from .defense import DefenseConfig, ScoreLedger, apply_rewards, eliminate
from .errors import NoParticipantsError, ParameterError, ShapeError
from .model import Metrics, ParameterVector, TrainConfig, evaluate, init_params, local_train
from .seeds import derive_seed


@dataclass(frozen=True)
class RoundRecord:
    """One trace row: what the CSV export carries for a round."""

    round: int
    accuracy: float
    loss: float
    cluster_count: int
    wcss_by_k: tuple[float, ...]
    flagged: tuple[int, ...]
    eliminated: tuple[int, ...]
    n_active: int
    n_eliminated_total: int


@dataclass
class ExperimentTrace:
    """Per-round records plus the run's final summary."""

    rows: list[RoundRecord] = field(default_factory=list)
    initial_metrics: Metrics | None = None
    final_metrics: Metrics | None = None
    adversary_ids: tuple[int, ...] = ()
    elimination_rounds: dict[int, int] = field(default_factory=dict)
    final_scores: dict[int, int] = field(default_factory=dict)
    eliminated: tuple[int, ...] = ()
    converged: bool = False

    @property
    def rounds_executed(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class RoundReport:
    """Full per-round report, including the raw submitted updates."""

    round: int
    submitted: dict[int, ParameterVector]
    averaged: ParameterVector
    eval: Metrics
    cluster_count: int
    flagged: frozenset[int]
    eliminated_this_round: frozenset[int]
    wcss_by_k: tuple[float, ...]


@dataclass
class FederationState:
    """Mutable server state threaded through the rounds."""

    round: int
    global_params: ParameterVector
    active_clients: set[int]
    ledger: ScoreLedger
    history: ExperimentTrace


@dataclass(frozen=True)
class RoundContext:
    """Static per-run inputs every round needs."""

    train: TrainConfig
    eval_data: Dataset
    master_seed: int


def average_weights(updates: list[ParameterVector]) -> ParameterVector:
    """Unweighted elementwise mean of the updates."""
    if not updates:
        raise ParameterError("cannot average an empty update list")
    dim = updates[0].dim
    if any(u.dim != dim for u in updates):
        raise ShapeError("updates have mismatched dimensions")
    return ParameterVector(np.stack([u.values for u in updates]).mean(axis=0))


def run_round(
    state: FederationState,
    shards: Mapping[int, ClientShard],
    plan: AdversaryPlan | None,
    defense: DefenseConfig,
    ctx: RoundContext,
) -> RoundReport:
    """Execute one federated round, mutating ``state`` in place."""
    if not state.active_clients:
        raise NoParticipantsError("no participants")
    round_no = state.round + 1

    submitted: dict[int, ParameterVector] = {}
    for cid in sorted(state.active_clients):
        cfg = replace(ctx.train, seed=derive_seed(ctx.master_seed, f"client_train.{cid}", round_no))
        update = local_train(state.global_params, shards[cid], cfg)
        if plan is not None and cid in plan.adversary_ids:
            rng = np.random.default_rng(derive_seed(ctx.master_seed, f"adversary.{cid}", round_no))
            update = poison_update(update, plan.noise, rng)
        submitted[cid] = update

    points = PointSet.from_updates(submitted)
    cluster_seed = derive_seed(ctx.master_seed, "cluster", round_no)
    curve = tuple(wcss_curve(points, defense.k_max, cluster_seed))
    k = select_cluster_count(points, defense.k_max, defense.elbow_ratio, cluster_seed)
    clustering = kmeans(points, k, cluster_seed)
    verdict = label_clusters(points, clustering, state.global_params)
    flagged = frozenset(verdict.adversary_ids)

    newly_eliminated: frozenset[int] = frozenset()
    if defense.enabled:
        state.ledger = apply_rewards(state.ledger, verdict)
        state.ledger, newly_eliminated = eliminate(state.ledger)
        state.active_clients -= newly_eliminated
        if defense.exclude_flagged_per_round:
            admitted_ids = [cid for cid in sorted(submitted) if cid not in flagged]
        else:
            admitted_ids = sorted(submitted)
    else:
        admitted_ids = sorted(submitted)
    if not admitted_ids:
        # label_clusters always keeps a non-empty benign cluster, so flagging
        # can never empty the round; guard against regressions anyway.
        raise NoParticipantsError("no participants")

    averaged = average_weights([submitted[cid] for cid in admitted_ids])
    state.global_params = averaged
    state.round = round_no
    metrics = evaluate(averaged, ctx.eval_data)

    record = RoundRecord(
        round=round_no,
        accuracy=metrics.accuracy,
        loss=metrics.loss,
        cluster_count=k,
        wcss_by_k=curve,
        flagged=tuple(sorted(flagged)),
        eliminated=tuple(sorted(newly_eliminated)),
        n_active=len(state.active_clients),
        n_eliminated_total=len(state.ledger.eliminated),
    )
    state.history.rows.append(record)
    for cid in newly_eliminated:
        state.history.elimination_rounds[cid] = round_no

    return RoundReport(
        round=round_no,
        submitted=submitted,
        averaged=averaged,
        eval=metrics,
        cluster_count=k,
        flagged=flagged,
        eliminated_this_round=newly_eliminated,
        wcss_by_k=curve,
    )


def build_corpus(cfg: ExperimentConfig) -> Dataset:
    """Materialize the configured dataset (synthetic or CSV)."""
    if isinstance(cfg.dataset, SyntheticSource):
        src = cfg.dataset
        return generate_synthetic(
            src.n_samples,
            src.n_features,
            src.n_tags,
            src.separation,
            seed=derive_seed(cfg.master_seed, "data", 0),
        )
    src = cfg.dataset
    names = NSL_KDD_COLUMNS if src.headerless_kdd else None
    return load_csv(
        src.path,
        src.label_column,
        src.tag_column,
        benign_label=src.benign_label,
        drop_columns=src.drop_columns,
        column_names=names,
    )


def run_training(
    cfg: ExperimentConfig,
    on_round: Callable[[RoundRecord], None] | None = None,
) -> ExperimentTrace:
    """Run rounds until convergence or ``max_rounds``; return the full trace.

    Convergence means the absolute test-loss delta stayed below
    ``convergence_tol`` for ``patience`` consecutive rounds. ``on_round``
    is invoked with each round's record as soon as it exists, which the
    harness uses for incremental CSV flushing.
    """
    corpus = build_corpus(cfg)
    if len(np.unique(corpus.labels)) < 2:
        raise ParameterError("training corpus must contain both classes")
    train_set, test_set = train_test_split(
        corpus, cfg.test_fraction, seed=derive_seed(cfg.master_seed, "split", 0)
    )
    shard_list = partition(train_set, cfg.partition_spec(), seed=derive_seed(cfg.master_seed, "partition", 0))
    shards = {shard.client_id: shard for shard in shard_list}

    plan = build_plan(
        cfg.n_clients,
        cfg.adversary.fraction,
        cfg.adversary.scenario,
        cfg.adversary.noise,
        seed=derive_seed(cfg.master_seed, "plan", 0),
    )
    params = init_params(train_set.n_features + 1, seed=derive_seed(cfg.master_seed, "init", 0))

    trace = ExperimentTrace(adversary_ids=tuple(sorted(plan.adversary_ids)))
    state = FederationState(
        round=0,
        global_params=params,
        active_clients=set(shards),
        ledger=ScoreLedger(threshold=cfg.defense.threshold),
        history=trace,
    )
    ctx = RoundContext(train=cfg.train, eval_data=test_set, master_seed=cfg.master_seed)

    initial = evaluate(params, test_set)
    trace.initial_metrics = initial
    trace.final_metrics = initial

    previous_loss = initial.loss
    streak = 0
    for _ in range(cfg.max_rounds):
        report = run_round(state, shards, plan, cfg.defense, ctx)
        if on_round is not None:
            on_round(trace.rows[-1])
        trace.final_metrics = report.eval
        if abs(report.eval.loss - previous_loss) < cfg.convergence_tol:
            streak += 1
        else:
            streak = 0
        previous_loss = report.eval.loss
        if streak >= cfg.patience:
            trace.converged = True
            break

    trace.final_scores = dict(sorted(state.ledger.scores.items()))
    trace.eliminated = tuple(sorted(state.ledger.eliminated))
    return trace
