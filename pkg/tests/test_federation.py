"""Federated averaging loop tests."""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fedguard as fg
from fedguard.config import ExperimentConfig, SyntheticSource
from fedguard.defense import ScoreLedger
from fedguard.errors import NoParticipantsError, ParameterError, ShapeError
from fedguard.federation import (
    ExperimentTrace,
    FederationState,
    RoundContext,
    average_weights,
    run_round,
    run_training,
)
from fedguard.model import ParameterVector, TrainConfig, local_train
from fedguard.seeds import derive_seed


def _vec(*values) -> ParameterVector:
    return ParameterVector(np.array(values, dtype=float))


def _small_config(**overrides) -> ExperimentConfig:
    base = dict(
        dataset=SyntheticSource(n_samples=600, n_features=6, n_tags=10, separation=4.0),
        n_clients=5,
        max_rounds=15,
        master_seed=11,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# --- averaging --------------------------------------------------------------


def test_average_single_vector_is_identity():
    v = _vec(1.5, -2.0, 3.0)
    out = average_weights([v])
    assert np.array_equal(out.values, v.values)


def test_average_two_vectors():
    out = average_weights([_vec(1.0, 3.0), _vec(3.0, 5.0)])
    assert np.allclose(out.values, [2.0, 4.0])


def test_average_matches_summation_oracle():
    rng = np.random.default_rng(6)
    updates = [ParameterVector(rng.normal(size=8)) for _ in range(10)]
    out = average_weights(updates)
    total = np.zeros(8)
    for u in updates:
        total = total + u.values
    assert np.max(np.abs(out.values - total / 10)) < 1e-12


def test_average_permutation_invariant():
    rng = np.random.default_rng(7)
    updates = [ParameterVector(rng.normal(size=5)) for _ in range(6)]
    base = average_weights(updates)
    perm = average_weights(updates[::-1])
    assert np.allclose(base.values, perm.values, atol=1e-15)


def test_average_rejects_empty():
    with pytest.raises(ParameterError):
        average_weights([])


def test_average_rejects_mismatched_dims():
    with pytest.raises(ShapeError):
        average_weights([_vec(1.0), _vec(1.0, 2.0)])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 8))
def test_average_permutation_invariance_property(seed, n):
    rng = np.random.default_rng(seed)
    updates = [ParameterVector(rng.normal(size=4)) for _ in range(n)]
    perm = list(rng.permutation(n))
    a = average_weights(updates)
    b = average_weights([updates[i] for i in perm])
    assert np.allclose(a.values, b.values, atol=1e-14)


# --- run_round --------------------------------------------------------------


def _setup_round(cfg: ExperimentConfig):
    corpus = fg.generate_synthetic(
        cfg.dataset.n_samples,
        cfg.dataset.n_features,
        cfg.dataset.n_tags,
        cfg.dataset.separation,
        seed=derive_seed(cfg.master_seed, "data", 0),
    )
    train_set, test_set = fg.train_test_split(corpus, 0.2, seed=derive_seed(cfg.master_seed, "split", 0))
    shards = {
        s.client_id: s
        for s in fg.partition(train_set, cfg.partition_spec(), seed=derive_seed(cfg.master_seed, "partition", 0))
    }
    params = fg.init_params(train_set.n_features + 1, seed=derive_seed(cfg.master_seed, "init", 0))
    state = FederationState(
        round=0,
        global_params=params,
        active_clients=set(shards),
        ledger=ScoreLedger(threshold=cfg.defense.threshold),
        history=ExperimentTrace(),
    )
    ctx = RoundContext(train=cfg.train, eval_data=test_set, master_seed=cfg.master_seed)
    return state, shards, ctx


def test_single_honest_client_round_equals_local_train():
    cfg = _small_config(n_clients=1)
    state, shards, ctx = _setup_round(cfg)
    start = state.global_params
    report = run_round(state, shards, None, cfg.defense, ctx)
    expected = local_train(
        start,
        shards[0],
        replace(cfg.train, seed=derive_seed(cfg.master_seed, "client_train.0", 1)),
    )
    assert np.array_equal(report.averaged.values, expected.values)
    assert report.cluster_count == 1
    assert state.round == 1


def test_round_with_no_active_clients_raises():
    cfg = _small_config()
    state, shards, ctx = _setup_round(cfg)
    state.active_clients = set()
    with pytest.raises(NoParticipantsError, match="no participants"):
        run_round(state, shards, None, cfg.defense, ctx)


def test_clean_rounds_mostly_single_cluster_no_flags():
    cfg = _small_config(n_clients=10, dataset=SyntheticSource(1200, 6, 20, 4.0))
    state, shards, ctx = _setup_round(cfg)
    reports = [run_round(state, shards, None, cfg.defense, ctx) for _ in range(15)]
    singles = sum(1 for r in reports if r.cluster_count == 1)
    assert singles >= 0.9 * len(reports)
    assert sum(1 for r in reports if r.flagged) <= 1


def test_eliminated_clients_never_submit_again():
    cfg = fg.with_seed(fg.preset("attack40"), 1)
    cfg = replace(cfg, max_rounds=40)
    state, shards, ctx = _setup_round(cfg)
    plan = fg.build_plan(
        cfg.n_clients,
        cfg.adversary.fraction,
        cfg.adversary.scenario,
        cfg.adversary.noise,
        seed=derive_seed(cfg.master_seed, "plan", 0),
    )
    gone: set[int] = set()
    for _ in range(40):
        report = run_round(state, shards, plan, cfg.defense, ctx)
        assert not gone & set(report.submitted)
        gone |= set(report.eliminated_this_round)
    assert gone == set(plan.adversary_ids)


# --- run_training -----------------------------------------------------------


def test_zero_rounds_gives_initial_evaluation_only():
    trace = run_training(_small_config(max_rounds=0))
    assert trace.rows == []
    assert trace.initial_metrics is not None
    assert trace.final_metrics == trace.initial_metrics


def test_training_deterministic():
    cfg = _small_config()
    a = run_training(cfg)
    b = run_training(cfg)
    assert a.rows == b.rows
    assert a.final_metrics == b.final_metrics


def test_training_rows_contiguous_from_one():
    trace = run_training(_small_config())
    assert [r.round for r in trace.rows] == list(range(1, len(trace.rows) + 1))


def test_clean_synthetic_default_converges_accurately():
    trace = run_training(fg.with_seed(fg.preset("clean"), 1))
    assert trace.final_metrics.accuracy >= 0.95
    assert trace.rounds_executed <= 100


def test_defense_is_pure_filter_when_nothing_flagged():
    # Homogeneous shards (proportional split of IID-ish data) never trip the
    # detector, so defense on vs off must trace identical parameters.
    base = _small_config(
        n_clients=6,
        partition_mode="proportional",
        dataset=SyntheticSource(900, 5, 6, 4.0),
        max_rounds=12,
    )
    on = run_training(base)
    off = run_training(fg.with_defense(base, False))
    assert all(not r.flagged for r in on.rows)
    assert [r.accuracy for r in on.rows] == [r.accuracy for r in off.rows]
    assert [r.loss for r in on.rows] == [r.loss for r in off.rows]


def test_training_rejects_single_class_corpus(tmp_path):
    f = tmp_path / "one_class.csv"
    f.write_text("a,b,label\n1,2,bad\n3,4,bad\n5,6,bad\n7,8,bad\n")
    cfg = _small_config(
        dataset=fg.CsvSource(path=str(f), label_column="label"),
        n_clients=1,
        partition_mode="proportional",
    )
    with pytest.raises(ParameterError, match="both classes"):
        run_training(cfg)


def test_on_round_callback_sees_every_row():
    seen = []
    trace = run_training(_small_config(max_rounds=7), on_round=seen.append)
    assert seen == trace.rows
