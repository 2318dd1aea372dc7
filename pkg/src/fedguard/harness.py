"""Experiment orchestration and metric export.

``run_experiment`` wires data -> model -> federation -> adversary ->
clustering -> defense and writes three artifacts to the output directory:

* ``metrics.csv``    - one row per round, flushed as rounds complete
* ``summary.json``   - final metrics, elimination rounds, final ledger
* ``config_resolved.json`` - the fully-defaulted config actually used

Outputs are a pure function of the config (including the master seed):
running the same config twice produces byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import IO

from .config import ExperimentConfig, config_to_dict
from .federation import ExperimentTrace, RoundRecord, run_training
from .seeds import derive_seed

__all__ = ["run_experiment", "derive_seed", "CSV_COLUMNS", "CSV_FORMAT_VERSION"]

CSV_FORMAT_VERSION = 1
_N_WCSS_COLUMNS = 5
CSV_COLUMNS = (
    "round",
    "accuracy",
    "loss",
    "cluster_count",
    *(f"wcss_k{i}" for i in range(1, _N_WCSS_COLUMNS + 1)),
    "n_flagged",
    "flagged_ids",
    "n_eliminated_total",
    "n_active",
)


def _csv_row(record: RoundRecord) -> str:
    wcss_cells = [repr(v) for v in record.wcss_by_k[:_N_WCSS_COLUMNS]]
    wcss_cells += [""] * (_N_WCSS_COLUMNS - len(wcss_cells))
    cells = [
        str(record.round),
        repr(record.accuracy),
        repr(record.loss),
        str(record.cluster_count),
        *wcss_cells,
        str(len(record.flagged)),
        ";".join(str(c) for c in record.flagged),
        str(record.n_eliminated_total),
        str(record.n_active),
    ]
    return ",".join(cells)


def _write_summary(handle: IO[str], cfg: ExperimentConfig, trace: ExperimentTrace) -> None:
    assert trace.initial_metrics is not None and trace.final_metrics is not None
    summary = {
        "csv_format_version": CSV_FORMAT_VERSION,
        "rounds_executed": trace.rounds_executed,
        "converged": trace.converged,
        "initial": {
            "accuracy": trace.initial_metrics.accuracy,
            "loss": trace.initial_metrics.loss,
        },
        "final": {
            "accuracy": trace.final_metrics.accuracy,
            "loss": trace.final_metrics.loss,
        },
        "adversary_ids": list(trace.adversary_ids),
        "elimination_rounds": {str(cid): rnd for cid, rnd in sorted(trace.elimination_rounds.items())},
        "final_scores": {str(cid): score for cid, score in sorted(trace.final_scores.items())},
        "eliminated": list(trace.eliminated),
        "master_seed": cfg.master_seed,
    }
    json.dump(summary, handle, indent=2, sort_keys=True)
    handle.write("\n")


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path) -> ExperimentTrace:
    """Run the configured experiment and write its artifacts to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "config_resolved.json", "w", encoding="utf-8") as handle:
        json.dump(config_to_dict(cfg), handle, indent=2, sort_keys=True)
        handle.write("\n")

    with open(out / "metrics.csv", "w", encoding="utf-8", newline="\n") as csv_handle:
        csv_handle.write(",".join(CSV_COLUMNS) + "\n")
        csv_handle.flush()

        def flush_row(record: RoundRecord) -> None:
            csv_handle.write(_csv_row(record) + "\n")
            csv_handle.flush()

        trace = run_training(cfg, on_round=flush_row)

    with open(out / "summary.json", "w", encoding="utf-8") as handle:
        _write_summary(handle, cfg, trace)
    return trace
