"""Reward bookkeeping and threshold elimination.

Every round, clients judged benign gain +1 and flagged clients lose 1;
a client whose cumulative score sinks to -threshold is removed from
training permanently. Positive scores are uncapped so a long-honest client
can absorb occasional misflags.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .clustering import ClusterVerdict
from .errors import ContractError, ParameterError

DEFAULT_THRESHOLD = 20
DEFAULT_K_MAX = 5
DEFAULT_ELBOW_RATIO = 0.25


@dataclass(frozen=True)
class DefenseConfig:
    """Knobs for the per-round clustering defense."""

    enabled: bool = True
    threshold: int = DEFAULT_THRESHOLD
    k_max: int = DEFAULT_K_MAX
    elbow_ratio: float = DEFAULT_ELBOW_RATIO
    exclude_flagged_per_round: bool = True

    def __post_init__(self) -> None:
        if self.threshold < 1:
            raise ParameterError("threshold must be >= 1")
        if self.k_max < 1:
            raise ParameterError("k_max must be >= 1")
        if not 0 < self.elbow_ratio < 1:
            raise ParameterError("elbow_ratio must be in (0, 1)")


@dataclass(frozen=True)
class ScoreLedger:
    """Cumulative per-client scores and the set of eliminated clients.

    Clients appear in ``scores`` on their first reward. Once eliminated, a
    client's score is frozen: rewarding it again is a contract violation.
    """

    threshold: int = DEFAULT_THRESHOLD
    scores: dict[int, int] = field(default_factory=dict)
    eliminated: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.threshold < 1:
            raise ParameterError("threshold must be >= 1")


def apply_rewards(ledger: ScoreLedger, verdict: ClusterVerdict) -> ScoreLedger:
    """+1 to every benign client, -1 to every flagged client."""
    touched = verdict.benign_ids | verdict.adversary_ids
    stale = touched & ledger.eliminated
    if stale:
        raise ContractError(f"reward targets eliminated clients: {sorted(stale)}")
    scores = dict(ledger.scores)
    for cid in verdict.benign_ids:
        scores[cid] = scores.get(cid, 0) + 1
    for cid in verdict.adversary_ids:
        scores[cid] = scores.get(cid, 0) - 1
    return ScoreLedger(ledger.threshold, scores, ledger.eliminated)


def eliminate(ledger: ScoreLedger) -> tuple[ScoreLedger, frozenset[int]]:
    """Move every client at or below -threshold into the eliminated set."""
    newly = frozenset(
        cid
        for cid, score in ledger.scores.items()
        if cid not in ledger.eliminated and score <= -ledger.threshold
    )
    updated = ScoreLedger(ledger.threshold, dict(ledger.scores), ledger.eliminated | newly)
    return updated, newly
