"""Efficacy, surprisal and prediction-accuracy metrics over round records.

A *cell* is a list of dyads, each dyad a round-ordered list of records.
Metrics are taken from seat ``"a"`` (the model under test) unless told
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

ESTIMATORS = ("marginal", "transition")
N_JOINT_OUTCOMES = 4


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class SurprisalParams:
    log_base: float = 2.0
    estimator: str = "marginal"

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}; valid options: {list(ESTIMATORS)}")
        if self.log_base <= 1.0:
            raise ValueError("log_base must be > 1")


@dataclass
class MetricSeries:
    per_round_mean: list[float]
    key: tuple = field(default=())

    def __len__(self):
        return len(self.per_round_mean)


def _flatten(cell) -> list:
    cell = list(cell)
    if cell and isinstance(cell[0], (list, tuple)):
        return [rec for dyad in cell for rec in dyad]
    return cell


def efficacy(cell, side: str = "a") -> float:
    records = _flatten(cell)
    if not records:
        raise MetricError("efficacy of an empty record set")
    attr = f"reward_{side}"
    return math.fsum(getattr(r, attr) for r in records) / len(records)


def surprisal(p: float, base: float = 2.0) -> float:
    if not p > 0.0:
        raise MetricError(f"surprisal undefined for p={p}")
    if p > 1.0:
        raise MetricError(f"probability above 1: {p}")
    if p == 1.0:
        return 0.0
    return -math.log(p, base) if base != 2.0 else -math.log2(p)


def joint_outcome(rec) -> tuple:
    return (int(rec.action_a), int(rec.action_b))


def surprisal_series(records: Sequence, params: SurprisalParams | None = None) -> list[float]:
    """Per-round surprisal of the joint action pair under an add-one estimator.

    ``marginal``: p(o_t) from counts of o over rounds 0..t-1, i.e.
    ``(n(o_t) + 1) / (t + 4)``.
    ``transition``: p(o_t | o_{t-1}) from counts of observed transitions
    out of o_{t-1}, ``(n(o_{t-1} -> o_t) + 1) / (n(o_{t-1} -> *) + 4)``.
    Round 0 gets the uniform prior 1/4 under both.
    """
    params = params or SurprisalParams()
    base = params.log_base
    out = []
    if params.estimator == "marginal":
        counts: dict = {}
        for t, rec in enumerate(records):
            o = joint_outcome(rec)
            out.append(surprisal((counts.get(o, 0) + 1) / (t + N_JOINT_OUTCOMES), base))
            counts[o] = counts.get(o, 0) + 1
    else:
        pair_counts: dict = {}
        from_counts: dict = {}
        prev = None
        for rec in records:
            o = joint_outcome(rec)
            if prev is None:
                p = 1.0 / N_JOINT_OUTCOMES
            else:
                p = (pair_counts.get((prev, o), 0) + 1) / (from_counts.get(prev, 0) + N_JOINT_OUTCOMES)
                pair_counts[(prev, o)] = pair_counts.get((prev, o), 0) + 1
                from_counts[prev] = from_counts.get(prev, 0) + 1
            out.append(surprisal(p, base))
            prev = o
    return out


def _pointwise_mean(rows: list[list[float]]) -> list[float]:
    if not rows:
        raise MetricError("no dyads to average")
    n = len(rows[0])
    if any(len(r) != n for r in rows):
        raise MetricError(f"ragged dyad lengths: {sorted({len(r) for r in rows})}")
    k = len(rows)
    return [math.fsum(col) / k for col in zip(*rows)]


def mean_surprisal(cell: Iterable[Sequence], params: SurprisalParams | None = None,
                   key: tuple = ()) -> MetricSeries:
    return MetricSeries(_pointwise_mean([surprisal_series(d, params) for d in cell]), key)


def prediction_accuracy(cell: Iterable[Sequence], side: str = "a"
                        ) -> tuple[list[float], float]:
    """Per-round mean correctness across dyads, and 1 - overall correctness."""
    attr = f"pred_correct_{side}"
    rows = []
    for dyad in cell:
        flags = [getattr(r, attr) for r in dyad]
        if any(f is None for f in flags):
            raise MetricError("cell has rounds without predictions (non-predictive phenotype?)")
        rows.append([1.0 if f else 0.0 for f in flags])
    series = _pointwise_mean(rows)
    total = sum(len(r) for r in rows)
    correct = math.fsum(math.fsum(r) for r in rows)
    return series, 1.0 - correct / total


def has_predictions(cell, side: str = "a") -> bool:
    records = _flatten(cell)
    return bool(records) and getattr(records[0], f"pred_correct_{side}") is not None


def late_mean(values: Sequence[float], start: int, stop: int | None = None) -> float:
    window = values[start:stop]
    if not window:
        raise MetricError("empty window")
    return math.fsum(window) / len(window)
