"""Score normalization, weighted-average fusion, and weight tuning.

Per-query, per-stage scores are shifted into (-inf, 1] (s -> s - max + 1),
which absorbs any constant offset a stage applies to its raw scores. The
fused score is a weighted average of the three normalized scores; weights
are tuned by exhaustive simplex grid search maximizing top-1 exact match.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .eval import GoldRecord, exact_match


@dataclass(frozen=True)
class FusionWeights:
    w_retriever: float
    w_ranker: float
    w_reader: float

    def __post_init__(self):
        if min(self.w_retriever, self.w_ranker, self.w_reader) < 0.0:
            raise ValueError("fusion weights must be non-negative")
        total = self.w_retriever + self.w_ranker + self.w_reader
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"fusion weights must sum to 1, got {total}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w_retriever, self.w_ranker, self.w_reader)


def normalize_scores(scores: Sequence[float]) -> list[float]:
    """Shift scores so the maximum is exactly 1; order-preserving."""
    if not scores:
        return []
    top = max(scores)
    return [s - top + 1.0 for s in scores]


def fuse(normalized: tuple[float, float, float], weights: FusionWeights) -> float:
    n_ret, n_rank, n_read = normalized
    return (weights.w_retriever * n_ret + weights.w_ranker * n_rank
            + weights.w_reader * n_read)


def simplex_grid(grid_step: float) -> list[FusionWeights]:
    """All weight triples on the simplex lattice with the given resolution."""
    if not 0.0 < grid_step <= 0.5:
        raise ValueError(f"grid_step must be in (0, 0.5], got {grid_step}")
    steps = round(1.0 / grid_step)
    grid = []
    for i in range(steps + 1):
        for j in range(steps + 1 - i):
            k = steps - i - j
            grid.append(FusionWeights(i / steps, j / steps, k / steps))
    return grid


@dataclass(frozen=True)
class GridPoint:
    weights: FusionWeights
    em: float


def tune_weights(dev_records: Sequence[GoldRecord], pipeline,
                 grid_step: float = 0.05,
                 ) -> tuple[FusionWeights, list[GridPoint]]:
    """Exhaustive grid search for the EM-maximizing fusion weights.

    Per-stage scores are computed once per question (the expensive part);
    only the fusion/sort/dedup step re-runs per grid point. Ties prefer
    larger w_reader, then larger w_ranker.
    """
    if not dev_records:
        raise ValueError("empty dev set")
    cached = [(record, pipeline.collect_candidates(record.question))
              for record in dev_records]

    report: list[GridPoint] = []
    best: GridPoint | None = None
    for weights in simplex_grid(grid_step):
        hits = 0
        for record, candidates in cached:
            answers = pipeline.fuse_candidates(candidates, weights)
            top = answers[0].answer_text if answers else ""
            hits += exact_match(top, record.gold_answers)
        point = GridPoint(weights, hits / len(cached))
        report.append(point)
        if best is None or point.em > best.em or (
                point.em == best.em
                and (weights.w_reader, weights.w_ranker)
                > (best.weights.w_reader, best.weights.w_ranker)):
            best = point
    return best.weights, report


def write_tuning_csv(report: Sequence[GridPoint], path: str | Path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w_retriever", "w_ranker", "w_reader", "em"])
        for point in report:
            writer.writerow([repr(point.weights.w_retriever),
                             repr(point.weights.w_ranker),
                             repr(point.weights.w_reader), repr(point.em)])
