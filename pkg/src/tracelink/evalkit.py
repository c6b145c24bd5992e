"""Retrieval and classification metrics for recovery and maintenance runs.

Lag is pinned here as: for each true link, the number of false positives
ranked above it; the reported value is the mean over all true links. DCG
uses binary relevance with a log2(rank + 1) discount.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

from .corpus import TraceMatrix


@dataclass
class RankedResult:
    """Ranked targets for one source, scores non-increasing."""

    source_id: str
    ranked_targets: list[tuple[str, float]]

    def __post_init__(self) -> None:
        scores = [s for _, s in self.ranked_targets]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError(f"scores for {self.source_id!r} are not non-increasing")


def _pairs(matrix: TraceMatrix) -> set[tuple[str, str]]:
    return matrix.pairs()


def precision_recall_f(
    predicted: TraceMatrix, gold: TraceMatrix, beta: float = 1.0
) -> dict[str, float]:
    """Set-overlap precision, recall, and F_beta over (source, target) pairs."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    pred, ref = _pairs(predicted), _pairs(gold)
    if not pred and not ref:
        return {"precision": 1.0, "recall": 1.0, "f_beta": 1.0}
    hits = len(pred & ref)
    precision = hits / len(pred) if pred else 0.0
    recall = hits / len(ref) if ref else 0.0
    if precision + recall == 0.0:
        f_beta = 0.0
    else:
        b2 = beta * beta
        f_beta = (1 + b2) * precision * recall / (b2 * precision + recall)
    return {"precision": precision, "recall": recall, "f_beta": f_beta}


def average_precision(result: RankedResult, gold: TraceMatrix) -> float:
    """Mean of precision@rank over the ranks of the true targets.

    True targets absent from the ranking contribute zero, so this equals the
    standard AP with the gold-link count as denominator.
    """
    relevant = {t for s, t in _pairs(gold) if s == result.source_id}
    if not relevant:
        raise ValueError(f"source {result.source_id!r} has no gold links")
    hits = 0
    total = 0.0
    for rank, (target_id, _) in enumerate(result.ranked_targets, start=1):
        if target_id in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def mean_average_precision(results: list[RankedResult], gold: TraceMatrix) -> float:
    """MAP over sources that have at least one gold link; others are excluded."""
    gold_sources = {s for s, _ in _pairs(gold)}
    aps = [average_precision(r, gold) for r in results if r.source_id in gold_sources]
    if not aps:
        raise ValueError("no ranked source has gold links")
    return sum(aps) / len(aps)


def lag(results: list[RankedResult], gold: TraceMatrix) -> float:
    """Mean number of false positives ranked above each true link."""
    gold_pairs = _pairs(gold)
    lags = []
    for result in results:
        relevant = {t for s, t in gold_pairs if s == result.source_id}
        false_above = 0
        for target_id, _ in result.ranked_targets:
            if target_id in relevant:
                lags.append(false_above)
            else:
                false_above += 1
    if not lags:
        raise ValueError("no true link appears in any ranking")
    return sum(lags) / len(lags)


def dcg_at_k(result: RankedResult, gold: TraceMatrix, k: int) -> float:
    """Binary-relevance DCG with log2(rank + 1) discount."""
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = {t for s, t in _pairs(gold) if s == result.source_id}
    total = 0.0
    for rank, (target_id, _) in enumerate(result.ranked_targets[:k], start=1):
        if target_id in relevant:
            total += 1.0 / math.log2(rank + 1)
    return total


def precision_at_k(result: RankedResult, gold: TraceMatrix, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    relevant = {t for s, t in _pairs(gold) if s == result.source_id}
    top = result.ranked_targets[:k]
    if not top:
        return 0.0
    hits = sum(1 for target_id, _ in top if target_id in relevant)
    return hits / k


def evaluation_report(
    results: list[RankedResult],
    predicted: TraceMatrix,
    gold: TraceMatrix,
    k: int = 10,
) -> tuple[dict[str, float], str]:
    """Summary key/value metrics plus a per-source CSV body."""
    summary = {}
    prf1 = precision_recall_f(predicted, gold, beta=1.0)
    prf2 = precision_recall_f(predicted, gold, beta=2.0)
    summary["precision"] = prf1["precision"]
    summary["recall"] = prf1["recall"]
    summary["f1"] = prf1["f_beta"]
    summary["f2"] = prf2["f_beta"]
    gold_sources = {s for s, _ in _pairs(gold)}
    scored = [r for r in results if r.source_id in gold_sources]
    if scored:
        summary["map"] = mean_average_precision(scored, gold)
        try:
            summary["lag"] = lag(scored, gold)
        except ValueError:
            pass  # no true link appears in any ranking
        summary[f"mean_dcg@{k}"] = sum(dcg_at_k(r, gold, k) for r in scored) / len(scored)

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["source_id", "average_precision", "lag", f"dcg@{k}", f"precision@{k}"])
    for result in sorted(scored, key=lambda r: r.source_id):
        try:
            source_lag = f"{lag([result], gold):.10f}"
        except ValueError:
            source_lag = ""
        writer.writerow(
            [
                result.source_id,
                f"{average_precision(result, gold):.10f}",
                source_lag,
                f"{dcg_at_k(result, gold, k):.10f}",
                f"{precision_at_k(result, gold, k):.10f}",
            ]
        )
    return summary, buf.getvalue()


def write_report(summary: dict[str, float], path: str | Path) -> None:
    lines = [f"{key}={summary[key]:.10f}" for key in sorted(summary)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
