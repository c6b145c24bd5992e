import itertools
import math
import random

import pytest

from tracelink.corpus import TraceLink, TraceMatrix
from tracelink.evalkit import (
    RankedResult,
    average_precision,
    dcg_at_k,
    evaluation_report,
    lag,
    mean_average_precision,
    precision_at_k,
    precision_recall_f,
)


def matrix_of(pairs):
    m = TraceMatrix()
    for s, t in pairs:
        m.add(TraceLink(id=f"{s}:{t}", source_id=s, target_id=t))
    return m


def ranked(source, targets):
    n = len(targets)
    return RankedResult(source, [(t, 1.0 - i / max(n, 1)) for i, t in enumerate(targets)])


# brute-force oracles, kept deliberately naive


def brute_prf(pred, gold, beta):
    hits = len([p for p in pred if p in gold])
    precision = hits / len(pred) if pred else 0.0
    recall = hits / len(gold) if gold else 0.0
    if precision == 0.0 and recall == 0.0:
        f = 0.0
    else:
        f = (1 + beta * beta) * precision * recall / (beta * beta * precision + recall)
    return precision, recall, f


def brute_ap(ranking, relevant):
    scores = []
    for target in relevant:
        if target in ranking:
            rank = ranking.index(target) + 1
            hits = len([t for t in ranking[:rank] if t in relevant])
            scores.append(hits / rank)
        else:
            scores.append(0.0)
    return sum(scores) / len(scores)


def brute_lag(rankings, gold):
    lags = []
    for source, ranking in rankings.items():
        relevant = {t for s, t in gold if s == source}
        for target in ranking:
            if target in relevant:
                lags.append(len([u for u in ranking[: ranking.index(target)] if u not in relevant]))
    return sum(lags) / len(lags)


def brute_dcg(ranking, relevant, k):
    return sum(
        1.0 / math.log2(i + 2) for i, t in enumerate(ranking[:k]) if t in relevant
    )


def test_prf_identical_matrices():
    gold = matrix_of([("s1", "t1"), ("s2", "t2")])
    result = precision_recall_f(gold, gold)
    assert result == {"precision": 1.0, "recall": 1.0, "f_beta": 1.0}


def test_prf_disjoint_matrices():
    pred = matrix_of([("s1", "t9")])
    gold = matrix_of([("s1", "t1")])
    result = precision_recall_f(pred, gold)
    assert result == {"precision": 0.0, "recall": 0.0, "f_beta": 0.0}


def test_prf_hand_computed():
    pred = matrix_of([("s", f"t{i}") for i in range(4)])
    gold = matrix_of([("s", f"t{i}") for i in range(2, 7)])
    r1 = precision_recall_f(pred, gold, beta=1.0)
    assert r1["precision"] == pytest.approx(0.5)
    assert r1["recall"] == pytest.approx(0.4)
    assert r1["f_beta"] == pytest.approx(4 / 9)
    r2 = precision_recall_f(pred, gold, beta=2.0)
    assert r2["f_beta"] == pytest.approx(5 * 0.5 * 0.4 / (4 * 0.5 + 0.4))


def test_prf_empty_prediction_zero():
    gold = matrix_of([("s1", "t1")])
    assert precision_recall_f(matrix_of([]), gold)["precision"] == 0.0


def test_prf_both_empty_is_perfect():
    assert precision_recall_f(matrix_of([]), matrix_of([]))["f_beta"] == 1.0


def test_f_beta_between_min_and_max():
    rng = random.Random(0)
    for _ in range(50):
        pred = matrix_of({("s", f"t{rng.randrange(10)}") for _ in range(5)})
        gold = matrix_of({("s", f"t{rng.randrange(10)}") for _ in range(5)})
        r = precision_recall_f(pred, gold, beta=rng.choice([0.5, 1.0, 2.0]))
        low, high = sorted([r["precision"], r["recall"]])
        assert low - 1e-12 <= r["f_beta"] <= high + 1e-12


def test_ap_single_target_rank1():
    gold = matrix_of([("s", "t1")])
    assert average_precision(ranked("s", ["t1", "t2"]), gold) == 1.0


def test_ap_single_target_rank2():
    gold = matrix_of([("s", "t2")])
    assert average_precision(ranked("s", ["t1", "t2"]), gold) == 0.5


def test_map_mean_of_aps():
    gold = matrix_of([("a", "t1"), ("b", "t2")])
    results = [ranked("a", ["t1", "t2"]), ranked("b", ["t1", "t2"])]
    assert mean_average_precision(results, gold) == 0.75


def test_map_excludes_sources_without_gold():
    gold = matrix_of([("a", "t1")])
    results = [ranked("a", ["t1"]), ranked("orphan", ["t1"])]
    assert mean_average_precision(results, gold) == 1.0


def test_map_invariant_under_source_permutation():
    gold = matrix_of([("a", "t1"), ("b", "t3"), ("c", "t2")])
    results = [
        ranked("a", ["t1", "t2", "t3"]),
        ranked("b", ["t1", "t2", "t3"]),
        ranked("c", ["t1", "t2", "t3"]),
    ]
    baseline = mean_average_precision(results, gold)
    for perm in itertools.permutations(results):
        assert mean_average_precision(list(perm), gold) == pytest.approx(baseline)


def test_lag_perfect_ranking_zero():
    gold = matrix_of([("s", "t1"), ("s", "t2")])
    assert lag([ranked("s", ["t1", "t2", "t3"])], gold) == 0.0


def test_lag_counts_false_positives_above():
    gold = matrix_of([("s", "t3")])
    assert lag([ranked("s", ["t1", "t2", "t3"])], gold) == 2.0


def test_lag_unchanged_by_fp_below_but_precision_drops():
    gold = matrix_of([("s", "t1")])
    short = [ranked("s", ["t1", "t2"])]
    longer = [ranked("s", ["t1", "t2", "t9"])]
    assert lag(short, gold) == lag(longer, gold)
    pred_short = matrix_of([("s", "t1"), ("s", "t2")])
    pred_long = matrix_of([("s", "t1"), ("s", "t2"), ("s", "t9")])
    assert (
        precision_recall_f(pred_long, gold)["precision"]
        < precision_recall_f(pred_short, gold)["precision"]
    )


def test_dcg_rank1():
    gold = matrix_of([("s", "t1")])
    assert dcg_at_k(ranked("s", ["t1", "t2"]), gold, 1) == 1.0


def test_dcg_rank2_discount():
    gold = matrix_of([("s", "t2")])
    assert dcg_at_k(ranked("s", ["t1", "t2"]), gold, 2) == pytest.approx(1 / math.log2(3))


def test_precision_at_k():
    gold = matrix_of([("s", "t1"), ("s", "t3")])
    assert precision_at_k(ranked("s", ["t1", "t2", "t3"]), gold, 2) == 0.5
    assert precision_at_k(ranked("s", ["t1", "t2", "t3"]), gold, 3) == pytest.approx(2 / 3)


def test_ranked_result_requires_non_increasing_scores():
    with pytest.raises(ValueError):
        RankedResult("s", [("t1", 0.2), ("t2", 0.9)])


def test_metrics_match_brute_force_random_instances():
    rng = random.Random(99)
    for _ in range(60):
        n_targets = rng.randint(1, 12)
        targets = [f"t{i}" for i in range(n_targets)]
        ranking = rng.sample(targets, n_targets)
        relevant = set(rng.sample(targets, rng.randint(1, n_targets)))
        gold = matrix_of([("s", t) for t in relevant])
        result = ranked("s", ranking)
        assert average_precision(result, gold) == pytest.approx(
            brute_ap(ranking, sorted(relevant)), abs=1e-12
        )
        assert lag([result], gold) == pytest.approx(
            brute_lag({"s": ranking}, {("s", t) for t in relevant}), abs=1e-12
        )
        k = rng.randint(1, n_targets)
        assert dcg_at_k(result, gold, k) == pytest.approx(
            brute_dcg(ranking, relevant, k), abs=1e-12
        )


def test_evaluation_report_shapes():
    gold = matrix_of([("a", "t1"), ("b", "t2")])
    pred = matrix_of([("a", "t1"), ("b", "t1")])
    results = [ranked("a", ["t1", "t2"]), ranked("b", ["t1", "t2"])]
    summary, per_source = evaluation_report(results, pred, gold, k=2)
    assert summary["precision"] == 0.5
    assert "map" in summary and "lag" in summary
    lines = per_source.strip().splitlines()
    assert lines[0].startswith("source_id")
    assert len(lines) == 3
