import pytest

from tracelink.corpus import TraceMatrix
from tracelink.engines import build_index, rank_targets
from tracelink.errors import ValidationError
from tracelink.preprocess import PreprocessConfig
from tracelink.recover import (
    RecoveryConfig,
    export_candidates,
    load_candidates,
    recover,
)

from helpers import make_dataset, planted_dataset


def test_no_selection_rule_errors(tiny_dataset):
    with pytest.raises(ValidationError, match="no selection rule"):
        recover(tiny_dataset, RecoveryConfig())


def test_threshold_zero_returns_all_pairs(tiny_dataset):
    matrix = recover(tiny_dataset, RecoveryConfig(threshold=0.0))
    assert len(matrix) == len(tiny_dataset.sources) * len(tiny_dataset.targets)


def test_top_k_one_on_planted_data():
    data = planted_dataset(8, 8, seed=4)
    matrix = recover(data, RecoveryConfig(top_k=1))
    assert len(matrix) == 8


def test_threshold_is_inclusive_on_duplicate_text():
    data = make_dataset(
        {"s1": "identical text body"},
        {"t1": "identical text body", "t2": "something else entirely"},
        [],
    )
    matrix = recover(data, RecoveryConfig(threshold=1.0))
    assert matrix.pairs() == {("s1", "t1")}
    link = matrix.get("s1", "t1")
    assert link.score == pytest.approx(1.0)


def test_raising_threshold_never_adds_links(tiny_dataset):
    previous = None
    for threshold in (0.0, 0.2, 0.5, 0.9, 1.0):
        pairs = recover(tiny_dataset, RecoveryConfig(threshold=threshold)).pairs()
        if previous is not None:
            assert pairs <= previous
        previous = pairs


def test_scores_match_rank_targets(tiny_dataset):
    cfg = RecoveryConfig(threshold=0.0)
    matrix = recover(tiny_dataset, cfg)
    index = build_index(tiny_dataset.targets, cfg.preprocess, cfg.weighting)
    for source in tiny_dataset.sources:
        for target_id, score in rank_targets(source, index, cfg.measure):
            assert matrix.get(source.id, target_id).score == pytest.approx(score)


def test_recover_is_deterministic(tiny_dataset):
    cfg = RecoveryConfig(engine="lda", threshold=0.0, lda_iterations=30, seed=9)
    a = recover(tiny_dataset, cfg)
    b = recover(tiny_dataset, cfg)
    assert [(l.id, l.score) for l in a] == [(l.id, l.score) for l in b]


def test_recover_jobs_do_not_change_results(tiny_dataset):
    one = recover(tiny_dataset, RecoveryConfig(threshold=0.0, jobs=1))
    four = recover(tiny_dataset, RecoveryConfig(threshold=0.0, jobs=4))
    assert [(l.id, l.score) for l in one] == [(l.id, l.score) for l in four]


def test_per_source_mode(tiny_dataset):
    cfg = RecoveryConfig(mode="per_source", source_id="s1", top_k=2)
    matrix = recover(tiny_dataset, cfg)
    assert len(matrix) == 2
    assert all(l.source_id == "s1" for l in matrix)


def test_per_source_requires_known_source(tiny_dataset):
    with pytest.raises(ValidationError):
        recover(tiny_dataset, RecoveryConfig(mode="per_source", top_k=1))
    with pytest.raises(ValidationError):
        recover(tiny_dataset, RecoveryConfig(mode="per_source", source_id="nope", top_k=1))


def test_recover_empty_targets_yields_empty_matrix():
    data = make_dataset({"s1": "alpha"}, {}, [])
    matrix = recover(data, RecoveryConfig(threshold=0.0))
    assert len(matrix) == 0


def test_recover_links_are_automatic_with_scores(tiny_dataset):
    matrix = recover(tiny_dataset, RecoveryConfig(top_k=1))
    for link in matrix:
        assert link.provenance == "automatic"
        assert link.protected is False
        assert 0.0 <= link.score <= 1.0


def test_classifier_engine_ranks_planted_data():
    data = planted_dataset(6, 6, seed=5)
    matrix = recover(data, RecoveryConfig(engine="classifier", top_k=1, seed=0))
    assert len(matrix) == 6
    hits = sum(1 for l in matrix if l.target_id == f"t{l.source_id[1:]}")
    assert hits >= 4


def test_lsi_and_lda_engines_run(tiny_dataset):
    for engine in ("lsi", "lda"):
        cfg = RecoveryConfig(engine=engine, top_k=1, lda_iterations=20)
        matrix = recover(tiny_dataset, cfg)
        assert len(matrix) == len(tiny_dataset.sources)


def test_export_candidates_sorted(tmp_path, tiny_dataset):
    matrix = recover(tiny_dataset, RecoveryConfig(threshold=0.0))
    path = tmp_path / "candidates.csv"
    text = export_candidates(matrix, "vsm", path)
    lines = text.strip().splitlines()
    assert lines[0] == "source_id,target_id,score,engine"
    rows = [line.split(",") for line in lines[1:]]
    keys = [(r[0], -float(r[2]), r[1]) for r in rows]
    assert keys == sorted(keys)
    loaded, rankings = load_candidates(path)
    assert loaded.pairs() == matrix.pairs()
    assert set(rankings) == {a.id for a in tiny_dataset.sources}


def test_recovery_config_validation():
    with pytest.raises(ValueError):
        RecoveryConfig(engine="bert")
    with pytest.raises(ValueError):
        RecoveryConfig(mode="streaming")
    with pytest.raises(ValueError):
        RecoveryConfig(threshold=1.5)
    with pytest.raises(ValueError):
        RecoveryConfig(top_k=0)
