"""Trace link recovery over a dataset: score source/target pairs with a
chosen engine and materialize candidate links.

Two modes: per_source ranks targets for one designated source; full_matrix
scores every |S| x |T| pair. The threshold filter is inclusive (score >=
threshold), so threshold 0 keeps everything scored.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Dataset, TraceLink, TraceMatrix
from .engines import (
    DISTRIBUTION_MEASURES,
    LdaModel,
    LsiModel,
    TermDocMatrix,
    build_index,
    default_lsi_k,
    lda_fit,
    lsi_fit,
    rank_targets,
)
from .errors import ValidationError
from .preprocess import PreprocessConfig

ENGINES = ("vsm", "lsi", "lda", "classifier")


@dataclass
class RecoveryConfig:
    engine: str = "vsm"
    measure: str = "cosine"
    mode: str = "full_matrix"
    threshold: float | None = None
    top_k: int | None = None
    source_id: str | None = None
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    weighting: str = "tfidf"
    lsi_k: int | None = None
    lda_topics: int = 10
    lda_iterations: int = 500
    lda_alpha: float | None = None
    lda_beta: float = 0.01
    seed: int = 0
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.mode not in ("per_source", "full_matrix"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1")


def build_engine(dataset: Dataset, cfg: RecoveryConfig):
    """Fit the configured engine over the dataset targets."""
    index = build_index(dataset.targets, cfg.preprocess, cfg.weighting)
    if cfg.engine == "vsm":
        return index
    if cfg.engine == "lsi":
        k = cfg.lsi_k or default_lsi_k(index.n_terms, index.n_docs)
        return lsi_fit(index, min(k, min(index.n_terms, index.n_docs)))
    if cfg.engine == "lda":
        k = min(cfg.lda_topics, max(index.n_docs, 1))
        return lda_fit(index, k, cfg.lda_iterations, cfg.lda_alpha, cfg.lda_beta, cfg.seed)
    raise ValueError(f"engine {cfg.engine!r} has no index-based form")


def _select(ranked: list[tuple[str, float]], cfg: RecoveryConfig) -> list[tuple[str, float]]:
    picked = ranked
    if cfg.threshold is not None:
        picked = [(t, s) for t, s in picked if s >= cfg.threshold]
    if cfg.top_k is not None:
        picked = picked[: cfg.top_k]
    return picked


def _classifier_scores(dataset: Dataset, cfg: RecoveryConfig) -> dict[str, list[tuple[str, float]]]:
    """Score pairs with a link/no_link classifier trained on the answer matrix."""
    from . import learn

    pairs = learn.make_pairs(dataset, "similarity_features", seed=cfg.seed)
    balanced = learn.balance(pairs, "undersample", seed=cfg.seed)
    clf = learn.train(balanced, "logistic_regression", learn.TrainingConfig(seed=cfg.seed))
    by_source: dict[str, list[tuple[str, float]]] = {a.id: [] for a in dataset.sources}
    for pair in pairs:
        proba = learn.predict_proba(clf, pair.features)
        p_link = float(proba[list(clf.classes).index("link")])
        by_source[pair.source_id].append((pair.target_id, p_link))
    for source_id in by_source:
        by_source[source_id].sort(key=lambda ts: (-ts[1], ts[0]))
    return by_source


def recover(dataset: Dataset, cfg: RecoveryConfig, engine=None) -> TraceMatrix:
    """Produce candidate links with provenance=automatic and scores attached."""
    if cfg.threshold is None and cfg.top_k is None:
        raise ValidationError("no selection rule: set threshold and/or top_k")
    if cfg.mode == "per_source":
        if not cfg.source_id:
            raise ValidationError("per_source mode requires source_id")
        if cfg.source_id not in dataset.sources:
            raise ValidationError(f"unknown source id {cfg.source_id!r}")
        sources = [dataset.sources.get(cfg.source_id)]
    else:
        sources = list(dataset.sources)

    matrix = TraceMatrix()
    if len(dataset.targets) == 0 or not sources:
        return matrix

    if cfg.engine == "classifier":
        scored = _classifier_scores(dataset, cfg)
        ranked_per_source = [scored[a.id] for a in sources]
    else:
        if engine is None:
            engine = build_engine(dataset, cfg)

        def rank(artifact):
            return rank_targets(artifact, engine, cfg.measure)

        if cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                ranked_per_source = list(pool.map(rank, sources))
        else:
            ranked_per_source = [rank(a) for a in sources]

    for artifact, ranked in zip(sources, ranked_per_source):
        for target_id, score in _select(ranked, cfg):
            matrix.add(
                TraceLink(
                    id=f"auto:{artifact.id}:{target_id}",
                    source_id=artifact.id,
                    target_id=target_id,
                    score=max(0.0, min(1.0, score)),
                    provenance="automatic",
                )
            )
    return matrix


def export_candidates(matrix: TraceMatrix, engine_name: str, path: str | Path | None = None) -> str:
    """CSV dump sorted by (source_id, descending score, target_id)."""
    rows = sorted(
        ((l.source_id, l.target_id, l.score or 0.0) for l in matrix),
        key=lambda r: (r[0], -r[2], r[1]),
    )
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["source_id", "target_id", "score", "engine"])
    for source_id, target_id, score in rows:
        writer.writerow([source_id, target_id, f"{score:.10f}", engine_name])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_candidates(path: str | Path) -> tuple[TraceMatrix, dict[str, list[tuple[str, float]]]]:
    """Read a candidate CSV back as a matrix plus per-source rankings."""
    matrix = TraceMatrix()
    rankings: dict[str, list[tuple[str, float]]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            score = float(row["score"])
            matrix.add(
                TraceLink(
                    id=f"auto:{row['source_id']}:{row['target_id']}",
                    source_id=row["source_id"],
                    target_id=row["target_id"],
                    score=max(0.0, min(1.0, score)),
                    provenance="automatic",
                )
            )
            rankings.setdefault(row["source_id"], []).append((row["target_id"], score))
    for source_id in rankings:
        rankings[source_id].sort(key=lambda ts: (-ts[1], ts[0]))
    return matrix, rankings
