"""The three IR representations of a corpus and the similarity measures over them.

TF-IDF weights use w_i = tf_i(d) * idf_i with tf normalized by document token
count and idf_i = log2(n / df_i). LSI is a truncated dense SVD. LDA is a
collapsed Gibbs sampler over raw token counts, deterministic for a fixed seed.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Artifact, ArtifactSet
from .errors import LoadError
from .preprocess import PreprocessConfig, preprocess

MEASURES = ("cosine", "jaccard", "hellinger", "symmetric_kl")
DISTRIBUTION_MEASURES = ("hellinger", "symmetric_kl")

MODEL_FORMAT = "tracelink-model"
MODEL_VERSION = 1


@dataclass
class TermDocMatrix:
    """Sparse term-by-document matrix with per-document token counts kept
    alongside the weights so LDA can consume raw counts."""

    terms: list[str]
    term_index: dict[str, int]
    doc_ids: list[str]
    counts: list[dict[int, int]]
    weights: list[dict[int, float]]
    doc_lengths: list[int]
    df: list[int]
    weighting: str
    cfg: PreprocessConfig = field(default_factory=PreprocessConfig)
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def idf(self, term_idx: int) -> float:
        return math.log2(self.n_docs / self.df[term_idx])

    def vectorize(self, tokens: Sequence[str]) -> np.ndarray:
        """Weight a token list against this index's vocabulary and idf."""
        vec = np.zeros(self.n_terms)
        if not tokens:
            return vec
        counts: dict[int, int] = {}
        for tok in tokens:
            idx = self.term_index.get(tok)
            if idx is not None:
                counts[idx] = counts.get(idx, 0) + 1
        if self.weighting == "bag_of_words":
            for idx in counts:
                vec[idx] = 1.0
        else:
            total = len(tokens)
            for idx, count in counts.items():
                vec[idx] = (count / total) * self.idf(idx)
        return vec

    def doc_vector(self, j: int) -> np.ndarray:
        vec = np.zeros(self.n_terms)
        for idx, w in self.weights[j].items():
            vec[idx] = w
        return vec

    def to_dense(self) -> np.ndarray:
        """m x n weight matrix; cached because ranking reuses it."""
        if self._dense is None:
            dense = np.zeros((self.n_terms, self.n_docs))
            for j, col in enumerate(self.weights):
                for idx, w in col.items():
                    dense[idx, j] = w
            self._dense = dense
        return self._dense

    def token_support(self, j: int) -> set[int]:
        return set(self.counts[j])


def build_index(
    artifact_set: ArtifactSet,
    cfg: PreprocessConfig | None = None,
    weighting: str = "tfidf",
) -> TermDocMatrix:
    """Index an artifact set as a weighted term-by-document matrix."""
    if weighting not in ("tfidf", "bag_of_words"):
        raise ValueError(f"unknown weighting {weighting!r}")
    if cfg is None:
        cfg = PreprocessConfig()
    if weighting == "tfidf" and len(artifact_set) == 0:
        raise ValueError("tfidf weighting requires a non-empty artifact set")

    doc_tokens = [(a.id, preprocess(a.full_text, cfg)) for a in artifact_set]
    terms = sorted({t for _, tokens in doc_tokens for t in tokens})
    term_index = {t: i for i, t in enumerate(terms)}

    counts: list[dict[int, int]] = []
    lengths: list[int] = []
    df = [0] * len(terms)
    for _, tokens in doc_tokens:
        col: dict[int, int] = {}
        for tok in tokens:
            idx = term_index[tok]
            col[idx] = col.get(idx, 0) + 1
        for idx in col:
            df[idx] += 1
        counts.append(col)
        lengths.append(len(tokens))

    n = len(doc_tokens)
    weights: list[dict[int, float]] = []
    for col, length in zip(counts, lengths):
        if weighting == "bag_of_words":
            weights.append({idx: 1.0 for idx in col})
        else:
            weights.append(
                {idx: (c / length) * math.log2(n / df[idx]) for idx, c in col.items()}
            )
    return TermDocMatrix(
        terms=terms,
        term_index=term_index,
        doc_ids=[doc_id for doc_id, _ in doc_tokens],
        counts=counts,
        weights=weights,
        doc_lengths=lengths,
        df=df,
        weighting=weighting,
        cfg=cfg,
    )


# ---------------------------------------------------------------------------
# similarity measures


def _as_array(v) -> np.ndarray:
    return np.asarray(v, dtype=float)


def similarity(u, v, measure: str = "cosine") -> float:
    """Similarity between two equal-length vectors.

    cosine of a zero vector is defined as 0 so unmatched queries still rank.
    Distribution measures require non-negative inputs that sum to one.
    """
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    a, b = _as_array(u), _as_array(v)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if measure == "cosine":
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(np.dot(a, b) / (na * nb))
    if measure == "jaccard":
        sa, sb = set(np.nonzero(a)[0]), set(np.nonzero(b)[0])
        union = sa | sb
        if not union:
            return 0.0
        return len(sa & sb) / len(union)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError(f"{measure} requires non-negative probability vectors")
    if measure == "hellinger":
        dist = math.sqrt(0.5 * float(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2)))
        return 1.0 - min(dist, 1.0)
    # symmetric_kl: Jeffreys divergence mapped to (0, 1] via 1 / (1 + d)
    eps = 1e-12
    p, q = a + eps, b + eps
    p, q = p / p.sum(), q / q.sum()
    d = float(np.sum(p * np.log(p / q)) + np.sum(q * np.log(q / p)))
    return 1.0 / (1.0 + max(d, 0.0))


def jaccard_tokens(tokens_a: Sequence[str], tokens_b: Sequence[str]) -> float:
    """Jaccard over token sets, the form used for document pairs."""
    sa, sb = set(tokens_a), set(tokens_b)
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)


# ---------------------------------------------------------------------------
# LSI


@dataclass
class LsiModel:
    """Truncated SVD of the weight matrix. Document j is represented by
    singular_values * doc_factors[j]; queries are folded in with U_k^T q."""

    k: int
    term_factors: np.ndarray
    doc_factors: np.ndarray
    singular_values: np.ndarray
    index: TermDocMatrix

    @property
    def doc_ids(self) -> list[str]:
        return self.index.doc_ids

    def doc_rep(self, j: int) -> np.ndarray:
        return self.singular_values * self.doc_factors[j]

    def project(self, vec: np.ndarray) -> np.ndarray:
        return self.term_factors.T @ vec

    def reconstruction_error(self) -> float:
        approx = self.term_factors @ np.diag(self.singular_values) @ self.doc_factors.T
        return float(np.linalg.norm(self.index.to_dense() - approx))


def default_lsi_k(n_terms: int, n_docs: int) -> int:
    """30% of the smaller dimension, capped at 200 and floored at 1."""
    return max(1, min(math.ceil(0.3 * min(n_terms, n_docs)), 200))


def lsi_fit(index: TermDocMatrix, k: int | None = None) -> LsiModel:
    m, n = index.n_terms, index.n_docs
    if k is None:
        k = default_lsi_k(m, n)
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k={k} outside [1, {min(m, n)}]")
    u, s, vt = np.linalg.svd(index.to_dense(), full_matrices=False)
    return LsiModel(
        k=k,
        term_factors=u[:, :k],
        doc_factors=vt[:k].T,
        singular_values=s[:k],
        index=index,
    )


# ---------------------------------------------------------------------------
# LDA


@dataclass
class LdaModel:
    """Collapsed-Gibbs LDA estimate: theta is the k x n topic-by-document
    matrix, phi the k x m topic-term matrix, both smoothed from final counts."""

    k: int
    theta: np.ndarray
    phi: np.ndarray
    alpha: float
    beta: float
    iterations: int
    seed: int
    index: TermDocMatrix

    @property
    def doc_ids(self) -> list[str]:
        return self.index.doc_ids


def _gibbs(
    docs: list[list[int]],
    k: int,
    n_terms: int,
    iterations: int,
    alpha: float,
    beta: float,
    rng: random.Random,
    phi_rows: list[list[float]] | None = None,
) -> tuple[list[list[int]], list[list[int]], list[int]]:
    """Run the sampler; with phi_rows fixed this folds in unseen documents."""
    n_docs = len(docs)
    n_dk = [[0] * k for _ in range(n_docs)]
    n_kw = [[0] * n_terms for _ in range(k)]
    n_k = [0] * k
    z: list[list[int]] = []
    for d, words in enumerate(docs):
        assignments = []
        for w in words:
            t = rng.randrange(k)
            assignments.append(t)
            n_dk[d][t] += 1
            if phi_rows is None:
                n_kw[t][w] += 1
                n_k[t] += 1
        z.append(assignments)

    vbeta = n_terms * beta
    weights = [0.0] * k
    rand = rng.random
    for _ in range(iterations):
        for d, words in enumerate(docs):
            dk = n_dk[d]
            zs = z[d]
            for i, w in enumerate(words):
                t = zs[i]
                dk[t] -= 1
                if phi_rows is None:
                    n_kw[t][w] -= 1
                    n_k[t] -= 1
                total = 0.0
                for topic in range(k):
                    if phi_rows is None:
                        p = (
                            (n_kw[topic][w] + beta)
                            / (n_k[topic] + vbeta)
                            * (dk[topic] + alpha)
                        )
                    else:
                        p = phi_rows[topic][w] * (dk[topic] + alpha)
                    total += p
                    weights[topic] = total
                r = rand() * total
                t = 0
                while weights[t] < r:
                    t += 1
                zs[i] = t
                dk[t] += 1
                if phi_rows is None:
                    n_kw[t][w] += 1
                    n_k[t] += 1
    return n_dk, n_kw, n_k


def lda_fit(
    index: TermDocMatrix,
    k: int,
    iterations: int = 1000,
    alpha: float | None = None,
    beta: float = 0.01,
    seed: int = 0,
) -> LdaModel:
    """Fit LDA on raw token counts with collapsed Gibbs sampling."""
    if index.n_docs == 0:
        raise ValueError("cannot fit LDA on an empty corpus")
    if k < 1:
        raise ValueError("k must be >= 1")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if alpha is None:
        alpha = 50.0 / k
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")

    docs = [
        [w for w, c in sorted(col.items()) for _ in range(c)] for col in index.counts
    ]
    rng = random.Random(seed)
    n_dk, n_kw, n_k = _gibbs(docs, k, index.n_terms, iterations, alpha, beta, rng)

    theta = np.zeros((k, index.n_docs))
    for d in range(index.n_docs):
        denom = len(docs[d]) + k * alpha
        for t in range(k):
            theta[t, d] = (n_dk[d][t] + alpha) / denom
    phi = np.zeros((k, max(index.n_terms, 1)))
    for t in range(k):
        denom = n_k[t] + index.n_terms * beta
        if denom == 0.0:
            denom = 1.0
        for w in range(index.n_terms):
            phi[t, w] = (n_kw[t][w] + beta) / denom
    if index.n_terms == 0:
        phi = np.full((k, 1), 1.0)
    return LdaModel(
        k=k, theta=theta, phi=phi, alpha=alpha, beta=beta,
        iterations=iterations, seed=seed, index=index,
    )


def infer_theta(model: LdaModel, tokens: Sequence[str], iterations: int = 50) -> np.ndarray:
    """Fold an unseen document into topic space with phi held fixed."""
    words = [model.index.term_index[t] for t in tokens if t in model.index.term_index]
    if not words:
        return np.full(model.k, 1.0 / model.k)
    rng = random.Random(model.seed * 1000003 + 17)
    phi_rows = [list(model.phi[t]) for t in range(model.k)]
    n_dk, _, _ = _gibbs([words], model.k, model.index.n_terms, iterations,
                        model.alpha, model.beta, rng, phi_rows=phi_rows)
    denom = len(words) + model.k * model.alpha
    return np.array([(n_dk[0][t] + model.alpha) / denom for t in range(model.k)])


def dominant_topics(theta_d: Sequence[float], threshold: float) -> set[int]:
    """1-based topic numbers whose share of the document meets the threshold."""
    return {i + 1 for i, p in enumerate(theta_d) if p >= threshold}


# ---------------------------------------------------------------------------
# ranking


def rank_targets(
    query_artifact: Artifact,
    engine: TermDocMatrix | LsiModel | LdaModel,
    measure: str = "cosine",
) -> list[tuple[str, float]]:
    """Rank every indexed document against the query, descending score,
    ties broken by ascending target id."""
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")

    if isinstance(engine, TermDocMatrix):
        if measure in DISTRIBUTION_MEASURES:
            raise ValueError(f"{measure} applies to topic distributions, not {engine.weighting}")
        tokens = preprocess(query_artifact.full_text, engine.cfg)
        if measure == "jaccard":
            qset = {engine.term_index[t] for t in tokens if t in engine.term_index}
            scores = []
            for j in range(engine.n_docs):
                support = engine.token_support(j)
                union = qset | support
                scores.append(len(qset & support) / len(union) if union else 0.0)
        else:
            qvec = engine.vectorize(tokens)
            dense = engine.to_dense()
            norms = np.linalg.norm(dense, axis=0)
            qnorm = np.linalg.norm(qvec)
            if qnorm == 0.0:
                scores = [0.0] * engine.n_docs
            else:
                dots = qvec @ dense
                with np.errstate(invalid="ignore", divide="ignore"):
                    raw = dots / (norms * qnorm)
                scores = [0.0 if norms[j] == 0.0 else float(raw[j]) for j in range(engine.n_docs)]
        doc_ids = engine.doc_ids
    elif isinstance(engine, LsiModel):
        if measure != "cosine":
            raise ValueError(f"{measure} is not defined on LSI factor vectors")
        tokens = preprocess(query_artifact.full_text, engine.index.cfg)
        qrep = engine.project(engine.index.vectorize(tokens))
        scores = [similarity(qrep, engine.doc_rep(j)) for j in range(engine.index.n_docs)]
        doc_ids = engine.doc_ids
    elif isinstance(engine, LdaModel):
        if measure == "jaccard":
            raise ValueError("jaccard is not defined on topic distributions")
        tokens = preprocess(query_artifact.full_text, engine.index.cfg)
        qtheta = infer_theta(engine, tokens)
        scores = [similarity(qtheta, engine.theta[:, j], measure) for j in range(engine.index.n_docs)]
        doc_ids = engine.doc_ids
    else:
        raise TypeError(f"unsupported engine type {type(engine).__name__}")

    order = sorted(zip(doc_ids, scores), key=lambda pair: (-pair[1], pair[0]))
    return [(doc_id, float(score)) for doc_id, score in order]


# ---------------------------------------------------------------------------
# persistence


def _cfg_to_dict(cfg: PreprocessConfig) -> dict:
    return {
        "lowercase": cfg.lowercase,
        "split_identifiers": cfg.split_identifiers,
        "remove_stopwords": cfg.remove_stopwords,
        "stopword_list": sorted(cfg.stopword_list),
        "stem": cfg.stem,
        "min_token_len": cfg.min_token_len,
        "synonyms": dict(cfg.synonyms),
    }


def _cfg_from_dict(data: dict) -> PreprocessConfig:
    return PreprocessConfig(
        lowercase=data["lowercase"],
        split_identifiers=data["split_identifiers"],
        remove_stopwords=data["remove_stopwords"],
        stopword_list=frozenset(data["stopword_list"]),
        stem=data["stem"],
        min_token_len=data["min_token_len"],
        synonyms=data["synonyms"],
    )


def _index_to_dict(index: TermDocMatrix) -> dict:
    return {
        "terms": index.terms,
        "doc_ids": index.doc_ids,
        "counts": [{str(i): c for i, c in col.items()} for col in index.counts],
        "weights": [{str(i): w for i, w in col.items()} for col in index.weights],
        "doc_lengths": index.doc_lengths,
        "df": index.df,
        "weighting": index.weighting,
        "cfg": _cfg_to_dict(index.cfg),
    }


def _index_from_dict(data: dict) -> TermDocMatrix:
    terms = data["terms"]
    return TermDocMatrix(
        terms=terms,
        term_index={t: i for i, t in enumerate(terms)},
        doc_ids=data["doc_ids"],
        counts=[{int(i): c for i, c in col.items()} for col in data["counts"]],
        weights=[{int(i): w for i, w in col.items()} for col in data["weights"]],
        doc_lengths=data["doc_lengths"],
        df=data["df"],
        weighting=data["weighting"],
        cfg=_cfg_from_dict(data["cfg"]),
    )


def save_model(model: TermDocMatrix | LsiModel | LdaModel, path: str | Path) -> None:
    """Self-describing JSON dump with a version tag."""
    payload: dict = {"format": MODEL_FORMAT, "version": MODEL_VERSION}
    if isinstance(model, TermDocMatrix):
        payload["type"] = "term_doc_matrix"
        payload["index"] = _index_to_dict(model)
    elif isinstance(model, LsiModel):
        payload["type"] = "lsi"
        payload["index"] = _index_to_dict(model.index)
        payload["k"] = model.k
        payload["term_factors"] = model.term_factors.tolist()
        payload["doc_factors"] = model.doc_factors.tolist()
        payload["singular_values"] = model.singular_values.tolist()
    elif isinstance(model, LdaModel):
        payload["type"] = "lda"
        payload["index"] = _index_to_dict(model.index)
        payload["k"] = model.k
        payload["theta"] = model.theta.tolist()
        payload["phi"] = model.phi.tolist()
        payload["alpha"] = model.alpha
        payload["beta"] = model.beta
        payload["iterations"] = model.iterations
        payload["seed"] = model.seed
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path) -> TermDocMatrix | LsiModel | LdaModel:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format") != MODEL_FORMAT:
        raise LoadError(f"{path}: not a {MODEL_FORMAT} dump")
    if data.get("version") != MODEL_VERSION:
        raise LoadError(
            f"{path}: unsupported model version {data.get('version')!r}, expected {MODEL_VERSION}"
        )
    index = _index_from_dict(data["index"])
    if data["type"] == "term_doc_matrix":
        return index
    if data["type"] == "lsi":
        return LsiModel(
            k=data["k"],
            term_factors=np.array(data["term_factors"]),
            doc_factors=np.array(data["doc_factors"]),
            singular_values=np.array(data["singular_values"]),
            index=index,
        )
    if data["type"] == "lda":
        return LdaModel(
            k=data["k"],
            theta=np.array(data["theta"]),
            phi=np.array(data["phi"]),
            alpha=data["alpha"],
            beta=data["beta"],
            iterations=data["iterations"],
            seed=data["seed"],
            index=index,
        )
    raise LoadError(f"{path}: unknown model type {data['type']!r}")
