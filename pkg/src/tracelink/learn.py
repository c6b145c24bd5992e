"""Classification pipeline for link prediction: pair construction, balancing,
splitting, and the two from-scratch classifiers.

Balancing is applied to the training portion of a fold only; balancing test
data would corrupt evaluation. Folds are stratified so the rare link class
appears in every fold.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import ArtifactSet, Dataset
from .engines import (
    build_index,
    default_lsi_k,
    infer_theta,
    jaccard_tokens,
    lda_fit,
    lsi_fit,
    similarity,
)
from .errors import LoadError, ValidationError
from .preprocess import PreprocessConfig, preprocess

SIMILARITY_FEATURES = (
    "cosine_tfidf",
    "jaccard_tokens",
    "lsi_cosine",
    "lda_hellinger",
    "shared_rare_term_count",
)

RARE_DF_CEILING = 2  # a term is "rare" when it appears in at most this many docs

CLASSIFIER_FORMAT = "tracelink-classifier"
CLASSIFIER_VERSION = 1


@dataclass
class FeatureVector:
    values: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != len(self.feature_names):
            raise ValidationError(
                f"{len(self.values)} values for {len(self.feature_names)} feature names"
            )


@dataclass
class LabeledPair:
    source_id: str
    target_id: str
    features: FeatureVector
    label: str
    newest_created_at: float | None = None
    missing_timestamps: tuple[str, ...] = ()


@dataclass
class SplitPlan:
    kind: str = "kfold"
    k: int = 5
    cutoff: float | None = None
    seed: int = 0


@dataclass
class TrainingConfig:
    learning_rate: float = 0.5
    epochs: int = 400
    l2: float = 1e-4
    seed: int = 0
    standardize: bool = True


@dataclass
class Classifier:
    kind: str
    classes: tuple[str, ...]
    feature_names: tuple[str, ...]
    parameters: dict
    training_config: TrainingConfig


def make_pairs(
    dataset: Dataset,
    feature_mode: str = "similarity_features",
    cfg: PreprocessConfig | None = None,
    seed: int = 0,
    lda_topics: int = 5,
    lda_iterations: int = 200,
) -> list[LabeledPair]:
    """Label every |S| x |T| pair and attach its feature vector."""
    if feature_mode not in ("similarity_features", "concatenated_vectors"):
        raise ValueError(f"unknown feature_mode {feature_mode!r}")
    if cfg is None:
        cfg = PreprocessConfig()
    gold = dataset.answers.pairs()

    combined = ArtifactSet("combined")
    side_of: dict[str, str] = {}
    for artifact in dataset.sources:
        clone = _prefixed(artifact, "s")
        combined.add(clone)
        side_of[clone.id] = "source"
    for artifact in dataset.targets:
        clone = _prefixed(artifact, "t")
        combined.add(clone)
        side_of[clone.id] = "target"

    index = build_index(combined, cfg, "tfidf")
    col_of = {doc_id: j for j, doc_id in enumerate(index.doc_ids)}
    tokens_of = {a.id: preprocess(a.full_text, cfg) for a in combined}

    if feature_mode == "similarity_features":
        k = default_lsi_k(index.n_terms, index.n_docs)
        lsi = lsi_fit(index, k)
        lda = lda_fit(
            index,
            min(lda_topics, index.n_docs),
            iterations=lda_iterations,
            seed=seed,
        )
        rare_terms = {i for i, df in enumerate(index.df) if df <= RARE_DF_CEILING}
        names = SIMILARITY_FEATURES
    else:
        names = tuple(
            f"{side}_{term}" for side in ("src", "tgt") for term in index.terms
        )

    pairs: list[LabeledPair] = []
    for source in dataset.sources:
        s_col = col_of[f"s:{source.id}"]
        for target in dataset.targets:
            t_col = col_of[f"t:{target.id}"]
            if feature_mode == "similarity_features":
                values = np.array(
                    [
                        similarity(index.doc_vector(s_col), index.doc_vector(t_col)),
                        jaccard_tokens(tokens_of[f"s:{source.id}"], tokens_of[f"t:{target.id}"]),
                        similarity(lsi.doc_rep(s_col), lsi.doc_rep(t_col)),
                        similarity(lda.theta[:, s_col], lda.theta[:, t_col], "hellinger"),
                        float(
                            len(
                                (index.token_support(s_col) & index.token_support(t_col))
                                & rare_terms
                            )
                        ),
                    ]
                )
            else:
                values = np.concatenate(
                    [index.doc_vector(s_col), index.doc_vector(t_col)]
                )
            missing = tuple(
                a.id for a in (source, target) if a.created_at is None
            )
            newest = (
                max(source.created_at, target.created_at) if not missing else None
            )
            pairs.append(
                LabeledPair(
                    source_id=source.id,
                    target_id=target.id,
                    features=FeatureVector(values, names),
                    label="link" if (source.id, target.id) in gold else "no_link",
                    newest_created_at=newest,
                    missing_timestamps=missing,
                )
            )
    return pairs


def _prefixed(artifact, prefix: str):
    from dataclasses import replace

    return replace(artifact, id=f"{prefix}:{artifact.id}", metadata=dict(artifact.metadata))


def balance(pairs: Sequence[LabeledPair], strategy: str, seed: int = 0) -> list[LabeledPair]:
    """Equalize class counts; deterministic for a given seed."""
    if strategy not in ("undersample", "oversample"):
        raise ValueError(f"unknown strategy {strategy!r}")
    by_label: dict[str, list[LabeledPair]] = {}
    for pair in pairs:
        by_label.setdefault(pair.label, []).append(pair)
    if len(by_label) < 2:
        raise ValidationError("balancing needs at least one pair of each class")
    rng = random.Random(seed)
    sizes = {label: len(items) for label, items in by_label.items()}
    minority = min(sizes.values())
    majority = max(sizes.values())
    out: list[LabeledPair] = []
    for label in sorted(by_label):
        items = by_label[label]
        if strategy == "undersample":
            if len(items) > minority:
                items = rng.sample(items, minority)
            out.extend(items)
        else:
            out.extend(items)
            if len(items) < majority:
                out.extend(rng.choices(items, k=majority - len(items)))
    rng.shuffle(out)
    return out


def split(pairs: Sequence[LabeledPair], plan: SplitPlan) -> list[tuple[list[LabeledPair], list[LabeledPair]]]:
    """Produce (train, test) splits per the plan.

    kfold: stratified folds assigned round-robin so fold sizes differ by at
    most one; every pair is tested exactly once across folds.
    timestamp: train is every pair whose newest artifact predates the cutoff.
    """
    if plan.kind == "kfold":
        if plan.k < 2:
            raise ValueError("k must be >= 2")
        if plan.k > len(pairs):
            raise ValueError(f"k={plan.k} exceeds {len(pairs)} pairs")
        rng = random.Random(plan.seed)
        by_label: dict[str, list[LabeledPair]] = {}
        for pair in pairs:
            by_label.setdefault(pair.label, []).append(pair)
        folds: list[list[LabeledPair]] = [[] for _ in range(plan.k)]
        cursor = 0
        for label in sorted(by_label):
            items = list(by_label[label])
            rng.shuffle(items)
            for item in items:
                folds[cursor % plan.k].append(item)
                cursor += 1
        splits = []
        for i in range(plan.k):
            test = folds[i]
            train = [p for j, fold in enumerate(folds) if j != i for p in fold]
            splits.append((train, test))
        return splits
    if plan.kind == "timestamp":
        if plan.cutoff is None:
            raise ValueError("timestamp split requires a cutoff")
        missing = sorted({aid for p in pairs for aid in p.missing_timestamps})
        if missing:
            raise ValidationError(f"artifacts missing created_at for timestamp split: {missing}")
        train = [p for p in pairs if p.newest_created_at < plan.cutoff]
        test = [p for p in pairs if p.newest_created_at >= plan.cutoff]
        return [(train, test)]
    raise ValueError(f"unknown split kind {plan.kind!r}")


# ---------------------------------------------------------------------------
# classifiers


def logistic_loss_grad(
    w: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy with L2 penalty on the non-bias weights.

    X carries a leading column of ones; w[0] is the bias.
    """
    z = X @ w
    p = 1.0 / (1.0 + np.exp(-z))
    eps = 1e-12
    loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
    reg = w.copy()
    reg[0] = 0.0
    loss += 0.5 * l2 * float(reg @ reg)
    grad = X.T @ (p - y) / len(y) + l2 * reg
    return loss, grad


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return (X - mean) / std, mean, std


def train(
    pairs: Sequence[LabeledPair],
    kind: str = "logistic_regression",
    config: TrainingConfig | None = None,
    sample_weights: Sequence[float] | None = None,
) -> Classifier:
    """Fit a binary classifier on labeled pairs. Both classes must be present."""
    if kind not in ("naive_bayes", "logistic_regression"):
        raise ValueError(f"unknown classifier kind {kind!r}")
    if config is None:
        config = TrainingConfig()
    labels = sorted({p.label for p in pairs})
    if len(labels) < 2:
        raise ValidationError("training data contains a single class")
    if len(labels) > 2:
        raise ValidationError(f"binary classifier got {len(labels)} classes: {labels}")
    feature_names = pairs[0].features.feature_names
    for pair in pairs:
        if pair.features.feature_names != feature_names:
            raise ValidationError("inconsistent feature names across pairs")
    X = np.stack([p.features.values for p in pairs])
    y = np.array([1.0 if p.label == labels[0] else 0.0 for p in pairs])
    weights = None if sample_weights is None else np.asarray(sample_weights, dtype=float)

    if kind == "logistic_regression":
        params = _fit_logistic(X, y, config, weights)
    else:
        params = _fit_gaussian_nb(X, y, weights)
    return Classifier(
        kind=kind,
        classes=tuple(labels),
        feature_names=feature_names,
        parameters=params,
        training_config=config,
    )


def _fit_logistic(
    X: np.ndarray, y: np.ndarray, config: TrainingConfig, weights: np.ndarray | None
) -> dict:
    if config.standardize:
        Xs, mean, std = _standardize(X)
    else:
        Xs, mean, std = X, np.zeros(X.shape[1]), np.ones(X.shape[1])
    X1 = np.column_stack([np.ones(len(Xs)), Xs])
    w = np.zeros(X1.shape[1])
    n = len(y)
    sw = np.ones(n) if weights is None else weights * n / weights.sum()
    for _ in range(config.epochs):
        p = 1.0 / (1.0 + np.exp(-np.clip(X1 @ w, -500, 500)))
        reg = w.copy()
        reg[0] = 0.0
        grad = X1.T @ (sw * (p - y)) / n + config.l2 * reg
        w = w - config.learning_rate * grad
    return {"weights": w, "mean": mean, "std": std}


def _fit_gaussian_nb(X: np.ndarray, y: np.ndarray, weights: np.ndarray | None) -> dict:
    sw = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    var_floor = 1e-9 * float(np.var(X, axis=0).max()) + 1e-12
    stats = {}
    for cls, mask in (("pos", y == 1.0), ("neg", y == 0.0)):
        Xc, wc = X[mask], sw[mask]
        total = wc.sum()
        mean = (Xc * wc[:, None]).sum(axis=0) / total
        var = ((Xc - mean) ** 2 * wc[:, None]).sum(axis=0) / total
        stats[cls] = {
            "prior": float(total / sw.sum()),
            "mean": mean,
            "var": np.maximum(var, var_floor),
        }
    return stats


def predict_proba(clf: Classifier, features: FeatureVector | np.ndarray) -> np.ndarray:
    """Class probabilities aligned with clf.classes; sums to 1."""
    if isinstance(features, FeatureVector):
        if features.feature_names != clf.feature_names:
            raise ValidationError("feature names do not match the trained model")
        x = features.values
    else:
        x = np.asarray(features, dtype=float)
    if x.shape != (len(clf.feature_names),):
        raise ValidationError(
            f"feature dimension {x.shape} does not match model ({len(clf.feature_names)},)"
        )
    if clf.kind == "logistic_regression":
        params = clf.parameters
        xs = (x - params["mean"]) / params["std"]
        z = params["weights"][0] + float(params["weights"][1:] @ xs)
        if z >= 0:
            p_pos = 1.0 / (1.0 + math.exp(-z))
        else:
            e = math.exp(z)
            p_pos = e / (1.0 + e)
        return np.array([p_pos, 1.0 - p_pos])
    stats = clf.parameters
    logs = []
    for cls in ("pos", "neg"):
        s = stats[cls]
        ll = -0.5 * np.sum(np.log(2 * math.pi * s["var"]) + (x - s["mean"]) ** 2 / s["var"])
        logs.append(math.log(s["prior"] + 1e-300) + float(ll))
    m = max(logs)
    exp = [math.exp(v - m) for v in logs]
    total = sum(exp)
    return np.array([exp[0] / total, exp[1] / total])


def predict(clf: Classifier, features: FeatureVector | np.ndarray) -> str:
    proba = predict_proba(clf, features)
    return clf.classes[int(np.argmax(proba))]


def save_classifier(clf: Classifier, path: str | Path) -> None:
    def encode(value):
        if isinstance(value, np.ndarray):
            return {"__array__": value.tolist()}
        if isinstance(value, dict):
            return {k: encode(v) for k, v in value.items()}
        return value

    payload = {
        "format": CLASSIFIER_FORMAT,
        "version": CLASSIFIER_VERSION,
        "kind": clf.kind,
        "classes": list(clf.classes),
        "feature_names": list(clf.feature_names),
        "parameters": encode(clf.parameters),
        "training_config": vars(clf.training_config),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_classifier(path: str | Path) -> Classifier:
    def decode(value):
        if isinstance(value, dict):
            if "__array__" in value:
                return np.array(value["__array__"])
            return {k: decode(v) for k, v in value.items()}
        return value

    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format") != CLASSIFIER_FORMAT:
        raise LoadError(f"{path}: not a {CLASSIFIER_FORMAT} dump")
    if data.get("version") != CLASSIFIER_VERSION:
        raise LoadError(f"{path}: unsupported classifier version {data.get('version')!r}")
    return Classifier(
        kind=data["kind"],
        classes=tuple(data["classes"]),
        feature_names=tuple(data["feature_names"]),
        parameters=decode(data["parameters"]),
        training_config=TrainingConfig(**data["training_config"]),
    )
