"""Multi-class trace-link type prediction for issue-tracker data.

Raw labels from trackers vary wildly (Depend, Dependency, Dependent, ...),
so they pass through an ordered canonicalization rule list first. Pairs are
encoded as TF-IDF text of both issues, one-hot metadata, and the signed
creation-time delta, then classified one-vs-rest with logistic regression.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Artifact, ArtifactSet
from .errors import LoadError, ValidationError
from .learn import FeatureVector, TrainingConfig, _fit_logistic
from .preprocess import PreprocessConfig, preprocess
from .engines import build_index

SECONDS_PER_DAY = 86400.0


@dataclass
class LabelCanonicalizer:
    """Ordered (regex pattern, canonical label) rules; keep_distinct labels
    bypass the rules entirely so e.g. clone is never merged into duplicates."""

    rules: list[tuple[str, str]] = field(default_factory=list)
    keep_distinct: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        self._compiled = [(re.compile(p, re.IGNORECASE), canon) for p, canon in self.rules]

    def canonicalize(self, raw_label: str) -> str:
        label = raw_label.strip().lower()
        if label in self.keep_distinct:
            return label
        for pattern, canon in self._compiled:
            if pattern.fullmatch(label):
                return canon
        return label


DEFAULT_CANONICALIZER = LabelCanonicalizer(
    rules=[
        (r"relat(es?|ed|ing)?( to)?", "related"),
        (r"duplicat(es?|ed|ing|ion)?", "duplicates"),
        (r"block(s|ed|ing)?", "blocks"),
        (r"depend(s|ed|ing|ent|ence|ency|encies)?( upon| on)?", "depends"),
        (r"require(s|d)?|requirement( of)?", "requires"),
        (r"clone(s|d)?", "clone"),
        (r"sub-?tasks?( of)?", "subtask"),
        (r"caus(es?|ed|ing)?", "cause"),
    ],
    keep_distinct=frozenset({"clone"}),
)


def canonicalize(raw_label: str, canon: LabelCanonicalizer | None = None) -> str:
    if canon is None:
        canon = DEFAULT_CANONICALIZER
    return canon.canonicalize(raw_label)


# ---------------------------------------------------------------------------
# issue ingestion


def load_issues(path: str | Path) -> ArtifactSet:
    """Issue dump (CSV or JSON lines) into an artifact set with kind=issue."""
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"missing issue file: {path}")
    issues = ArtifactSet("issues")
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        rows = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    else:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    for row in rows:
        created = row.get("created_at")
        issues.add(
            Artifact(
                id=str(row["id"]),
                kind="issue",
                title=row.get("title") or None,
                text=row.get("description") or "",
                metadata={
                    k: str(row.get(k) or "")
                    for k in ("issue_type", "reporter", "assignee")
                },
                created_at=float(created) if created not in (None, "") else None,
            )
        )
    return issues


def load_typed_links(path: str | Path) -> list[tuple[str, str, str]]:
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"missing link file: {path}")
    links = []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            links.append((row["source_id"], row["target_id"], row["raw_label"]))
    return links


# ---------------------------------------------------------------------------
# encoding


@dataclass
class EncodingConfig:
    use_text: bool = True
    use_metadata: bool = True
    use_time_delta: bool = True
    metadata_fields: tuple[str, ...] = ("issue_type", "reporter", "assignee")
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)


@dataclass
class TypedPair:
    source_id: str
    target_id: str
    features: FeatureVector
    label: str
    newest_created_at: float | None = None
    missing_timestamps: tuple[str, ...] = ()


class PairEncoder:
    """Fixed-dimension encoder fit on an issue set; the dimension and
    category vocabularies never change after fitting."""

    def __init__(self, issues: ArtifactSet, config: EncodingConfig | None = None) -> None:
        self.config = config or EncodingConfig()
        self.index = build_index(issues, self.config.preprocess, "tfidf")
        self._issues = issues
        self.categories: dict[str, list[str]] = {}
        if self.config.use_metadata:
            for fld in self.config.metadata_fields:
                values = sorted({a.metadata.get(fld, "") for a in issues} - {""})
                self.categories[fld] = values
        names: list[str] = []
        if self.config.use_text:
            names += [f"src_tfidf_{t}" for t in self.index.terms]
            names += [f"tgt_tfidf_{t}" for t in self.index.terms]
        if self.config.use_metadata:
            for side in ("src", "tgt"):
                for fld in self.config.metadata_fields:
                    names += [f"{side}_{fld}_{v}" for v in self.categories[fld]]
        if self.config.use_time_delta:
            names.append("creation_delta_days")
        self.feature_names = tuple(names)

    def _issue_text_vec(self, issue: Artifact) -> np.ndarray:
        tokens = preprocess(issue.full_text, self.config.preprocess)
        return self.index.vectorize(tokens)

    def _one_hot(self, issue: Artifact) -> list[float]:
        out: list[float] = []
        for fld in self.config.metadata_fields:
            value = issue.metadata.get(fld, "")
            out.extend(1.0 if value == v else 0.0 for v in self.categories[fld])
        return out

    def encode(self, source: Artifact, target: Artifact) -> np.ndarray:
        parts: list[np.ndarray] = []
        if self.config.use_text:
            parts.append(self._issue_text_vec(source))
            parts.append(self._issue_text_vec(target))
        if self.config.use_metadata:
            parts.append(np.array(self._one_hot(source) + self._one_hot(target)))
        if self.config.use_time_delta:
            if source.created_at is not None and target.created_at is not None:
                delta = (target.created_at - source.created_at) / SECONDS_PER_DAY
            else:
                delta = 0.0
            parts.append(np.array([delta]))
        return np.concatenate(parts) if parts else np.zeros(0)

    def encode_pairs(
        self,
        links: Sequence[tuple[str, str, str]],
        canon: LabelCanonicalizer | None = None,
    ) -> list[TypedPair]:
        pairs = []
        for src_id, tgt_id, raw_label in links:
            if src_id not in self._issues or tgt_id not in self._issues:
                raise ValidationError(f"link ({src_id}, {tgt_id}) references unknown issue ids")
            source, target = self._issues.get(src_id), self._issues.get(tgt_id)
            missing = tuple(a.id for a in (source, target) if a.created_at is None)
            pairs.append(
                TypedPair(
                    source_id=src_id,
                    target_id=tgt_id,
                    features=FeatureVector(self.encode(source, target), self.feature_names),
                    label=canonicalize(raw_label, canon),
                    newest_created_at=(
                        max(source.created_at, target.created_at) if not missing else None
                    ),
                    missing_timestamps=missing,
                )
            )
        return pairs


# ---------------------------------------------------------------------------
# one-vs-rest multi-class model


@dataclass
class TypeClassifier:
    classes: tuple[str, ...]
    feature_names: tuple[str, ...]
    models: dict[str, dict]
    training_config: TrainingConfig
    class_weighted: bool


def train_type_model(
    pairs: Sequence[TypedPair],
    config: TrainingConfig | None = None,
    class_weights: bool = False,
) -> TypeClassifier:
    """One-vs-rest logistic regression over canonical labels.

    With class_weights on, each class's positive examples are weighted
    inversely proportional to the class frequency.
    """
    if config is None:
        config = TrainingConfig()
    counts: dict[str, int] = {}
    for pair in pairs:
        counts[pair.label] = counts.get(pair.label, 0) + 1
    classes = tuple(sorted(counts))
    if len(classes) < 2:
        raise ValidationError("type prediction needs at least 2 classes in training data")
    thin = [c for c in classes if counts[c] < 2]
    if thin:
        raise ValidationError(f"classes with fewer than 2 training instances: {thin}")
    feature_names = pairs[0].features.feature_names
    X = np.stack([p.features.values for p in pairs])
    n = len(pairs)
    models: dict[str, dict] = {}
    for cls in classes:
        y = np.array([1.0 if p.label == cls else 0.0 for p in pairs])
        if class_weights:
            w_pos = n / (len(classes) * counts[cls])
            weights = np.where(y == 1.0, w_pos, 1.0)
        else:
            weights = None
        models[cls] = _fit_logistic(X, y, config, weights)
    return TypeClassifier(
        classes=classes,
        feature_names=feature_names,
        models=models,
        training_config=config,
        class_weighted=class_weights,
    )


def predict_type_proba(model: TypeClassifier, features: FeatureVector | np.ndarray) -> dict[str, float]:
    """Per-class scores normalized to sum to 1."""
    if isinstance(features, FeatureVector):
        if features.feature_names != model.feature_names:
            raise ValidationError("feature names do not match the trained model")
        x = features.values
    else:
        x = np.asarray(features, dtype=float)
    raw = {}
    for cls, params in model.models.items():
        xs = (x - params["mean"]) / params["std"]
        z = float(params["weights"][0] + params["weights"][1:] @ xs)
        z = max(min(z, 500.0), -500.0)
        raw[cls] = 1.0 / (1.0 + np.exp(-z))
    total = sum(raw.values())
    if total == 0.0:
        return {cls: 1.0 / len(raw) for cls in raw}
    return {cls: p / total for cls, p in raw.items()}


def predict_type(model: TypeClassifier, features: FeatureVector | np.ndarray) -> str:
    proba = predict_type_proba(model, features)
    return max(sorted(proba), key=lambda cls: proba[cls])


def cross_validate_types(
    pairs: Sequence[TypedPair],
    plan,
    config: TrainingConfig | None = None,
    class_weights: bool = False,
) -> list[dict]:
    """Train and evaluate per split; returns one evaluate_types report per fold."""
    from .learn import split as make_splits

    reports = []
    for train_pairs, test_pairs in make_splits(pairs, plan):
        if not train_pairs:
            raise ValidationError("empty training split")
        model = train_type_model(train_pairs, config, class_weights)
        predictions = [predict_type(model, p.features) for p in test_pairs]
        gold = [p.label for p in test_pairs]
        reports.append(evaluate_types(predictions, gold))
    return reports


# ---------------------------------------------------------------------------
# metrics


def evaluate_types(predictions: Sequence[str], gold: Sequence[str]) -> dict:
    """Macro, micro, and frequency-weighted F1 plus a per-class table.

    Macro and weighted averages run over the classes present in the gold
    labels; micro pools TP/FP/FN over every prediction, which for
    single-label data makes micro F1 equal accuracy.
    """
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold must have equal length")
    if not gold:
        raise ValueError("cannot evaluate an empty label sequence")
    classes = sorted(set(gold) | set(predictions))
    gold_classes = sorted(set(gold))
    per_class = {}
    for cls in classes:
        tp = sum(1 for p, g in zip(predictions, gold) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(predictions, gold) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(predictions, gold) if p != cls and g == cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[cls] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": sum(1 for g in gold if g == cls),
        }
    tp_all = sum(1 for p, g in zip(predictions, gold) if p == g)
    fp_all = sum(1 for p, g in zip(predictions, gold) if p != g)
    fn_all = fp_all  # every wrong single-label prediction is one FP and one FN
    micro_p = tp_all / (tp_all + fp_all) if tp_all + fp_all else 0.0
    micro_r = tp_all / (tp_all + fn_all) if tp_all + fn_all else 0.0
    micro_f1 = (
        2 * micro_p * micro_r / (micro_p + micro_r) if micro_p + micro_r else 0.0
    )
    total = len(gold)
    return {
        "macro_f1": sum(per_class[c]["f1"] for c in gold_classes) / len(gold_classes),
        "micro_f1": micro_f1,
        "weighted_f1": sum(
            per_class[c]["f1"] * per_class[c]["support"] / total for c in gold_classes
        ),
        "per_class": per_class,
    }
