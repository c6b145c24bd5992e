"""Keeps a trace matrix consistent as artifacts change.

Protected links (manual or vetted) are never removed or retargeted by the
automated flow; they only accumulate review flags. Unprotected automatic
links are removed when their artifact disappears, retargeted in place when
an added artifact on the same side is similar enough (the link id and
history survive), and flagged when a modified artifact drops the pair
below the similarity threshold.
"""
from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field

from .corpus import Artifact, ArtifactSet, Dataset, TraceLink, TraceMatrix
from .engines import build_index, rank_targets
from .errors import ValidationError
from .preprocess import PreprocessConfig


@dataclass
class ChangeEvent:
    kind: str  # added | removed | modified
    artifact_id: str
    side: str  # source | target
    old_text_hash: str | None = None
    new_text_hash: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("added", "removed", "modified"):
            raise ValidationError(f"unknown change kind {self.kind!r}")
        if self.side not in ("source", "target"):
            raise ValidationError(f"unknown side {self.side!r}")
        if self.kind == "modified":
            if not self.old_text_hash or not self.new_text_hash:
                raise ValidationError("modified events need both text hashes")
            if self.old_text_hash == self.new_text_hash:
                raise ValidationError("modified event with identical hashes")


@dataclass(frozen=True)
class ChangeScenario:
    name: str
    justification_template: str

    def render(self, **kwargs) -> str:
        return self.justification_template.format(**kwargs)


SCENARIOS = {
    s.name: s
    for s in (
        ChangeScenario(
            "new_functionality_added",
            "similarity {score:.3f} >= threshold {threshold:.3f} for ({source_id}, {target_id}) "
            "after {trigger}; created link {link_id}",
        ),
        ChangeScenario(
            "artifact_removed",
            "artifact {artifact_id} was removed; {action} link {link_id}",
        ),
        ChangeScenario(
            "artifact_refined",
            "artifact {artifact_id} was modified; link {link_id} {action}",
        ),
        ChangeScenario(
            "link_retarget",
            "artifact {artifact_id} was removed; link {link_id} retargeted to "
            "{replacement_id} (similarity {score:.3f})",
        ),
    )
}


def artifact_hash(artifact: Artifact) -> str:
    payload = f"{artifact.title or ''}\x00{artifact.text}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def detect_changes(old: Dataset, new: Dataset) -> list[ChangeEvent]:
    """Complete, minimal event list; ids are the change identity, so a rename
    shows up as a removal plus an addition."""
    events: list[ChangeEvent] = []
    for side, old_set, new_set in (
        ("source", old.sources, new.sources),
        ("target", old.targets, new.targets),
    ):
        old_ids, new_ids = set(old_set.ids()), set(new_set.ids())
        for artifact_id in sorted(new_ids - old_ids):
            events.append(ChangeEvent("added", artifact_id, side))
        for artifact_id in sorted(old_ids - new_ids):
            events.append(ChangeEvent("removed", artifact_id, side))
        for artifact_id in sorted(old_ids & new_ids):
            old_hash = artifact_hash(old_set.get(artifact_id))
            new_hash = artifact_hash(new_set.get(artifact_id))
            if old_hash != new_hash:
                events.append(
                    ChangeEvent("modified", artifact_id, side, old_hash, new_hash)
                )
    return events


@dataclass
class MaintenanceConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    measure: str = "cosine"


Justification = tuple[str, str, str]  # link id, scenario name, rendered text


def _flag(link: TraceLink, now: float, event: str, out: list[Justification], scenario: str, text: str) -> None:
    """Append a review flag exactly once so reapplying events is idempotent."""
    if not link.has_event(event):
        link.log(now, event)
        out.append((link.id, scenario, text))


def _similarity_map(
    query: Artifact, pool: ArtifactSet, cfg: MaintenanceConfig
) -> dict[str, float]:
    """Score the query against every artifact on one side. The index covers
    the whole side so idf statistics stay meaningful even when only a few
    artifacts are of interest."""
    if len(pool) == 0:
        return {}
    index = build_index(pool, cfg.preprocess, "tfidf")
    return dict(rank_targets(query, index, cfg.measure))


def apply_maintenance(
    matrix: TraceMatrix,
    events: list[ChangeEvent],
    dataset_new: Dataset,
    cfg: MaintenanceConfig | None = None,
    threshold: float | None = None,
    now: float = 0.0,
) -> tuple[TraceMatrix, list[Justification]]:
    """Apply change events to a copy of the matrix; returns the updated
    matrix and one (link id, scenario, justification) entry per mutation."""
    if threshold is None:
        raise ValidationError("maintenance requires a similarity threshold")
    if cfg is None:
        cfg = MaintenanceConfig()

    updated = TraceMatrix(copy.deepcopy(list(matrix)))
    log: list[Justification] = []

    removed = {(e.side, e.artifact_id) for e in events if e.kind == "removed"}
    added = {(e.side, e.artifact_id) for e in events if e.kind == "added"}
    modified = {(e.side, e.artifact_id) for e in events if e.kind == "modified"}

    # 1. links whose endpoint was removed: delete, retarget, or flag
    for link in list(updated):
        for side, endpoint in (("source", link.source_id), ("target", link.target_id)):
            if (side, endpoint) not in removed:
                continue
            if link.protected:
                _flag(
                    link,
                    now,
                    f"flagged: dangling ({side} artifact {endpoint} removed)",
                    log,
                    "artifact_removed",
                    SCENARIOS["artifact_removed"].render(
                        artifact_id=endpoint, action="flagged dangling protected", link_id=link.id
                    ),
                )
                continue
            if updated.get(link.source_id, link.target_id) is None:
                continue  # already handled via the other endpoint
            replacement = _best_replacement(link, side, added, updated, dataset_new, cfg, threshold)
            if replacement is not None:
                replacement_id, score = replacement
                old_pair = (link.source_id, link.target_id)
                if side == "source":
                    link.source_id = replacement_id
                else:
                    link.target_id = replacement_id
                link.score = max(0.0, min(1.0, score))
                link.log(now, f"retargeted: {side} {endpoint} -> {replacement_id}")
                updated.rekey(old_pair, link)
                log.append(
                    (
                        link.id,
                        "link_retarget",
                        SCENARIOS["link_retarget"].render(
                            artifact_id=endpoint,
                            link_id=link.id,
                            replacement_id=replacement_id,
                            score=score,
                        ),
                    )
                )
            else:
                updated.remove(link.source_id, link.target_id)
                log.append(
                    (
                        link.id,
                        "artifact_removed",
                        SCENARIOS["artifact_removed"].render(
                            artifact_id=endpoint, action="deleted", link_id=link.id
                        ),
                    )
                )

    # 2. re-score pairs touched by modified or added artifacts
    touched_sources = sorted(
        aid for side, aid in (modified | added) if side == "source" and aid in dataset_new.sources
    )
    touched_targets = sorted(
        aid for side, aid in (modified | added) if side == "target" and aid in dataset_new.targets
    )
    if touched_sources or touched_targets:
        pair_scores = _rescore_pairs(touched_sources, touched_targets, dataset_new, cfg)
        for (source_id, target_id), score in sorted(pair_scores.items()):
            link = updated.get(source_id, target_id)
            if link is None:
                if score >= threshold:
                    new_link = TraceLink(
                        id=f"auto:{source_id}:{target_id}",
                        source_id=source_id,
                        target_id=target_id,
                        score=max(0.0, min(1.0, score)),
                        provenance="automatic",
                    )
                    new_link.log(now, f"created by maintenance (score {score:.3f})")
                    updated.add(new_link)
                    log.append(
                        (
                            new_link.id,
                            "new_functionality_added",
                            SCENARIOS["new_functionality_added"].render(
                                score=score,
                                threshold=threshold,
                                source_id=source_id,
                                target_id=target_id,
                                trigger="artifact change",
                                link_id=new_link.id,
                            ),
                        )
                    )
                continue
            if link.protected:
                if score < threshold:
                    _flag(
                        link,
                        now,
                        f"flagged: below threshold after modification (score {score:.3f})",
                        log,
                        "artifact_refined",
                        SCENARIOS["artifact_refined"].render(
                            artifact_id=_modified_endpoint(link, touched_sources, touched_targets),
                            link_id=link.id,
                            action=f"flagged for review (score {score:.3f} < {threshold:.3f})",
                        ),
                    )
                continue
            if score < threshold:
                _flag(
                    link,
                    now,
                    f"flagged: below threshold after modification (score {score:.3f})",
                    log,
                    "artifact_refined",
                    SCENARIOS["artifact_refined"].render(
                        artifact_id=_modified_endpoint(link, touched_sources, touched_targets),
                        link_id=link.id,
                        action=f"flagged for review (score {score:.3f} < {threshold:.3f})",
                    ),
                )
            elif link.score is None or abs(link.score - score) > 1e-12:
                link.score = max(0.0, min(1.0, score))
                link.log(now, f"rescored: {score:.6f}")
                log.append(
                    (
                        link.id,
                        "artifact_refined",
                        SCENARIOS["artifact_refined"].render(
                            artifact_id=_modified_endpoint(link, touched_sources, touched_targets),
                            link_id=link.id,
                            action=f"rescored to {score:.3f}",
                        ),
                    )
                )
    return updated, log


def _modified_endpoint(link: TraceLink, touched_sources: list[str], touched_targets: list[str]) -> str:
    if link.source_id in touched_sources:
        return link.source_id
    return link.target_id


def _best_replacement(
    link: TraceLink,
    removed_side: str,
    added: set[tuple[str, str]],
    matrix: TraceMatrix,
    dataset_new: Dataset,
    cfg: MaintenanceConfig,
    threshold: float,
) -> tuple[str, float] | None:
    """Most similar added artifact on the removed side, if above threshold
    and the resulting pair is free."""
    if removed_side == "source":
        pool = dataset_new.sources
        counterpart = dataset_new.targets.get(link.target_id) if link.target_id in dataset_new.targets else None
    else:
        pool = dataset_new.targets
        counterpart = dataset_new.sources.get(link.source_id) if link.source_id in dataset_new.sources else None
    if counterpart is None:
        return None
    candidate_ids = [aid for side, aid in sorted(added) if side == removed_side and aid in pool]
    if not candidate_ids:
        return None
    scores = _similarity_map(counterpart, pool, cfg)
    best: tuple[str, float] | None = None
    for candidate_id in candidate_ids:
        score = scores.get(candidate_id, 0.0)
        if score < threshold:
            continue
        pair = (
            (candidate_id, link.target_id) if removed_side == "source" else (link.source_id, candidate_id)
        )
        if pair in matrix:
            continue
        if best is None or score > best[1]:
            best = (candidate_id, score)
    return best


def _rescore_pairs(
    touched_sources: list[str],
    touched_targets: list[str],
    dataset_new: Dataset,
    cfg: MaintenanceConfig,
) -> dict[tuple[str, str], float]:
    scores: dict[tuple[str, str], float] = {}
    if touched_sources and len(dataset_new.targets):
        target_index = build_index(dataset_new.targets, cfg.preprocess, "tfidf")
        for source_id in touched_sources:
            ranked = rank_targets(dataset_new.sources.get(source_id), target_index, cfg.measure)
            for target_id, score in ranked:
                scores[(source_id, target_id)] = score
    if touched_targets and len(dataset_new.sources):
        source_index = build_index(dataset_new.sources, cfg.preprocess, "tfidf")
        for target_id in touched_targets:
            ranked = rank_targets(dataset_new.targets.get(target_id), source_index, cfg.measure)
            for source_id, score in ranked:
                scores.setdefault((source_id, target_id), score)
    return scores


# ---------------------------------------------------------------------------
# consistency


@dataclass
class Tim:
    """Traceability information model: which (source kind, target kind,
    label) combinations a project allows. An empty label set means any."""

    allowed: set[tuple[str, str, frozenset[str]]]

    def __post_init__(self) -> None:
        if not self.allowed:
            raise ValidationError("TIM must allow at least one combination")

    def allows(self, source_kind: str, target_kind: str, label: str | None) -> bool:
        for s_kind, t_kind, labels in self.allowed:
            if s_kind != source_kind or t_kind != target_kind:
                continue
            if not labels or label is None or label in labels:
                return True
        return False


@dataclass
class ConsistencyReport:
    validity: float
    completeness: float
    correctness: float | None  # None means unknown: no vetting data
    combined: float


def consistency(
    matrix: TraceMatrix,
    dataset: Dataset,
    tim: Tim,
    vetted: dict[tuple[str, str], bool] | None = None,
    weights: dict[str, float] | None = None,
) -> ConsistencyReport:
    """Validity, completeness, and correctness in [0, 1].

    An empty matrix is vacuously valid (1.0) with completeness 0.
    Correctness comes only from explicit vetting records and is unknown
    without them. Combined is the (optionally weighted) mean of the
    available components.
    """
    links = list(matrix)
    if links:
        valid = 0
        for link in links:
            if link.source_id in dataset.sources and link.target_id in dataset.targets:
                source_kind = dataset.sources.get(link.source_id).kind
                target_kind = dataset.targets.get(link.target_id).kind
                if tim.allows(source_kind, target_kind, link.type_label):
                    valid += 1
        validity = valid / len(links)
    else:
        validity = 1.0

    all_ids = [("source", a.id) for a in dataset.sources] + [("target", a.id) for a in dataset.targets]
    if all_ids:
        linked_sources = {l.source_id for l in links}
        linked_targets = {l.target_id for l in links}
        connected = sum(
            1
            for side, aid in all_ids
            if (aid in linked_sources if side == "source" else aid in linked_targets)
        )
        completeness = connected / len(all_ids)
    else:
        completeness = 0.0

    correctness: float | None = None
    if vetted:
        judged = [ok for pair, ok in vetted.items() if pair in matrix]
        if judged:
            correctness = sum(judged) / len(judged)

    components = {"validity": validity, "completeness": completeness}
    if correctness is not None:
        components["correctness"] = correctness
    if weights is None:
        weights = {}
    weight_of = {name: weights.get(name, 1.0) for name in components}
    total_weight = sum(weight_of.values())
    combined = sum(value * weight_of[name] for name, value in components.items()) / total_weight
    return ConsistencyReport(
        validity=validity,
        completeness=completeness,
        correctness=correctness,
        combined=combined,
    )
