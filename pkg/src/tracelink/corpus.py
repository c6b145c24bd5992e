"""Artifact and dataset model plus the two on-disk dataset formats.

coest_dir layout:
    sources/<id>.txt, targets/<id>.txt   one UTF-8 file per artifact
    answers.txt                          "source_id target_id" per line, # comments

csv_pair layout:
    sources.csv / targets.csv            header id,title,text,created_at,metadata_json
    answers.csv                          header source_id,target_id,type_label
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import LoadError, ValidationError
from .preprocess import PreprocessConfig, preprocess

PROVENANCES = ("manual", "automatic", "vetted_accept", "vetted_reject")


@dataclass
class Artifact:
    """One traceable unit of text."""

    id: str
    kind: str = "requirement"
    title: str | None = None
    text: str = ""
    metadata: dict[str, str] = field(default_factory=dict)
    created_at: float | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("artifact id must be non-empty")
        if not self.text and not self.title:
            raise ValidationError(f"artifact {self.id!r}: text may be empty only if title is set")

    @property
    def full_text(self) -> str:
        """Title and body joined; the text every engine indexes."""
        if self.title and self.text:
            return f"{self.title}\n{self.text}"
        return self.title or self.text


class ArtifactSet:
    """Ordered, id-unique collection of artifacts. Iteration order is insertion order."""

    def __init__(self, name: str, artifacts: Iterable[Artifact] = ()) -> None:
        self.name = name
        self._by_id: dict[str, Artifact] = {}
        for a in artifacts:
            self.add(a)

    def add(self, artifact: Artifact) -> None:
        if artifact.id in self._by_id:
            raise ValidationError(f"duplicate artifact id {artifact.id!r} in set {self.name!r}")
        self._by_id[artifact.id] = artifact

    def get(self, artifact_id: str) -> Artifact:
        return self._by_id[artifact_id]

    def __contains__(self, artifact_id: str) -> bool:
        return artifact_id in self._by_id

    def __iter__(self) -> Iterator[Artifact]:
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)

    def ids(self) -> list[str]:
        return list(self._by_id)


@dataclass
class TraceLink:
    """A provenance-carrying relation instance between two artifacts.

    History only ever grows; manual links are protected from automated
    removal or retargeting unless explicitly unprotected.
    """

    id: str
    source_id: str
    target_id: str
    type_label: str | None = None
    score: float | None = None
    provenance: str = "automatic"
    protected: bool | None = None
    history: list[tuple[float, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"link {self.id!r}: score {self.score} outside [0, 1]")
        if self.protected is None:
            self.protected = self.provenance == "manual"

    def log(self, timestamp: float, event: str) -> None:
        self.history.append((timestamp, event))

    def has_event(self, event: str) -> bool:
        return any(e == event for _, e in self.history)


class TraceMatrix:
    """Set of trace links keyed by (source_id, target_id); at most one per pair."""

    def __init__(self, links: Iterable[TraceLink] = ()) -> None:
        self._links: dict[tuple[str, str], TraceLink] = {}
        for link in links:
            self.add(link)

    def add(self, link: TraceLink) -> None:
        key = (link.source_id, link.target_id)
        if key in self._links:
            raise ValidationError(f"duplicate link for pair {key}")
        self._links[key] = link

    def remove(self, source_id: str, target_id: str) -> TraceLink:
        return self._links.pop((source_id, target_id))

    def get(self, source_id: str, target_id: str) -> TraceLink | None:
        return self._links.get((source_id, target_id))

    def by_id(self, link_id: str) -> TraceLink | None:
        for link in self._links.values():
            if link.id == link_id:
                return link
        return None

    def rekey(self, old_pair: tuple[str, str], link: TraceLink) -> None:
        """Move a link to its current endpoints after an in-place retarget."""
        del self._links[old_pair]
        self.add(link)

    def pairs(self) -> set[tuple[str, str]]:
        return set(self._links)

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return pair in self._links

    def __len__(self) -> int:
        return len(self._links)

    def __iter__(self) -> Iterator[TraceLink]:
        for key in sorted(self._links):
            yield self._links[key]


@dataclass
class Dataset:
    """Source and target artifact sets plus the ground-truth answer matrix."""

    sources: ArtifactSet
    targets: ArtifactSet
    answers: TraceMatrix

    def __post_init__(self) -> None:
        offenders = [
            (l.source_id, l.target_id)
            for l in self.answers
            if l.source_id not in self.sources or l.target_id not in self.targets
        ]
        if offenders:
            raise ValidationError(f"answer links reference unknown artifact ids: {offenders}")


def _read_text_dir(root: Path, sub: str, kind: str) -> ArtifactSet:
    directory = root / sub
    if not directory.is_dir():
        raise LoadError(f"missing artifact directory: {directory}")
    artifacts = ArtifactSet(sub)
    for path in sorted(directory.glob("*.txt")):
        artifacts.add(Artifact(id=path.stem, kind=kind, text=path.read_text(encoding="utf-8")))
    return artifacts


def _read_answers_txt(path: Path) -> list[tuple[str, str, str | None]]:
    if not path.is_file():
        raise LoadError(f"missing answers file: {path}")
    pairs = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValidationError(f"malformed answer line: {raw!r} in {path}")
        pairs.append((parts[0], parts[1], None))
    return pairs


def _read_artifact_csv(path: Path, kind: str) -> ArtifactSet:
    if not path.is_file():
        raise LoadError(f"missing artifact file: {path}")
    artifacts = ArtifactSet(path.stem)
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            created = row.get("created_at") or None
            metadata = json.loads(row["metadata_json"]) if row.get("metadata_json") else {}
            artifacts.add(
                Artifact(
                    id=row["id"],
                    kind=row.get("kind") or kind,
                    title=row.get("title") or None,
                    text=row.get("text") or "",
                    metadata=metadata,
                    created_at=float(created) if created is not None else None,
                )
            )
    return artifacts


def _read_answers_csv(path: Path) -> list[tuple[str, str, str | None]]:
    if not path.is_file():
        raise LoadError(f"missing answers file: {path}")
    pairs = []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pairs.append((row["source_id"], row["target_id"], row.get("type_label") or None))
    return pairs


def _answer_matrix(pairs: list[tuple[str, str, str | None]]) -> TraceMatrix:
    matrix = TraceMatrix()
    for src, tgt, label in pairs:
        matrix.add(
            TraceLink(
                id=f"gold:{src}:{tgt}",
                source_id=src,
                target_id=tgt,
                type_label=label,
                provenance="manual",
            )
        )
    return matrix


def load_dataset(
    root_path: str | Path,
    format: str = "coest_dir",
    source_kind: str = "requirement",
    target_kind: str = "requirement",
) -> Dataset:
    """Load a dataset in one of the two documented layouts."""
    root = Path(root_path)
    if not root.exists():
        raise LoadError(f"dataset root does not exist: {root}")
    if format == "coest_dir":
        sources = _read_text_dir(root, "sources", source_kind)
        targets = _read_text_dir(root, "targets", target_kind)
        answers = _read_answers_txt(root / "answers.txt")
    elif format == "csv_pair":
        sources = _read_artifact_csv(root / "sources.csv", source_kind)
        targets = _read_artifact_csv(root / "targets.csv", target_kind)
        answers = _read_answers_csv(root / "answers.csv")
    else:
        raise ValueError(f"unknown dataset format {format!r}")
    return Dataset(sources=sources, targets=targets, answers=_answer_matrix(answers))


def save_dataset(dataset: Dataset, root_path: str | Path, format: str = "coest_dir") -> None:
    """Serialize a dataset back to disk in the given layout."""
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    if format == "coest_dir":
        for sub, artifacts in (("sources", dataset.sources), ("targets", dataset.targets)):
            directory = root / sub
            directory.mkdir(exist_ok=True)
            for a in artifacts:
                (directory / f"{a.id}.txt").write_text(a.text, encoding="utf-8")
        lines = [f"{l.source_id} {l.target_id}" for l in dataset.answers]
        (root / "answers.txt").write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    elif format == "csv_pair":
        for name, artifacts in (("sources.csv", dataset.sources), ("targets.csv", dataset.targets)):
            with (root / name).open("w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["id", "title", "text", "created_at", "metadata_json"])
                for a in artifacts:
                    writer.writerow(
                        [
                            a.id,
                            a.title or "",
                            a.text,
                            "" if a.created_at is None else repr(a.created_at),
                            json.dumps(a.metadata, sort_keys=True) if a.metadata else "",
                        ]
                    )
        with (root / "answers.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source_id", "target_id", "type_label"])
            for link in dataset.answers:
                writer.writerow([link.source_id, link.target_id, link.type_label or ""])
    else:
        raise ValueError(f"unknown dataset format {format!r}")


def build_vocabulary(
    sets: Iterable[ArtifactSet], cfg: PreprocessConfig | None = None
) -> tuple[list[str], dict[str, int]]:
    """Lexicographically sorted vocabulary over one or more artifact sets."""
    terms: set[str] = set()
    for artifact_set in sets:
        for artifact in artifact_set:
            terms.update(preprocess(artifact.full_text, cfg))
    ordered = sorted(terms)
    return ordered, {t: i for i, t in enumerate(ordered)}
