"""Term explanations and link rationales.

Glossary annotation is longest-match-first with a blacklist of overly
general terms. Relation triplets are extracted with a fixed verb list, no
parsing. The knowledge graph answers shortest-path queries between
concepts; compound concepts unify with their leading-word prefix (so
"allergy concern entry" connects to "allergy") at zero path cost.
"""
from __future__ import annotations

import csv
import re
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Artifact
from .errors import LoadError, ValidationError

HIERARCHICAL_VERBS = ("contains", "includes", "is_a", "has")
EQUIVALENT_VERBS = ("equals", "is", "means")

# surface form -> canonical verb; multiword forms are matched first
_VERB_FORMS: list[tuple[str, str]] = [
    (r"is\s+an?", "is_a"),
    (r"are\s+an?", "is_a"),
    (r"contains?", "contains"),
    (r"includes?", "includes"),
    (r"has|have", "has"),
    (r"equals?", "equals"),
    (r"means?", "means"),
    (r"is|are", "is"),
]
_VERB_PATTERN = re.compile(
    r"\b(" + "|".join(form for form, _ in _VERB_FORMS) + r")\b", re.IGNORECASE
)
_ARTICLE = re.compile(r"^(the|a|an)\s+", re.IGNORECASE)
_SENTENCE_SPLIT = re.compile(r"[.!?;\n]+")


def verb_relation(verb: str) -> str:
    if verb in HIERARCHICAL_VERBS:
        return "hierarchical"
    if verb in EQUIVALENT_VERBS:
        return "equivalent"
    raise ValidationError(f"verb {verb!r} is not in the relation verb list")


@dataclass(frozen=True)
class GlossaryEntry:
    term: str
    definition: str
    expansion: str | None = None
    source: str = "project_glossary"

    def __post_init__(self) -> None:
        if not self.term:
            raise ValidationError("glossary term must be non-empty")

    @property
    def explanation(self) -> str:
        if self.expansion:
            return f"{self.expansion}: {self.definition}" if self.definition else self.expansion
        return self.definition


@dataclass(frozen=True)
class Annotation:
    start: int
    end: int
    term: str
    explanation: str


def load_glossary(path: str | Path) -> list[GlossaryEntry]:
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"missing glossary file: {path}")
    entries = []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            entries.append(
                GlossaryEntry(
                    term=row["term"],
                    expansion=row.get("expansion") or None,
                    definition=row.get("definition") or "",
                    source=row.get("source") or "project_glossary",
                )
            )
    return entries


def annotate_terms(
    artifact: Artifact,
    glossary: Sequence[GlossaryEntry],
    blacklist: Iterable[str] = (),
) -> list[Annotation]:
    """Non-overlapping glossary annotations over the artifact text,
    longest term first; blacklisted terms are skipped entirely."""
    text = artifact.full_text
    lowered = text.lower()
    blocked = {b.lower() for b in blacklist}
    taken: list[tuple[int, int]] = []
    annotations: list[Annotation] = []
    for entry in sorted(glossary, key=lambda e: (-len(e.term), e.term.lower())):
        term = entry.term.lower()
        if term in blocked:
            continue
        pattern = re.compile(r"(?<![a-z0-9])" + re.escape(term) + r"(?![a-z0-9])")
        for match in pattern.finditer(lowered):
            span = (match.start(), match.end())
            if any(s < span[1] and span[0] < e for s, e in taken):
                continue
            taken.append(span)
            annotations.append(
                Annotation(span[0], span[1], text[span[0] : span[1]], entry.explanation)
            )
    annotations.sort(key=lambda a: a.start)
    return annotations


@dataclass(frozen=True)
class Triplet:
    subject: str
    verb: str
    object: str

    @property
    def relation(self) -> str:
        return verb_relation(self.verb)


def _normalize_concept(text: str) -> str:
    text = _ARTICLE.sub("", text.strip())
    text = re.sub(r"\s+", " ", text)
    return text.strip(" \t,:").lower()


def extract_triplets(text: str) -> list[Triplet]:
    """Pattern-based subject/verb/object extraction, one triplet per
    sentence, restricted to hierarchical and equivalence verbs."""
    triplets = []
    for sentence in _SENTENCE_SPLIT.split(text):
        sentence = sentence.strip()
        if not sentence:
            continue
        match = _VERB_PATTERN.search(sentence)
        if not match:
            continue
        subject = _normalize_concept(sentence[: match.start()])
        obj = _normalize_concept(sentence[match.end() :])
        if not subject or not obj:
            continue
        if not re.search(r"[a-z]", subject) or not re.search(r"[a-z]", obj):
            continue
        surface = re.sub(r"\s+", " ", match.group(1).lower())
        verb = next(
            canon for form, canon in _VERB_FORMS if re.fullmatch(form, surface)
        )
        if subject != obj:
            triplets.append(Triplet(subject, verb, obj))
    return triplets


def load_triplets(path: str | Path) -> list[Triplet]:
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"missing triplet file: {path}")
    triplets = []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            verb = row["verb"].strip().lower().replace(" ", "_")
            if verb in ("is_a", "is_an"):
                verb = "is_a"
            verb_relation(verb)  # validates
            subject = _normalize_concept(row["subject"])
            obj = _normalize_concept(row["object"])
            if subject and obj and subject != obj:
                triplets.append(Triplet(subject, verb, obj))
    return triplets


class KnowledgeGraph:
    """Concept graph over triplets. Hierarchical edges are stored directed
    but traversable both ways for connectivity; equivalence edges are
    bidirectional. Concept names sharing a leading-word prefix alias to
    each other at zero cost."""

    def __init__(self, triplets: Iterable[Triplet] = ()) -> None:
        self.nodes: set[str] = set()
        self._edges: dict[str, list[tuple[str, Triplet]]] = {}
        for t in triplets:
            self.add(t)

    def add(self, triplet: Triplet) -> None:
        subject, obj = _normalize_concept(triplet.subject), _normalize_concept(triplet.object)
        if not subject or not obj or subject == obj:
            return
        normalized = Triplet(subject, triplet.verb, obj)
        self.nodes.add(subject)
        self.nodes.add(obj)
        self._edges.setdefault(subject, []).append((obj, normalized))
        self._edges.setdefault(obj, []).append((subject, normalized))

    def edges(self, node: str) -> list[tuple[str, Triplet]]:
        return self._edges.get(node, [])

    def aliases(self, node: str) -> list[str]:
        """Other nodes whose word sequence extends or prefixes this one."""
        words = node.split()
        out = []
        for other in self.nodes:
            if other == node:
                continue
            other_words = other.split()
            shorter, longer = sorted((words, other_words), key=len)
            if longer[: len(shorter)] == shorter:
                out.append(other)
        return sorted(out)

    def resolve(self, concept: str) -> list[str]:
        """Graph nodes standing for this concept (exact match plus aliases)."""
        name = _normalize_concept(concept)
        found = []
        if name in self.nodes:
            found.append(name)
        for other in sorted(self.nodes):
            if other == name:
                continue
            words, other_words = name.split(), other.split()
            shorter, longer = sorted((words, other_words), key=len)
            if longer[: len(shorter)] == shorter:
                found.append(other)
        return found


def explain_relation(
    graph: KnowledgeGraph, concept_a: str, concept_b: str
) -> list[Triplet] | None:
    """Shortest triplet path between two concepts, or None when they are
    unknown or disconnected. A query about the same concept yields []."""
    starts = graph.resolve(concept_a)
    goals = set(graph.resolve(concept_b))
    if not starts or not goals:
        return None
    if set(starts) & goals or _normalize_concept(concept_a) == _normalize_concept(concept_b):
        return []

    # 0-1 BFS: alias hops cost nothing, triplet edges cost one
    best: dict[str, int] = {}
    parent: dict[str, tuple[str, Triplet | None]] = {}
    queue: deque[tuple[int, str]] = deque()
    for node in starts:
        best[node] = 0
        queue.append((0, node))
    while queue:
        dist, node = queue.popleft()
        if dist > best.get(node, float("inf")):
            continue
        if node in goals:
            path = []
            cursor = node
            while cursor in parent:
                prev, triplet = parent[cursor]
                if triplet is not None:
                    path.append(triplet)
                cursor = prev
            return list(reversed(path))
        for alias in graph.aliases(node):
            if dist < best.get(alias, float("inf")):
                best[alias] = dist
                parent[alias] = (node, None)
                queue.appendleft((dist, alias))
        for neighbor, triplet in graph.edges(node):
            if dist + 1 < best.get(neighbor, float("inf")):
                best[neighbor] = dist + 1
                parent[neighbor] = (node, triplet)
                queue.append((dist + 1, neighbor))
    return None


# ---------------------------------------------------------------------------
# action frames and rationale rendering


@dataclass(frozen=True)
class ActionFrame:
    agent: str
    action: str
    theme: str

    def __post_init__(self) -> None:
        if not self.action:
            raise ValidationError("action frame requires a non-empty action verb")


def load_frames(path: str | Path) -> dict[str, ActionFrame]:
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"missing frames file: {path}")
    frames = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            frames[row["artifact_id"]] = ActionFrame(
                agent=row["agent"], action=row["action"], theme=row["theme"]
            )
    return frames


def more_general(graph: KnowledgeGraph, concept_a: str, concept_b: str) -> str:
    """The more general of two concepts per the hierarchical edges.

    contains: the subject is more general; is_a: the object is more
    general. Falls back to the combined "a/b" form when neither
    generalizes the other.
    """
    a, b = _normalize_concept(concept_a), _normalize_concept(concept_b)
    if a == b:
        return concept_a
    if _generalizes(graph, a, b):
        return concept_b
    if _generalizes(graph, b, a):
        return concept_a
    return f"{concept_a}/{concept_b}"


def _generalizes(graph: KnowledgeGraph, specific: str, general: str) -> bool:
    """True when a chain of hierarchical edges leads specific -> general.

    Exact node names only: prefix aliasing would make generality symmetric
    for compound terms, which is exactly what the edge direction decides.
    """
    if specific not in graph.nodes or general not in graph.nodes:
        return False
    seen = {specific}
    frontier = deque([specific])
    while frontier:
        node = frontier.popleft()
        if node == general:
            return True
        steps = []
        for neighbor, triplet in graph.edges(node):
            if triplet.relation == "equivalent":
                steps.append(neighbor)
            elif triplet.verb == "is_a" and triplet.subject == node:
                steps.append(triplet.object)
            elif triplet.verb in ("contains", "includes", "has") and triplet.object == node:
                steps.append(triplet.subject)
        for nxt in steps:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return False


def present_participle(verb: str) -> str:
    """Naive +ing inflection with final-e elision."""
    verb = verb.strip()
    if verb.endswith("e") and not verb.endswith("ee"):
        verb = verb[:-1]
    return verb + "ing"


def render_rationale(
    frame_a: ActionFrame, frame_b: ActionFrame, graph: KnowledgeGraph
) -> str:
    """'Both artifacts involve' + G(agents) + action-ing + G(themes)."""
    agent = more_general(graph, frame_a.agent, frame_b.agent)
    theme = more_general(graph, frame_a.theme, frame_b.theme)
    return f"Both artifacts involve {agent} {present_participle(frame_a.action)} {theme}"


def render_llm_prompt(source: Artifact, target: Artifact) -> str:
    """The exact prompt shape used to ask a generative model about a pair.
    Rendering only; nothing is ever sent anywhere."""
    return (
        "Below are artifacts from the same software system. "
        "Is there a traceability link between (1) and (2)?\n"
        "\n"
        f"(1) {source.text}\n"
        "\n"
        f"(2) {target.text}\n"
    )


def research_query(concept: str, domain: str) -> str:
    """Suggested manual search query for concepts missing from the glossary."""
    return f"what is inbody:{concept} in {domain}"
