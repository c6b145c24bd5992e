"""HTTP service backing the human vetting workflow.

Sessions are durable: a manifest records the dataset and recovery config
(candidate generation is deterministic for a fixed seed) and every decision
is appended to a per-session JSONL log, replayed on startup. Accepted links
export with provenance=vetted_accept and protected=true.
"""
from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .corpus import Dataset, TraceLink, TraceMatrix, load_dataset
from .errors import TraceToolError
from .explain import (
    Annotation,
    KnowledgeGraph,
    annotate_terms,
    load_frames,
    load_glossary,
    load_triplets,
    render_rationale,
)
from .recover import RecoveryConfig, recover

DECISIONS = ("accept", "reject", "skip")


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class DecisionRecord:
    timestamp: str
    link_id: str
    decision: str
    analyst: str


@dataclass
class Candidate:
    link: TraceLink
    source_text: str
    target_text: str
    source_annotations: list[Annotation] = field(default_factory=list)
    target_annotations: list[Annotation] = field(default_factory=list)
    rationale: str | None = None


@dataclass
class VettingSession:
    id: str
    dataset: Dataset
    queue: list[Candidate]
    decisions: dict[str, list[DecisionRecord]] = field(default_factory=dict)
    created_at: str = ""
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def latest(self) -> dict[str, DecisionRecord]:
        return {link_id: records[-1] for link_id, records in self.decisions.items() if records}

    def stats(self) -> dict:
        latest = self.latest()
        accepted = sum(1 for r in latest.values() if r.decision == "accept")
        rejected = sum(1 for r in latest.values() if r.decision == "reject")
        skipped = sum(1 for r in latest.values() if r.decision == "skip")
        vetted = len(latest)
        judged = accepted + rejected
        return {
            "total": len(self.queue),
            "vetted": vetted,
            "accepted": accepted,
            "rejected": rejected,
            "skipped": skipped,
            "acceptance_rate": accepted / vetted if vetted else 0.0,
            "precision_so_far": accepted / judged if judged else 0.0,
        }

    def export_matrix(self) -> TraceMatrix:
        matrix = TraceMatrix()
        latest = self.latest()
        for candidate in self.queue:
            record = latest.get(candidate.link.id)
            if record is None or record.decision != "accept":
                continue
            link = candidate.link
            accepted = TraceLink(
                id=link.id,
                source_id=link.source_id,
                target_id=link.target_id,
                type_label=link.type_label,
                score=link.score,
                provenance="vetted_accept",
                protected=True,
                history=list(link.history)
                + [(0.0, f"accepted by {record.analyst} at {record.timestamp}")],
            )
            matrix.add(accepted)
        return matrix


def _recovery_config_from_dict(config: dict) -> RecoveryConfig:
    allowed = {
        "engine", "measure", "mode", "threshold", "top_k", "source_id",
        "weighting", "lsi_k", "lda_topics", "lda_iterations", "lda_alpha",
        "lda_beta", "seed", "jobs",
    }
    unknown = set(config) - allowed
    if unknown:
        raise TraceToolError(f"unknown recovery config keys: {sorted(unknown)}")
    return RecoveryConfig(**config)


class SessionStore:
    """Directory-backed store; one subdirectory per session holding a
    manifest.json and an append-only decisions.log."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, VettingSession] = {}
        for manifest_path in sorted(self.root.glob("*/manifest.json")):
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            session = self._build_session(manifest)
            self._replay(session)
            self.sessions[session.id] = session

    def _session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def _build_session(self, manifest: dict) -> VettingSession:
        dataset = load_dataset(manifest["dataset_root"], manifest["dataset_format"])
        config = _recovery_config_from_dict(manifest["config"])
        candidates = recover(dataset, config)
        ordered = sorted(
            candidates,
            key=lambda l: (-(l.score or 0.0), l.source_id, l.target_id),
        )
        glossary = (
            load_glossary(manifest["glossary"]) if manifest.get("glossary") else []
        )
        blacklist = set(manifest.get("blacklist") or [])
        graph = (
            KnowledgeGraph(load_triplets(manifest["triplets"]))
            if manifest.get("triplets")
            else None
        )
        frames = load_frames(manifest["frames"]) if manifest.get("frames") else {}
        queue = []
        for link in ordered:
            source = dataset.sources.get(link.source_id)
            target = dataset.targets.get(link.target_id)
            rationale = None
            if graph is not None and source.id in frames and target.id in frames:
                rationale = render_rationale(frames[source.id], frames[target.id], graph)
            queue.append(
                Candidate(
                    link=link,
                    source_text=source.full_text,
                    target_text=target.full_text,
                    source_annotations=annotate_terms(source, glossary, blacklist),
                    target_annotations=annotate_terms(target, glossary, blacklist),
                    rationale=rationale,
                )
            )
        return VettingSession(
            id=manifest["session_id"],
            dataset=dataset,
            queue=queue,
            created_at=manifest["created_at"],
        )

    def _replay(self, session: VettingSession) -> None:
        log_path = self._session_dir(session.id) / "decisions.log"
        if not log_path.is_file():
            return
        for line in log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            record = DecisionRecord(
                timestamp=entry["ts"],
                link_id=entry["link_id"],
                decision=entry["decision"],
                analyst=entry["analyst"],
            )
            session.decisions.setdefault(record.link_id, []).append(record)

    def create(self, manifest: dict) -> VettingSession:
        session_id = manifest.get("session_id") or uuid.uuid4().hex[:12]
        manifest = dict(manifest, session_id=session_id, created_at=_utcnow())
        session = self._build_session(manifest)
        session_dir = self._session_dir(session_id)
        session_dir.mkdir(parents=True, exist_ok=True)
        (session_dir / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True), encoding="utf-8"
        )
        self.sessions[session_id] = session
        return session

    def record(self, session: VettingSession, link_id: str, decision: str, analyst: str) -> dict:
        with session.lock:
            record = DecisionRecord(_utcnow(), link_id, decision, analyst)
            log_path = self._session_dir(session.id) / "decisions.log"
            with log_path.open("a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {
                            "ts": record.timestamp,
                            "link_id": link_id,
                            "decision": decision,
                            "analyst": analyst,
                        }
                    )
                    + "\n"
                )
            session.decisions.setdefault(link_id, []).append(record)
            return session.stats()


class SessionRequest(BaseModel):
    dataset: dict
    config: dict = {}
    glossary: str | None = None
    blacklist: list[str] | None = None
    triplets: str | None = None
    frames: str | None = None


class DecisionRequest(BaseModel):
    link_id: str
    decision: str
    analyst: str


def _annotation_json(ann: Annotation) -> dict:
    return {"start": ann.start, "end": ann.end, "term": ann.term, "explanation": ann.explanation}


def create_app(store_dir: Path | str) -> FastAPI:
    store = SessionStore(Path(store_dir))
    app = FastAPI(title="tracelink vetting service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store

    def get_session(session_id: str) -> VettingSession:
        session = store.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    @app.post("/sessions")
    def create_session(request: SessionRequest) -> dict:
        manifest = {
            "dataset_root": request.dataset.get("root"),
            "dataset_format": request.dataset.get("format", "coest_dir"),
            "config": request.config,
            "glossary": request.glossary,
            "blacklist": request.blacklist,
            "triplets": request.triplets,
            "frames": request.frames,
        }
        if not manifest["dataset_root"]:
            raise HTTPException(status_code=400, detail="dataset.root is required")
        try:
            session = store.create(manifest)
        except (TraceToolError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"session_id": session.id}

    @app.get("/sessions/{session_id}/candidates")
    def candidates(session_id: str, offset: int = 0, limit: int = 50) -> dict:
        session = get_session(session_id)
        latest = session.latest()
        page = session.queue[offset : offset + limit]
        return {
            "total": len(session.queue),
            "offset": offset,
            "candidates": [
                {
                    "link_id": c.link.id,
                    "source_id": c.link.source_id,
                    "target_id": c.link.target_id,
                    "score": c.link.score,
                    "source_text": c.source_text,
                    "target_text": c.target_text,
                    "source_annotations": [_annotation_json(a) for a in c.source_annotations],
                    "target_annotations": [_annotation_json(a) for a in c.target_annotations],
                    "rationale": c.rationale,
                    "decision": (
                        latest[c.link.id].decision if c.link.id in latest else None
                    ),
                }
                for c in page
            ],
        }

    @app.post("/sessions/{session_id}/decisions")
    def decide(session_id: str, request: DecisionRequest) -> dict:
        session = get_session(session_id)
        if request.decision not in DECISIONS:
            raise HTTPException(
                status_code=400,
                detail=f"decision must be one of {DECISIONS}, got {request.decision!r}",
            )
        if not any(c.link.id == request.link_id for c in session.queue):
            raise HTTPException(status_code=404, detail=f"unknown link {request.link_id!r}")
        return store.record(session, request.link_id, request.decision, request.analyst)

    @app.get("/sessions/{session_id}/matrix")
    def matrix(session_id: str) -> dict:
        session = get_session(session_id)
        return {
            "links": [
                {
                    "id": link.id,
                    "source_id": link.source_id,
                    "target_id": link.target_id,
                    "type_label": link.type_label,
                    "score": link.score,
                    "provenance": link.provenance,
                    "protected": link.protected,
                }
                for link in session.export_matrix()
            ]
        }

    @app.get("/sessions/{session_id}/stats")
    def stats(session_id: str) -> dict:
        return get_session(session_id).stats()

    return app
