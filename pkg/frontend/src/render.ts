// DOM construction for one candidate card. Spans arrive non-overlapping
// from the server; rendering sorts them and falls back to skipping any
// span that would overlap a previous one.

import type { Candidate, TermSpan } from "./api.js";

export function highlight(text: string, spans: TermSpan[]): DocumentFragment {
  const fragment = document.createDocumentFragment();
  const ordered = [...spans].sort((a, b) => a.start - b.start);
  let cursor = 0;
  for (const span of ordered) {
    if (span.start < cursor || span.end > text.length || span.end <= span.start) {
      continue;
    }
    if (span.start > cursor) {
      fragment.appendChild(document.createTextNode(text.slice(cursor, span.start)));
    }
    const mark = document.createElement("mark");
    mark.className = "term";
    mark.textContent = text.slice(span.start, span.end);
    mark.title = span.explanation;
    fragment.appendChild(mark);
    cursor = span.end;
  }
  if (cursor < text.length) {
    fragment.appendChild(document.createTextNode(text.slice(cursor)));
  }
  return fragment;
}

function panel(title: string, text: string, spans: TermSpan[]): HTMLElement {
  const section = document.createElement("section");
  section.className = "artifact-panel";
  const heading = document.createElement("h3");
  heading.textContent = title;
  const body = document.createElement("p");
  body.className = "artifact-text";
  body.appendChild(highlight(text, spans));
  section.append(heading, body);
  return section;
}

export function renderCandidate(candidate: Candidate): HTMLElement {
  const card = document.createElement("article");
  card.className = "candidate-card";
  card.dataset.linkId = candidate.link_id;

  const header = document.createElement("header");
  const score = candidate.score === null ? "n/a" : candidate.score.toFixed(3);
  header.textContent = `${candidate.source_id} → ${candidate.target_id} (score ${score})`;
  card.appendChild(header);

  const pair = document.createElement("div");
  pair.className = "artifact-pair";
  pair.append(
    panel(candidate.source_id, candidate.source_text, candidate.source_annotations),
    panel(candidate.target_id, candidate.target_text, candidate.target_annotations),
  );
  card.appendChild(pair);

  if (candidate.rationale) {
    const rationale = document.createElement("p");
    rationale.className = "rationale";
    rationale.textContent = candidate.rationale;
    card.appendChild(rationale);
  }

  if (candidate.decision) {
    const decided = document.createElement("p");
    decided.className = "current-decision";
    decided.textContent = `current decision: ${candidate.decision}`;
    card.appendChild(decided);
  }
  return card;
}

export function renderEmptyQueue(): HTMLElement {
  const done = document.createElement("p");
  done.className = "queue-empty";
  done.textContent = "No candidates left to vet.";
  return done;
}
