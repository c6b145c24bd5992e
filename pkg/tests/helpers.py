import random
from pathlib import Path

from tracelink.corpus import Artifact, ArtifactSet, Dataset, TraceLink, TraceMatrix
from tracelink.preprocess import PreprocessConfig

RAW_CFG = PreprocessConfig(remove_stopwords=False, stem=False)

COMMON_WORDS = [
    "system", "data", "module", "process", "input", "output", "record",
    "service", "interface", "message", "control", "signal", "status",
]


def make_dataset(sources, targets, answer_pairs, created=None):
    """Build a dataset from {id: text} mappings and (source, target) pairs."""
    created = created or {}
    source_set = ArtifactSet("sources")
    for aid, text in sources.items():
        source_set.add(Artifact(id=aid, text=text, created_at=created.get(aid)))
    target_set = ArtifactSet("targets")
    for aid, text in targets.items():
        target_set.add(Artifact(id=aid, text=text, created_at=created.get(aid)))
    answers = TraceMatrix()
    for src, tgt in answer_pairs:
        answers.add(TraceLink(id=f"gold:{src}:{tgt}", source_id=src, target_id=tgt, provenance="manual"))
    return Dataset(sources=source_set, targets=target_set, answers=answers)


def planted_dataset(n_sources=10, n_targets=10, seed=0, extra_common=4):
    """Each source shares one unique rare token with exactly one target;
    everything else is common-vocabulary noise. The generator is the oracle:
    source i truly links to target i."""
    rng = random.Random(seed)
    sources, targets, answers = {}, {}, []
    for i in range(n_sources):
        rare = f"plantedkey{i:03d}"
        noise = lambda: " ".join(rng.choice(COMMON_WORDS) for _ in range(extra_common))
        sources[f"s{i:03d}"] = f"{noise()} {rare} {noise()}"
        if i < n_targets:
            targets[f"t{i:03d}"] = f"{noise()} {rare} {noise()}"
            answers.append((f"s{i:03d}", f"t{i:03d}"))
    for j in range(n_sources, n_targets):
        targets[f"t{j:03d}"] = " ".join(rng.choice(COMMON_WORDS) for _ in range(8))
    return make_dataset(sources, targets, answers)


def write_coest(root: Path, sources, targets, answer_pairs):
    (root / "sources").mkdir(parents=True)
    (root / "targets").mkdir(parents=True)
    for aid, text in sources.items():
        (root / "sources" / f"{aid}.txt").write_text(text, encoding="utf-8")
    for aid, text in targets.items():
        (root / "targets" / f"{aid}.txt").write_text(text, encoding="utf-8")
    lines = [f"{s} {t}" for s, t in answer_pairs]
    (root / "answers.txt").write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
