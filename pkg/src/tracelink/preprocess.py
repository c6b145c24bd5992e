"""Text preprocessing shared by every engine.

Pipeline: identifier splitting (underscores, camelCase), lowercasing,
tokenization on non-alphanumeric characters, optional synonym replacement,
stopword removal, minimum-length filtering, Porter stemming. Identifier
splitting runs before lowercasing because camelCase boundaries are lost
once case is folded.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

from ._porter import porter_stem

DEFAULT_STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by can cannot could did do does doing down
during each few for from further had has have having he her here hers herself
him himself his how i if in into is it its itself may me might more most must
my myself no nor not of off on once only or other our ours ourselves out over
own same shall she should so some such than that the their theirs them
themselves then there these they this those through to too under until up upon
very was we were what when where which while who whom why will with would you
your yours yourself yourselves
""".split())

_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_TOKEN = re.compile(r"[A-Za-z0-9]+")


@dataclass(frozen=True)
class PreprocessConfig:
    """Knobs for the token pipeline; defaults favor prose requirements."""

    lowercase: bool = True
    split_identifiers: bool = True
    remove_stopwords: bool = True
    stopword_list: frozenset[str] = DEFAULT_STOPWORDS
    stem: bool = True
    min_token_len: int = 1
    synonyms: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.min_token_len < 1:
            raise ValueError("min_token_len must be >= 1")


def preprocess(text: str, cfg: PreprocessConfig | None = None) -> list[str]:
    """Turn raw artifact text into a deterministic token list."""
    if cfg is None:
        cfg = PreprocessConfig()
    if not text:
        return []
    if cfg.split_identifiers:
        text = text.replace("_", " ")
        text = _CAMEL_BOUNDARY.sub(" ", text)
    if cfg.lowercase:
        text = text.lower()
    tokens = _TOKEN.findall(text)
    if cfg.synonyms:
        tokens = [cfg.synonyms.get(t, t) for t in tokens]
    if cfg.remove_stopwords:
        tokens = [t for t in tokens if t not in cfg.stopword_list]
    if cfg.min_token_len > 1:
        tokens = [t for t in tokens if len(t) >= cfg.min_token_len]
    if cfg.stem:
        tokens = [porter_stem(t) for t in tokens]
    return tokens
