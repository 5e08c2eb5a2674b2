"""Discourse-aware commonsense inference over a short discourse.

A knowledge backend takes the sentences of a discourse and returns ranked
phrase beams for each (sentence index, relation) pair over the nine
social-commonsense relations. Three backends are provided:

* HttpKnowledgeBackend -- client for a live model server speaking
  ``POST {"sentences": [...]} -> {"inferences": {"<idx>": {"<rel>": [...]}}}``,
  endpoint taken from the KNOWLEDGE_BACKEND_URL env var;
* CacheKnowledgeBackend -- replays a JSONL cache keyed by a stable hash of
  the discourse, optionally recording through to an inner backend;
* StubKnowledgeBackend -- deterministic synthetic phrases for tests and
  offline pipeline runs.

Only the top-ranked intent phrase for the first sentence is consumed by the
shipped pipeline; the other relations are retrievable but unused.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

from .errors import BackendError, MissingInferenceError, ValidationError
from .jsonl import dump_line, iter_jsonl
from .sequencing import SEP

RELATIONS = (
    "xIntent",
    "xNeed",
    "xAttr",
    "xEffect",
    "xWant",
    "xReact",
    "oReact",
    "oWant",
    "oEffect",
)

INTENT = "xIntent"

# Fixed timestamp for replayed/synthetic bundles so identical inputs yield
# byte-identical bundles.
_EPOCH = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class CommonsenseBundle:
    discourse: tuple[str, ...]
    inferences: Mapping[tuple[int, str], tuple[str, ...]]
    backend_id: str
    retrieved_at: str

    def beams(self, sentence_index: int, relation: str) -> tuple[str, ...]:
        return self.inferences.get((sentence_index, relation), ())

    def to_json(self) -> dict:
        grouped: dict[str, dict[str, list[str]]] = {}
        for (index, relation), phrases in sorted(self.inferences.items()):
            grouped.setdefault(str(index), {})[relation] = list(phrases)
        return {
            "discourse": list(self.discourse),
            "inferences": grouped,
            "backend_id": self.backend_id,
            "retrieved_at": self.retrieved_at,
        }

    @staticmethod
    def from_json(obj: dict) -> "CommonsenseBundle":
        inferences: dict[tuple[int, str], tuple[str, ...]] = {}
        for index, by_relation in obj["inferences"].items():
            for relation, phrases in by_relation.items():
                inferences[(int(index), relation)] = tuple(phrases)
        return _validated_bundle(
            tuple(obj["discourse"]),
            inferences,
            obj["backend_id"],
            obj.get("retrieved_at", _EPOCH),
        )


def discourse_key(sentences: Sequence[str]) -> str:
    """Stable content hash used to key the knowledge cache."""
    payload = json.dumps(list(sentences), ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def sanitize_phrase(phrase: str) -> str:
    """Make a beam safe for insertion between delimiters.

    Collapses whitespace (including newlines), removes any embedded
    delimiter literal, and strips terminal sentence punctuation.
    """
    cleaned = " ".join(phrase.replace(SEP, " ").split())
    return cleaned.rstrip(".!?").rstrip()


def _validated_bundle(
    discourse: tuple[str, ...],
    inferences: dict[tuple[int, str], tuple[str, ...]],
    backend_id: str,
    retrieved_at: str,
) -> CommonsenseBundle:
    count = len(discourse)
    indices = set()
    for (index, relation), phrases in inferences.items():
        if not 0 <= index < count:
            raise ValidationError(f"sentence index {index} out of range for {count} sentences")
        if relation not in RELATIONS:
            raise ValidationError(f"unknown relation {relation!r}")
        if not phrases or any(not p.strip() for p in phrases):
            raise ValidationError(f"empty beam list or blank phrase at ({index}, {relation})")
        indices.add(index)
    for index in indices:
        missing = [r for r in RELATIONS if (index, r) not in inferences]
        if missing:
            raise MissingInferenceError(
                f"backend returned sentence {index} without relations: {', '.join(missing)}"
            )
    return CommonsenseBundle(
        discourse=discourse,
        inferences=MappingProxyType(dict(inferences)),
        backend_id=backend_id,
        retrieved_at=retrieved_at,
    )


class KnowledgeBackend(ABC):
    backend_id: str = "abstract"

    @abstractmethod
    def fetch(self, sentences: Sequence[str]) -> tuple[dict[tuple[int, str], tuple[str, ...]], str]:
        """Return (inferences, retrieved_at) for the discourse."""


class StubKnowledgeBackend(KnowledgeBackend):
    """Deterministic phrases derived from each sentence's salient word."""

    backend_id = "stub"

    _TEMPLATES = {
        "xIntent": ("to engage with {w}", "to think about {w}"),
        "xNeed": ("to prepare for {w}", "to have {w}"),
        "xAttr": ("mindful of {w}", "curious about {w}"),
        "xEffect": ("gets involved with {w}", "learns about {w}"),
        "xWant": ("to follow up on {w}", "to revisit {w}"),
        "xReact": ("thoughtful about {w}", "satisfied about {w}"),
        "oReact": ("aware of {w}", "interested in {w}"),
        "oWant": ("to respond to {w}", "to ask about {w}"),
        "oEffect": ("is affected by {w}", "hears about {w}"),
    }

    @staticmethod
    def _salient_word(sentence: str) -> str:
        words = [w.strip("\"'.,;:!?()[]") for w in sentence.lower().split()]
        words = [w for w in words if w]
        if not words:
            return "it"
        return max(words, key=lambda w: (len(w), words.index(w) * -1))

    def fetch(self, sentences):
        inferences: dict[tuple[int, str], tuple[str, ...]] = {}
        for index, sentence in enumerate(sentences):
            word = self._salient_word(sentence)
            for relation in RELATIONS:
                beams = tuple(t.format(w=word) for t in self._TEMPLATES[relation])
                inferences[(index, relation)] = beams
        return inferences, _EPOCH


class CacheKnowledgeBackend(KnowledgeBackend):
    """JSONL cache of bundles, keyed by discourse hash.

    Read path is lock-free over an in-memory snapshot; on a miss with a
    ``record_from`` backend configured, the fetched bundle is appended under
    a single-writer lock. A bare miss raises MissingInferenceError.
    """

    backend_id = "cache"

    def __init__(self, path: Path | str, record_from: KnowledgeBackend | None = None):
        self.path = Path(path)
        self.record_from = record_from
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            for _, obj in iter_jsonl(self.path):
                self._entries[obj["key"]] = obj["bundle"]

    def fetch(self, sentences):
        key = discourse_key(sentences)
        cached = self._entries.get(key)
        if cached is not None:
            bundle = CommonsenseBundle.from_json(cached)
            return dict(bundle.inferences), bundle.retrieved_at
        if self.record_from is None:
            raise MissingInferenceError(
                f"no cached inferences for discourse {list(sentences)!r}"
            )
        inferences, retrieved_at = self.record_from.fetch(sentences)
        bundle = _validated_bundle(
            tuple(sentences), dict(inferences), self.record_from.backend_id, retrieved_at
        )
        with self._lock:
            if key not in self._entries:
                payload = bundle.to_json()
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(dump_line({"key": key, "bundle": payload}) + "\n")
                self._entries[key] = payload
        return dict(bundle.inferences), bundle.retrieved_at


class HttpKnowledgeBackend(KnowledgeBackend):
    """Client for a live knowledge model server."""

    backend_id = "live"

    def __init__(self, url: str | None = None, timeout: float = 30.0, attempts: int = 3):
        self.url = url or os.environ.get("KNOWLEDGE_BACKEND_URL")
        if not self.url:
            raise BackendError(
                "no knowledge backend URL configured (set KNOWLEDGE_BACKEND_URL)"
            )
        self.timeout = timeout
        self.attempts = attempts

    def fetch(self, sentences):
        import requests

        payload = {"sentences": list(sentences)}
        last_error: Exception | None = None
        for attempt in range(self.attempts):
            try:
                response = requests.post(self.url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                time.sleep(min(2**attempt * 0.2, 2.0))
                continue
            if response.status_code >= 500:
                last_error = BackendError(
                    f"knowledge server returned {response.status_code}", retryable=True
                )
                time.sleep(min(2**attempt * 0.2, 2.0))
                continue
            if response.status_code != 200:
                raise BackendError(
                    f"knowledge server returned {response.status_code}: {response.text[:200]}"
                )
            body = response.json()
            inferences: dict[tuple[int, str], tuple[str, ...]] = {}
            for index, by_relation in body.get("inferences", {}).items():
                for relation, phrases in by_relation.items():
                    inferences[(int(index), relation)] = tuple(phrases)
            return inferences, time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        raise BackendError(f"knowledge backend unavailable: {last_error}", retryable=True)


def infer(discourse: Sequence[str], backend: KnowledgeBackend) -> CommonsenseBundle:
    """Fetch a validated commonsense bundle for the discourse."""
    sentences = tuple(s.strip() for s in discourse)
    if not sentences or any(not s for s in sentences):
        raise ValidationError("discourse must be non-empty sentences")
    inferences, retrieved_at = backend.fetch(sentences)
    return _validated_bundle(sentences, dict(inferences), backend.backend_id, retrieved_at)


def select_intent(bundle: CommonsenseBundle) -> str:
    """Top-ranked intent phrase for the first sentence, sanitized."""
    beams = bundle.beams(0, INTENT)
    if not beams:
        raise MissingInferenceError(
            f"bundle has no {INTENT} beams for the first sentence"
        )
    phrase = sanitize_phrase(beams[0])
    if not phrase:
        raise MissingInferenceError(f"top {INTENT} beam is empty after sanitization")
    return phrase
