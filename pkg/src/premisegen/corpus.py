"""Corpus ingestion: abductive training pairs and enthymeme test sets.

Canonical on-disk formats (UTF-8, one JSON object per line):

    abductive pair   {"id", "obs1", "obs2", "hypothesis", "split"}
    enthymeme        {"id", "stated_premise", "stated_claim",
                      "gold_premises": [...], "source", "scheme"?, "raw_meta"?}

Raw upstream releases are normalized into these shapes by format adapters
selected with a ``format`` argument (``--format`` on the CLI):

    art            abductive JSONL with {"story_id", "obs1", "obs2",
                   "hyp1", "hyp2", "label"} (label picks the plausible
                   hypothesis) or a direct {"obs1", "obs2", "hyp"} record
    arct           warrant-selection TSV with header columns
                   #id, warrant0, warrant1, correctLabelW0orW1, reason,
                   claim, debateTitle, debateInfo
    debate-json    {"id", "premise", "claim", "implicit_premises": [...]}
    microtext-json {"id", "premise", "claim", "implicit_premises": [...],
                   "relation", "scheme"?}
    canonical      the formats above, as written by ``prepare``

Records that fail a structural or well-formedness check are dropped and
tallied per reason in CorpusStats; only unreadable files are fatal.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .errors import DataError, ValidationError
from .jsonl import iter_jsonl
from .sequencing import split_sentences

SPLITS = ("train", "validation", "test")
SOURCES = ("D1", "D2", "D3")

# Finite-verb evidence for the well-formedness filter: a closed list of
# auxiliaries/copulas/modals, or a token with a regular verbal suffix that is
# not preceded by a determiner.
_AUX_VERBS = frozenset(
    {
        "am", "is", "are", "was", "were", "be", "been", "being",
        "have", "has", "had", "do", "does", "did",
        "can", "could", "will", "would", "shall", "should",
        "may", "might", "must", "ought", "need",
    }
)
_DETERMINERS = frozenset(
    {
        "a", "an", "the", "this", "that", "these", "those",
        "my", "your", "his", "her", "its", "our", "their",
        "some", "any", "no", "each", "every", "either", "neither",
        "what", "which", "whose",
    }
)
_VERBAL_SUFFIXES = ("s", "ed", "ing")


@dataclass(frozen=True)
class AbductivePair:
    """One training instance: two observations and a plausible hypothesis."""

    id: str
    obs1: str
    obs2: str
    hypothesis: str
    split: str

    def __post_init__(self):
        for name in ("obs1", "obs2", "hypothesis"):
            if not getattr(self, name).strip():
                raise ValidationError(f"AbductivePair.{name} must be non-empty")
        if self.split not in SPLITS:
            raise ValidationError(f"unknown split {self.split!r}")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "obs1": self.obs1,
            "obs2": self.obs2,
            "hypothesis": self.hypothesis,
            "split": self.split,
        }


@dataclass(frozen=True)
class Enthymeme:
    """One test instance: stated premise + stated claim, gold implicit premise(s)."""

    id: str
    stated_premise: str
    stated_claim: str
    gold_premises: tuple[str, ...]
    source: str
    scheme: str | None = None
    raw_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValidationError(f"unknown source {self.source!r}")
        if not self.gold_premises or any(not g.strip() for g in self.gold_premises):
            raise ValidationError("gold_premises must be non-empty texts")
        if self.scheme is not None and self.source != "D3":
            raise ValidationError("scheme is only carried by D3 records")

    def to_json(self) -> dict:
        obj = {
            "id": self.id,
            "stated_premise": self.stated_premise,
            "stated_claim": self.stated_claim,
            "gold_premises": list(self.gold_premises),
            "source": self.source,
        }
        if self.scheme is not None:
            obj["scheme"] = self.scheme
        if self.raw_meta:
            obj["raw_meta"] = self.raw_meta
        return obj


@dataclass
class CorpusStats:
    source: str
    loaded_count: int = 0
    filtered_out_count: int = 0
    filter_reasons: dict[str, int] = field(default_factory=dict)

    def drop(self, reason: str) -> None:
        self.filtered_out_count += 1
        self.filter_reasons[reason] = self.filter_reasons.get(reason, 0) + 1

    @property
    def prefilter_count(self) -> int:
        return self.loaded_count + self.filtered_out_count

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "loaded_count": self.loaded_count,
            "filtered_out_count": self.filtered_out_count,
            "prefilter_count": self.prefilter_count,
            "filter_reasons": dict(sorted(self.filter_reasons.items())),
        }


@dataclass(frozen=True)
class LoadResult:
    records: list
    stats: CorpusStats


def _strip_edge_punct(token: str) -> str:
    return token.strip("\"'.,;:!?()[]{}<>")


def is_well_formed_sentence(text: str) -> bool:
    """Deterministic full-formed-sentence filter.

    A sentence passes iff, after whitespace normalization, it has 3..60
    tokens, is exactly one sentence under split_sentences, is not
    all-uppercase noise, and shows finite-verb evidence: an auxiliary,
    copula, or modal from a closed list, or a token ending in -s/-ed/-ing
    whose preceding token is not a determiner.
    """
    stripped = " ".join(text.split())
    if not stripped:
        return False
    tokens = stripped.split()
    if not 3 <= len(tokens) <= 60:
        return False
    if len(split_sentences(stripped)) != 1:
        return False
    letters = [c for c in stripped if c.isalpha()]
    if letters and all(c.isupper() for c in letters):
        return False
    words = [_strip_edge_punct(t).lower() for t in tokens]
    for index, word in enumerate(words):
        if word in _AUX_VERBS:
            return True
        preceded_by_det = index > 0 and words[index - 1] in _DETERMINERS
        if preceded_by_det:
            continue
        for suffix in _VERBAL_SUFFIXES:
            if len(word) > len(suffix) and word.endswith(suffix):
                return True
    return False


def _read_lines(path: Path | str, stats: CorpusStats):
    """Parse a JSONL file, tallying malformed lines instead of raising."""
    path = Path(path)
    try:
        handle = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError:
                stats.drop("malformed_line")


def load_art(path: Path | str, split: str | None = None, format: str = "canonical") -> LoadResult:
    """Load abductive training pairs.

    ``split`` stamps every record when given; otherwise the per-line field
    is used (canonical files carry one). Records with blank fields or a
    duplicate id within the load are dropped and tallied.
    """
    if format not in ("canonical", "art"):
        raise DataError(f"unknown abductive format {format!r}")
    stats = CorpusStats(source="ART")
    records: list[AbductivePair] = []
    seen_ids: set[str] = set()
    for lineno, obj in _read_lines(path, stats):
        if not isinstance(obj, dict):
            stats.drop("malformed_line")
            continue
        if format == "art":
            fields = _adapt_art_record(obj, lineno)
        else:
            fields = {
                "id": obj.get("id"),
                "obs1": obj.get("obs1"),
                "obs2": obj.get("obs2"),
                "hypothesis": obj.get("hypothesis"),
                "split": obj.get("split"),
            }
        if fields is None:
            stats.drop("missing_field")
            continue
        record_split = split or fields.get("split")
        if record_split is None:
            stats.drop("missing_split")
            continue
        values = {k: fields.get(k) for k in ("obs1", "obs2", "hypothesis")}
        if any(not isinstance(v, str) or not v.strip() for v in values.values()):
            stats.drop("blank_field")
            continue
        record_id = str(fields.get("id") or f"{record_split}-{lineno}")
        if record_id in seen_ids:
            stats.drop("duplicate_id")
            continue
        try:
            pair = AbductivePair(
                id=record_id,
                obs1=values["obs1"].strip(),
                obs2=values["obs2"].strip(),
                hypothesis=values["hypothesis"].strip(),
                split=record_split,
            )
        except ValidationError:
            stats.drop("invalid_record")
            continue
        seen_ids.add(record_id)
        records.append(pair)
        stats.loaded_count += 1
    return LoadResult(records=records, stats=stats)


def _adapt_art_record(obj: dict, lineno: int) -> dict | None:
    obs1, obs2 = obj.get("obs1"), obj.get("obs2")
    if obs1 is None or obs2 is None:
        return None
    hypothesis = obj.get("hyp") or obj.get("hypothesis")
    if hypothesis is None:
        label = obj.get("label")
        if label in (1, 2, "1", "2"):
            hypothesis = obj.get(f"hyp{label}")
    if hypothesis is None:
        return None
    return {
        "id": obj.get("story_id") or obj.get("id"),
        "obs1": obs1,
        "obs2": obs2,
        "hypothesis": hypothesis,
        "split": obj.get("split"),
    }


def _build_enthymeme(
    stats: CorpusStats,
    record_id: str,
    premise: str | None,
    claim: str | None,
    golds: Iterable[str] | None,
    source: str,
    scheme: str | None = None,
    raw_meta: dict | None = None,
    check_well_formed: bool = True,
) -> Enthymeme | None:
    if not isinstance(premise, str) or not isinstance(claim, str):
        stats.drop("missing_field")
        return None
    golds = [g.strip() for g in (golds or []) if isinstance(g, str) and g.strip()]
    if not golds:
        stats.drop("missing_gold")
        return None
    if check_well_formed:
        if not is_well_formed_sentence(premise):
            stats.drop("premise_not_well_formed")
            return None
        if not is_well_formed_sentence(claim):
            stats.drop("claim_not_well_formed")
            return None
    try:
        enthymeme = Enthymeme(
            id=record_id,
            stated_premise=" ".join(premise.split()),
            stated_claim=" ".join(claim.split()),
            gold_premises=tuple(golds),
            source=source,
            scheme=scheme,
            raw_meta=raw_meta or {},
        )
    except ValidationError:
        stats.drop("invalid_record")
        return None
    stats.loaded_count += 1
    return enthymeme


def _load_canonical_enthymemes(path: Path | str, source: str) -> LoadResult:
    stats = CorpusStats(source=source)
    records: list[Enthymeme] = []
    for lineno, obj in _read_lines(path, stats):
        if not isinstance(obj, dict) or obj.get("source") != source:
            stats.drop("wrong_source" if isinstance(obj, dict) else "malformed_line")
            continue
        enthymeme = _build_enthymeme(
            stats,
            record_id=str(obj.get("id") or f"{source}-{lineno}"),
            premise=obj.get("stated_premise"),
            claim=obj.get("stated_claim"),
            golds=obj.get("gold_premises"),
            source=source,
            scheme=obj.get("scheme"),
            raw_meta=obj.get("raw_meta") or {},
        )
        if enthymeme is not None:
            records.append(enthymeme)
    return LoadResult(records=records, stats=stats)


def load_d1(path: Path | str, format: str = "canonical") -> LoadResult:
    """Warrant-selection triples: the labeled-correct warrant becomes the gold."""
    if format == "canonical":
        return _load_canonical_enthymemes(path, "D1")
    if format != "arct":
        raise DataError(f"unknown D1 format {format!r}")
    stats = CorpusStats(source="D1")
    records: list[Enthymeme] = []
    path = Path(path)
    try:
        handle = path.open("r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.DictReader(handle, delimiter="\t")
        for row_number, row in enumerate(reader, start=1):
            label = (row.get("correctLabelW0orW1") or "").strip()
            warrant = row.get(f"warrant{label}") if label in ("0", "1") else None
            if warrant is None:
                stats.drop("missing_field")
                continue
            meta = {
                key: row[key]
                for key in ("debateTitle", "debateInfo")
                if row.get(key)
            }
            enthymeme = _build_enthymeme(
                stats,
                record_id=str(row.get("#id") or f"D1-{row_number}"),
                premise=row.get("reason"),
                claim=row.get("claim"),
                golds=[warrant],
                source="D1",
                raw_meta=meta,
            )
            if enthymeme is not None:
                records.append(enthymeme)
    return LoadResult(records=records, stats=stats)


def load_d2(path: Path | str, format: str = "canonical") -> LoadResult:
    """Debate-forum enthymemes; all annotator premises kept as a reference set."""
    if format == "canonical":
        return _load_canonical_enthymemes(path, "D2")
    if format != "debate-json":
        raise DataError(f"unknown D2 format {format!r}")
    stats = CorpusStats(source="D2")
    records: list[Enthymeme] = []
    for lineno, obj in _read_lines(path, stats):
        if not isinstance(obj, dict):
            stats.drop("malformed_line")
            continue
        enthymeme = _build_enthymeme(
            stats,
            record_id=str(obj.get("id") or f"D2-{lineno}"),
            premise=obj.get("premise"),
            claim=obj.get("claim"),
            golds=obj.get("implicit_premises"),
            source="D2",
        )
        if enthymeme is not None:
            records.append(enthymeme)
    return LoadResult(records=records, stats=stats)


def load_d3(path: Path | str, format: str = "canonical") -> LoadResult:
    """Microtext arguments: support relation only, exactly one implicit premise."""
    if format == "canonical":
        return _load_canonical_enthymemes(path, "D3")
    if format != "microtext-json":
        raise DataError(f"unknown D3 format {format!r}")
    stats = CorpusStats(source="D3")
    records: list[Enthymeme] = []
    for lineno, obj in _read_lines(path, stats):
        if not isinstance(obj, dict):
            stats.drop("malformed_line")
            continue
        if (obj.get("relation") or "").strip().lower() != "support":
            stats.drop("non_support_relation")
            continue
        golds = obj.get("implicit_premises")
        if not isinstance(golds, list) or len(golds) != 1:
            stats.drop("premise_chain")
            continue
        enthymeme = _build_enthymeme(
            stats,
            record_id=str(obj.get("id") or f"D3-{lineno}"),
            premise=obj.get("premise"),
            claim=obj.get("claim"),
            golds=golds,
            source="D3",
            scheme=obj.get("scheme"),
        )
        if enthymeme is not None:
            records.append(enthymeme)
    return LoadResult(records=records, stats=stats)


LOADERS: dict[str, Callable[..., LoadResult]] = {
    "art": load_art,
    "d1": load_d1,
    "d2": load_d2,
    "d3": load_d3,
}


def read_canonical_enthymemes(path: Path | str) -> list[Enthymeme]:
    """Read a canonical enthymeme JSONL file, failing fast on bad records."""
    records = []
    for lineno, obj in iter_jsonl(path):
        try:
            records.append(
                Enthymeme(
                    id=str(obj["id"]),
                    stated_premise=obj["stated_premise"],
                    stated_claim=obj["stated_claim"],
                    gold_premises=tuple(obj["gold_premises"]),
                    source=obj["source"],
                    scheme=obj.get("scheme"),
                    raw_meta=obj.get("raw_meta") or {},
                )
            )
        except (KeyError, TypeError, ValidationError) as exc:
            raise DataError(f"{path}:{lineno}: invalid enthymeme record: {exc}") from exc
    return records


def read_canonical_pairs(path: Path | str) -> list[AbductivePair]:
    records = []
    for lineno, obj in iter_jsonl(path):
        try:
            records.append(
                AbductivePair(
                    id=str(obj["id"]),
                    obs1=obj["obs1"],
                    obs2=obj["obs2"],
                    hypothesis=obj["hypothesis"],
                    split=obj["split"],
                )
            )
        except (KeyError, TypeError, ValidationError) as exc:
            raise DataError(f"{path}:{lineno}: invalid abductive record: {exc}") from exc
    return records
