"""Human plausibility evaluation: batches, judgments, and aggregation.

State is an append-only line-delimited JSON journal replayed at startup.
Two record types share the file:

    {"type": "item", ...AnnotationItem fields}
    {"type": "judgment", "item_id", "annotator_id", "plausible", "submitted_at"}

Items are journaled once when a batch is attached, so a journal alone is
enough to rebuild the store and its (dataset, system) groupings.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    ConflictError,
    UndefinedAgreementError,
    UnknownItemError,
    ValidationError,
)
from .generator import GeneratedPremise
from .jsonl import dump_line, iter_jsonl
from .metrics import SYSTEM_LABELS


@dataclass(frozen=True)
class AnnotationItem:
    item_id: str
    stated_premise: str
    stated_claim: str
    candidate_premise: str
    system: str
    dataset: str
    required_judges: int = 3

    def __post_init__(self):
        if self.required_judges < 1 or self.required_judges % 2 == 0:
            raise ValidationError("required_judges must be odd and >= 1")

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "stated_premise": self.stated_premise,
            "stated_claim": self.stated_claim,
            "candidate_premise": self.candidate_premise,
            "system": self.system,
            "dataset": self.dataset,
            "required_judges": self.required_judges,
        }

    @staticmethod
    def from_json(obj: dict) -> "AnnotationItem":
        return AnnotationItem(
            item_id=str(obj["item_id"]),
            stated_premise=obj["stated_premise"],
            stated_claim=obj["stated_claim"],
            candidate_premise=obj["candidate_premise"],
            system=obj["system"],
            dataset=obj["dataset"],
            required_judges=int(obj.get("required_judges", 3)),
        )


@dataclass(frozen=True)
class JudgmentRecord:
    item_id: str
    annotator_id: str
    plausible: bool
    submitted_at: str

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "annotator_id": self.annotator_id,
            "plausible": self.plausible,
            "submitted_at": self.submitted_at,
        }


def create_batch(
    generations: Sequence[GeneratedPremise],
    enthymemes: Sequence,
    sample_size: int,
    seed: int,
    required_judges: int = 3,
) -> list[AnnotationItem]:
    """Sample enthymemes per dataset and pair each with every system's output.

    The sample is uniform without replacement, seeded, and the result is
    ordered by item_id so identical inputs give identical batches.
    """
    by_id = {e.id: e for e in enthymemes}
    usable = [g for g in generations if g.error is None]
    for generation in usable:
        if generation.enthymeme_id not in by_id:
            raise ValidationError(f"generation references unknown enthymeme {generation.enthymeme_id}")

    by_dataset: dict[str, list[str]] = {}
    seen: set[str] = set()
    for generation in usable:
        enthymeme = by_id[generation.enthymeme_id]
        if enthymeme.id not in seen:
            seen.add(enthymeme.id)
            by_dataset.setdefault(enthymeme.source, []).append(enthymeme.id)

    sampled_ids: set[str] = set()
    rng = random.Random(seed)
    for dataset in sorted(by_dataset):
        candidates = sorted(by_dataset[dataset])
        if sample_size > len(candidates):
            raise ValidationError(
                f"sample_size {sample_size} exceeds {len(candidates)} available items for {dataset}"
            )
        sampled_ids.update(rng.sample(candidates, sample_size))

    items = []
    for generation in usable:
        if generation.enthymeme_id not in sampled_ids:
            continue
        enthymeme = by_id[generation.enthymeme_id]
        system = SYSTEM_LABELS.get(generation.setting, generation.setting)
        items.append(
            AnnotationItem(
                item_id=f"{enthymeme.id}:{system}",
                stated_premise=enthymeme.stated_premise,
                stated_claim=enthymeme.stated_claim,
                candidate_premise=generation.implicit_premise,
                system=system,
                dataset=enthymeme.source,
                required_judges=required_judges,
            )
        )
    items.sort(key=lambda item: item.item_id)
    return items


def majority_vote(judgments: Sequence[bool]) -> bool:
    """True iff a strict majority of an odd number of judges said plausible."""
    if not judgments or len(judgments) % 2 == 0:
        raise ValidationError("majority vote needs an odd, non-zero judgment count")
    return sum(judgments) * 2 > len(judgments)


def krippendorff_alpha(matrix: Sequence[Sequence[object]]) -> float:
    """Nominal-data alpha via the coincidence matrix, tolerating missing cells.

    Rows are items, columns annotators, None marks a missing judgment; only
    items with at least two judgments contribute pairable values.
    """
    units = [[value for value in row if value is not None] for row in matrix]
    units = [unit for unit in units if len(unit) >= 2]
    if len(units) < 2:
        raise ValidationError("need at least 2 items with at least 2 judgments each")
    labels = {value for unit in units for value in unit}
    if len(labels) < 2:
        raise UndefinedAgreementError("only one label present; expected disagreement is zero")

    coincidence: dict[tuple[object, object], float] = {}
    for unit in units:
        weight = 1.0 / (len(unit) - 1)
        for i, first in enumerate(unit):
            for j, second in enumerate(unit):
                if i != j:
                    key = (first, second)
                    coincidence[key] = coincidence.get(key, 0.0) + weight

    marginals: dict[object, float] = {}
    for (first, _), mass in coincidence.items():
        marginals[first] = marginals.get(first, 0.0) + mass
    total = sum(marginals.values())
    observed = sum(mass for (first, second), mass in coincidence.items() if first != second)
    expected = sum(
        marginals[a] * marginals[b]
        for a in marginals
        for b in marginals
        if a != b
    ) / (total - 1)
    if expected == 0.0:
        raise UndefinedAgreementError("expected disagreement is zero")
    return 1.0 - observed / expected


@dataclass(frozen=True)
class AggregateReport:
    rows: tuple[dict, ...]
    alpha: float | None
    n_annotators: int
    n_judgments: int
    complete: bool

    def to_json(self) -> dict:
        return {
            "rows": list(self.rows),
            "alpha": self.alpha,
            "n_annotators": self.n_annotators,
            "n_judgments": self.n_judgments,
            "complete": self.complete,
        }


def render_aggregate_table(report: AggregateReport) -> str:
    headers = ["Data", "System", "Plausibility", "N"]
    rows = [
        [row["dataset"], row["system"], f"{100 * row['plausible_fraction']:.0f}%", str(row["n_items"])]
        for row in report.rows
    ]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    if report.alpha is not None:
        lines.append(f"Krippendorff alpha: {report.alpha:.2f}")
    return "\n".join(lines) + "\n"


class AnnotationStore:
    """Journal-backed judgment store with pull-based item serving.

    Reads work on immutable snapshots under a lock; journal appends are
    serialized through the same single writer. next_item may transiently
    over-offer under concurrency; submit enforces the judgment cap.
    """

    def __init__(self, journal_path: Path | str, items: Iterable[AnnotationItem] | None = None):
        self.journal_path = Path(journal_path)
        self._lock = threading.Lock()
        self._items: dict[str, AnnotationItem] = {}
        self._judgments: dict[tuple[str, str], JudgmentRecord] = {}
        self._offered: dict[str, set[str]] = {}
        if self.journal_path.exists():
            self._replay()
        if items is not None:
            self.attach_items(items)

    def _replay(self) -> None:
        for _, obj in iter_jsonl(self.journal_path):
            kind = obj.get("type")
            if kind == "item":
                item = AnnotationItem.from_json(obj)
                self._items[item.item_id] = item
            elif kind == "judgment":
                record = JudgmentRecord(
                    item_id=str(obj["item_id"]),
                    annotator_id=str(obj["annotator_id"]),
                    plausible=bool(obj["plausible"]),
                    submitted_at=obj.get("submitted_at", ""),
                )
                self._judgments[(record.item_id, record.annotator_id)] = record

    def _append(self, obj: dict) -> None:
        self.journal_path.parent.mkdir(parents=True, exist_ok=True)
        with self.journal_path.open("a", encoding="utf-8") as handle:
            handle.write(dump_line(obj) + "\n")
            handle.flush()

    def attach_items(self, items: Iterable[AnnotationItem]) -> None:
        """Register batch items, journaling each new item once."""
        with self._lock:
            for item in items:
                known = self._items.get(item.item_id)
                if known is not None:
                    if known != item:
                        raise ConflictError(f"item {item.item_id} already attached with different content")
                    continue
                self._items[item.item_id] = item
                self._append({"type": "item", **item.to_json()})

    @property
    def items(self) -> list[AnnotationItem]:
        with self._lock:
            return sorted(self._items.values(), key=lambda item: item.item_id)

    def judgment_count(self, item_id: str) -> int:
        with self._lock:
            return sum(1 for key in self._judgments if key[0] == item_id)

    def judgments_for(self, item_id: str) -> list[JudgmentRecord]:
        with self._lock:
            return sorted(
                (record for key, record in self._judgments.items() if key[0] == item_id),
                key=lambda record: record.annotator_id,
            )

    def progress(self, annotator_id: str) -> dict:
        with self._lock:
            done = sum(1 for key in self._judgments if key[1] == annotator_id)
        return {"done": done, "remaining": len(self._open_items_for(annotator_id))}

    def _open_items_for(self, annotator_id: str) -> list[AnnotationItem]:
        with self._lock:
            counts: dict[str, int] = {}
            for item_id, _ in self._judgments:
                counts[item_id] = counts.get(item_id, 0) + 1
            open_items = [
                item
                for item in self._items.values()
                if counts.get(item.item_id, 0) < item.required_judges
                and (item.item_id, annotator_id) not in self._judgments
            ]
            open_items.sort(key=lambda item: (counts.get(item.item_id, 0), item.item_id))
            return open_items

    def next_item(self, annotator_id: str) -> AnnotationItem | None:
        """Least-judged open item not yet judged by this annotator."""
        if not annotator_id:
            raise ValidationError("annotator_id must be non-empty")
        open_items = self._open_items_for(annotator_id)
        if not open_items:
            return None
        chosen = open_items[0]
        with self._lock:
            self._offered.setdefault(annotator_id, set()).add(chosen.item_id)
        return chosen

    def submit_judgment(self, record: JudgmentRecord) -> dict:
        """Durably append a judgment; idempotent on exact duplicates."""
        with self._lock:
            item = self._items.get(record.item_id)
            if item is None:
                raise UnknownItemError(f"unknown item {record.item_id}")
            key = (record.item_id, record.annotator_id)
            existing = self._judgments.get(key)
            if existing is not None:
                if existing.plausible == record.plausible:
                    return {"status": "duplicate", "item_id": record.item_id}
                raise ConflictError(
                    f"annotator {record.annotator_id} already judged {record.item_id} differently"
                )
            count = sum(1 for k in self._judgments if k[0] == record.item_id)
            if count >= item.required_judges:
                raise ConflictError(f"item {record.item_id} already has {count} judgments")
            if record.item_id not in self._offered.get(record.annotator_id, set()):
                raise ConflictError(
                    f"item {record.item_id} was not served to annotator {record.annotator_id}"
                )
            self._append({"type": "judgment", **record.to_json()})
            self._judgments[key] = record
            return {"status": "accepted", "item_id": record.item_id}

    def aggregate(self, allow_partial: bool = False) -> AggregateReport:
        """Majority-vote fractions per (dataset, system) plus overall alpha."""
        with self._lock:
            items = sorted(self._items.values(), key=lambda item: item.item_id)
            judgments = dict(self._judgments)
        per_item: dict[str, list[JudgmentRecord]] = {item.item_id: [] for item in items}
        for (item_id, _), record in judgments.items():
            per_item.setdefault(item_id, []).append(record)

        incomplete = [
            item.item_id
            for item in items
            if len(per_item[item.item_id]) < item.required_judges
        ]
        if incomplete and not allow_partial:
            raise ValidationError(
                f"{len(incomplete)} items lack required judgments (first: {incomplete[0]})"
            )

        groups: dict[tuple[str, str], list[bool]] = {}
        for item in items:
            records = per_item[item.item_id]
            if len(records) < item.required_judges:
                continue
            votes = [record.plausible for record in sorted(records, key=lambda r: r.annotator_id)]
            verdict = majority_vote(votes[: item.required_judges])
            groups.setdefault((item.dataset, item.system), []).append(verdict)

        rows = tuple(
            {
                "dataset": dataset,
                "system": system,
                "plausible_fraction": sum(verdicts) / len(verdicts),
                "n_items": len(verdicts),
            }
            for (dataset, system), verdicts in sorted(groups.items())
        )

        annotators = sorted({annotator for _, annotator in judgments})
        matrix = []
        for item in items:
            row = []
            for annotator in annotators:
                record = judgments.get((item.item_id, annotator))
                row.append(None if record is None else record.plausible)
            matrix.append(row)
        try:
            alpha = krippendorff_alpha(matrix) if matrix and annotators else None
        except (ValidationError, UndefinedAgreementError):
            alpha = None
        return AggregateReport(
            rows=rows,
            alpha=alpha,
            n_annotators=len(annotators),
            n_judgments=len(judgments),
            complete=not incomplete,
        )
