"""Automatic evaluation: BLEU-1/2, BERTScore-F1, Wilcoxon signed-rank.

Conventions are pinned so scores are reproducible across implementations:

* tokenizer: lowercase, whitespace split, leading/trailing Unicode
  punctuation detached as separate tokens (currency and other symbols stay
  attached);
* BLEU: clipped n-gram precision against the max reference count, geometric
  mean with uniform weights, brevity penalty exp(1 - r/c) only when c < r
  with r the closest reference length (ties go to the shorter reference),
  add-one smoothing (hits+1)/(total+1) applied only to zero counts of order
  n >= 2; a candidate with no n-grams of some order scores 0; corpus scores
  pool (micro-average) the per-sentence counts;
* BERTScore: greedy matching over unit-normalized embeddings with cosines
  clamped at 0; no idf weighting, no baseline rescaling;
* Wilcoxon signed-rank: two-sided, zero differences dropped, midranks for
  ties; exact null distribution for n <= 20, else normal approximation with
  tie correction and no continuity correction.
"""

from __future__ import annotations

import hashlib
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import UndefinedStatisticError, ValidationError

TokenSequence = list[str]

EXACT_LIMIT = 20

SYSTEM_LABELS = {
    "zero_shot": "zero_shot",
    "fine_tuned": "art",
    "fine_tuned_knowledge": "art_paracomet",
}


def _is_punct(char: str) -> bool:
    return unicodedata.category(char).startswith("P")


def tokenize(text: str) -> TokenSequence:
    """Lowercase whitespace tokenizer detaching edge punctuation."""
    tokens: TokenSequence = []
    for chunk in text.lower().split():
        leading: list[str] = []
        while chunk and _is_punct(chunk[0]):
            leading.append(chunk[0])
            chunk = chunk[1:]
        trailing: list[str] = []
        while chunk and _is_punct(chunk[-1]):
            trailing.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(leading)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trailing))
    return tokens


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_stats(
    candidate: Sequence[str], references: Sequence[Sequence[str]], n: int
) -> tuple[int, int]:
    """(clipped hits, total candidate n-grams) for one sentence."""
    counts = _ngram_counts(candidate, n)
    total = sum(counts.values())
    if total == 0:
        return 0, 0
    max_ref: Counter = Counter()
    for reference in references:
        for ngram, count in _ngram_counts(reference, n).items():
            if count > max_ref[ngram]:
                max_ref[ngram] = count
    hits = sum(min(count, max_ref[ngram]) for ngram, count in counts.items())
    return hits, total


def _closest_ref_length(candidate_len: int, references: Sequence[Sequence[str]]) -> int:
    return min((len(r) for r in references), key=lambda rl: (abs(rl - candidate_len), rl))


def _score_from_stats(
    hits: Sequence[int], totals: Sequence[int], candidate_len: int, ref_len: int
) -> float:
    log_sum = 0.0
    for n, (h, t) in enumerate(zip(hits, totals), start=1):
        if t == 0:
            return 0.0
        if h == 0:
            if n == 1:
                return 0.0
            h, t = h + 1, t + 1
        log_sum += math.log(h / t)
    precision = math.exp(log_sum / len(hits))
    if candidate_len < ref_len:
        precision *= math.exp(1.0 - ref_len / candidate_len)
    return precision


def bleu(
    candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 2
) -> float:
    """Sentence-level BLEU in [0, 1]; empty candidates score 0 by convention."""
    if max_n < 1:
        raise ValidationError("max_n must be >= 1")
    if not references:
        raise ValidationError("references must be non-empty")
    if not candidate:
        return 0.0
    hits, totals = [], []
    for n in range(1, max_n + 1):
        h, t = _clipped_stats(candidate, references, n)
        hits.append(h)
        totals.append(t)
    return _score_from_stats(hits, totals, len(candidate), _closest_ref_length(len(candidate), references))


def corpus_bleu(
    candidates: Sequence[Sequence[str]],
    reference_sets: Sequence[Sequence[Sequence[str]]],
    max_n: int = 2,
) -> float:
    """Micro-averaged BLEU: n-gram counts pooled over the corpus."""
    if len(candidates) != len(reference_sets):
        raise ValidationError("candidates and reference sets must align")
    if not candidates:
        raise ValidationError("corpus is empty")
    hits = [0] * max_n
    totals = [0] * max_n
    candidate_len = 0
    ref_len = 0
    for candidate, references in zip(candidates, reference_sets):
        if not references:
            raise ValidationError("every candidate needs at least one reference")
        candidate_len += len(candidate)
        ref_len += _closest_ref_length(len(candidate), references)
        for n in range(1, max_n + 1):
            h, t = _clipped_stats(candidate, references, n)
            hits[n - 1] += h
            totals[n - 1] += t
    return _score_from_stats(hits, totals, candidate_len, ref_len)


class Embedder(Protocol):
    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        """One vector per token, shape (len(tokens), dim)."""


class StaticHashEmbedder:
    """Deterministic per-token embeddings from a hash-seeded Gaussian draw.

    Context-free by construction, which makes identical token sequences
    embed identically; good enough to exercise the greedy-matching metric
    without a model.
    """

    def __init__(self, dim: int = 64):
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        rows = []
        for token in tokens:
            vector = self._cache.get(token)
            if vector is None:
                seed = int.from_bytes(
                    hashlib.sha256(token.encode("utf-8")).digest()[:8], "big"
                )
                vector = np.random.default_rng(seed).standard_normal(self.dim)
                self._cache[token] = vector
            rows.append(vector)
        return np.asarray(rows, dtype=np.float64)


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


def bertscore_f1(
    candidate: Sequence[str], reference: Sequence[str], embedder: Embedder
) -> float:
    """Greedy-matching F1 over token embeddings, cosines clamped at 0."""
    if not candidate or not reference:
        raise ValidationError("candidate and reference must be non-empty")
    cand_vectors = np.atleast_2d(np.asarray(embedder.embed(candidate), dtype=np.float64))
    ref_vectors = np.atleast_2d(np.asarray(embedder.embed(reference), dtype=np.float64))
    if cand_vectors.shape[1] != ref_vectors.shape[1]:
        raise ValidationError(
            f"embedding dimension mismatch: {cand_vectors.shape[1]} vs {ref_vectors.shape[1]}"
        )
    similarity = np.clip(_unit_rows(cand_vectors) @ _unit_rows(ref_vectors).T, 0.0, None)
    precision = float(similarity.max(axis=1).mean())
    recall = float(similarity.max(axis=0).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        average = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = average
        i = j + 1
    return ranks


def wilcoxon_signed_rank(
    scores_a: Sequence[float], scores_b: Sequence[float]
) -> float:
    """Two-sided p-value for paired scores.

    Exact for n <= 20 non-zero differences via the full null distribution of
    the positive-rank sum (doubled midranks keep the arithmetic in
    integers); normal approximation with tie correction beyond that.
    """
    if len(scores_a) != len(scores_b):
        raise ValidationError("paired score lists must have equal length")
    if len(scores_a) < 5:
        raise ValidationError("need at least 5 pairs")
    diffs = [a - b for a, b in zip(scores_a, scores_b) if a != b]
    if not diffs:
        raise UndefinedStatisticError("all paired differences are zero")
    magnitudes = [abs(d) for d in diffs]
    ranks = _midranks(magnitudes)
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    n = len(diffs)
    if n <= EXACT_LIMIT:
        return _exact_p(ranks, w_plus)
    return _approx_p(ranks, w_plus, magnitudes)


def _exact_p(ranks: Sequence[float], w_plus: float) -> float:
    doubled = [int(round(2 * r)) for r in ranks]
    target = int(round(2 * w_plus))
    counts: dict[int, int] = {0: 1}
    for rank in doubled:
        updated = dict(counts)
        for value, count in counts.items():
            updated[value + rank] = updated.get(value + rank, 0) + count
        counts = updated
    total = 2 ** len(ranks)
    count_le = sum(c for v, c in counts.items() if v <= target)
    count_ge = sum(c for v, c in counts.items() if v >= target)
    return min(1.0, 2 * min(count_le, count_ge) / total)


def _approx_p(ranks: Sequence[float], w_plus: float, magnitudes: Sequence[float]) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0
    for count in Counter(magnitudes).values():
        if count > 1:
            variance -= (count**3 - count) / 48.0
    if variance <= 0.0:
        raise UndefinedStatisticError("tie correction removed all variance")
    z = (w_plus - mean) / math.sqrt(variance)
    return math.erfc(abs(z) / math.sqrt(2.0))


@dataclass(frozen=True)
class ScoreReport:
    dataset: str
    system: str
    bleu1: float
    bleu2: float
    bertscore_f1: float
    n_items: int
    p_value: float | None = None

    def __post_init__(self):
        for name in ("bleu1", "bleu2", "bertscore_f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0:
                raise ValidationError(f"{name} out of range: {value}")
        if self.n_items < 1:
            raise ValidationError("n_items must be >= 1")
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise ValidationError(f"p_value out of range: {self.p_value}")

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "system": self.system,
            "bleu1": round(self.bleu1, 6),
            "bleu2": round(self.bleu2, 6),
            "bertscore_f1": round(self.bertscore_f1, 6),
            "n_items": self.n_items,
            "p_value": self.p_value,
        }


def _per_item_bertscore(
    generation, references: Sequence[TokenSequence], embedder: Embedder
) -> float:
    candidate = tokenize(generation.implicit_premise)
    if not candidate:
        return 0.0
    return max(bertscore_f1(candidate, reference, embedder) for reference in references)


def evaluate_corpus(
    generations: Sequence,
    enthymemes: Sequence,
    embedder: Embedder,
    compare_generations: Sequence | None = None,
) -> ScoreReport:
    """Score generated premises against multi-reference golds.

    Generations align with enthymemes by id. BLEU pools counts over the
    corpus; BERTScore takes the max F1 over references per item and averages.
    ``compare_generations`` adds a paired Wilcoxon p-value over the two
    systems' per-item BERTScore-F1.
    """
    by_id = {e.id: e for e in enthymemes}
    missing = [g.enthymeme_id for g in generations if g.enthymeme_id not in by_id]
    if missing:
        raise ValidationError(f"generations reference unknown enthymemes: {missing}")
    if not generations:
        raise ValidationError("no generations to evaluate")

    candidates: list[TokenSequence] = []
    reference_sets: list[list[TokenSequence]] = []
    item_scores: list[float] = []
    for generation in generations:
        enthymeme = by_id[generation.enthymeme_id]
        references = [tokenize(gold) for gold in enthymeme.gold_premises]
        candidates.append(tokenize(generation.implicit_premise))
        reference_sets.append(references)
        item_scores.append(_per_item_bertscore(generation, references, embedder))

    p_value = None
    if compare_generations is not None:
        other_scores = []
        for generation in compare_generations:
            if generation.enthymeme_id not in by_id:
                raise ValidationError(
                    f"comparison references unknown enthymeme: {generation.enthymeme_id}"
                )
            enthymeme = by_id[generation.enthymeme_id]
            references = [tokenize(gold) for gold in enthymeme.gold_premises]
            other_scores.append(_per_item_bertscore(generation, references, embedder))
        if len(other_scores) != len(item_scores):
            raise ValidationError("comparison system must cover the same items")
        p_value = wilcoxon_signed_rank(item_scores, other_scores)

    sources = {by_id[g.enthymeme_id].source for g in generations}
    settings = {g.setting for g in generations}
    dataset = sources.pop() if len(sources) == 1 else "mixed"
    setting = settings.pop() if len(settings) == 1 else "mixed"
    return ScoreReport(
        dataset=dataset,
        system=SYSTEM_LABELS.get(setting, setting),
        bleu1=100.0 * corpus_bleu(candidates, reference_sets, max_n=1),
        bleu2=100.0 * corpus_bleu(candidates, reference_sets, max_n=2),
        bertscore_f1=100.0 * (sum(item_scores) / len(item_scores)),
        n_items=len(generations),
        p_value=p_value,
    )


def render_report_table(reports: Sequence[ScoreReport]) -> str:
    """Aligned plain-text table, one row per (dataset, system), 2 decimals."""
    headers = ["Data", "System", "BLEU1", "BLEU2", "BS", "N", "p"]
    rows = []
    for report in reports:
        rows.append(
            [
                report.dataset,
                report.system,
                f"{report.bleu1:.2f}",
                f"{report.bleu2:.2f}",
                f"{report.bertscore_f1:.2f}",
                str(report.n_items),
                "-" if report.p_value is None else f"{report.p_value:.4f}",
            ]
        )
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
