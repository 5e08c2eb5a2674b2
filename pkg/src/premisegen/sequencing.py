"""Encoder inputs, decoder targets, and premise extraction.

Surface conventions used throughout the pipeline:

* the encoder delimiter is the literal five characters ``[SEP]`` with one
  space on each side;
* decoder targets are three sentences, the middle one introduced by the
  discourse marker ``And since``;
* the zero-shot prompt is ``<premise>. And since [MASK]. <claim>`` with the
  mask literal appearing exactly once.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import ValidationError

SEP = "[SEP]"
MARKER = "And since"
DEFAULT_MASK = "[MASK]"

PLAIN = "plain"
KNOWLEDGE = "knowledge"
ZERO_SHOT = "zero_shot"

_TERMINALS = ".!?"

# Words that legitimately precede a period mid-sentence. Lowercase, without
# the final dot.
_ABBREVIATIONS = frozenset(
    {
        "dr", "mr", "mrs", "ms", "prof", "rev", "gen", "sen", "rep", "hon",
        "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "cf", "al", "inc",
        "ltd", "co", "corp", "no", "fig", "ca", "approx", "dept", "univ",
        "est", "min", "max", "u.s", "u.k", "d.c",
    }
)


@dataclass(frozen=True)
class EncoderInput:
    text: str
    setting: str  # plain | knowledge | zero_shot


@dataclass(frozen=True)
class DecoderTarget:
    text: str


class ExtractedPremise(NamedTuple):
    text: str
    fallback: bool


def _normalize_space(text: str) -> str:
    return " ".join(text.split())


def _require(text: str, name: str) -> str:
    cleaned = _normalize_space(text)
    if not cleaned:
        raise ValidationError(f"{name} must be non-empty")
    return cleaned


def _ensure_terminal(sentence: str) -> str:
    if sentence and sentence[-1] not in _TERMINALS:
        return sentence + "."
    return sentence


def _word_before(text: str, index: int) -> str:
    """The whitespace-delimited word ending just before text[index]."""
    start = index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    word = text[start:index]
    return word.strip("\"'()[]{}").lower()


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence splitting.

    A boundary is a run of ``.!?`` followed by whitespace and an uppercase
    letter or digit, unless the word before a period is a known
    abbreviation. Joining the output with single spaces reproduces the
    whitespace-normalized input.
    """
    normalized = _normalize_space(text)
    if not normalized:
        return []
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(normalized)
    while i < n:
        if normalized[i] in _TERMINALS:
            end = i
            while end + 1 < n and normalized[end + 1] in _TERMINALS:
                end += 1
            follow = end + 1
            boundary = (
                follow < n
                and normalized[follow] == " "
                and follow + 1 < n
                and (normalized[follow + 1].isupper() or normalized[follow + 1].isdigit())
            )
            if boundary and normalized[i] == "." and end == i:
                if _word_before(normalized, i) in _ABBREVIATIONS:
                    boundary = False
            if boundary:
                sentences.append(normalized[start : end + 1])
                start = follow + 1
                i = follow + 1
                continue
            i = end + 1
        else:
            i += 1
    if start < n:
        sentences.append(normalized[start:])
    return sentences


def build_encoder_input(
    first: str, second: str, knowledge_phrase: str | None = None
) -> EncoderInput:
    """Join two sentences (optionally with a knowledge phrase) on ``[SEP]``."""
    first = _require(first, "first")
    second = _require(second, "second")
    parts = [first, second]
    setting = PLAIN
    if knowledge_phrase is not None:
        phrase = _require(knowledge_phrase, "knowledge_phrase")
        parts = [first, phrase, second]
        setting = KNOWLEDGE
    for part in parts:
        if SEP in part:
            raise ValidationError(f"segment must not contain the {SEP} delimiter: {part!r}")
    return EncoderInput(text=f" {SEP} ".join(parts), setting=setting)


def build_decoder_target(first: str, hypothesis: str, second: str) -> DecoderTarget:
    """Three-sentence target: first, ``And since <hypothesis>.``, second.

    The hypothesis keeps its original casing; its terminal punctuation is
    normalized to a single period so the marker sentence splits cleanly.
    """
    first = _ensure_terminal(_require(first, "first"))
    hypothesis = _require(hypothesis, "hypothesis")
    second = _require(second, "second")
    if hypothesis.lower().startswith(MARKER.lower() + " "):
        raise ValidationError("hypothesis already starts with the discourse marker")
    for name, sentence in (("first", first), ("hypothesis", hypothesis), ("second", second)):
        if len(split_sentences(sentence)) != 1:
            raise ValidationError(f"{name} must be a single sentence: {sentence!r}")
    body = hypothesis.rstrip(_TERMINALS).rstrip()
    if not body:
        raise ValidationError("hypothesis has no content besides punctuation")
    text = f"{first} {MARKER} {body}. {second}"
    return DecoderTarget(text=text)


def build_zero_shot_prompt(
    premise: str, claim: str, mask_literal: str = DEFAULT_MASK
) -> EncoderInput:
    """``<premise>. And since <mask>. <claim>`` with the mask exactly once."""
    premise = _ensure_terminal(_require(premise, "premise"))
    claim = _require(claim, "claim")
    if not mask_literal:
        raise ValidationError("mask_literal must be non-empty")
    if mask_literal in premise or mask_literal in claim:
        raise ValidationError(f"inputs must not contain the mask literal {mask_literal!r}")
    text = f"{premise} {MARKER} {mask_literal}. {claim}"
    return EncoderInput(text=text, setting=ZERO_SHOT)


_WORD_RE = re.compile(r"[a-z0-9']+")


def _content_tokens(sentence: str) -> frozenset[str]:
    return frozenset(_WORD_RE.findall(sentence.lower()))


def _overlap(a: frozenset[str], b: frozenset[str]) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


def _finalize(premise: str) -> str:
    premise = premise.strip()
    if premise and premise[0].islower():
        premise = premise[0].upper() + premise[1:]
    return _ensure_terminal(premise)


def extract_implicit_premise(
    generated_argument: str, context: Sequence[str] | None = None
) -> ExtractedPremise:
    """Pull the implicit premise back out of a generated argument.

    The first sentence carrying the ``And since`` marker is stripped of the
    marker, recapitalized, and terminated with a period. When no sentence
    carries the marker, the fallback picks the middle sentence of a
    three-sentence argument; for other lengths it picks the sentence with the
    least token overlap against the (optional) input pair, i.e. the most
    novel one.
    """
    if not _normalize_space(generated_argument):
        raise ValidationError("generated argument is empty")
    sentences = split_sentences(generated_argument)
    for sentence in sentences:
        if sentence.startswith(MARKER + " "):
            body = sentence[len(MARKER) :].lstrip()
            body = body.rstrip(_TERMINALS).rstrip()
            if body:
                return ExtractedPremise(_finalize(body), fallback=False)
    if len(sentences) == 3:
        chosen = sentences[1]
    elif context and len(sentences) > 1:
        context_tokens = [_content_tokens(s) for s in context]
        scored = []
        for position, sentence in enumerate(sentences):
            tokens = _content_tokens(sentence)
            familiarity = max((_overlap(tokens, c) for c in context_tokens), default=0.0)
            scored.append((familiarity, position, sentence))
        chosen = min(scored)[2]
    else:
        chosen = sentences[len(sentences) // 2]
    stripped = chosen.rstrip(_TERMINALS).rstrip()
    if not stripped:
        raise ValidationError("argument contains no extractable sentence")
    return ExtractedPremise(_finalize(stripped), fallback=True)
