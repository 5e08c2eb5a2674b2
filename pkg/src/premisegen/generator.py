"""Generation backends, the fine-tuning harness, and the corpus pipeline.

Three backend families implement the generation contract:

* StubBackend -- deterministic echo used by the offline test tier: it
  reconstructs the argument around a fixed stub phrase, so the extracted
  premise is always "Stub.";
* RetrievalBackend -- the built-in trainable backend: memorizes the
  (encoder input -> decoder target) training pairs and answers unseen
  inputs with the target of the nearest training input by token overlap;
  deterministic, checkpointable, model-free;
* the optional transformers adapters in ``premisegen.hf`` (extra ``model``)
  for real zero-shot infilling and fine-tuning.

Decoding is beam search only (no sampling); a backend must return identical
text for identical input and seed.
"""

from __future__ import annotations

import hashlib
import json
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import (
    BackendLifecycleError,
    CoverageError,
    DataError,
    TruncationError,
    UsageError,
    ValidationError,
)
from .corpus import AbductivePair, Enthymeme
from .knowledge import KnowledgeBackend, infer, select_intent
from .sequencing import (
    DEFAULT_MASK,
    SEP,
    EncoderInput,
    ZERO_SHOT,
    build_decoder_target,
    build_encoder_input,
    build_zero_shot_prompt,
    extract_implicit_premise,
)

SETTINGS = ("zero_shot", "fine_tuned", "fine_tuned_knowledge")


@dataclass(frozen=True)
class GenerationConfig:
    setting: str
    beam_width: int = 5
    max_output_tokens: int = 128
    mask_literal: str = DEFAULT_MASK
    seed: int | None = 13

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValidationError(f"unknown setting {self.setting!r}")
        if self.beam_width < 1:
            raise ValidationError("beam_width must be >= 1")
        if self.max_output_tokens < 1:
            raise ValidationError("max_output_tokens must be >= 1")


@dataclass(frozen=True)
class GeneratedPremise:
    enthymeme_id: str
    setting: str
    full_argument: str
    implicit_premise: str
    extraction_fallback: bool
    error: str | None = None

    def __post_init__(self):
        if self.error is None:
            if not self.implicit_premise.strip():
                raise ValidationError("implicit_premise must be non-empty")
            if self.implicit_premise.startswith("And since"):
                raise ValidationError("implicit_premise still carries the discourse marker")

    def to_json(self) -> dict:
        obj = {
            "enthymeme_id": self.enthymeme_id,
            "setting": self.setting,
            "full_argument": self.full_argument,
            "implicit_premise": self.implicit_premise,
            "extraction_fallback": self.extraction_fallback,
        }
        if self.error is not None:
            obj["error"] = self.error
        return obj

    @staticmethod
    def from_json(obj: dict) -> "GeneratedPremise":
        return GeneratedPremise(
            enthymeme_id=str(obj["enthymeme_id"]),
            setting=obj["setting"],
            full_argument=obj["full_argument"],
            implicit_premise=obj["implicit_premise"],
            extraction_fallback=bool(obj.get("extraction_fallback", False)),
            error=obj.get("error"),
        )


@dataclass(frozen=True)
class TrainingConfig:
    checkpoint_dir: Path
    epochs: int = 3
    learning_rate: float = 3e-5
    batch_size: int = 8
    seed: int = 13

    def __post_init__(self):
        if self.epochs <= 0 or self.learning_rate <= 0 or self.batch_size <= 0:
            raise ValidationError("epochs, learning_rate and batch_size must be positive")

    def to_json(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


class GenerationBackend(ABC):
    backend_id: str = "abstract"
    max_input_tokens: int | None = None

    def __init__(self):
        self._closed = False

    def close(self) -> None:
        self._closed = True

    def _check_ready(self, encoder_input: EncoderInput) -> None:
        if self._closed:
            raise BackendLifecycleError(f"backend {self.backend_id} is closed")
        if self.max_input_tokens is not None:
            length = len(encoder_input.text.split())
            if length > self.max_input_tokens:
                raise TruncationError(length, self.max_input_tokens)

    @abstractmethod
    def generate(self, encoder_input: EncoderInput, config: GenerationConfig) -> str:
        """Decode the full argument for one encoder input."""


class StubBackend(GenerationBackend):
    """Echo backend: wraps a fixed phrase in the three-sentence argument shape."""

    backend_id = "stub"

    def __init__(self, phrase: str = "stub", max_input_tokens: int | None = None):
        super().__init__()
        self.phrase = phrase
        self.max_input_tokens = max_input_tokens

    def generate(self, encoder_input: EncoderInput, config: GenerationConfig) -> str:
        self._check_ready(encoder_input)
        if encoder_input.setting == ZERO_SHOT:
            return encoder_input.text.replace(config.mask_literal, self.phrase, 1)
        segments = encoder_input.text.split(f" {SEP} ")
        first, second = segments[0], segments[-1]
        if first and first[-1] not in ".!?":
            first += "."
        return f"{first} And since {self.phrase}. {second}"


class RetrievalBackend(GenerationBackend):
    """Nearest-neighbor sequence memorizer over fine-tuning pairs."""

    backend_id = "retrieval"

    def __init__(self, examples: Sequence[tuple[str, str]] | None = None):
        super().__init__()
        self._examples: list[tuple[str, str]] = list(examples or [])
        self._exact = {source: target for source, target in self._examples}
        self._token_sets = [frozenset(s.lower().split()) for s, _ in self._examples]

    def fit(self, examples: Sequence[tuple[str, str]]) -> None:
        self._examples = list(examples)
        self._exact = {source: target for source, target in self._examples}
        self._token_sets = [frozenset(s.lower().split()) for s, _ in self._examples]

    def generate(self, encoder_input: EncoderInput, config: GenerationConfig) -> str:
        self._check_ready(encoder_input)
        if not self._examples:
            raise BackendLifecycleError("retrieval backend has no training examples")
        exact = self._exact.get(encoder_input.text)
        if exact is not None:
            return exact
        query = frozenset(encoder_input.text.lower().split())
        best_index = 0
        best_score = -1.0
        for index, tokens in enumerate(self._token_sets):
            union = len(query | tokens)
            score = len(query & tokens) / union if union else 0.0
            if score > best_score:
                best_score = score
                best_index = index
        return self._examples[best_index][1]

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        payload = {"backend_id": self.backend_id, "examples": self._examples}
        (directory / "model.json").write_text(
            json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8"
        )

    @classmethod
    def load(cls, directory: Path | str) -> "RetrievalBackend":
        path = Path(directory) / "model.json"
        if not path.exists():
            raise BackendLifecycleError(f"no checkpoint at {path}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        return cls(examples=[tuple(pair) for pair in payload["examples"]])


@dataclass(frozen=True)
class TrainingExample:
    pair_id: str
    encoder_text: str
    target_text: str


def build_training_examples(
    pairs: Sequence[AbductivePair], knowledge: Mapping[str, str] | None = None
) -> list[TrainingExample]:
    """Construct (encoder input, decoder target) strings for fine-tuning.

    When a knowledge map is given it must cover every pair id; the phrase is
    spliced between the observations on the encoder side only.
    """
    if knowledge is not None:
        missing = [pair.id for pair in pairs if pair.id not in knowledge]
        if missing:
            raise CoverageError(f"knowledge map missing ids: {', '.join(missing)}")
    examples = []
    for pair in pairs:
        phrase = knowledge[pair.id] if knowledge is not None else None
        encoder = build_encoder_input(pair.obs1, pair.obs2, phrase)
        target = build_decoder_target(pair.obs1, pair.hypothesis, pair.obs2)
        examples.append(
            TrainingExample(pair_id=pair.id, encoder_text=encoder.text, target_text=target.text)
        )
    return examples


def corpus_digest(examples: Sequence[TrainingExample]) -> str:
    digest = hashlib.sha256()
    for example in examples:
        digest.update(example.encoder_text.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(example.target_text.encode("utf-8"))
        digest.update(b"\x01")
    return digest.hexdigest()


Trainer = Callable[[Sequence[TrainingExample], "TrainingConfig"], tuple[GenerationBackend, list[float]]]


def retrieval_trainer(
    examples: Sequence[TrainingExample], config: TrainingConfig
) -> tuple[GenerationBackend, list[float]]:
    backend = RetrievalBackend([(e.encoder_text, e.target_text) for e in examples])
    # Memorization converges in one pass; reconstruction error is the loss.
    return backend, [0.0] * config.epochs


def fine_tune(
    pairs: Sequence[AbductivePair],
    knowledge: Mapping[str, str] | None,
    config: TrainingConfig,
    trainer: Trainer = retrieval_trainer,
) -> GenerationBackend:
    """Train a backend on abductive pairs and emit checkpoint + manifest."""
    if not pairs:
        raise DataError("training corpus is empty")
    checkpoint_dir = Path(config.checkpoint_dir)
    try:
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
        probe = checkpoint_dir / ".write_probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise DataError(f"checkpoint_dir not writable: {exc}") from exc
    examples = build_training_examples(pairs, knowledge)
    backend, loss = trainer(examples, config)
    if isinstance(backend, RetrievalBackend):
        backend.save(checkpoint_dir)
    manifest = {
        "backend_id": backend.backend_id,
        "config": config.to_json(),
        "corpus_sha256": corpus_digest(examples),
        "corpus_size": len(examples),
        "with_knowledge": knowledge is not None,
        "loss": loss,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (checkpoint_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    return backend


def load_checkpoint(directory: Path | str) -> GenerationBackend:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise BackendLifecycleError(f"no manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    backend_id = manifest.get("backend_id", "retrieval")
    if backend_id == "retrieval":
        return RetrievalBackend.load(directory)
    if backend_id == "bart":
        from . import hf

        return hf.BartBackend.load(directory)
    raise BackendLifecycleError(f"unknown checkpoint backend {backend_id!r}")


def _build_input(
    enthymeme: Enthymeme,
    config: GenerationConfig,
    knowledge_backend: KnowledgeBackend | None,
    knowledge_phrases: Mapping[str, str] | None,
) -> EncoderInput:
    premise, claim = enthymeme.stated_premise, enthymeme.stated_claim
    if config.setting == "zero_shot":
        return build_zero_shot_prompt(premise, claim, mask_literal=config.mask_literal)
    if config.setting == "fine_tuned":
        return build_encoder_input(premise, claim)
    if knowledge_phrases is not None:
        phrase = knowledge_phrases.get(enthymeme.id)
        if phrase is None:
            raise CoverageError(f"no knowledge phrase for enthymeme {enthymeme.id}")
    else:
        phrase = select_intent(infer([premise, claim], knowledge_backend))
    return build_encoder_input(premise, claim, phrase)


def generate_for_corpus(
    enthymemes: Sequence[Enthymeme],
    backend: GenerationBackend,
    config: GenerationConfig,
    knowledge_backend: KnowledgeBackend | None = None,
    knowledge_phrases: Mapping[str, str] | None = None,
) -> list[GeneratedPremise]:
    """Generate one premise per enthymeme, in order.

    Per-item failures become error-sentinel records instead of aborting the
    batch. A knowledge source (backend or precomputed phrase map) is
    required exactly when the setting is fine_tuned_knowledge.
    """
    needs_knowledge = config.setting == "fine_tuned_knowledge"
    has_knowledge = knowledge_backend is not None or knowledge_phrases is not None
    if needs_knowledge and not has_knowledge:
        raise UsageError("setting fine_tuned_knowledge requires a knowledge source")
    if not needs_knowledge and has_knowledge:
        raise UsageError(f"setting {config.setting} does not take a knowledge source")

    results: list[GeneratedPremise] = []
    for enthymeme in enthymemes:
        try:
            encoder_input = _build_input(enthymeme, config, knowledge_backend, knowledge_phrases)
            argument = backend.generate(encoder_input, config)
            extracted = extract_implicit_premise(
                argument, context=(enthymeme.stated_premise, enthymeme.stated_claim)
            )
            results.append(
                GeneratedPremise(
                    enthymeme_id=enthymeme.id,
                    setting=config.setting,
                    full_argument=argument,
                    implicit_premise=extracted.text,
                    extraction_fallback=extracted.fallback,
                )
            )
        except Exception as exc:  # noqa: BLE001 - batch isolation is the contract
            results.append(
                GeneratedPremise(
                    enthymeme_id=enthymeme.id,
                    setting=config.setting,
                    full_argument="",
                    implicit_premise="",
                    extraction_fallback=False,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return results
