"""Optional transformers adapters (install the ``model`` extra to use).

These back the integration tier: real mask infilling for the zero-shot
setting and real seq2seq fine-tuning. The primary test suite never imports
this module.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .errors import BackendLifecycleError
from .generator import GenerationBackend, GenerationConfig, TrainingConfig, TrainingExample
from .sequencing import EncoderInput, ZERO_SHOT

DEFAULT_MODEL = "facebook/bart-large"


def _require_transformers():
    try:
        import torch
        import transformers
    except ImportError as exc:  # pragma: no cover - environment dependent
        raise BackendLifecycleError(
            "transformers/torch are not installed; install premisegen[model]"
        ) from exc
    return torch, transformers


class BartBackend(GenerationBackend):
    """Seq2seq backend over a pre-trained or fine-tuned BART checkpoint.

    Zero-shot inputs are treated as span infilling: the mask literal is
    swapped for the model's mask token and the full argument is decoded.
    Plain and knowledge inputs decode the argument directly. Beam search
    only, per the generation contract.
    """

    backend_id = "bart"
    max_input_tokens = 1024

    def __init__(self, model_name_or_path: str = DEFAULT_MODEL):
        super().__init__()
        torch, transformers = _require_transformers()
        self._torch = torch
        self.tokenizer = transformers.AutoTokenizer.from_pretrained(model_name_or_path)
        self.model = transformers.AutoModelForSeq2SeqLM.from_pretrained(model_name_or_path)
        self.model.eval()

    def generate(self, encoder_input: EncoderInput, config: GenerationConfig) -> str:
        self._check_ready(encoder_input)
        text = encoder_input.text
        if encoder_input.setting == ZERO_SHOT:
            text = text.replace(config.mask_literal, self.tokenizer.mask_token, 1)
        if config.seed is not None:
            self._torch.manual_seed(config.seed)
        inputs = self.tokenizer(text, return_tensors="pt", truncation=True)
        with self._torch.no_grad():
            output_ids = self.model.generate(
                **inputs,
                num_beams=config.beam_width,
                max_new_tokens=config.max_output_tokens,
                do_sample=False,
            )
        return self.tokenizer.decode(output_ids[0], skip_special_tokens=True).strip()

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        self.model.save_pretrained(directory / "weights")
        self.tokenizer.save_pretrained(directory / "weights")

    @classmethod
    def load(cls, directory: Path | str) -> "BartBackend":
        weights = Path(directory) / "weights"
        if not weights.exists():
            raise BackendLifecycleError(f"no weights directory at {weights}")
        return cls(str(weights))


def bart_trainer(model_name: str = DEFAULT_MODEL):
    """Build a fine_tune-compatible trainer closure over a base model."""

    def train(
        examples: Sequence[TrainingExample], config: TrainingConfig
    ) -> tuple[GenerationBackend, list[float]]:
        torch, _ = _require_transformers()
        backend = BartBackend(model_name)
        tokenizer, model = backend.tokenizer, backend.model
        model.train()
        torch.manual_seed(config.seed)
        optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
        losses: list[float] = []
        for _ in range(config.epochs):
            epoch_loss = 0.0
            batches = 0
            for start in range(0, len(examples), config.batch_size):
                batch = examples[start : start + config.batch_size]
                encodings = tokenizer(
                    [e.encoder_text for e in batch],
                    text_target=[e.target_text for e in batch],
                    return_tensors="pt",
                    padding=True,
                    truncation=True,
                )
                outputs = model(**encodings)
                outputs.loss.backward()
                optimizer.step()
                optimizer.zero_grad()
                epoch_loss += float(outputs.loss)
                batches += 1
            losses.append(epoch_loss / max(batches, 1))
        model.eval()
        checkpoint_dir = Path(config.checkpoint_dir)
        backend.save(checkpoint_dir)
        return backend, losses

    return train


class ContextualEmbedder:
    """Per-token contextual embeddings for BERTScore integration runs."""

    def __init__(self, model_name: str = "bert-base-uncased"):
        torch, transformers = _require_transformers()
        self._torch = torch
        self.tokenizer = transformers.AutoTokenizer.from_pretrained(model_name)
        self.model = transformers.AutoModel.from_pretrained(model_name)
        self.model.eval()

    def embed(self, tokens: Sequence[str]):
        import numpy as np

        encoding = self.tokenizer(
            list(tokens),
            is_split_into_words=True,
            return_tensors="pt",
            truncation=True,
        )
        with self._torch.no_grad():
            hidden = self.model(**encoding).last_hidden_state[0]
        word_ids = encoding.word_ids(0)
        buckets: dict[int, list] = {}
        for position, word_id in enumerate(word_ids):
            if word_id is not None:
                buckets.setdefault(word_id, []).append(hidden[position])
        rows = []
        for index in range(len(tokens)):
            pieces = buckets.get(index)
            if pieces:
                rows.append(self._torch.stack(pieces).mean(dim=0).numpy())
            else:
                rows.append(np.zeros(hidden.shape[-1]))
        return np.asarray(rows)


def load_manifest(checkpoint_dir: Path | str) -> dict:
    path = Path(checkpoint_dir) / "manifest.json"
    return json.loads(path.read_text(encoding="utf-8"))
