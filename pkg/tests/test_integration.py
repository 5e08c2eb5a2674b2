"""Opt-in integration tier; not part of the acceptance gate.

Needs the raw upstream releases (ENTHYMEME_RAW_ART_TRAIN, ENTHYMEME_RAW_D1).
Checks the directional claim only: fine-tuning on abductive pairs beats the
zero-shot baseline on BLEU-1, with no absolute score targets.
"""

from __future__ import annotations

import os
import random

import pytest

from premisegen.corpus import load_art, load_d1
from premisegen.generator import (
    GenerationConfig,
    StubBackend,
    TrainingConfig,
    fine_tune,
    generate_for_corpus,
)
from premisegen.metrics import StaticHashEmbedder, evaluate_corpus

pytestmark = pytest.mark.integration

ART_TRAIN = os.environ.get("ENTHYMEME_RAW_ART_TRAIN")
D1 = os.environ.get("ENTHYMEME_RAW_D1")


@pytest.mark.skipif(
    not (ART_TRAIN and D1),
    reason="set ENTHYMEME_RAW_ART_TRAIN and ENTHYMEME_RAW_D1 to run the integration tier",
)
def test_fine_tuned_beats_zero_shot_on_bleu1(tmp_path):
    pairs = load_art(ART_TRAIN, split="train", format="art").records
    rng = random.Random(13)
    subsample = rng.sample(pairs, max(1, len(pairs) // 100))
    enthymemes = load_d1(D1, format="arct").records

    if os.environ.get("ENTHYMEME_INTEGRATION_BART"):
        from premisegen import hf

        trainer = hf.bart_trainer()
        zero_shot_backend = hf.BartBackend()
    else:
        trainer = None  # default retrieval trainer
        zero_shot_backend = StubBackend()

    config = TrainingConfig(checkpoint_dir=tmp_path / "ck", epochs=1)
    if trainer is None:
        tuned = fine_tune(subsample, None, config)
    else:
        tuned = fine_tune(subsample, None, config, trainer=trainer)

    embedder = StaticHashEmbedder()
    zero_shot = generate_for_corpus(
        enthymemes, zero_shot_backend, GenerationConfig(setting="zero_shot")
    )
    tuned_out = generate_for_corpus(enthymemes, tuned, GenerationConfig(setting="fine_tuned"))
    zero_report = evaluate_corpus(zero_shot, enthymemes, embedder)
    tuned_report = evaluate_corpus(tuned_out, enthymemes, embedder)
    assert tuned_report.bleu1 > zero_report.bleu1
