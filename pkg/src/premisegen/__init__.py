"""Implicit-premise generation for enthymemes.

Pipeline stages: corpus ingestion (abductive training pairs and three
enthymeme test sets), discourse-aware commonsense augmentation, sequence
construction for three generation settings, pluggable generation backends
with a fine-tuning harness, automatic evaluation (BLEU-1/2, BERTScore-F1,
Wilcoxon signed-rank), and a plausibility-annotation service with
majority-vote and Krippendorff-alpha aggregation.
"""

from .corpus import AbductivePair, CorpusStats, Enthymeme, is_well_formed_sentence
from .generator import (
    GeneratedPremise,
    GenerationConfig,
    StubBackend,
    TrainingConfig,
    fine_tune,
    generate_for_corpus,
)
from .knowledge import CommonsenseBundle, infer, select_intent
from .metrics import ScoreReport, bertscore_f1, bleu, evaluate_corpus, tokenize, wilcoxon_signed_rank
from .sequencing import (
    build_decoder_target,
    build_encoder_input,
    build_zero_shot_prompt,
    extract_implicit_premise,
    split_sentences,
)
from .annotation import AnnotationItem, JudgmentRecord, krippendorff_alpha, majority_vote

__version__ = "0.1.0"

__all__ = [
    "AbductivePair",
    "AnnotationItem",
    "CommonsenseBundle",
    "CorpusStats",
    "Enthymeme",
    "GeneratedPremise",
    "GenerationConfig",
    "JudgmentRecord",
    "ScoreReport",
    "StubBackend",
    "TrainingConfig",
    "bertscore_f1",
    "bleu",
    "build_decoder_target",
    "build_encoder_input",
    "build_zero_shot_prompt",
    "evaluate_corpus",
    "extract_implicit_premise",
    "fine_tune",
    "generate_for_corpus",
    "infer",
    "is_well_formed_sentence",
    "krippendorff_alpha",
    "majority_vote",
    "select_intent",
    "split_sentences",
    "tokenize",
    "wilcoxon_signed_rank",
]
