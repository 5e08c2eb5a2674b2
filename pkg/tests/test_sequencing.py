from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from premisegen.errors import ValidationError
from premisegen.sequencing import (
    build_decoder_target,
    build_encoder_input,
    build_zero_shot_prompt,
    extract_implicit_premise,
    split_sentences,
)

from conftest import make_sentence

AMY_FIRST = "Amy was looking through her mother's old scrapbooks."
AMY_SECOND = "Amy realized her mother had dated her history professor."
AMY_HYPOTHESIS = "Amy found pictures of her history professor and mother together"


class TestSplitSentences:
    def test_simple(self):
        assert split_sentences("A. B. C.") == ["A.", "B.", "C."]

    def test_abbreviation_guard(self):
        assert split_sentences("Dr. Smith left. He was tired.") == [
            "Dr. Smith left.",
            "He was tired.",
        ]

    def test_empty(self):
        assert split_sentences("") == []
        assert split_sentences("   \n  ") == []

    def test_no_terminal(self):
        assert split_sentences("no closing punctuation here") == [
            "no closing punctuation here"
        ]

    def test_question_and_exclamation(self):
        assert split_sentences("Is it true? It is! Good.") == [
            "Is it true?",
            "It is!",
            "Good.",
        ]

    def test_lowercase_continuation_not_split(self):
        assert split_sentences("It cost 3. 5 times less.") == [
            "It cost 3.",
            "5 times less.",
        ]
        assert split_sentences("He arrived at 3. pm is late.") == [
            "He arrived at 3. pm is late."
        ]

    def test_ellipsis_run(self):
        assert split_sentences("Wait... Now go.") == ["Wait...", "Now go."]

    def test_join_reproduces_normalized_input(self):
        text = "One  sentence here.   Another\tone follows. And a third."
        assert " ".join(split_sentences(text)) == " ".join(text.split())

    @given(st.integers(min_value=0, max_value=10_000))
    def test_idempotent_on_generated_sentences(self, seed):
        rng = random.Random(seed)
        sentence = make_sentence(rng)
        assert split_sentences(sentence) == [sentence]


class TestBuildEncoderInput:
    def test_plain(self):
        built = build_encoder_input(AMY_FIRST, AMY_SECOND)
        assert built.text == f"{AMY_FIRST} [SEP] {AMY_SECOND}"
        assert built.setting == "plain"
        assert built.text.count("[SEP]") == 1

    def test_with_knowledge(self):
        built = build_encoder_input(AMY_FIRST, AMY_SECOND, "to find something")
        assert built.text == f"{AMY_FIRST} [SEP] to find something [SEP] {AMY_SECOND}"
        assert built.setting == "knowledge"
        assert built.text.count("[SEP]") == 2

    def test_minimal(self):
        assert build_encoder_input("A.", "B.").text == "A. [SEP] B."

    def test_trims_whitespace(self):
        assert build_encoder_input("  A.  ", " B. ").text == "A. [SEP] B."

    @pytest.mark.parametrize("bad", ["", "   "])
    def test_empty_inputs_rejected(self, bad):
        with pytest.raises(ValidationError):
            build_encoder_input(bad, "B.")
        with pytest.raises(ValidationError):
            build_encoder_input("A.", bad)

    def test_phrase_with_delimiter_rejected(self):
        with pytest.raises(ValidationError):
            build_encoder_input("A.", "B.", "x [SEP] y")

    def test_segment_with_delimiter_rejected(self):
        with pytest.raises(ValidationError):
            build_encoder_input("A [SEP] sneaky.", "B.")


class TestBuildDecoderTarget:
    def test_reference_instance(self):
        built = build_decoder_target(AMY_FIRST, AMY_HYPOTHESIS, AMY_SECOND)
        assert built.text == (
            f"{AMY_FIRST} And since {AMY_HYPOTHESIS}. {AMY_SECOND}"
        )

    def test_minimal(self):
        assert build_decoder_target("A.", "b holds", "C.").text == "A. And since b holds. C."

    def test_three_sentences_with_marker_in_middle(self):
        built = build_decoder_target("A.", "b holds", "C.")
        sentences = split_sentences(built.text)
        assert len(sentences) == 3
        assert sentences[1].startswith("And since ")

    def test_first_without_terminal_gets_period(self):
        built = build_decoder_target("Alex had his heart set on a trip", "he saved up", "He left.")
        assert built.text.startswith("Alex had his heart set on a trip. And since")

    def test_hypothesis_terminal_punctuation_normalized(self):
        assert (
            build_decoder_target("A.", "b holds.", "C.").text
            == "A. And since b holds. C."
        )

    def test_double_marker_rejected(self):
        with pytest.raises(ValidationError):
            build_decoder_target("A.", "And since b holds", "C.")

    def test_multi_sentence_hypothesis_rejected(self):
        with pytest.raises(ValidationError):
            build_decoder_target("A.", "First part. Second part.", "C.")


class TestZeroShotPrompt:
    def test_reference_pair(self):
        built = build_zero_shot_prompt(
            "Vaccinations save lives", "Vaccination should be mandatory for all children"
        )
        assert built.text == (
            "Vaccinations save lives. And since [MASK]. "
            "Vaccination should be mandatory for all children"
        )
        assert built.setting == "zero_shot"

    def test_minimal(self):
        assert build_zero_shot_prompt("A", "B").text == "A. And since [MASK]. B"

    def test_mask_appears_exactly_once(self):
        built = build_zero_shot_prompt("Premise holds", "Claim follows")
        assert built.text.count("[MASK]") == 1

    def test_custom_mask_literal(self):
        built = build_zero_shot_prompt("A", "B", mask_literal="<mask>")
        assert built.text == "A. And since <mask>. B"

    def test_input_containing_mask_rejected(self):
        with pytest.raises(ValidationError):
            build_zero_shot_prompt("A [MASK] here", "B")


class TestExtractImplicitPremise:
    def test_reference_instance(self):
        argument = f"{AMY_FIRST} And since {AMY_HYPOTHESIS}. {AMY_SECOND}"
        extracted = extract_implicit_premise(argument)
        assert extracted.text == f"{AMY_HYPOTHESIS}."
        assert extracted.fallback is False

    def test_marker_stripping_and_recapitalization(self):
        extracted = extract_implicit_premise("X. And since y holds. Z.")
        assert extracted == ("Y holds.", False)

    def test_fallback_middle_of_three(self):
        extracted = extract_implicit_premise("X. Y. Z.")
        assert extracted == ("Y.", True)

    def test_fallback_most_novel_with_context(self):
        argument = (
            "The council was reviewing the budget. The council was reviewing the budget. "
            "Extra funding was hiding in an annex. The mayor has endorsed the budget."
        )
        extracted = extract_implicit_premise(
            argument,
            context=("The council was reviewing the budget", "The mayor has endorsed the budget"),
        )
        assert extracted.fallback is True
        assert extracted.text == "Extra funding was hiding in an annex."

    def test_marker_prefix_requires_word_boundary(self):
        extracted = extract_implicit_premise("A. And sincere people lie. B.")
        assert extracted == ("And sincere people lie.", True)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            extract_implicit_premise("   ")

    def test_single_sentence_fallback(self):
        extracted = extract_implicit_premise("only one sentence")
        assert extracted == ("Only one sentence.", True)


class TestRoundTrip:
    def test_round_trip_200_random_cases(self):
        rng = random.Random(4242)
        for _ in range(200):
            first = make_sentence(rng)
            second = make_sentence(rng)
            hypothesis = make_sentence(rng, terminal="")
            target = build_decoder_target(first, hypothesis, second)
            extracted = extract_implicit_premise(target.text)
            assert extracted.fallback is False
            recovered = extracted.text.rstrip(".")
            assert recovered.lower() == hypothesis.lower()

    @given(st.integers(min_value=0, max_value=10**6))
    def test_round_trip_property(self, seed):
        rng = random.Random(seed)
        hypothesis = make_sentence(rng, terminal="")
        target = build_decoder_target(make_sentence(rng), hypothesis, make_sentence(rng))
        extracted = extract_implicit_premise(target.text)
        assert extracted.text.rstrip(".").lower() == hypothesis.lower()
        assert extracted.fallback is False
