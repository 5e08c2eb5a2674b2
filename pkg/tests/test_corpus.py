from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from premisegen.corpus import (
    AbductivePair,
    Enthymeme,
    is_well_formed_sentence,
    load_art,
    load_d1,
    load_d2,
    load_d3,
)
from premisegen.errors import DataError, ValidationError

from conftest import FIXTURES


class TestWellFormedness:
    @pytest.mark.parametrize(
        "text",
        [
            "Vaccinations save lives",
            "Vaccination should be mandatory for all children",
            "The committee was reviewing the budget.",
            "He is tired",
        ],
    )
    def test_accepts_full_sentences(self, text):
        assert is_well_formed_sentence(text) is True

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "   ",
            "A dog in the stable.",          # no finite-verb evidence
            "Bare noun phrase",              # determiner-guarded suffix only
            "Short one",                     # under 3 tokens
            "NOISE IN ALL CAPS HERE",        # uppercase noise
            "First thing happened. Second thing happened.",  # two sentences
        ],
    )
    def test_rejects_fragments(self, text):
        assert is_well_formed_sentence(text) is False

    def test_rejects_overlong(self):
        assert is_well_formed_sentence("he is here " * 21) is False

    def test_deterministic(self):
        sample = "The mayor is reviewing the proposal"
        assert is_well_formed_sentence(sample) == is_well_formed_sentence(sample)


class TestLoadArt:
    def test_raw_adapter_picks_labeled_hypothesis(self, tmp_path):
        result = load_art(FIXTURES / "art_raw.jsonl", split="train", format="art")
        by_id = {pair.id: pair for pair in result.records}
        assert by_id["s1"].obs1 == "Alex had his heart set on an ivy league college"
        assert by_id["s1"].obs2 == "Alex ended up achieving his dream of getting into the school."
        assert by_id["s1"].hypothesis == "Alex applied to Harvard"
        assert by_id["s2"].hypothesis == "Mia followed her plan each week"
        assert by_id["s3"].hypothesis == "The neighbor watered it every evening"
        # s4 has a blank labeled hypothesis
        assert "s4" not in by_id
        assert result.stats.loaded_count == 3
        assert result.stats.filtered_out_count == 1

    def test_empty_file(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        result = load_art(empty, split="train")
        assert result.records == []
        assert result.stats.loaded_count == 0

    def test_blank_hypothesis_dropped(self):
        result = load_art(FIXTURES / "art_two_line.jsonl", split="train")
        assert len(result.records) == 1
        assert result.stats.filtered_out_count == 1
        assert result.stats.filter_reasons == {"blank_field": 1}

    def test_malformed_line_recoverable(self, tmp_path):
        path = tmp_path / "mixed.jsonl"
        path.write_text(
            json.dumps(
                {"id": "ok", "obs1": "He was walking home", "obs2": "He got there late.",
                 "hypothesis": "He took the long way", "split": "train"}
            )
            + "\nnot json at all\n",
            encoding="utf-8",
        )
        result = load_art(path, split="train")
        assert len(result.records) == 1
        assert result.stats.filter_reasons == {"malformed_line": 1}

    def test_duplicate_ids_dropped(self, tmp_path):
        row = {"id": "dup", "obs1": "She was reading", "obs2": "She fell asleep.",
               "hypothesis": "The book was dull", "split": "train"}
        path = tmp_path / "dup.jsonl"
        path.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n", encoding="utf-8")
        result = load_art(path, split="train")
        assert len(result.records) == 1
        assert result.stats.filter_reasons == {"duplicate_id": 1}

    def test_unreadable_path_fatal(self, tmp_path):
        with pytest.raises(DataError):
            load_art(tmp_path / "nope.jsonl", split="train")

    def test_deterministic_order(self):
        first = load_art(FIXTURES / "art_raw.jsonl", split="train", format="art")
        second = load_art(FIXTURES / "art_raw.jsonl", split="train", format="art")
        assert first.records == second.records


class TestLoadD1:
    def test_correct_warrant_becomes_gold(self):
        result = load_d1(FIXTURES / "arct_raw.tsv", format="arct")
        first = result.records[0]
        assert first.source == "D1"
        assert first.stated_premise == "Vaccinations save lives"
        assert first.stated_claim == "Vaccination should be mandatory for all children"
        assert first.gold_premises == ("vaccines are safe for most children",)
        assert "vaccines are risky" not in " ".join(first.gold_premises)
        assert first.raw_meta["debateTitle"] == "Mandatory vaccination"

    def test_fragment_premise_filtered(self):
        result = load_d1(FIXTURES / "arct_raw.tsv", format="arct")
        assert len(result.records) == 2
        assert result.stats.filter_reasons.get("premise_not_well_formed") == 1
        assert result.stats.prefilter_count == 3


class TestLoadD2:
    def test_multiple_golds_kept(self):
        result = load_d2(FIXTURES / "d2_raw.jsonl", format="debate-json")
        first = result.records[0]
        assert first.source == "D2"
        assert len(first.gold_premises) == 2

    def test_noun_phrase_premise_filtered(self):
        result = load_d2(FIXTURES / "d2_raw.jsonl", format="debate-json")
        assert len(result.records) == 2
        assert result.stats.filter_reasons.get("premise_not_well_formed") == 1


class TestLoadD3:
    def test_support_single_premise_only(self):
        result = load_d3(FIXTURES / "d3_raw.jsonl", format="microtext-json")
        ids = [record.id for record in result.records]
        assert ids == ["d3-1", "d3-4"]
        assert result.stats.filter_reasons["non_support_relation"] == 1
        assert result.stats.filter_reasons["premise_chain"] == 1
        for record in result.records:
            assert record.source == "D3"
            assert len(record.gold_premises) == 1

    def test_scheme_carried_as_metadata(self):
        result = load_d3(FIXTURES / "d3_raw.jsonl", format="microtext-json")
        by_id = {record.id: record for record in result.records}
        assert by_id["d3-1"].scheme == "Practical Evaluation"
        assert by_id["d3-4"].scheme is None


class TestInvariants:
    def test_stats_balance(self):
        for loader, path, kwargs in [
            (load_art, FIXTURES / "art_raw.jsonl", {"split": "train", "format": "art"}),
            (load_d1, FIXTURES / "arct_raw.tsv", {"format": "arct"}),
            (load_d2, FIXTURES / "d2_raw.jsonl", {"format": "debate-json"}),
            (load_d3, FIXTURES / "d3_raw.jsonl", {"format": "microtext-json"}),
        ]:
            result = loader(path, **kwargs)
            stats = result.stats
            assert stats.loaded_count == len(result.records)
            assert sum(stats.filter_reasons.values()) == stats.filtered_out_count

    def test_loader_outputs_satisfy_enthymeme_invariants(self):
        for loader, path, fmt in [
            (load_d1, FIXTURES / "arct_raw.tsv", "arct"),
            (load_d2, FIXTURES / "d2_raw.jsonl", "debate-json"),
            (load_d3, FIXTURES / "d3_raw.jsonl", "microtext-json"),
        ]:
            for record in loader(path, format=fmt).records:
                assert is_well_formed_sentence(record.stated_premise)
                assert is_well_formed_sentence(record.stated_claim)
                assert record.gold_premises
                assert all(g.strip() for g in record.gold_premises)
                if record.scheme is not None:
                    assert record.source == "D3"

    def test_scheme_outside_d3_rejected(self):
        with pytest.raises(ValidationError):
            Enthymeme(
                id="x",
                stated_premise="The mayor is reviewing the plan",
                stated_claim="The plan should be approved",
                gold_premises=("Reviews are approvals in waiting.",),
                source="D1",
                scheme="Practical Evaluation",
            )

    def test_blank_pair_fields_rejected(self):
        with pytest.raises(ValidationError):
            AbductivePair(id="x", obs1=" ", obs2="b", hypothesis="c", split="train")

    @given(st.text(max_size=120))
    def test_well_formedness_total_and_stable(self, text):
        assert is_well_formed_sentence(text) == is_well_formed_sentence(text)


class TestCanonicalRoundTrip:
    def test_enthymeme_canonical_round_trip(self, tmp_path):
        from premisegen.corpus import read_canonical_enthymemes

        result = load_d3(FIXTURES / "d3_raw.jsonl", format="microtext-json")
        path = tmp_path / "canon.jsonl"
        path.write_text(
            "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in result.records),
            encoding="utf-8",
        )
        reloaded = read_canonical_enthymemes(path)
        assert reloaded == result.records

    def test_pair_canonical_round_trip(self, tmp_path, toy_pairs):
        from premisegen.corpus import read_canonical_pairs

        path = tmp_path / "pairs.jsonl"
        path.write_text(
            "".join(json.dumps(p.to_json(), sort_keys=True) + "\n" for p in toy_pairs),
            encoding="utf-8",
        )
        assert read_canonical_pairs(path) == toy_pairs
