from __future__ import annotations

import itertools
import json
import random

import pytest

from premisegen.annotation import (
    AnnotationItem,
    AnnotationStore,
    JudgmentRecord,
    create_batch,
    krippendorff_alpha,
    majority_vote,
    render_aggregate_table,
)
from premisegen.corpus import Enthymeme
from premisegen.errors import (
    ConflictError,
    UndefinedAgreementError,
    UnknownItemError,
    ValidationError,
)
from premisegen.generator import GeneratedPremise

from conftest import make_sentence


def _enthymemes(n, source="D1", prefix="e"):
    rng = random.Random(hash((n, source)) % 10_000)
    return [
        Enthymeme(
            id=f"{prefix}{i:02d}",
            stated_premise=make_sentence(rng, terminal=""),
            stated_claim=make_sentence(rng, terminal=""),
            gold_premises=(make_sentence(rng),),
            source=source,
        )
        for i in range(n)
    ]


def _generations(enthymemes, setting="fine_tuned"):
    return [
        GeneratedPremise(
            enthymeme_id=e.id,
            setting=setting,
            full_argument=f"{e.stated_premise}. And since something held. {e.stated_claim}.",
            implicit_premise=f"Something held for {e.id}.",
            extraction_fallback=False,
        )
        for e in enthymemes
    ]


def _items(n, required_judges=3):
    return [
        AnnotationItem(
            item_id=f"item-{i:02d}",
            stated_premise="The committee was reviewing the budget",
            stated_claim="The budget should be approved",
            candidate_premise=f"Candidate premise {i}.",
            system="art",
            dataset="D1",
            required_judges=required_judges,
        )
        for i in range(n)
    ]


class TestMajorityVote:
    @pytest.mark.parametrize(
        "votes,expected",
        [(list(v), sum(v) * 2 > 3) for v in itertools.product([True, False], repeat=3)],
    )
    def test_all_triples(self, votes, expected):
        assert majority_vote(votes) is expected

    def test_two_of_three_is_plausible(self):
        assert majority_vote([True, True, False]) is True

    def test_single_judge(self):
        assert majority_vote([True]) is True
        assert majority_vote([False]) is False

    def test_even_count_rejected(self):
        with pytest.raises(ValidationError):
            majority_vote([True, False])

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            majority_vote([])


class TestKrippendorffAlpha:
    def test_perfect_agreement_both_labels(self):
        matrix = [[True, True], [False, False], [True, True]]
        assert krippendorff_alpha(matrix) == 1.0

    def test_hand_four_by_two(self):
        matrix = [[True, True], [True, False], [False, False], [False, True]]
        assert krippendorff_alpha(matrix) == pytest.approx(0.125, abs=1e-9)

    def test_random_labels_near_zero(self):
        rng = random.Random(31)
        matrix = [[rng.random() < 0.5 for _ in range(3)] for _ in range(1000)]
        assert abs(krippendorff_alpha(matrix)) < 0.1

    def test_missing_cells_ignored(self):
        matrix = [
            [True, True, None],
            [None, False, False],
            [True, None, True],
            [False, False, None],
        ]
        assert krippendorff_alpha(matrix) == 1.0

    def test_single_label_undefined(self):
        with pytest.raises(UndefinedAgreementError):
            krippendorff_alpha([[True, True], [True, True]])

    def test_too_sparse_rejected(self):
        with pytest.raises(ValidationError):
            krippendorff_alpha([[True, None], [None, False]])

    def test_single_flip_lowers_alpha(self):
        perfect = [[True, True, True], [False, False, False]] * 3
        flipped = [list(row) for row in perfect]
        flipped[0][2] = False
        assert krippendorff_alpha(flipped) < krippendorff_alpha(perfect) == 1.0


class TestCreateBatch:
    def test_samples_per_dataset(self):
        enthymemes = (
            _enthymemes(8, "D1", "a") + _enthymemes(8, "D2", "b") + _enthymemes(8, "D3", "c")
        )
        generations = _generations(enthymemes)
        batch = create_batch(generations, enthymemes, sample_size=5, seed=13)
        assert len(batch) == 15
        datasets = {item.dataset for item in batch}
        assert datasets == {"D1", "D2", "D3"}

    def test_two_systems_pair_each_sample(self):
        enthymemes = _enthymemes(6)
        generations = _generations(enthymemes, "fine_tuned") + _generations(
            enthymemes, "fine_tuned_knowledge"
        )
        batch = create_batch(generations, enthymemes, sample_size=4, seed=13)
        assert len(batch) == 8
        assert {item.system for item in batch} == {"art", "art_paracomet"}

    def test_zero_sample(self):
        enthymemes = _enthymemes(4)
        batch = create_batch(_generations(enthymemes), enthymemes, sample_size=0, seed=13)
        assert batch == []

    def test_deterministic_for_seed(self):
        enthymemes = _enthymemes(10)
        generations = _generations(enthymemes)
        first = create_batch(generations, enthymemes, sample_size=5, seed=13)
        second = create_batch(generations, enthymemes, sample_size=5, seed=13)
        assert first == second
        different = create_batch(generations, enthymemes, sample_size=5, seed=14)
        assert {i.item_id for i in first} != {i.item_id for i in different} or first == different

    def test_ordered_by_item_id(self):
        enthymemes = _enthymemes(10)
        batch = create_batch(_generations(enthymemes), enthymemes, sample_size=6, seed=13)
        assert [i.item_id for i in batch] == sorted(i.item_id for i in batch)

    def test_oversized_sample_rejected(self):
        enthymemes = _enthymemes(3)
        with pytest.raises(ValidationError):
            create_batch(_generations(enthymemes), enthymemes, sample_size=4, seed=13)

    def test_error_generations_excluded(self):
        enthymemes = _enthymemes(3)
        generations = _generations(enthymemes)
        generations.append(
            GeneratedPremise(
                enthymeme_id=enthymemes[0].id, setting="zero_shot", full_argument="",
                implicit_premise="", extraction_fallback=False, error="boom",
            )
        )
        batch = create_batch(generations, enthymemes, sample_size=3, seed=13)
        assert all(item.candidate_premise for item in batch)


class TestStore:
    def test_fresh_annotator_gets_lexicographically_first(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(5))
        item = store.next_item("ann-1")
        assert item.item_id == "item-00"

    def test_serve_loop_caps_judgments(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(5))
        served = 0
        for annotator in ("a", "b", "c", "d"):
            while True:
                item = store.next_item(annotator)
                if item is None:
                    break
                store.submit_judgment(
                    JudgmentRecord(item.item_id, annotator, True, "t0")
                )
                served += 1
        # 5 items x 3 judges; the fourth annotator finds everything full
        assert served == 15
        for item in store.items:
            assert store.judgment_count(item.item_id) == 3

    def test_annotator_never_sees_same_item_twice(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(3))
        seen = []
        while True:
            item = store.next_item("solo")
            if item is None:
                break
            seen.append(item.item_id)
            store.submit_judgment(JudgmentRecord(item.item_id, "solo", False, "t0"))
        assert sorted(seen) == ["item-00", "item-01", "item-02"]
        assert store.next_item("solo") is None

    def test_least_judged_first(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(2))
        first = store.next_item("a")
        store.submit_judgment(JudgmentRecord(first.item_id, "a", True, "t0"))
        # item-00 now has 1 judgment; a new annotator should get item-01
        assert store.next_item("b").item_id == "item-01"

    def test_duplicate_submission_idempotent(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(1))
        item = store.next_item("a")
        record = JudgmentRecord(item.item_id, "a", True, "t0")
        first = store.submit_judgment(record)
        second = store.submit_judgment(record)
        assert first["status"] == "accepted"
        assert second["status"] == "duplicate"
        assert store.judgment_count(item.item_id) == 1

    def test_conflicting_relabel_rejected(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(1))
        item = store.next_item("a")
        store.submit_judgment(JudgmentRecord(item.item_id, "a", True, "t0"))
        with pytest.raises(ConflictError):
            store.submit_judgment(JudgmentRecord(item.item_id, "a", False, "t1"))

    def test_unknown_item_rejected(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(1))
        with pytest.raises(UnknownItemError):
            store.submit_judgment(JudgmentRecord("ghost", "a", True, "t0"))

    def test_unserved_item_rejected(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(2))
        with pytest.raises(ConflictError):
            store.submit_judgment(JudgmentRecord("item-01", "a", True, "t0"))

    def test_replay_restores_state(self, tmp_path):
        journal = tmp_path / "j.jsonl"
        store = AnnotationStore(journal, items=_items(2))
        item = store.next_item("a")
        store.submit_judgment(JudgmentRecord(item.item_id, "a", True, "t0"))
        reborn = AnnotationStore(journal)
        assert len(reborn.items) == 2
        assert reborn.judgment_count(item.item_id) == 1
        # replayed judgments survive; the annotator is not re-served that item
        assert reborn.next_item("a").item_id == "item-01"

    def test_attach_items_idempotent(self, tmp_path):
        journal = tmp_path / "j.jsonl"
        items = _items(2)
        store = AnnotationStore(journal, items=items)
        store.attach_items(items)
        lines = journal.read_text().splitlines()
        assert len(lines) == 2

    def test_journal_is_jsonl(self, tmp_path):
        journal = tmp_path / "j.jsonl"
        store = AnnotationStore(journal, items=_items(1))
        item = store.next_item("a")
        store.submit_judgment(JudgmentRecord(item.item_id, "a", True, "t0"))
        kinds = [json.loads(line)["type"] for line in journal.read_text().splitlines()]
        assert kinds == ["item", "judgment"]


class TestAggregate:
    def _judge_all(self, store, verdicts):
        """verdicts: item_id -> list of (annotator, plausible); bypasses the
        pull loop by registering the offer directly."""
        for item_id, judgments in verdicts.items():
            for annotator, plausible in judgments:
                store._offered.setdefault(annotator, set()).add(item_id)
                store.submit_judgment(JudgmentRecord(item_id, annotator, plausible, "t0"))

    def test_all_plausible_is_100_percent(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(4))
        for annotator in ("a", "b", "c"):
            while (item := store.next_item(annotator)) is not None:
                store.submit_judgment(JudgmentRecord(item.item_id, annotator, True, "t0"))
        report = store.aggregate()
        assert report.rows[0]["plausible_fraction"] == 1.0
        assert report.complete is True

    def test_fractions_match_hand_count(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(4))
        script = {
            "item-00": [True, True, False],   # plausible
            "item-01": [True, False, False],  # not
            "item-02": [True, True, True],    # plausible
            "item-03": [False, False, False], # notue
        }
        for annotator_index, annotator in enumerate(("a", "b", "c")):
            while (item := store.next_item(annotator)) is not None:
                store.submit_judgment(
                    JudgmentRecord(
                        item.item_id, annotator, script[item.item_id][annotator_index], "t0"
                    )
                )
        report = store.aggregate()
        assert report.rows[0]["plausible_fraction"] == pytest.approx(0.5)
        assert report.rows[0]["n_items"] == 4
        assert report.n_judgments == 12

    def test_incomplete_batch_rejected_by_default(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(2))
        item = store.next_item("a")
        store.submit_judgment(JudgmentRecord(item.item_id, "a", True, "t0"))
        with pytest.raises(ValidationError):
            store.aggregate()
        report = store.aggregate(allow_partial=True)
        assert report.complete is False

    def test_order_invariant(self, tmp_path):
        script = {
            "item-00": [("a", True), ("b", True), ("c", False)],
            "item-01": [("a", False), ("b", False), ("c", True)],
        }
        store1 = AnnotationStore(tmp_path / "j1.jsonl", items=_items(2))
        self._judge_all(store1, script)
        reversed_script = {k: list(reversed(v)) for k, v in reversed(list(script.items()))}
        store2 = AnnotationStore(tmp_path / "j2.jsonl", items=_items(2))
        self._judge_all(store2, reversed_script)
        assert store1.aggregate().rows == store2.aggregate().rows

    def test_render_table(self, tmp_path):
        store = AnnotationStore(tmp_path / "j.jsonl", items=_items(2))
        for annotator in ("a", "b", "c"):
            while (item := store.next_item(annotator)) is not None:
                store.submit_judgment(JudgmentRecord(item.item_id, annotator, True, "t0"))
        table = render_aggregate_table(store.aggregate())
        assert "100%" in table
        assert table.splitlines()[0].split()[:3] == ["Data", "System", "Plausibility"]


class TestItemValidation:
    def test_even_required_judges_rejected(self):
        with pytest.raises(ValidationError):
            AnnotationItem(
                item_id="x", stated_premise="p", stated_claim="c",
                candidate_premise="g", system="art", dataset="D1", required_judges=2,
            )
