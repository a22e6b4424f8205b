"""Corpus pipeline tests: ingest, summarize, filter, split, export, round-trips."""

from __future__ import annotations

import datetime
import json
import random
from pathlib import Path

import pytest

from hypobench.corpus import (
    BackgroundHypothesisPair,
    CorpusConfig,
    DanglingSourceReference,
    ExtractionRejected,
    FileUnreadable,
    LiteratureRecord,
    export_instruction_pairs,
    filter_by_publisher,
    ingest_literature,
    load_pairs,
    parse_publication_date,
    save_pairs,
    split_corpus,
    summarize_corpus,
    summarize_to_pair,
)
from hypobench.gateway import LlmGateway, LlmResponse, make_mock_endpoint

FIXTURES = Path(__file__).parent / "fixtures"


def gw() -> LlmGateway:
    return LlmGateway(sleep=lambda _: None)


def make_pair(pair_id: str, day: str, split: str | None = None,
              source: str = "rec-1") -> BackgroundHypothesisPair:
    return BackgroundHypothesisPair(
        pair_id=pair_id,
        background=f"background for {pair_id}",
        hypothesis=f"hypothesis for {pair_id}",
        source_record_id=source,
        publication_date=parse_publication_date(day),
        split=split,
    )


class TestDateParsing:
    def test_iso_full(self):
        assert parse_publication_date("2022-12-31") == datetime.date(2022, 12, 31)

    def test_year_month_normalizes_to_day_one(self):
        assert parse_publication_date("2023-07") == datetime.date(2023, 7, 1)

    @pytest.mark.parametrize("raw", ["2023-13-40", "2023/01/01", "Jan 2023", "2023", ""])
    def test_rejects_anything_else(self, raw):
        with pytest.raises(ValueError):
            parse_publication_date(raw)

    def test_matches_calendar_oracle(self):
        # Oracle: datetime.date itself decides calendar validity.
        rng = random.Random(5)
        for _ in range(200):
            y, m, d = rng.randint(2000, 2030), rng.randint(1, 14), rng.randint(1, 33)
            raw = f"{y:04d}-{m:02d}-{d:02d}"
            try:
                expected = datetime.date(y, m, d)
            except ValueError:
                expected = None
            if expected is None:
                with pytest.raises(ValueError):
                    parse_publication_date(raw)
            else:
                assert parse_publication_date(raw) == expected


class TestIngest:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "lit.jsonl"
        path.write_text("")
        result = ingest_literature(path)
        assert result.records == [] and result.rejects == []

    def test_two_records_preserve_order(self, tmp_path):
        rows = [
            {"id": "a", "title": "T1", "abstract": "A1", "publication_date": "2022-01-01", "venue": "V"},
            {"id": "b", "title": "T2", "abstract": "A2", "publication_date": "2023-02-01", "venue": "W"},
        ]
        path = tmp_path / "lit.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        result = ingest_literature(path)
        assert [r.id for r in result.records] == ["a", "b"]
        assert result.rejects == []

    def test_bad_date_routed_to_rejects_with_line_number(self, tmp_path):
        rows = [
            {"id": "a", "title": "T", "abstract": "A", "publication_date": "2022-01-01", "venue": "V"},
            {"id": "b", "title": "T", "abstract": "A", "publication_date": "2023-13-40", "venue": "V"},
        ]
        path = tmp_path / "lit.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        result = ingest_literature(path)
        assert [r.id for r in result.records] == ["a"]
        assert len(result.rejects) == 1
        assert result.rejects[0]["line"] == 2
        assert "2023-13-40" in result.rejects[0]["reason"]

    def test_invalid_json_and_duplicates_rejected(self, tmp_path):
        path = tmp_path / "lit.jsonl"
        good = {"id": "a", "title": "T", "abstract": "A", "publication_date": "2022-01-01", "venue": "V"}
        path.write_text(json.dumps(good) + "\n{broken\n" + json.dumps(good) + "\n")
        result = ingest_literature(path)
        assert len(result.records) == 1
        assert {r["line"] for r in result.rejects} == {2, 3}

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileUnreadable):
            ingest_literature(tmp_path / "absent.jsonl")


class TestSummarize:
    RECORD = LiteratureRecord(
        id="r1", title="T", abstract="Some abstract.",
        publication_date=datetime.date(2022, 5, 1), venue="V",
    )

    def test_scripted_labels(self):
        endpoint = make_mock_endpoint([LlmResponse(text="BACKGROUND: b\nHYPOTHESIS: h")])
        pair = summarize_to_pair(self.RECORD, endpoint, gw())
        assert pair.background == "b"
        assert pair.hypothesis == "h"
        assert pair.source_record_id == "r1"
        assert pair.publication_date == self.RECORD.publication_date
        assert pair.split is None

    def test_unlabeled_replies_exhaust_retries(self):
        endpoint = make_mock_endpoint([LlmResponse(text="no labels here")] * 3)
        with pytest.raises(ExtractionRejected):
            summarize_to_pair(self.RECORD, endpoint, gw(), retries=2)
        assert len(endpoint.calls) == 3

    def test_retry_recovers_on_second_reply(self):
        endpoint = make_mock_endpoint([
            LlmResponse(text="nope"),
            LlmResponse(text="BACKGROUND: b2\nHYPOTHESIS: h2"),
        ])
        pair = summarize_to_pair(self.RECORD, endpoint, gw())
        assert (pair.background, pair.hypothesis) == ("b2", "h2")

    def test_background_must_not_contain_hypothesis(self):
        leaky = "BACKGROUND: context. the drug works\nHYPOTHESIS: the drug works"
        endpoint = make_mock_endpoint([LlmResponse(text=leaky)] * 3)
        with pytest.raises(ExtractionRejected):
            summarize_to_pair(self.RECORD, endpoint, gw())

    def test_hand_labeled_fixture_abstracts(self):
        fixture = json.loads((FIXTURES / "summarize_fixture.json").read_text())
        for case in fixture:
            record = LiteratureRecord(
                id=case["record"]["id"],
                title=case["record"]["title"],
                abstract=case["record"]["abstract"],
                publication_date=parse_publication_date(case["record"]["publication_date"]),
                venue=case["record"]["venue"],
            )
            endpoint = make_mock_endpoint([LlmResponse(text=case["reply"])])
            pair = summarize_to_pair(record, endpoint, gw())
            assert pair.background == case["expected_background"], record.id
            assert pair.hypothesis == case["expected_hypothesis"], record.id

    def test_summarize_corpus_collects_failures(self):
        records = [
            self.RECORD,
            LiteratureRecord(id="r2", title="T", abstract="A2",
                             publication_date=datetime.date(2022, 6, 1), venue="V"),
        ]
        endpoint = make_mock_endpoint([
            LlmResponse(text="BACKGROUND: b\nHYPOTHESIS: h"),
            LlmResponse(text="junk"), LlmResponse(text="junk"), LlmResponse(text="junk"),
        ])
        pairs, failures = summarize_corpus(records, endpoint, gw())
        assert len(pairs) == 1 and pairs[0].source_record_id == "r1"
        assert failures == [{"record_id": "r2", "reason": failures[0]["reason"]}]


class TestFilterByPublisher:
    RECORDS = [
        LiteratureRecord(id="rec-1", title="T", abstract="A",
                         publication_date=datetime.date(2022, 1, 1), venue="Nature Neuroscience"),
        LiteratureRecord(id="rec-2", title="T", abstract="A",
                         publication_date=datetime.date(2022, 1, 1), venue="Predatory Weekly"),
    ]

    def test_identity_when_all_venues_allowed(self):
        pairs = [make_pair("p1", "2022-01-01"), make_pair("p2", "2022-02-01", source="rec-2")]
        out = filter_by_publisher(pairs, self.RECORDS, ["Nature Neuroscience", "Predatory Weekly"])
        assert out == pairs

    def test_empty_allowlist_annihilates(self):
        pairs = [make_pair("p1", "2022-01-01")]
        assert filter_by_publisher(pairs, self.RECORDS, []) == []

    def test_mixed_venues_keep_allowlisted_order_preserved(self):
        pairs = [
            make_pair("p1", "2022-01-01", source="rec-1"),
            make_pair("p2", "2022-01-01", source="rec-2"),
            make_pair("p3", "2022-01-01", source="rec-1"),
        ]
        out = filter_by_publisher(pairs, self.RECORDS, ["nature neuroscience"])
        assert [p.pair_id for p in out] == ["p1", "p3"]

    def test_idempotent(self):
        pairs = [make_pair("p1", "2022-01-01"), make_pair("p2", "2022-01-01", source="rec-2")]
        once = filter_by_publisher(pairs, self.RECORDS, ["Nature Neuroscience"])
        twice = filter_by_publisher(once, self.RECORDS, ["Nature Neuroscience"])
        assert once == twice

    def test_dangling_reference(self):
        with pytest.raises(DanglingSourceReference):
            filter_by_publisher([make_pair("p1", "2022-01-01", source="ghost")], self.RECORDS, ["V"])


class TestSplitCorpus:
    def test_cutoff_boundary(self):
        pairs = [make_pair("old", "2022-12-31"), make_pair("new", "2023-01-15")]
        split = split_corpus(pairs, CorpusConfig(seen_test_fraction=0.5, rng_seed=1))
        assert [p.pair_id for p in split.unseen_test] == ["new"]
        assert {p.pair_id for p in split.train} | {p.pair_id for p in split.seen_test} == {"old"}

    def test_all_post_cutoff(self):
        pairs = [make_pair(f"p{i}", "2023-06-01") for i in range(4)]
        split = split_corpus(pairs, CorpusConfig())
        assert split.train == [] and split.seen_test == []
        assert len(split.unseen_test) == 4
        assert all(p.split == "unseen_test" for p in split.unseen_test)

    def test_seeded_fraction_and_reproducibility(self):
        pairs = [make_pair(f"p{i:03d}", "2022-06-01") for i in range(100)]
        config = CorpusConfig(seen_test_fraction=0.2, rng_seed=42)
        first = split_corpus(pairs, config)
        second = split_corpus(pairs, config)
        assert len(first.seen_test) == 20
        assert len(first.train) == 80
        assert [p.pair_id for p in first.seen_test] == [p.pair_id for p in second.seen_test]

    def test_input_order_does_not_change_membership(self):
        pairs = [make_pair(f"p{i:03d}", "2022-06-01") for i in range(30)]
        config = CorpusConfig(seen_test_fraction=0.3, rng_seed=7)
        shuffled = list(pairs)
        random.Random(0).shuffle(shuffled)
        a = {p.pair_id for p in split_corpus(pairs, config).seen_test}
        b = {p.pair_id for p in split_corpus(shuffled, config).seen_test}
        assert a == b

    def test_disjoint_and_exhaustive(self):
        rng = random.Random(9)
        pairs = [
            make_pair(f"p{i}", rng.choice(["2021-05-01", "2022-11-01", "2023-03-01", "2024-01-01"]))
            for i in range(50)
        ]
        split = split_corpus(pairs, CorpusConfig(seen_test_fraction=0.25, rng_seed=3))
        ids = [p.pair_id for p in split.all_pairs()]
        assert sorted(ids) == sorted(p.pair_id for p in pairs)
        assert len(set(ids)) == len(ids)

    def test_no_unseen_pair_before_cutoff(self):
        rng = random.Random(13)
        pairs = [
            make_pair(f"p{i}", f"{rng.randint(2020, 2025)}-{rng.randint(1, 12):02d}-01")
            for i in range(200)
        ]
        config = CorpusConfig(seen_test_fraction=0.2, rng_seed=11)
        split = split_corpus(pairs, config)
        assert all(p.publication_date >= config.cutoff_date for p in split.unseen_test)
        assert all(p.publication_date < config.cutoff_date for p in split.train + split.seen_test)


class TestExport:
    def test_three_pairs_round_trip(self, tmp_path):
        pairs = [make_pair(f"p{i}", "2022-01-01") for i in range(3)]
        path = tmp_path / "sft.jsonl"
        count = export_instruction_pairs(pairs, path)
        assert count == 3
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert [r["input"] for r in rows] == [p.background for p in pairs]
        assert [r["output"] for r in rows] == [p.hypothesis for p in pairs]

    def test_newline_in_background_escapes_and_round_trips(self, tmp_path):
        pair = BackgroundHypothesisPair(
            pair_id="p1", background="line one\nline two\ttabbed",
            hypothesis='quote " and backslash \\', source_record_id="r",
            publication_date=datetime.date(2022, 1, 1),
        )
        path = tmp_path / "sft.jsonl"
        export_instruction_pairs([pair], path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1
        row = json.loads(lines[0])
        assert row["input"] == pair.background
        assert row["output"] == pair.hypothesis

    def test_empty_split_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            export_instruction_pairs([], tmp_path / "sft.jsonl")


def test_pairs_jsonl_round_trip(tmp_path):
    pairs = [
        make_pair("p1", "2022-01-01", split="train"),
        make_pair("p2", "2023-05-01", split="unseen_test"),
        make_pair("p3", "2022-07"),
    ]
    path = tmp_path / "pairs.jsonl"
    save_pairs(pairs, path)
    assert load_pairs(path) == pairs


def test_unseen_split_label_requires_post_cutoff_date():
    pairs = [make_pair("p", "2023-02-01")]
    split = split_corpus(pairs, CorpusConfig())
    assert split.unseen_test[0].split == "unseen_test"
