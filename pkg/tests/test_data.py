import json

import pytest

from copysum.data import (
    CorpusRecord,
    SynthConfig,
    first_sentence,
    ingest,
    synth_generate,
    write_pairs,
)
from copysum.errors import ConfigError, CorpusError
from copysum.metrics import copy_rate


class TestFirstSentence:
    def test_plain_split(self):
        assert first_sentence("One thing. Another thing.") == "One thing."

    def test_abbreviations_do_not_split(self):
        text = "Mr. Smith met Dr. Jones at 3.5 km. They talked."
        assert first_sentence(text) == "Mr. Smith met Dr. Jones at 3.5 km."

    def test_initials_do_not_split(self):
        assert (
            first_sentence("J. R. Hartley wrote a book. It sold well.")
            == "J. R. Hartley wrote a book."
        )

    def test_no_terminator_returns_all(self):
        assert first_sentence("no punctuation here") == "no punctuation here"


class TestIngestPairs:
    def test_normal_record(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        path.write_text('{"source": "a b c.", "summary": "a b"}\n')
        records, stats = ingest(path, "pairs")
        assert len(records) == 1
        assert records[0].source == "a b c."
        assert records[0].summary == "a b"
        assert stats == {"records": 1, "malformed": 0}

    def test_malformed_lines_skipped_and_counted(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        lines = ['{"source": "a", "summary": "b"}'] * 18 + ["{broken", '{"source": "x"}']
        path.write_text("\n".join(lines) + "\n")
        records, stats = ingest(path, "pairs")
        assert len(records) == 18
        assert stats["malformed"] == 2

    def test_too_many_malformed_is_fatal(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        lines = ['{"source": "a", "summary": "b"}'] * 5 + ["{broken"] * 5
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorpusError):
            ingest(path, "pairs")

    def test_empty_file_fatal(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        path.write_text("")
        with pytest.raises(CorpusError):
            ingest(path, "pairs")

    def test_missing_file_fatal(self, tmp_path):
        with pytest.raises(CorpusError):
            ingest(tmp_path / "nope.jsonl", "pairs")

    def test_round_trip_through_write_pairs(self, tmp_path):
        records = [
            CorpusRecord(id="r1", source="a b", summary="a", meta={"x": 1}),
            CorpusRecord(id="r2", source="c d", summary="d"),
        ]
        path = tmp_path / "out.jsonl"
        write_pairs(records, path)
        loaded, _ = ingest(path, "pairs")
        assert [(r.id, r.source, r.summary) for r in loaded] == [
            ("r1", "a b", "a"), ("r2", "c d", "d"),
        ]
        assert loaded[0].meta == {"x": 1}


class TestIngestArticles:
    def test_first_sentence_extraction(self, tmp_path):
        path = tmp_path / "articles.txt"
        path.write_text(
            "Quake hits region\n"
            "A strong quake hit the region. Damage was light.\n"
            "\n"
            "Markets rally\n"
            "Stocks rose sharply. Traders cheered. Volume was high.\n"
        )
        records, stats = ingest(path, "article")
        assert len(records) == 2
        assert records[0].summary == "quake hits region"
        assert records[0].source == "a strong quake hit the region."
        assert records[1].source == "stocks rose sharply."

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            ingest(tmp_path / "x", "parquet")


class TestSynthGenerate:
    def test_zero_paraphrase_fraction_fully_copied(self):
        splits = synth_generate(SynthConfig(n_train=40, n_valid=5, n_test=5, paraphrase_fraction=0.0, seed=1))
        for record in splits["train"]:
            assert copy_rate(record.summary, record.source, 1) == 100.0
            assert record.meta["unseen_fraction"] == 0.0

    def test_full_paraphrase_fraction_fully_unseen(self):
        splits = synth_generate(SynthConfig(n_train=40, n_valid=5, n_test=5, paraphrase_fraction=1.0, seed=1))
        for record in splits["train"]:
            assert copy_rate(record.summary, record.source, 1) == 0.0
            assert record.meta["unseen_fraction"] == 1.0

    def test_same_seed_byte_identical(self, tmp_path):
        cfg = SynthConfig(n_train=30, n_valid=5, n_test=5, seed=7)
        a_path, b_path = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_pairs(synth_generate(cfg)["train"], a_path)
        write_pairs(synth_generate(cfg)["train"], b_path)
        assert a_path.read_bytes() == b_path.read_bytes()

    def test_achieved_unseen_fraction_near_target(self):
        cfg = SynthConfig(n_train=400, n_valid=10, n_test=10, paraphrase_fraction=0.33, seed=3)
        splits = synth_generate(cfg)
        unseen = total = 0
        for record in splits["train"]:
            words = record.summary.split()
            source_set = set(record.source.split())
            unseen += sum(1 for w in words if w not in source_set)
            total += len(words)
        assert abs(unseen / total - 0.33) < 0.05

    def test_meta_label_matches_reality(self):
        splits = synth_generate(SynthConfig(n_train=50, n_valid=5, n_test=5, seed=5))
        for record in splits["train"]:
            words = record.summary.split()
            source_set = set(record.source.split())
            actual = sum(1 for w in words if w not in source_set) / len(words)
            assert record.meta["unseen_fraction"] == pytest.approx(actual, abs=5e-5)

    def test_split_ids_disjoint(self):
        splits = synth_generate(SynthConfig(n_train=20, n_valid=20, n_test=20, seed=2))
        ids = [r.id for records in splits.values() for r in records]
        assert len(ids) == len(set(ids))

    def test_infeasible_lengths_rejected(self):
        with pytest.raises(ConfigError):
            SynthConfig(source_len=(5, 8), summary_len=(6, 9))
