"""Corpus ingestion, synthetic generation, and block splitting."""

import json
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from hyperevent.corpus import (
    SYNTH_EPOCH,
    format_rfc3339,
    ingest,
    parse_rfc3339,
    split_blocks,
    synth,
    write_corpus,
)
from hyperevent.message_graph import CorpusError, MessageRecord


def make_record(i, ts, label=None):
    return MessageRecord(
        id=f"m{i}",
        timestamp=ts,
        embedding=np.array([1.0, 0.0]),
        attributes=frozenset({"user:a"}),
        label=label,
    )


class TestTimestamps:
    def test_z_suffix(self):
        ts = parse_rfc3339("2024-01-02T03:04:05Z")
        assert ts == datetime(2024, 1, 2, 3, 4, 5, tzinfo=timezone.utc)

    def test_offset(self):
        ts = parse_rfc3339("2024-01-02T03:04:05+02:00")
        assert ts.astimezone(timezone.utc).hour == 1

    def test_roundtrip(self):
        raw = "2024-06-30T10:20:30.500000Z"
        assert format_rfc3339(parse_rfc3339(raw)) == raw

    def test_garbage_rejected(self):
        with pytest.raises(CorpusError):
            parse_rfc3339("yesterday-ish")


class TestIngest:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text("")
        with pytest.raises(CorpusError, match="empty corpus"):
            ingest(path)

    def test_valid_file_order_preserved(self, tmp_path):
        path = tmp_path / "c.jsonl"
        rows = [
            {"id": "b", "timestamp": "2024-01-01T00:00:00Z", "embedding": [1, 0], "attributes": []},
            {"id": "a", "timestamp": "2024-01-02T00:00:00Z", "embedding": [0, 1], "attributes": ["user:x"], "label": 3},
            {"id": "c", "timestamp": "2024-01-03T00:00:00Z", "embedding": [1, 1], "attributes": []},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows))
        records = ingest(path)
        assert [r.id for r in records] == ["b", "a", "c"]
        assert records[1].label == 3 and records[0].label is None
        assert records[1].attributes == frozenset({"user:x"})

    def test_missing_embedding_names_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        good = {"id": "a", "timestamp": "2024-01-01T00:00:00Z", "embedding": [1], "attributes": []}
        bad = {"id": "b", "timestamp": "2024-01-01T00:00:00Z", "attributes": []}
        path.write_text(json.dumps(good) + "\n" + json.dumps(bad))
        with pytest.raises(CorpusError, match="line 2"):
            ingest(path)

    def test_malformed_json_names_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        good = {"id": "a", "timestamp": "2024-01-01T00:00:00Z", "embedding": [1], "attributes": []}
        path.write_text(json.dumps(good) + "\n{oops")
        with pytest.raises(CorpusError, match="line 2"):
            ingest(path)

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "c.jsonl"
        rows = [
            {"id": "a", "timestamp": "2024-01-01T00:00:00Z", "embedding": [1, 2], "attributes": []},
            {"id": "b", "timestamp": "2024-01-01T00:00:00Z", "embedding": [1], "attributes": []},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows))
        with pytest.raises(CorpusError, match="dimension"):
            ingest(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "c.jsonl"
        row = {"id": "a", "timestamp": "2024-01-01T00:00:00Z", "embedding": [1], "attributes": []}
        path.write_text(json.dumps(row) + "\n" + json.dumps(row))
        with pytest.raises(CorpusError, match="duplicate"):
            ingest(path)

    def test_non_finite_embedding(self, tmp_path):
        path = tmp_path / "c.jsonl"
        row = {"id": "a", "timestamp": "2024-01-01T00:00:00Z",
               "embedding": [1.0, float("nan")], "attributes": []}
        path.write_text(json.dumps(row))
        with pytest.raises(CorpusError, match="finite"):
            ingest(path)


class TestSynth:
    def test_deterministic_files(self, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        synth(50, 5, 8, 0.1, seed=7, out_path=p1)
        synth(50, 5, 8, 0.1, seed=7, out_path=p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_zero_noise_exact_centers(self):
        records = synth(30, 3, 8, 0.0, seed=1)
        by_event = {}
        for r in records:
            by_event.setdefault(r.label, []).append(r.embedding)
        for vectors in by_event.values():
            for v in vectors[1:]:
                assert np.allclose(v, vectors[0], atol=1e-12)

    def test_nearest_center_recovers_all_labels(self):
        records = synth(500, 10, 16, 0.1, seed=3)
        X = np.stack([r.embedding for r in records])
        labels = np.array([r.label for r in records])
        centers = np.stack([X[labels == e].mean(axis=0) for e in range(10)])
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        nearest = (X @ centers.T).argmax(axis=1)
        assert np.array_equal(nearest, labels)

    def test_center_separation(self):
        records = synth(40, 8, 16, 0.0, seed=2)
        X = np.stack([r.embedding for r in records])
        labels = np.array([r.label for r in records])
        centers = np.stack([X[labels == e][0] for e in range(8)])
        G = centers @ centers.T
        np.fill_diagonal(G, 0.0)
        assert float(np.abs(G).max()) <= 0.5 + 1e-12

    def test_attribute_shapes(self):
        records = synth(100, 4, 8, 0.1, seed=4)
        for r in records:
            users = [a for a in r.attributes if a.startswith("user:")]
            tags = [a for a in r.attributes if a.startswith("hashtag:")]
            assert len(users) == 1
            assert 1 <= len(tags) <= 2

    def test_roundtrip_through_ingest(self, tmp_path):
        path = tmp_path / "c.jsonl"
        records = synth(25, 5, 6, 0.2, seed=5, out_path=path)
        loaded = ingest(path)
        assert len(loaded) == len(records)
        for a, b in zip(records, loaded):
            assert a.id == b.id
            assert a.timestamp == b.timestamp
            assert np.array_equal(a.embedding, b.embedding)
            assert a.attributes == b.attributes
            assert a.label == b.label

    def test_too_many_events(self):
        with pytest.raises(ValueError):
            synth(3, 5, 8, 0.1, seed=0)


class TestBlocks:
    def test_single_day_single_block(self):
        t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
        msgs = [make_record(i, t0 + timedelta(hours=i)) for i in range(5)]
        blocks = split_blocks(msgs)
        assert len(blocks) == 1 and len(blocks[0]) == 5

    def test_ten_day_span(self):
        t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
        msgs = [make_record(i, t0 + timedelta(days=i, hours=1)) for i in range(10)]
        blocks = split_blocks(msgs)
        # days 0..6 in the weekly block, then one block per later day
        assert len(blocks) == 4
        assert len(blocks[0]) == 7
        assert all(len(b) == 1 for b in blocks[1:])

    def test_boundary_instant_goes_to_second_block(self):
        t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
        msgs = [make_record(0, t0), make_record(1, t0 + timedelta(days=7))]
        blocks = split_blocks(msgs)
        assert len(blocks) == 2
        assert blocks[1][0].id == "m1"

    def test_empty_windows_skipped(self):
        t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
        msgs = [make_record(0, t0), make_record(1, t0 + timedelta(days=9, hours=3))]
        blocks = split_blocks(msgs)
        assert len(blocks) == 2

    def test_synth_spans_blocks(self):
        records = synth(200, 4, 8, 0.1, seed=6, days=10.0)
        blocks = split_blocks(records)
        assert 2 <= len(blocks) <= 4
        assert sum(len(b) for b in blocks) == 200
