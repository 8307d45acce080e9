"""Corpus files: JSON-lines ingestion, synthetic generation, time blocks.

One message per line: {"id": str, "timestamp": RFC3339 str, "embedding":
[numbers], "attributes": [strings], "label": optional int}. Embeddings
arrive precomputed; this package never touches raw text.
"""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .message_graph import CorpusError, MessageRecord

SYNTH_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)
BLOCK_FIRST_DAYS = 7


def parse_rfc3339(value: str) -> datetime:
    """RFC3339 timestamp; 'Z' suffix accepted, naive times read as UTC."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise CorpusError(f"bad timestamp {value!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def format_rfc3339(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def record_to_json(record: MessageRecord) -> str:
    payload = {
        "id": record.id,
        "timestamp": format_rfc3339(record.timestamp),
        "embedding": [float(x) for x in record.embedding],
        "attributes": sorted(record.attributes),
    }
    if record.label is not None:
        payload["label"] = int(record.label)
    return json.dumps(payload)


def ingest(path) -> list[MessageRecord]:
    """Parse and validate a corpus file; every error names its line."""
    lines = Path(path).read_text().splitlines()
    records: list[MessageRecord] = []
    seen_ids: set[str] = set()
    dim: int | None = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
        for key in ("id", "timestamp", "embedding", "attributes"):
            if key not in obj:
                raise CorpusError(f"{path}: line {lineno}: missing {key!r}")
        msg_id = str(obj["id"])
        if msg_id in seen_ids:
            raise CorpusError(f"{path}: line {lineno}: duplicate id {msg_id!r}")
        seen_ids.add(msg_id)
        embedding = np.asarray(obj["embedding"], dtype=np.float64)
        if embedding.ndim != 1 or embedding.size == 0 or not np.isfinite(embedding).all():
            raise CorpusError(f"{path}: line {lineno}: embedding must be a finite vector")
        if dim is None:
            dim = embedding.size
        elif embedding.size != dim:
            raise CorpusError(
                f"{path}: line {lineno}: embedding dimension {embedding.size} != {dim}"
            )
        label = obj.get("label")
        try:
            timestamp = parse_rfc3339(str(obj["timestamp"]))
        except CorpusError as exc:
            raise CorpusError(f"{path}: line {lineno}: {exc}") from exc
        records.append(
            MessageRecord(
                id=msg_id,
                timestamp=timestamp,
                embedding=embedding,
                attributes=frozenset(str(a) for a in obj["attributes"]),
                label=None if label is None else int(label),
            )
        )
    if not records:
        raise CorpusError(f"{path}: empty corpus")
    return records


def write_corpus(records: Sequence[MessageRecord], path) -> None:
    Path(path).write_text("\n".join(record_to_json(r) for r in records) + "\n")


def _spread_centers(k: int, dim: int, rng: np.random.Generator, max_tries: int = 20000):
    """Unit-norm event centers with pairwise angle >= 60 degrees."""
    centers: list[np.ndarray] = []
    tries = 0
    while len(centers) < k:
        tries += 1
        if tries > max_tries:
            raise ValueError(
                f"cannot place {k} centers at >=60 degrees in dimension {dim}"
            )
        c = rng.standard_normal(dim)
        c /= np.linalg.norm(c)
        if all(abs(float(c @ o)) <= 0.5 for o in centers):
            centers.append(c)
    return centers


def synth(
    n: int,
    k_events: int,
    dim: int,
    noise: float,
    seed: int,
    out_path=None,
    days: float = 10.0,
) -> list[MessageRecord]:
    """Planted-partition corpus with known event labels.

    Events get unit-norm centers at pairwise angles >= 60 degrees; each
    message is the normalised sum of its event's center and Gaussian noise
    of scale `noise`. Attributes: one "user:" from a global pool of
    max(50, n//2) users (sparse collisions, like real traffic), and one or
    two "hashtag:" drawn 90% from a 10-tag event pool, 10% from a 20-tag
    global pool. Timestamps spread uniformly over `days` days. Labels are
    the event ids.
    """
    if k_events > n:
        raise ValueError("cannot plant more events than messages")
    if k_events < 1:
        raise ValueError("need at least one event")
    rng = np.random.default_rng(seed)
    centers = _spread_centers(k_events, dim, rng)
    user_pool = max(50, n // 2)
    records: list[MessageRecord] = []
    for i in range(n):
        event = i % k_events
        vec = centers[event] + noise * rng.standard_normal(dim)
        vec = vec / np.linalg.norm(vec)
        attrs = {f"user:u{int(rng.integers(user_pool)):05d}"}
        for _ in range(int(rng.integers(1, 3))):
            if rng.uniform() < 0.9:
                attrs.add(f"hashtag:e{event}_t{int(rng.integers(10))}")
            else:
                attrs.add(f"hashtag:g{int(rng.integers(20))}")
        offset = timedelta(seconds=float(rng.uniform(0.0, days * 86400.0)))
        records.append(
            MessageRecord(
                id=f"m{i:06d}",
                timestamp=SYNTH_EPOCH + offset,
                embedding=vec,
                attributes=frozenset(attrs),
                label=event,
            )
        )
    if out_path is not None:
        write_corpus(records, out_path)
    return records


def split_blocks(messages: Sequence[MessageRecord]) -> list[list[MessageRecord]]:
    """First block = first seven days, then daily blocks; empty windows skipped.

    Windows are half-open: an instant exactly seven days after the earliest
    message starts the second block.
    """
    if not messages:
        return []
    t_min = min(m.timestamp for m in messages)
    t_max = max(m.timestamp for m in messages)
    edges = [t_min, t_min + timedelta(days=BLOCK_FIRST_DAYS)]
    while edges[-1] <= t_max:
        edges.append(edges[-1] + timedelta(days=1))
    blocks: list[list[MessageRecord]] = [[] for _ in range(len(edges) - 1)]
    for msg in messages:
        idx = 0 if msg.timestamp < edges[1] else 1 + int(
            (msg.timestamp - edges[1]) // timedelta(days=1)
        )
        blocks[idx].append(msg)
    return [b for b in blocks if b]
