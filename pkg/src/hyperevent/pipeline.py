"""End-to-end detection runs: graph build, coarsening, training, readout.

Offline mode detects over the whole corpus at once; online mode splits the
corpus into time blocks (first week, then daily) and detects independently
per block with no shared state, so per-block results equal offline runs on
the block sub-corpora. Every run writes a labels file ("id<TAB>label"), a
canonical-JSON run report with per-stage timings, parameter checkpoints,
and an anchor-latents bundle for the 2-D disc export.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from . import geometry, metrics
from .anchors import AnchorGraph, build_anchor_graph
from .corpus import format_rfc3339, split_blocks
from .message_graph import (
    DEFAULT_GRID_HI,
    DEFAULT_GRID_LO,
    DEFAULT_GRID_STEP,
    MessageRecord,
    assemble_message_graph,
    cosine_similarity,
    select_threshold,
    write_graph_files,
)
from .training import DetectionResult, TrainConfig, save_checkpoint, train_detect

logger = logging.getLogger(__name__)

REPORT_VERSION = 1


class ConfigFileError(ValueError):
    """Malformed run-configuration document."""


@dataclass
class RunConfig:
    """Training hyperparameters plus the graph-build threshold grid."""

    train: TrainConfig = field(default_factory=TrainConfig)
    threshold_lo: float = DEFAULT_GRID_LO
    threshold_hi: float = DEFAULT_GRID_HI
    threshold_step: float = DEFAULT_GRID_STEP
    report_timings: bool = True

    def as_dict(self) -> dict:
        out = asdict(self.train)
        out.update(
            threshold_lo=self.threshold_lo,
            threshold_hi=self.threshold_hi,
            threshold_step=self.threshold_step,
            report_timings=self.report_timings,
        )
        return out


_GRID_KEYS = {"threshold_lo", "threshold_hi", "threshold_step", "report_timings"}
_TRAIN_KEYS = set(TrainConfig.__dataclass_fields__)


def run_config_from_dict(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigFileError("config document must be a JSON object")
    unknown = set(obj) - _TRAIN_KEYS - _GRID_KEYS
    if unknown:
        raise ConfigFileError(f"unknown config keys: {sorted(unknown)}")
    try:
        train = TrainConfig(**{k: v for k, v in obj.items() if k in _TRAIN_KEYS})
    except (TypeError, ValueError) as exc:
        raise ConfigFileError(f"bad training config: {exc}") from exc
    cfg = RunConfig(train=train)
    for key in _GRID_KEYS:
        if key in obj:
            setattr(cfg, key, obj[key])
    if not isinstance(cfg.report_timings, bool):
        raise ConfigFileError("report_timings must be a boolean")
    if cfg.threshold_step <= 0 or cfg.threshold_lo > cfg.threshold_hi:
        raise ConfigFileError("threshold grid must satisfy lo <= hi, step > 0")
    return cfg


def load_run_config(path) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"{path}: invalid JSON ({exc.msg})") from exc
    return run_config_from_dict(obj)


@dataclass
class BlockOutcome:
    """Detection products for one corpus slice."""

    messages: Sequence[MessageRecord]
    labels: np.ndarray
    event_count: int
    threshold: float
    anchor_graph: AnchorGraph
    result: DetectionResult | None  # None on the degenerate no-edge path
    latents: np.ndarray | None
    timings: dict[str, float]


def detect_block(messages: Sequence[MessageRecord], config: RunConfig) -> BlockOutcome:
    """One full detection pass over a message list.

    A corpus whose anchor graph has no edges (for instance a single
    message) has no structure to train on: each anchor becomes its own
    event and training is skipped.
    """
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    ids = [m.id for m in messages]
    X = np.stack([m.embedding for m in messages])
    S = cosine_similarity(X, ids=ids)
    tau = select_threshold(
        S, config.threshold_lo, config.threshold_hi, config.threshold_step
    )
    mg = assemble_message_graph(messages, S, tau)
    timings["graph_construction"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    anchor_graph = build_anchor_graph(
        X, mg.graph.to_adjacency(), config.train.epsilon, config.train.seed
    )
    timings["anchor_construction"] = time.perf_counter() - t0

    if not anchor_graph.has_edges():
        logger.warning(
            "anchor graph has no edges (%d anchors); every anchor becomes its own event",
            anchor_graph.anchor_count,
        )
        anchor_labels = np.arange(anchor_graph.anchor_count, dtype=np.int64)
        labels = anchor_labels[anchor_graph.membership.argmax(axis=1)]
        timings["training"] = 0.0
        timings["readout"] = 0.0
        return BlockOutcome(
            messages=messages,
            labels=labels,
            event_count=anchor_graph.anchor_count,
            threshold=tau,
            anchor_graph=anchor_graph,
            result=None,
            latents=None,
            timings=timings,
        )

    tree, result = train_detect(anchor_graph, config.train)
    timings["training"] = result.timings["training"]
    timings["readout"] = result.timings["readout"]
    latents = tree.Z[tree.height].detach().numpy()
    return BlockOutcome(
        messages=messages,
        labels=result.message_labels,
        event_count=result.event_count,
        threshold=tau,
        anchor_graph=anchor_graph,
        result=result,
        latents=latents,
        timings=timings,
    )


def _block_report(outcome: BlockOutcome, index: int, config: RunConfig) -> dict:
    entry = {
        "index": index,
        "n_messages": len(outcome.messages),
        "start": format_rfc3339(min(m.timestamp for m in outcome.messages)),
        "end": format_rfc3339(max(m.timestamp for m in outcome.messages)),
        "threshold": outcome.threshold,
        "anchor_count": outcome.anchor_graph.anchor_count,
        "detected_events": outcome.event_count,
        "degenerate": outcome.result is None,
    }
    if outcome.result is not None:
        entry["losses"] = outcome.result.losses
        entry["per_epoch"] = outcome.result.per_epoch
        entry["best_epoch"] = outcome.result.best_epoch
        entry["epochs_run"] = outcome.result.epochs_run
    if config.report_timings:
        entry["timings"] = outcome.timings
    return entry


def run_detect(
    messages: Sequence[MessageRecord],
    config: RunConfig,
    mode: str = "offline",
    out_dir=None,
    dump_graph=None,
) -> dict:
    """Detect events and (optionally) write all run products to `out_dir`.

    Returns the run report as a dict. Online mode offsets each block's
    labels by the running event count so labels stay globally distinct.
    """
    if mode not in ("offline", "online"):
        raise ValueError(f"mode must be 'offline' or 'online', got {mode!r}")
    if not messages:
        raise ValueError("empty corpus")
    torch.set_num_threads(config.train.threads)
    overall_start = time.perf_counter()

    slices = [list(messages)] if mode == "offline" else split_blocks(messages)
    outcomes: list[BlockOutcome] = []
    for block in slices:
        outcomes.append(detect_block(block, config))

    label_rows: list[tuple[str, int]] = []
    offset = 0
    for outcome in outcomes:
        for msg, label in zip(outcome.messages, outcome.labels):
            label_rows.append((msg.id, int(label) + offset))
        offset += outcome.event_count

    report = {
        "format_version": REPORT_VERSION,
        "mode": mode,
        "config": config.as_dict(),
        "n_messages": len(messages),
        "detected_events": offset,
        "blocks": [_block_report(o, i, config) for i, o in enumerate(outcomes)],
    }
    if config.report_timings:
        totals: dict[str, float] = {}
        for outcome in outcomes:
            for key, value in outcome.timings.items():
                totals[key] = totals.get(key, 0.0) + value
        totals["overall"] = time.perf_counter() - overall_start
        report["timings"] = totals

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_labels(out / "labels.tsv", label_rows)
        (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2))
        _write_latents(out / "latents.npz", outcomes, kappa=config.train.curvature)
        for i, outcome in enumerate(outcomes):
            if outcome.result is not None and outcome.result.params is not None:
                name = "checkpoint.json" if mode == "offline" else f"checkpoint_block_{i:03d}.json"
                save_checkpoint(out / name, outcome.result.params, config.train)
        if dump_graph is not None:
            # re-derive the full-corpus message graph for the dump
            ids = [m.id for m in messages]
            X = np.stack([m.embedding for m in messages])
            S = cosine_similarity(X, ids=ids)
            tau = select_threshold(
                S, config.threshold_lo, config.threshold_hi, config.threshold_step
            )
            mg = assemble_message_graph(messages, S, tau)
            write_graph_files(
                mg, dump_graph, messages, mapping_path=str(dump_graph) + ".ids"
            )
    return report


def write_labels(path, rows: Sequence[tuple[str, int]]) -> None:
    with open(path, "w") as fh:
        for msg_id, label in rows:
            fh.write(f"{msg_id}\t{label}\n")


def read_labels(path) -> list[tuple[str, int]]:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}: line {lineno}: expected 'id<TAB>label'")
        rows.append((parts[0], int(parts[1])))
    return rows


def _write_latents(path, outcomes: Sequence[BlockOutcome], kappa: float) -> None:
    anchor_latents = []
    anchor_labels = []
    message_ids = []
    message_anchor = []
    message_labels = []
    anchor_offset = 0
    label_offset = 0
    for outcome in outcomes:
        m = outcome.anchor_graph.anchor_count
        if outcome.latents is not None:
            anchor_latents.append(outcome.latents)
        else:
            anchor_latents.append(np.zeros((m, 2)))
        if outcome.result is not None:
            anchor_labels.append(outcome.result.anchor_labels + label_offset)
        else:
            anchor_labels.append(np.arange(m, dtype=np.int64) + label_offset)
        for msg, label in zip(outcome.messages, outcome.labels):
            message_ids.append(msg.id)
            message_labels.append(int(label) + label_offset)
        message_anchor.append(outcome.anchor_graph.membership.argmax(axis=1) + anchor_offset)
        anchor_offset += m
        label_offset += outcome.event_count
    dims = {a.shape[1] for a in anchor_latents}
    if len(dims) > 1:  # degenerate blocks store 2-d placeholders
        width = max(dims)
        anchor_latents = [
            np.pad(a, ((0, 0), (0, width - a.shape[1]))) for a in anchor_latents
        ]
    np.savez(
        path,
        anchor_latents=np.concatenate(anchor_latents, axis=0),
        anchor_labels=np.concatenate(anchor_labels, axis=0),
        message_ids=np.array(message_ids),
        message_anchor=np.concatenate(message_anchor, axis=0),
        message_labels=np.array(message_labels, dtype=np.int64),
        kappa=np.array(kappa),
    )


def evaluate(labels_path, messages: Sequence[MessageRecord], out_path=None) -> dict:
    """NMI/AMI/ARI of a labels file against the corpus ground truth."""
    by_id = {m.id: m for m in messages}
    rows = read_labels(labels_path)
    if not rows:
        raise ValueError(f"{labels_path}: no labels")
    pred = []
    truth = []
    for msg_id, label in rows:
        if msg_id not in by_id:
            raise ValueError(f"label file names unknown message id {msg_id!r}")
        record = by_id[msg_id]
        if record.label is None:
            raise ValueError(f"no ground truth: message {msg_id!r} has no label")
        pred.append(label)
        truth.append(record.label)
    raw = metrics.scores(pred, truth)
    report = {name: round(value, 4) for name, value in raw.items()}
    if out_path is not None:
        Path(out_path).write_text(json.dumps(report, sort_keys=True, indent=2))
    return report


def export_disc(latents_path, out_path) -> int:
    """Project anchor latents to a 2-D disc and write one CSV row per message.

    Points are log-mapped to the tangent space at the origin, projected onto
    the top two principal directions (uncentred, so origin distances are
    preserved), and exp-mapped back into a 2-D ball of the same curvature.
    Columns: id, x, y, label.
    """
    data = np.load(latents_path, allow_pickle=False)
    kappa = float(data["kappa"])
    Z = torch.as_tensor(data["anchor_latents"], dtype=torch.float64)
    origin = torch.zeros_like(Z[:1])
    tangent = geometry.log_map(origin, Z, kappa)
    _, _, vt = np.linalg.svd(tangent.numpy(), full_matrices=False)
    planar = tangent.numpy() @ vt[:2].T
    disc = geometry.exp_map(
        torch.zeros(2, dtype=torch.float64), torch.as_tensor(planar), kappa
    ).numpy()
    ids = data["message_ids"]
    anchor_of = data["message_anchor"]
    labels = data["message_labels"]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "y", "label"])
        for msg_id, anchor, label in zip(ids, anchor_of, labels):
            x, y = disc[int(anchor)]
            writer.writerow([str(msg_id), repr(float(x)), repr(float(y)), int(label)])
    return len(ids)
