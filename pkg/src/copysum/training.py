"""Training-time copy control: category sampling, corruption, masked loss.

Every target token falls into one of three categories - summary tokens also
present in the source, summary tokens absent from it, and source tokens.
Sampling each category at its own Bernoulli rate decides which positions are
corrupted and predicted, which is the knob that steers the trained model
toward copying or generating.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .bpe import Vocabulary
from .errors import ConfigError, ContractError, NumericError
from .model import JointSequence, PrefixLM, build_attention_mask
from .optim import AdamW, PlateauHalver
from .seeding import named_rng


class TokenCategory(IntEnum):
    SOURCE = 0
    SEEN_SUMMARY = 1
    UNSEEN_SUMMARY = 2


@dataclass
class TrainingExample:
    source_ids: np.ndarray
    summary_ids: np.ndarray

    @classmethod
    def from_texts(cls, vocab: Vocabulary, source: str, summary: str) -> "TrainingExample":
        return cls(
            source_ids=np.asarray(vocab.encode(source), dtype=np.int64),
            summary_ids=np.asarray(vocab.encode(summary), dtype=np.int64),
        )


@dataclass
class SamplingConfig:
    """Per-category selection rates plus the corruption action mix."""

    p_seen: float
    p_unseen: float
    p_source: float
    mask_frac: float = 0.8
    random_frac: float = 0.1
    keep_frac: float = 0.1

    def __post_init__(self):
        for name in ("p_seen", "p_unseen", "p_source"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name}={p} outside [0, 1]")
        total = self.mask_frac + self.random_frac + self.keep_frac
        if abs(total - 1.0) > 1e-9 or min(self.mask_frac, self.random_frac, self.keep_frac) < 0:
            raise ConfigError(f"corruption mix must be non-negative and sum to 1, got {total}")


# Mix-and-match presets: rates are relative token budgets, anchored at 0.9
# for the dominant summary category and 0.1 for source tokens.
SAMPLING_PRESETS = {
    "case-a": dict(p_seen=0.9, p_unseen=0.0, p_source=0.0),
    "case-b": dict(p_seen=0.9, p_unseen=0.45, p_source=0.0),
    "case-c": dict(p_seen=0.9, p_unseen=0.9, p_source=0.0),
    "case-d": dict(p_seen=0.45, p_unseen=0.9, p_source=0.0),
    "case-e": dict(p_seen=0.9, p_unseen=0.0, p_source=0.1),
    "case-f": dict(p_seen=0.9, p_unseen=0.45, p_source=0.1),
    "case-g": dict(p_seen=0.9, p_unseen=0.9, p_source=0.1),
    "case-h": dict(p_seen=0.45, p_unseen=0.9, p_source=0.1),
}
PRESET_ALIASES = {
    "seen-only": "case-a",
    "mixed-2:1": "case-b",
    "all-summary": "case-c",
    "unseen-heavy": "case-d",
}


def sampling_preset(name: str) -> SamplingConfig:
    key = PRESET_ALIASES.get(name, name)
    if key not in SAMPLING_PRESETS:
        known = sorted(SAMPLING_PRESETS) + sorted(PRESET_ALIASES)
        raise ConfigError(f"unknown sampling preset {name!r} (have {known})")
    return SamplingConfig(**SAMPLING_PRESETS[key])


# Corruption actions recorded per selected position.
ACTION_MASK = 0
ACTION_RANDOM = 1
ACTION_KEEP = 2


@dataclass
class SelectionRecord:
    """Which positions were selected, their original ids, and the action."""

    positions: np.ndarray
    original_ids: np.ndarray
    actions: np.ndarray


def build_joint_sequence(
    example: TrainingExample,
    vocab: Vocabulary,
    max_positions: int,
    stats: dict | None = None,
) -> JointSequence:
    """[START, source..., END, summary..., END] with source-tail truncation."""
    if len(example.source_ids) == 0 or len(example.summary_ids) == 0:
        raise ContractError("source and summary must both be non-empty")
    source = example.source_ids
    overhead = 3 + len(example.summary_ids)  # START, source END, summary END
    if overhead + len(source) > max_positions:
        keep = max_positions - overhead
        if keep < 1:
            raise ContractError(
                f"summary of {len(example.summary_ids)} tokens cannot fit in "
                f"{max_positions} positions"
            )
        source = source[:keep]
        if stats is not None:
            stats["truncated"] = stats.get("truncated", 0) + 1
    ids = np.concatenate(
        (
            [vocab.start_id],
            source,
            [vocab.end_id],
            example.summary_ids,
            [vocab.end_id],
        )
    ).astype(np.int64)
    return JointSequence.build(ids, source_len=len(source) + 2)


def categorize_tokens(seq: JointSequence, vocab: Vocabulary) -> np.ndarray:
    """Category per position; summary membership is exact id match."""
    categories = np.full(len(seq), TokenCategory.UNSEEN_SUMMARY, dtype=np.int64)
    categories[: seq.source_len] = TokenCategory.SOURCE
    source_members = set(seq.ids[: seq.source_len].tolist()) - set(vocab.special_ids)
    for i in range(seq.source_len, len(seq)):
        tok = int(seq.ids[i])
        # the trailing END counts as seen so pure-copy training still
        # learns to terminate
        if tok == vocab.end_id or tok in source_members:
            categories[i] = TokenCategory.SEEN_SUMMARY
    return categories


def sample_and_corrupt(
    seq: JointSequence,
    categories: np.ndarray,
    config: SamplingConfig,
    rng: np.random.Generator,
    vocab: Vocabulary,
) -> tuple[np.ndarray, SelectionRecord]:
    """Independently select positions by category rate, then corrupt them."""
    rates = np.array([config.p_source, config.p_seen, config.p_unseen])
    selected = rng.random(len(seq)) < rates[categories]
    positions = np.flatnonzero(selected)
    draws = rng.random(len(positions))
    actions = np.full(len(positions), ACTION_KEEP, dtype=np.int64)
    actions[draws < config.mask_frac + config.random_frac] = ACTION_RANDOM
    actions[draws < config.mask_frac] = ACTION_MASK

    corrupted = seq.ids.copy()
    corrupted[positions[actions == ACTION_MASK]] = vocab.mask_id
    random_positions = positions[actions == ACTION_RANDOM]
    if len(random_positions):
        ordinary = np.setdiff1d(
            np.arange(len(vocab), dtype=np.int64), np.fromiter(vocab.special_ids, dtype=np.int64)
        )
        corrupted[random_positions] = rng.choice(ordinary, size=len(random_positions))
    record = SelectionRecord(
        positions=positions,
        original_ids=seq.ids[positions].copy(),
        actions=actions,
    )
    return corrupted, record


def compute_loss(
    model: PrefixLM,
    seq: JointSequence,
    corrupted_ids: np.ndarray,
    record: SelectionRecord,
    reduction: str = "mean",
    rng: np.random.Generator | None = None,
) -> Tensor | None:
    """Negative log-likelihood of the original tokens at selected positions.

    States come from the corrupted sequence under the standard prefix mask;
    returns None when nothing was selected (the caller counts skips).
    """
    if len(record.positions) == 0:
        return None
    corrupted_seq = JointSequence(
        ids=corrupted_ids,
        source_len=seq.source_len,
        position_ids=seq.position_ids,
        segment_ids=seq.segment_ids,
    )
    mask = build_attention_mask(seq.source_len, len(seq))
    states = model.forward(corrupted_seq, mask, rng=rng)
    picked = ad.take_rows(states, record.positions)
    logits = model.predict_logits(picked)
    return ad.cross_entropy_from_logits(logits, record.original_ids, reduction)


@dataclass
class TrainConfig:
    epochs: int = 14
    batch_size: int = 16
    lr: float = 1.5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    plateau_patience: int = 2
    plateau_min_delta: float = 1e-4
    seed: int = 0
    reduction: str = "mean"


@dataclass
class TrainReport:
    records: list[dict] = field(default_factory=list)
    skipped_examples: int = 0
    truncation_stats: dict = field(default_factory=dict)

    def log(self, **kv) -> None:
        self.records.append(kv)


def _epoch_loss(model, sequences, sampling, vocab, rng, report) -> tuple[float, float]:
    """Corpus loss (mean per selected position, and total) without updates."""
    total, count = 0.0, 0
    for seq, categories in sequences:
        corrupted, record = sample_and_corrupt(seq, categories, sampling, rng, vocab)
        loss = compute_loss(model, seq, corrupted, record, reduction="sum")
        if loss is None:
            report.skipped_examples += 1
            continue
        total += loss.item()
        count += len(record.positions)
    return (total / max(count, 1), total)


def prepare_sequences(
    examples: list[TrainingExample],
    vocab: Vocabulary,
    max_positions: int,
    report: TrainReport,
) -> list[tuple[JointSequence, np.ndarray]]:
    out = []
    for ex in examples:
        seq = build_joint_sequence(ex, vocab, max_positions, report.truncation_stats)
        out.append((seq, categorize_tokens(seq, vocab)))
    return out


def train(
    model: PrefixLM,
    train_examples: list[TrainingExample],
    valid_examples: list[TrainingExample],
    sampling: SamplingConfig,
    config: TrainConfig,
    vocab: Vocabulary,
) -> TrainReport:
    """Run the optimization loop; deterministic for a fixed seed."""
    report = TrainReport()
    max_pos = model.config.max_positions
    train_seqs = prepare_sequences(train_examples, vocab, max_pos, report)
    valid_seqs = prepare_sequences(valid_examples, vocab, max_pos, report)

    optimizer = AdamW(
        model.parameters(),
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.adam_eps,
        weight_decay=config.weight_decay,
    )
    halver = PlateauHalver(config.plateau_patience, config.plateau_min_delta)
    corrupt_rng = named_rng(config.seed, "corruption")
    order_rng = named_rng(config.seed, "data-order")
    dropout_rng = named_rng(config.seed, "dropout") if model.config.dropout > 0 else None

    for epoch in range(config.epochs):
        order = order_rng.permutation(len(train_seqs))
        epoch_total, epoch_count = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            losses, n_positions = [], 0
            for idx in batch:
                seq, categories = train_seqs[idx]
                corrupted, record = sample_and_corrupt(
                    seq, categories, sampling, corrupt_rng, vocab
                )
                loss = compute_loss(
                    model, seq, corrupted, record, reduction="sum", rng=dropout_rng
                )
                if loss is None:
                    report.skipped_examples += 1
                    continue
                losses.append(loss)
                n_positions += len(record.positions)
            if not losses:
                continue
            batch_loss = losses[0]
            for extra in losses[1:]:
                batch_loss = batch_loss + extra
            if config.reduction == "mean":
                batch_loss = batch_loss * (1.0 / n_positions)
            value = batch_loss.item()
            if not np.isfinite(value):
                raise NumericError(
                    f"training diverged: loss={value} at epoch {epoch}, "
                    f"batch starting {start}"
                )
            optimizer.zero_grad()
            batch_loss.backward()
            optimizer.step()
            epoch_total += value * (n_positions if config.reduction == "mean" else 1.0)
            epoch_count += n_positions

        train_mean = epoch_total / max(epoch_count, 1)
        report.log(
            epoch=epoch, split="train", loss_mean=round(train_mean, 6),
            loss_sum=round(epoch_total, 6), lr=optimizer.lr,
        )
        if valid_seqs:
            # same corruption draw every epoch so the plateau rule compares
            # like with like
            val_rng = named_rng(config.seed, "valid-corruption")
            val_mean, val_sum = _epoch_loss(
                model, valid_seqs, sampling, vocab, val_rng, report
            )
            report.log(
                epoch=epoch, split="valid", loss_mean=round(val_mean, 6),
                loss_sum=round(val_sum, 6), lr=optimizer.lr,
            )
            halver.update(optimizer, val_mean)
    return report
