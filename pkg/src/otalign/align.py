"""Full-matrix alignment: pairing, per-pair transport, and baselines.

align_matrices produces the fused matrix for one (source, target)
sequence pair: one-to-one pairing groups are aligned by optimal
transport between the two top-k windows, every other position falls
back to a one-hot at its gold target token. align_baseline swaps the
transport for the hard mappings (exact match or minimum edit distance)
used as comparison strategies. fuse_pipeline chains several sources
through the running fused matrix, combining after each stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dist import (
    KIND_LOGITS,
    KIND_PROBABILITIES,
    DistributionMatrix,
    StepDistribution,
    softmax_step,
)
from .fusion import fuse_combine
from .pairing import pair_tokens, token_cost
from .transport import OtConfig, SolverError, build_cost, extract_fused, plan_cost, sinkhorn
from .vocab import Vocabulary, decode_sequence

STRATEGIES = ("ot", "mined", "em")


@dataclass(frozen=True)
class AlignConfig:
    strategy: str = "ot"
    ot: OtConfig = field(default_factory=OtConfig)
    window: int = 10

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.window < 1:
            raise ValueError("window must be at least 1")


@dataclass
class AlignStats:
    """Counters accumulated while aligning one or more sequence pairs."""

    one_to_one_groups: int = 0
    fallback_steps: int = 0
    plan_costs: list[float] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)

    @property
    def mean_plan_cost(self) -> float:
        return float(np.mean(self.plan_costs)) if self.plan_costs else 0.0

    @property
    def mean_iterations(self) -> float:
        return float(np.mean(self.iterations)) if self.iterations else 0.0

    def to_obj(self) -> dict:
        return {
            "one_to_one_groups": self.one_to_one_groups,
            "fallback_steps": self.fallback_steps,
            "mean_plan_cost": self.mean_plan_cost,
            "mean_iterations": self.mean_iterations,
        }


def window_step(step: StepDistribution, window: int) -> StepDistribution:
    """Top-k truncation plus conversion to window probabilities.

    Entries are ranked by value descending (ties to the lower token id);
    mass outside the retained window is discarded before normalizing.
    """
    if len(step) == 0:
        raise ValueError("window_step: empty step")
    if len(step) > window:
        order = np.lexsort((step.indices, -step.values))[:window]
        order.sort()  # keep original index order within the window
        step = StepDistribution(
            indices=step.indices[order], values=step.values[order], kind=step.kind
        )
    if step.kind == KIND_LOGITS:
        return softmax_step(step)
    total = step.values.sum()
    if not total > 0:
        raise ValueError("window_step: probabilities sum to zero")
    return StepDistribution(
        indices=step.indices.copy(), values=step.values / total, kind=KIND_PROBABILITIES
    )


def one_hot_step(token_id: int) -> StepDistribution:
    return StepDistribution(
        indices=np.array([token_id], dtype=np.int64),
        values=np.array([1.0]),
        kind=KIND_PROBABILITIES,
    )


def is_one_hot(step: StepDistribution) -> bool:
    return len(step) == 1 and step.kind == KIND_PROBABILITIES and step.values[0] == 1.0


def normalize_matrix(matrix: DistributionMatrix, window: int) -> DistributionMatrix:
    """Window-truncate and normalize every step to probabilities."""
    return DistributionMatrix(
        vocab=matrix.vocab,
        gold_ids=matrix.gold_ids.copy(),
        steps=[window_step(s, window) for s in matrix.steps],
    )


def _check_pair(
    src: DistributionMatrix,
    tgt: DistributionMatrix,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
) -> None:
    if src.vocab != src_vocab.name:
        raise ValueError(f"source matrix names vocabulary {src.vocab!r}, got {src_vocab.name!r}")
    if tgt.vocab != tgt_vocab.name:
        raise ValueError(f"target matrix names vocabulary {tgt.vocab!r}, got {tgt_vocab.name!r}")
    if len(src.steps) != len(src) or len(tgt.steps) != len(tgt):
        raise ValueError("matrix has a step count different from its gold length")


def _ot_fuse(
    src_step: StepDistribution,
    tgt_step: StepDistribution,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    cfg: AlignConfig,
    stats: AlignStats,
    step_index: int,
) -> StepDistribution:
    cost = build_cost(src_step, tgt_step, src_vocab, tgt_vocab)
    try:
        plan = sinkhorn(cost, src_step.values, tgt_step.values, cfg.ot)
    except SolverError as exc:
        raise SolverError(f"step {step_index}: {exc}") from exc
    stats.plan_costs.append(plan_cost(cost, plan))
    stats.iterations.append(plan.iterations)
    return extract_fused(plan, tgt_step)


def _transfer_fuse(
    src_step: StepDistribution,
    tgt_step: StepDistribution,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    strategy: str,
    gold_id: int,
) -> StepDistribution:
    """Hard-mapping transfer used by the em and mined baselines.

    Source values move unchanged onto target window entries (exact string
    match for em, minimum token cost for mined, ties to the lowest target
    position), accumulate, and are renormalized. A step where nothing
    transfers falls back to a one-hot at the gold target id.
    """
    src_texts = [src_vocab.decode(int(i)) for i in src_step.indices]
    tgt_texts = [tgt_vocab.decode(int(i)) for i in tgt_step.indices]
    accumulated = np.zeros(len(tgt_texts))
    for x, text in enumerate(src_texts):
        if strategy == "em":
            matches = [y for y, t in enumerate(tgt_texts) if t == text]
            if not matches:
                continue
            y = matches[0]
        else:
            costs = [token_cost(text, t) for t in tgt_texts]
            y = int(np.argmin(costs))
        accumulated[y] += src_step.values[x]
    total = accumulated.sum()
    if not total > 0:
        return one_hot_step(gold_id)
    return StepDistribution(
        indices=tgt_step.indices.copy(),
        values=accumulated / total,
        kind=KIND_PROBABILITIES,
    )


def _align(
    src: DistributionMatrix,
    tgt: DistributionMatrix,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    cfg: AlignConfig,
    stats: AlignStats,
) -> DistributionMatrix:
    _check_pair(src, tgt, src_vocab, tgt_vocab)
    src_seq = decode_sequence(src_vocab, src.gold_ids)
    tgt_seq = decode_sequence(tgt_vocab, tgt.gold_ids)
    pairing = pair_tokens(src_seq, tgt_seq)

    fused: list[StepDistribution | None] = [None] * len(tgt)
    for group in pairing.groups:
        if group.one_to_one:
            j = group.src[0]
            k = group.tgt[0]
            src_step = window_step(src.steps[j], cfg.window)
            tgt_step = window_step(tgt.steps[k], cfg.window)
            if cfg.strategy == "ot":
                fused[k] = _ot_fuse(src_step, tgt_step, src_vocab, tgt_vocab, cfg, stats, k)
            else:
                fused[k] = _transfer_fuse(
                    src_step, tgt_step, src_vocab, tgt_vocab, cfg.strategy, int(tgt.gold_ids[k])
                )
            stats.one_to_one_groups += 1
        else:
            for k in group.tgt:
                fused[k] = one_hot_step(int(tgt.gold_ids[k]))
            stats.fallback_steps += len(group.tgt)
    assert all(step is not None for step in fused)
    return DistributionMatrix(vocab=tgt.vocab, gold_ids=tgt.gold_ids.copy(), steps=fused)


def align_matrices(
    src: DistributionMatrix,
    tgt: DistributionMatrix,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    cfg: AlignConfig = AlignConfig(),
    stats: AlignStats | None = None,
) -> DistributionMatrix:
    """Fused matrix over the target vocabulary via optimal transport."""
    if cfg.strategy != "ot":
        raise ValueError("align_matrices handles strategy 'ot'; use align_baseline")
    return _align(src, tgt, src_vocab, tgt_vocab, cfg, stats if stats is not None else AlignStats())


def align_baseline(
    src: DistributionMatrix,
    tgt: DistributionMatrix,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    cfg: AlignConfig,
    stats: AlignStats | None = None,
) -> DistributionMatrix:
    """Fused matrix via the em or mined hard-mapping strategies."""
    if cfg.strategy not in ("em", "mined"):
        raise ValueError("align_baseline handles strategies 'em' and 'mined'")
    return _align(src, tgt, src_vocab, tgt_vocab, cfg, stats if stats is not None else AlignStats())


def align_with_strategy(
    src: DistributionMatrix,
    tgt: DistributionMatrix,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    cfg: AlignConfig,
    stats: AlignStats | None = None,
) -> DistributionMatrix:
    if cfg.strategy == "ot":
        return align_matrices(src, tgt, src_vocab, tgt_vocab, cfg, stats)
    return align_baseline(src, tgt, src_vocab, tgt_vocab, cfg, stats)


def fuse_pipeline(
    sources: list[DistributionMatrix],
    tgt: DistributionMatrix,
    vocabs: Mapping[str, Vocabulary],
    cfg: AlignConfig,
    fusion_cfg,
    stats: AlignStats | None = None,
) -> DistributionMatrix:
    """Recursive multi-source fusion.

    The running matrix starts as the window-normalized target; each stage
    aligns it with the next source and combines the pair with the fusion
    strategy, so the stage-i output carries knowledge of sources 1..i.
    """
    if not sources:
        raise ValueError("fuse_pipeline requires at least one source")
    if tgt.vocab not in vocabs:
        raise ValueError(f"no vocabulary provided for {tgt.vocab!r}")
    tgt_vocab = vocabs[tgt.vocab]
    running = normalize_matrix(tgt, cfg.window)
    for src in sources:
        if src.vocab not in vocabs:
            raise ValueError(f"no vocabulary provided for {src.vocab!r}")
        aligned = align_with_strategy(src, running, vocabs[src.vocab], tgt_vocab, cfg, stats)
        running = fuse_combine([running, aligned], fusion_cfg)
    return running
