"""Fusion strategies, training losses, and a tabular toy trainer.

The combined objective mixes the causal one-hot loss with a
distillation term against the fused matrix:

    loss = weight * clm + (1 - weight) * fusion

where fusion is cross-entropy or KL divergence per step. The toy model
is a (vocab x vocab) logit table indexed by the previous token, trained
by full-batch gradient descent; its analytic gradient per step is

    weight * (softmax(z) - onehot(gold))
    + (1 - weight) * (softmax(z) - densify(fused_step))

which holds for both discrepancy choices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dist import KIND_PROBABILITIES, DistributionMatrix, StepDistribution

FUSION_FUNCTIONS = ("mince", "avgce")
DISCREPANCIES = ("cross_entropy", "kl")

# Probabilities are clamped before every log; gold ids can fall outside
# a step's window, in which case they score -log(PROB_CLAMP).
PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class FusionConfig:
    function: str = "mince"
    discrepancy: str = "cross_entropy"
    combination_weight: float = 0.8

    def __post_init__(self) -> None:
        if self.function not in FUSION_FUNCTIONS:
            raise ValueError(f"function must be one of {FUSION_FUNCTIONS}")
        if self.discrepancy not in DISCREPANCIES:
            raise ValueError(f"discrepancy must be one of {DISCREPANCIES}")
        if not 0.0 <= self.combination_weight <= 1.0:
            raise ValueError("combination_weight must lie in [0, 1]")


def _require_probabilities(matrix: DistributionMatrix, name: str) -> None:
    for s, step in enumerate(matrix.steps):
        if step.kind != KIND_PROBABILITIES:
            raise ValueError(f"{name}: step {s} is not a probability distribution")


def _step_prob(step: StepDistribution, token_id: int) -> float:
    hits = np.nonzero(step.indices == token_id)[0]
    return float(step.values[hits[0]]) if hits.size else 0.0


def clm_loss(q: DistributionMatrix, gold_ids) -> float:
    """Mean over steps of -log q[gold], clamped at PROB_CLAMP."""
    gold_ids = np.asarray(gold_ids, dtype=np.int64)
    if len(q.steps) == 0:
        raise ValueError("clm_loss: empty matrix")
    if gold_ids.shape[0] != len(q.steps):
        raise ValueError(
            f"clm_loss: {len(q.steps)} steps for {gold_ids.shape[0]} gold ids"
        )
    _require_probabilities(q, "clm_loss")
    total = 0.0
    for step, gid in zip(q.steps, gold_ids):
        total += -np.log(max(_step_prob(step, int(gid)), PROB_CLAMP))
    return total / len(q.steps)


def sequence_ce(matrix: DistributionMatrix) -> float:
    """Cross-entropy of a matrix against its own gold ids."""
    return clm_loss(matrix, matrix.gold_ids)


def fuse_combine(candidates: list[DistributionMatrix], cfg: FusionConfig) -> DistributionMatrix:
    """Combine candidate matrices.

    mince keeps the candidate with the lowest cross-entropy against the
    gold ids (earliest on ties). avgce averages the candidates per step
    with weights proportional to exp(-ce), over the union of indices.
    """
    if not candidates:
        raise ValueError("fuse_combine: empty candidate list")
    first = candidates[0]
    for c, cand in enumerate(candidates[1:], start=1):
        if cand.vocab != first.vocab:
            raise ValueError(f"fuse_combine: candidate {c} names vocabulary {cand.vocab!r}")
        if not np.array_equal(cand.gold_ids, first.gold_ids):
            raise ValueError(f"fuse_combine: candidate {c} has different gold ids")
    ces = np.array([sequence_ce(c) for c in candidates])
    if cfg.function == "mince":
        return candidates[int(np.argmin(ces))]
    weights = np.exp(-ces)
    weights = weights / weights.sum()
    steps = []
    for s in range(len(first.steps)):
        union = np.unique(np.concatenate([c.steps[s].indices for c in candidates]))
        values = np.zeros(union.shape[0])
        for w, cand in zip(weights, candidates):
            step = cand.steps[s]
            slots = np.searchsorted(union, step.indices)
            np.add.at(values, slots, w * step.values)
        steps.append(
            StepDistribution(indices=union, values=values / values.sum(), kind=KIND_PROBABILITIES)
        )
    return DistributionMatrix(vocab=first.vocab, gold_ids=first.gold_ids.copy(), steps=steps)


def _step_discrepancy(q_step: StepDistribution, p_step: StepDistribution, discrepancy: str) -> float:
    lookup = {int(i): float(v) for i, v in zip(q_step.indices, q_step.values)}
    total = 0.0
    for idx, p in zip(p_step.indices, p_step.values):
        if p <= 0.0:
            continue
        q = max(lookup.get(int(idx), 0.0), PROB_CLAMP)
        if discrepancy == "kl":
            total += p * (np.log(p) - np.log(q))
        else:
            total += -p * np.log(q)
    return total


def fusion_loss(q: DistributionMatrix, p_f: DistributionMatrix, cfg: FusionConfig) -> float:
    """Mean per-step discrepancy between predictions q and the fused matrix."""
    if len(q.steps) != len(p_f.steps):
        raise ValueError(
            f"fusion_loss: {len(q.steps)} prediction steps vs {len(p_f.steps)} fused steps"
        )
    if len(q.steps) == 0:
        raise ValueError("fusion_loss: empty matrices")
    _require_probabilities(q, "fusion_loss")
    _require_probabilities(p_f, "fusion_loss")
    total = 0.0
    for q_step, p_step in zip(q.steps, p_f.steps):
        total += _step_discrepancy(q_step, p_step, cfg.discrepancy)
    return total / len(q.steps)


def combined_loss(q: DistributionMatrix, gold_ids, p_f: DistributionMatrix, cfg: FusionConfig) -> float:
    """Weighted combination of the causal loss and the fusion loss."""
    w = cfg.combination_weight
    return w * clm_loss(q, gold_ids) + (1.0 - w) * fusion_loss(q, p_f, cfg)


def densify(step: StepDistribution, vocab_size: int) -> np.ndarray:
    """Dense probability vector with window masses at their token ids."""
    dense = np.zeros(vocab_size)
    dense[step.indices] = step.values
    return dense


@dataclass(eq=False)
class ToyModel:
    """Bigram logit table: row = previous token id, columns = next-token logits."""

    vocab_size: int
    table: np.ndarray

    def __post_init__(self) -> None:
        self.table = np.asarray(self.table, dtype=np.float64)
        if self.table.shape != (self.vocab_size, self.vocab_size):
            raise ValueError(
                f"table shape {self.table.shape} does not match vocab size {self.vocab_size}"
            )
        if not np.all(np.isfinite(self.table)):
            raise ValueError("table has non-finite parameters")

    @classmethod
    def zeros(cls, vocab_size: int) -> "ToyModel":
        return cls(vocab_size=vocab_size, table=np.zeros((vocab_size, vocab_size)))

    @classmethod
    def random(cls, vocab_size: int, seed: int, scale: float = 0.1) -> "ToyModel":
        rng = np.random.default_rng(seed)
        return cls(vocab_size=vocab_size, table=scale * rng.standard_normal((vocab_size, vocab_size)))

    def copy(self) -> "ToyModel":
        return ToyModel(vocab_size=self.vocab_size, table=self.table.copy())


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_matrix(model: ToyModel, ids, vocab: str = "") -> DistributionMatrix:
    """Model predictions for positions 1..K-1 of a token-id sequence.

    Position 0 has no previous token under the bigram table and is not
    predicted; the result has K-1 dense steps with gold ids ids[1:].
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.shape[0] < 2:
        raise ValueError("predict_matrix: sequence must have at least 2 tokens")
    probs = _softmax_rows(model.table[ids[:-1]])
    indices = np.arange(model.vocab_size, dtype=np.int64)
    steps = [
        StepDistribution(indices=indices.copy(), values=row, kind=KIND_PROBABILITIES)
        for row in probs
    ]
    return DistributionMatrix(vocab=vocab, gold_ids=ids[1:], steps=steps)


def matrix_tail(matrix: DistributionMatrix) -> DistributionMatrix:
    """Drop position 0, keeping steps aligned with predictable positions."""
    return DistributionMatrix(
        vocab=matrix.vocab,
        gold_ids=matrix.gold_ids[1:].copy(),
        steps=list(matrix.steps[1:]),
    )


@dataclass(frozen=True)
class TraceRow:
    epoch: int
    clm: float
    fusion: float
    combined: float


def _corpus_arrays(corpus, fused, vocab_size):
    """Precompute per-sequence context ids, gold ids, and dense fused rows."""
    if len(corpus) != len(fused):
        raise ValueError(f"{len(corpus)} sequences but {len(fused)} fused matrices")
    if not corpus:
        raise ValueError("empty corpus")
    prepared = []
    for i, (ids, pf) in enumerate(zip(corpus, fused)):
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape[0] < 2:
            raise ValueError(f"sequence {i}: must have at least 2 tokens")
        if not np.array_equal(pf.gold_ids, ids):
            raise ValueError(f"sequence {i}: fused matrix gold ids do not match the corpus")
        pf_rows = np.stack([densify(step, vocab_size) for step in pf.steps[1:]])
        prepared.append((ids[:-1], ids[1:], pf_rows))
    return prepared


def _gradient_from_rows(model, prepared, cfg):
    n_seqs = len(prepared)
    w = cfg.combination_weight
    grad = np.zeros_like(model.table)
    for ctx, gold, pf_rows in prepared:
        q = _softmax_rows(model.table[ctx])
        onehot = np.zeros_like(q)
        onehot[np.arange(gold.shape[0]), gold] = 1.0
        g = w * (q - onehot) + (1.0 - w) * (q - pf_rows)
        np.add.at(grad, ctx, g / (gold.shape[0] * n_seqs))
    return grad


def _corpus_losses_from_rows(model, prepared, cfg):
    """(clm, fusion, combined) means over sequences for the current table."""
    clm_terms = []
    fusion_terms = []
    for ctx, gold, pf_rows in prepared:
        q = _softmax_rows(model.table[ctx])
        q_gold = np.maximum(q[np.arange(gold.shape[0]), gold], PROB_CLAMP)
        clm_terms.append(float(np.mean(-np.log(q_gold))))
        q_safe = np.maximum(q, PROB_CLAMP)
        if cfg.discrepancy == "kl":
            ratio = np.zeros_like(pf_rows)
            mask = pf_rows > 0.0
            ratio[mask] = pf_rows[mask] * (np.log(pf_rows[mask]) - np.log(q_safe[mask]))
            fusion_terms.append(float(np.mean(ratio.sum(axis=1))))
        else:
            fusion_terms.append(float(np.mean((-pf_rows * np.log(q_safe)).sum(axis=1))))
    clm = float(np.mean(clm_terms))
    fusion = float(np.mean(fusion_terms))
    w = cfg.combination_weight
    return clm, fusion, w * clm + (1.0 - w) * fusion


def corpus_losses(qs, fused, cfg: FusionConfig):
    """(clm, fusion, combined) means over a corpus of prediction matrices."""
    if len(qs) != len(fused):
        raise ValueError(f"{len(qs)} prediction matrices but {len(fused)} fused matrices")
    if not qs:
        raise ValueError("empty corpus")
    clm = float(np.mean([clm_loss(q, q.gold_ids) for q in qs]))
    fusion = float(np.mean([fusion_loss(q, p, cfg) for q, p in zip(qs, fused)]))
    w = cfg.combination_weight
    return clm, fusion, w * clm + (1.0 - w) * fusion


def train_toy(
    model: ToyModel,
    corpus,
    fused,
    cfg: FusionConfig,
    lr: float,
    epochs: int,
):
    """Full-batch gradient descent on the combined loss.

    corpus is a list of token-id sequences; fused the matching fused
    matrices (gold ids must agree). Position 0 of every sequence is not
    predictable by the bigram table and is skipped. Returns the trained
    model copy and a trace with one row per epoch boundary (epochs+1
    rows; zero epochs leaves the model unchanged).
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    if epochs < 0:
        raise ValueError("epochs must be nonnegative")
    model = model.copy()
    prepared = _corpus_arrays(corpus, fused, model.vocab_size)

    trace = []
    clm, fusion, combined = _corpus_losses_from_rows(model, prepared, cfg)
    trace.append(TraceRow(epoch=0, clm=clm, fusion=fusion, combined=combined))
    for epoch in range(1, epochs + 1):
        model.table -= lr * _gradient_from_rows(model, prepared, cfg)
        clm, fusion, combined = _corpus_losses_from_rows(model, prepared, cfg)
        if not np.isfinite(combined):
            raise ValueError(f"non-finite loss at epoch {epoch}")
        trace.append(TraceRow(epoch=epoch, clm=clm, fusion=fusion, combined=combined))
    return model, trace


def toy_gradient(model: ToyModel, corpus, fused, cfg: FusionConfig) -> np.ndarray:
    """Analytic gradient of the corpus combined loss at the current table."""
    prepared = _corpus_arrays(corpus, fused, model.vocab_size)
    return _gradient_from_rows(model, prepared, cfg)


def toy_loss(model: ToyModel, corpus, fused, cfg: FusionConfig) -> float:
    """Corpus combined loss at the current table (finite-difference target)."""
    prepared = _corpus_arrays(corpus, fused, model.vocab_size)
    return _corpus_losses_from_rows(model, prepared, cfg)[2]
