"""Entropic optimal transport between two top-k token windows.

The cost matrix is the normalized edit distance between decoded window
entries; the plan is computed by Sinkhorn scaling of exp(-temperature * C)
and reduced to a fused step by per-row argmax extraction with
accumulation of rows that select the same column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dist import KIND_PROBABILITIES, StepDistribution
from .pairing import token_cost
from .vocab import Vocabulary

# A cost matrix is a plain (n, m) float array with entries in [0, 1].
CostMatrix = np.ndarray

MARGINAL_TOL = 1e-9

EXACT_2X2_GRID = 100_000


class SolverError(RuntimeError):
    """Sinkhorn iteration produced non-finite values."""


@dataclass(frozen=True)
class OtConfig:
    """Sinkhorn tunables.

    temperature is the sharpness of the plan initialization
    exp(-temperature * C); threshold bounds the L1 marginal deviation at
    termination.
    """

    temperature: float = 10.0
    threshold: float = 1e-5
    max_iterations: int = 1000

    def __post_init__(self) -> None:
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(eq=False)
class TransportPlan:
    """Nonnegative (n, m) plan with its requested marginals."""

    entries: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    iterations: int
    converged: bool

    def marginal_error(self) -> float:
        """Max of the two L1 deviations from the requested marginals."""
        row = np.abs(self.entries.sum(axis=1) - self.row_marginal).sum()
        col = np.abs(self.entries.sum(axis=0) - self.col_marginal).sum()
        return float(max(row, col))


def build_cost(
    src_step: StepDistribution,
    tgt_step: StepDistribution,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
) -> CostMatrix:
    """Pairwise normalized edit distances between decoded window entries."""
    if len(src_step) == 0 or len(tgt_step) == 0:
        raise ValueError("build_cost: steps must be non-empty")
    src_texts = [src_vocab.decode(int(i)) for i in src_step.indices]
    tgt_texts = [tgt_vocab.decode(int(i)) for i in tgt_step.indices]
    cost = np.empty((len(src_texts), len(tgt_texts)))
    for x, a in enumerate(src_texts):
        for y, b in enumerate(tgt_texts):
            cost[x, y] = token_cost(a, b)
    return cost


def _check_marginal(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if np.any(p < 0):
        raise ValueError(f"{name} has negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > MARGINAL_TOL:
        raise ValueError(f"{name} sums to {total!r}, expected 1 within {MARGINAL_TOL}")
    return p


def sinkhorn(cost: CostMatrix, a, b, cfg: OtConfig = OtConfig()) -> TransportPlan:
    """Solve the entropic transport problem by alternating rescaling.

    Starting from exp(-temperature * cost), rows are scaled to match a,
    then columns to match b, until the larger of the two L1 marginal
    deviations drops to cfg.threshold or max_iterations is exhausted.
    Rows and columns whose marginal is exactly zero are pinned to zero.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be a matrix")
    if not np.all(np.isfinite(cost)) or np.any(cost < 0) or np.any(cost > 1):
        raise ValueError("cost entries must be finite and within [0, 1]")
    a = _check_marginal(a, "row marginal")
    b = _check_marginal(b, "column marginal")
    if cost.shape != (a.shape[0], b.shape[0]):
        raise ValueError(
            f"cost shape {cost.shape} does not match marginals ({a.shape[0]}, {b.shape[0]})"
        )
    kernel = np.exp(-cfg.temperature * cost)
    entries, iterations, converged, finite = kernels.sinkhorn_scale(
        kernel, a, b, cfg.threshold, cfg.max_iterations
    )
    if not finite:
        raise SolverError(f"non-finite plan at iteration {iterations}")
    return TransportPlan(
        entries=entries,
        row_marginal=a.copy(),
        col_marginal=b.copy(),
        iterations=iterations,
        converged=converged,
    )


def plan_cost(cost: CostMatrix, plan: TransportPlan) -> float:
    """Total transported cost <C, plan>."""
    return float((np.asarray(cost) * plan.entries).sum())


def exact_ot_2x2(cost: CostMatrix, a, b) -> TransportPlan:
    """Grid-scan oracle for the 2x2 transport problem.

    The feasible set is the segment t = plan[0, 0] in
    [max(0, a0 + b0 - 1), min(a0, b0)] and the cost is affine in t, so a
    dense scan finds the optimum; the first grid minimizer is returned.
    """
    cost = np.asarray(cost, dtype=np.float64)
    a = _check_marginal(a, "row marginal")
    b = _check_marginal(b, "column marginal")
    if cost.shape != (2, 2) or a.shape[0] != 2 or b.shape[0] != 2:
        raise ValueError("exact_ot_2x2 requires a 2x2 cost and length-2 marginals")
    lo = max(0.0, a[0] + b[0] - 1.0)
    hi = min(a[0], b[0])
    ts = np.linspace(lo, hi, EXACT_2X2_GRID)
    totals = (
        cost[0, 0] * ts
        + cost[0, 1] * (a[0] - ts)
        + cost[1, 0] * (b[0] - ts)
        + cost[1, 1] * (1.0 - a[0] - b[0] + ts)
    )
    t = float(ts[np.argmin(totals)])
    entries = np.array(
        [
            [t, a[0] - t],
            [b[0] - t, 1.0 - a[0] - b[0] + t],
        ]
    )
    return TransportPlan(
        entries=np.maximum(entries, 0.0),
        row_marginal=a.copy(),
        col_marginal=b.copy(),
        iterations=0,
        converged=True,
    )


def extract_fused(plan: TransportPlan, tgt_step: StepDistribution) -> StepDistribution:
    """Reduce a plan to a fused step over the target window.

    Each source row contributes its largest entry to the column holding
    it (first column on ties); contributions landing on the same column
    accumulate. The result keeps the target index list and is
    renormalized to a probability distribution.
    """
    entries = plan.entries
    if entries.size == 0:
        raise ValueError("extract_fused: empty plan")
    if entries.shape[1] != len(tgt_step):
        raise ValueError(
            f"plan has {entries.shape[1]} columns for a target window of {len(tgt_step)}"
        )
    accumulated = np.zeros(entries.shape[1])
    best_cols = np.argmax(entries, axis=1)
    for x, y in enumerate(best_cols):
        accumulated[y] += entries[x, y]
    total = accumulated.sum()
    if not total > 0:
        raise ValueError("extract_fused: no transported mass")
    return StepDistribution(
        indices=tgt_step.indices.copy(),
        values=accumulated / total,
        kind=KIND_PROBABILITIES,
    )
