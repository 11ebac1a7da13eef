"""Per-step top-k distributions and their JSON-lines serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .vocab import Vocabulary

KIND_LOGITS = "logits"
KIND_PROBABILITIES = "probabilities"

PROB_SUM_TOL = 1e-9


class MatrixFormatError(ValueError):
    """Malformed distribution-matrix file."""


@dataclass(eq=False)
class StepDistribution:
    """Sparse distribution over one vocabulary window.

    indices and values are parallel arrays; kind says whether values are
    raw logits or probabilities over the retained window.
    """

    indices: np.ndarray
    values: np.ndarray
    kind: str = KIND_LOGITS

    def __post_init__(self) -> None:
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.indices.ndim != 1 or self.values.ndim != 1:
            raise ValueError("step indices and values must be 1-d")
        if self.indices.shape[0] != self.values.shape[0]:
            raise ValueError(
                f"step has {self.indices.shape[0]} indices but {self.values.shape[0]} values"
            )
        if self.kind not in (KIND_LOGITS, KIND_PROBABILITIES):
            raise ValueError(f"unknown step kind {self.kind!r}")

    def __len__(self) -> int:
        return int(self.indices.shape[0])


@dataclass(eq=False)
class DistributionMatrix:
    """One sequence's gold token ids plus a step distribution per position."""

    vocab: str
    gold_ids: np.ndarray
    steps: list[StepDistribution] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.gold_ids = np.asarray(self.gold_ids, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.gold_ids.shape[0])


def softmax_step(step: StepDistribution) -> StepDistribution:
    """Exponentiate-and-normalize a logits step over its retained window.

    The max logit is subtracted first so extreme values cannot overflow.
    """
    if step.kind != KIND_LOGITS:
        raise ValueError("softmax_step expects a logits step")
    if len(step) == 0:
        raise ValueError("softmax_step: empty step")
    shifted = step.values - step.values.max()
    expd = np.exp(shifted)
    return StepDistribution(
        indices=step.indices.copy(),
        values=expd / expd.sum(),
        kind=KIND_PROBABILITIES,
    )


def validate_matrix(matrix: DistributionMatrix, vocabulary: Vocabulary) -> list[str]:
    """All invariant violations, one message per finding (empty list = ok)."""
    violations: list[str] = []
    if matrix.vocab != vocabulary.name:
        violations.append(
            f"matrix names vocabulary {matrix.vocab!r} but was checked against {vocabulary.name!r}"
        )
    if len(matrix.steps) != len(matrix):
        violations.append(
            f"{len(matrix.steps)} steps for {len(matrix)} gold ids"
        )
    for gid in matrix.gold_ids:
        if not 0 <= gid < vocabulary.size:
            violations.append(f"gold id {int(gid)} outside vocabulary of size {vocabulary.size}")
    for s, step in enumerate(matrix.steps):
        if len(np.unique(step.indices)) != len(step):
            violations.append(f"step {s}: duplicate indices")
        bad = step.indices[(step.indices < 0) | (step.indices >= vocabulary.size)]
        for idx in bad:
            violations.append(f"step {s}: index {int(idx)} outside vocabulary of size {vocabulary.size}")
        if step.kind == KIND_PROBABILITIES:
            if np.any(step.values < 0):
                violations.append(f"step {s}: negative probability")
            total = float(step.values.sum())
            if abs(total - 1.0) > PROB_SUM_TOL:
                violations.append(f"step {s}: probabilities sum to {total!r}, not 1")
        if not np.all(np.isfinite(step.values)):
            violations.append(f"step {s}: non-finite value")
    return violations


def _step_to_obj(step: StepDistribution) -> dict:
    return {
        "idx": [int(i) for i in step.indices],
        "val": [float(v) for v in step.values],
        "kind": step.kind,
    }


def _matrix_to_line(matrix: DistributionMatrix) -> str:
    obj = {
        "vocab": matrix.vocab,
        "gold_ids": [int(i) for i in matrix.gold_ids],
        "steps": [_step_to_obj(s) for s in matrix.steps],
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _line_to_matrix(line: str, lineno: int) -> DistributionMatrix:
    def fail(msg: str):
        raise MatrixFormatError(f"line {lineno}: {msg}")

    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        fail(f"invalid JSON ({exc.msg})")
    if not isinstance(obj, dict):
        fail("record is not an object")
    for key in ("vocab", "gold_ids", "steps"):
        if key not in obj:
            fail(f"missing field {key!r}")
    if not isinstance(obj["vocab"], str):
        fail("'vocab' must be a string")
    gold = obj["gold_ids"]
    if not isinstance(gold, list) or not all(isinstance(i, int) for i in gold):
        fail("'gold_ids' must be a list of integers")
    raw_steps = obj["steps"]
    if not isinstance(raw_steps, list):
        fail("'steps' must be a list")
    if len(raw_steps) != len(gold):
        fail(f"{len(raw_steps)} steps for {len(gold)} gold ids")
    steps = []
    for s, raw in enumerate(raw_steps):
        if not isinstance(raw, dict) or any(k not in raw for k in ("idx", "val", "kind")):
            fail(f"step {s}: expected an object with 'idx', 'val', 'kind'")
        idx, val, kind = raw["idx"], raw["val"], raw["kind"]
        if not isinstance(idx, list) or not all(isinstance(i, int) for i in idx):
            fail(f"step {s}: 'idx' must be a list of integers")
        if not isinstance(val, list) or not all(isinstance(v, (int, float)) for v in val):
            fail(f"step {s}: 'val' must be a list of numbers")
        if len(idx) != len(val):
            fail(f"step {s}: {len(idx)} indices but {len(val)} values")
        if kind not in (KIND_LOGITS, KIND_PROBABILITIES):
            fail(f"step {s}: unknown kind {kind!r}")
        steps.append(StepDistribution(indices=idx, values=val, kind=kind))
    return DistributionMatrix(vocab=obj["vocab"], gold_ids=gold, steps=steps)


def read_matrices(path: str | Path) -> list[DistributionMatrix]:
    """Read a JSON-lines matrix file, one sequence per line."""
    path = Path(path)
    if not path.is_file():
        raise MatrixFormatError(f"matrix file not found: {path}")
    matrices = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            matrices.append(_line_to_matrix(line, lineno))
    return matrices


def write_matrices(matrices, path: str | Path) -> None:
    """Write matrices in the canonical one-line-per-sequence format."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for matrix in matrices:
            fh.write(_matrix_to_line(matrix))
            fh.write("\n")


def read_matrix(path: str | Path) -> DistributionMatrix:
    """Read a matrix file that must contain exactly one sequence."""
    matrices = read_matrices(path)
    if len(matrices) != 1:
        raise MatrixFormatError(f"{path}: expected exactly one sequence, found {len(matrices)}")
    return matrices[0]


def write_matrix(matrix: DistributionMatrix, path: str | Path) -> None:
    write_matrices([matrix], path)


def steps_equal(a: StepDistribution, b: StepDistribution, atol: float = 0.0) -> bool:
    """Exact (or atol-bounded) equality of two steps."""
    if a.kind != b.kind or len(a) != len(b):
        return False
    if not np.array_equal(a.indices, b.indices):
        return False
    if atol == 0.0:
        return bool(np.array_equal(a.values, b.values))
    return bool(np.allclose(a.values, b.values, rtol=0.0, atol=atol))


def matrices_equal(a: DistributionMatrix, b: DistributionMatrix, atol: float = 0.0) -> bool:
    return (
        a.vocab == b.vocab
        and np.array_equal(a.gold_ids, b.gold_ids)
        and len(a.steps) == len(b.steps)
        and all(steps_equal(x, y, atol) for x, y in zip(a.steps, b.steps))
    )
