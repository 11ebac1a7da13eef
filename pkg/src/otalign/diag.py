"""Distribution-geometry diagnostics over precomputed 2D embeddings.

A step's window entries are plotted as weighted 2D points; compactness
is the weighted mean distance to the weighted center, and the center
distance compares a fused step's center with the target step's. The
embeddings themselves are inputs (a seeded toy embedding ships for
demos); no manifold learning happens here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dist import StepDistribution


@dataclass(eq=False)
class EmbeddedToken:
    """Window entries as 2D points with nonnegative weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("points must be an (n, 2) array")
        if self.weights.shape != (self.points.shape[0],):
            raise ValueError("weights must parallel points")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if not self.weights.sum() > 0:
            raise ValueError("total weight must be positive")


def weighted_center(token: EmbeddedToken) -> np.ndarray:
    """Weighted mean of the token's points."""
    return (token.weights[:, None] * token.points).sum(axis=0) / token.weights.sum()


def compactness(token: EmbeddedToken) -> float:
    """Weighted mean Euclidean distance from each point to the center."""
    center = weighted_center(token)
    dists = np.linalg.norm(token.points - center, axis=1)
    return float((token.weights * dists).sum() / token.weights.sum())


def center_distance(a: EmbeddedToken, b: EmbeddedToken) -> float:
    """Euclidean distance between the two weighted centers."""
    return float(np.linalg.norm(weighted_center(a) - weighted_center(b)))


def toy_embedding(vocab_size: int, seed: int) -> np.ndarray:
    """Deterministic pseudo-random 2D point per token id."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((vocab_size, 2))


def embed_step(step: StepDistribution, embedding: np.ndarray) -> EmbeddedToken:
    """Embed a probability step: points from its ids, weights its values."""
    if np.any(step.indices >= embedding.shape[0]) or np.any(step.indices < 0):
        raise ValueError("step index outside the embedding table")
    return EmbeddedToken(points=embedding[step.indices], weights=step.values.copy())


def save_embedding(embedding: np.ndarray, path: str | Path) -> None:
    """Write the id -> [x, y] JSON format."""
    obj = {str(i): [float(x), float(y)] for i, (x, y) in enumerate(embedding)}
    Path(path).write_text(json.dumps(obj, separators=(",", ":")) + "\n", encoding="utf-8")


def load_embedding(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"embedding file not found: {path}")
    obj = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(obj, dict) or not obj:
        raise ValueError(f"{path}: expected a non-empty id -> [x, y] object")
    size = len(obj)
    table = np.zeros((size, 2))
    seen = [False] * size
    for key, point in obj.items():
        try:
            idx = int(key)
        except ValueError:
            raise ValueError(f"{path}: non-integer id {key!r}") from None
        if not 0 <= idx < size or seen[idx]:
            raise ValueError(f"{path}: ids must be dense 0..{size - 1}, got {key!r}")
        if not isinstance(point, list) or len(point) != 2:
            raise ValueError(f"{path}: id {key} must map to [x, y]")
        table[idx] = point
        seen[idx] = True
    return table
