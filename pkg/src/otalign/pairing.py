"""Monotone token pairing between two tokenizations of a text.

The pairing minimizes a dynamic program over the (target, source) grid
in which all three transitions into a cell charge that cell's token
cost, so the total is the sum of cell costs along a monotone lattice
path. A brute-force path enumerator serves as the testing oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .vocab import TokenSequence

BRUTE_FORCE_LIMIT = 6

# Backtrace preference when several predecessors tie: diagonal first,
# then the target-advance, then the source-advance. Diagonal-first
# maximizes one-to-one groups, the only ones eligible for transport.
_DIAG, _UP, _LEFT = 0, 1, 2


@dataclass(frozen=True)
class PairGroup:
    """Contiguous source positions paired with contiguous target positions."""

    src: tuple[int, ...]
    tgt: tuple[int, ...]

    @property
    def one_to_one(self) -> bool:
        return len(self.src) == 1 and len(self.tgt) == 1


@dataclass
class PairingResult:
    groups: list[PairGroup]
    total_cost: float
    table: np.ndarray | None = None


def _codes(text: str) -> np.ndarray:
    return np.fromiter(map(ord, text), dtype=np.int64, count=len(text))


def token_cost(a_text: str, b_text: str) -> float:
    """Levenshtein distance normalized by the longer length, in [0, 1]."""
    dist = kernels.levenshtein(_codes(a_text), _codes(b_text))
    return float(dist) / max(len(a_text), len(b_text), 1)


def _cost_grid(src: TokenSequence, tgt: TokenSequence) -> np.ndarray:
    grid = np.empty((len(tgt), len(src)))
    for k, b_text in enumerate(tgt.texts):
        for j, a_text in enumerate(src.texts):
            grid[k, j] = token_cost(b_text, a_text)
    return grid


def _groups_from_path(path: list[tuple[int, int]]) -> list[PairGroup]:
    """Group a lattice path: diagonal moves start a group, other moves extend it."""
    groups: list[PairGroup] = []
    cur_tgt = [path[0][0]]
    cur_src = [path[0][1]]
    for (pk, pj), (k, j) in zip(path, path[1:]):
        if k == pk + 1 and j == pj + 1:
            groups.append(PairGroup(src=tuple(cur_src), tgt=tuple(cur_tgt)))
            cur_tgt = [k]
            cur_src = [j]
        elif k == pk + 1:
            cur_tgt.append(k)
        else:
            cur_src.append(j)
    groups.append(PairGroup(src=tuple(cur_src), tgt=tuple(cur_tgt)))
    return groups


def pair_tokens(src: TokenSequence, tgt: TokenSequence) -> PairingResult:
    """Optimal monotone pairing of source positions to target positions."""
    if len(src) == 0 or len(tgt) == 0:
        raise ValueError("pair_tokens: sequences must be non-empty")
    cost = _cost_grid(src, tgt)
    table = kernels.pairing_table(cost)
    n_tgt, n_src = cost.shape

    k, j = n_tgt - 1, n_src - 1
    path = [(k, j)]
    while k > 0 or j > 0:
        target = table[k, j]
        c = cost[k, j]
        if k > 0 and j > 0 and table[k - 1, j - 1] + c == target:
            k, j = k - 1, j - 1
        elif k > 0 and table[k - 1, j] + c == target:
            k -= 1
        elif j > 0 and table[k, j - 1] + c == target:
            j -= 1
        else:  # pragma: no cover - table and backtrace use identical float ops
            raise AssertionError(f"backtrace found no predecessor at ({k}, {j})")
        path.append((k, j))
    path.reverse()

    return PairingResult(
        groups=_groups_from_path(path),
        total_cost=float(table[n_tgt - 1, n_src - 1]),
        table=table,
    )


def _path_cost(path: list[tuple[int, int]], cost: np.ndarray) -> float:
    total = cost[path[0][0], path[0][1]]
    for k, j in path[1:]:
        total = total + cost[k, j]
    return float(total)


def brute_force_pairing(src: TokenSequence, tgt: TokenSequence) -> PairingResult:
    """Enumerate every monotone lattice path and keep the cheapest.

    Paths are generated backward from the end cell, trying predecessors
    in the same preference order as the pair_tokens backtrace, and the
    first strict minimum is kept; ties therefore resolve identically.
    Costs are accumulated in forward path order, matching the table's
    additions bitwise.
    """
    if len(src) > BRUTE_FORCE_LIMIT or len(tgt) > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"brute_force_pairing handles at most {BRUTE_FORCE_LIMIT} tokens per side"
        )
    if len(src) == 0 or len(tgt) == 0:
        raise ValueError("brute_force_pairing: sequences must be non-empty")
    cost = _cost_grid(src, tgt)
    n_tgt, n_src = cost.shape

    best_cost: float | None = None
    best_path: list[tuple[int, int]] | None = None

    suffix: list[tuple[int, int]] = [(n_tgt - 1, n_src - 1)]

    def explore(k: int, j: int) -> None:
        nonlocal best_cost, best_path
        if k == 0 and j == 0:
            path = suffix[::-1]
            total = _path_cost(path, cost)
            if best_cost is None or total < best_cost:
                best_cost = total
                best_path = path
            return
        if k > 0 and j > 0:
            suffix.append((k - 1, j - 1))
            explore(k - 1, j - 1)
            suffix.pop()
        if k > 0:
            suffix.append((k - 1, j))
            explore(k - 1, j)
            suffix.pop()
        if j > 0:
            suffix.append((k, j - 1))
            explore(k, j - 1)
            suffix.pop()

    explore(n_tgt - 1, n_src - 1)
    assert best_path is not None
    return PairingResult(
        groups=_groups_from_path(best_path),
        total_cost=best_cost,
        table=None,
    )


def groups_to_obj(result: PairingResult) -> dict:
    """JSON-ready form used by the command line."""
    return {
        "total_cost": result.total_cost,
        "groups": [
            {"src": list(g.src), "tgt": list(g.tgt), "one_to_one": g.one_to_one}
            for g in result.groups
        ],
    }
