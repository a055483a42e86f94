"""Maximum-weight bipartite matching with forbidden edges.

Kuhn–Munkres via ``scipy.optimize.linear_sum_assignment`` on negated
weights; forbidden edges cost +inf so they can never be selected. Ties
are settled row by row toward the lowest column by re-solving with rows
pinned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment

from d2d_assign.errors import DomainError


class _Forbidden:
    __slots__ = ()

    def __repr__(self) -> str:
        return "FORBIDDEN"


FORBIDDEN = _Forbidden()


@dataclass(frozen=True, slots=True, eq=False)
class WeightMatrix:
    """Edge weights; ``forbidden[r, c]`` marks edges that may not be used."""

    weights: NDArray[np.float64]
    forbidden: NDArray[np.bool_]

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        f = np.array(self.forbidden, dtype=bool)
        if w.ndim != 2 or w.shape[0] < 1:
            raise DomainError("weight matrix must be 2-D with at least one row")
        if f.shape != w.shape:
            raise DomainError("forbidden mask must match the weight shape")
        if not np.all(np.isfinite(w[~f])):
            raise DomainError("allowed weights must be finite")
        w[f] = 0.0
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "forbidden", f)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float | _Forbidden]]) -> WeightMatrix:
        forbidden = [[v is FORBIDDEN for v in row] for row in rows]
        weights = [[0.0 if v is FORBIDDEN else float(v) for v in row] for row in rows]
        n = len(rows)
        return cls(
            np.array(weights, dtype=float).reshape(n, -1),
            np.array(forbidden, dtype=bool).reshape(n, -1),
        )

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, slots=True)
class MatchResult:
    pairs: tuple[tuple[int, int], ...]
    total_weight: float
    complete: bool




# Relative slack within which two matching totals count as tied.
_TIE_TOLERANCE = 1e-9

Choice = dict[int, int | None]


def _solve(cost: NDArray[np.float64], fixed: Choice, optional: bool) -> float | None:
    """Least total cost with the rows in ``fixed`` pinned, or ``None`` if infeasible.

    A row pinned to ``None`` stays unmatched, which needs ``optional``.
    """
    c = cost.copy()
    dummy = np.zeros((c.shape[0], c.shape[0])) if optional else np.empty((c.shape[0], 0))
    for r, col in fixed.items():
        c[r, :] = np.inf
        if col is None:
            continue
        c[:, col] = np.inf
        c[r, col] = cost[r, col]
        dummy[r, :] = np.inf
    full = np.hstack([c, dummy])
    try:
        rows, cols = linear_sum_assignment(full)
    except ValueError:
        return None
    total = float(full[rows, cols].sum())
    return total if np.isfinite(total) else None


def _lowest_optimal_choice(cost: NDArray[np.float64], optional: bool) -> Choice | None:
    """Optimal matching that gives each row, in order, its lowest usable column.

    Unmatched ranks after every real column.
    """
    best = _solve(cost, {}, optional)
    if best is None:
        return None
    slack = _TIE_TOLERANCE * max(1.0, abs(best))
    fixed: Choice = {}
    for r in range(cost.shape[0]):
        taken = {c for c in fixed.values() if c is not None}
        options: list[int | None] = [
            c for c in range(cost.shape[1]) if c not in taken and np.isfinite(cost[r, c])
        ]
        if optional:
            options.append(None)
        for col in options:
            total = _solve(cost, {**fixed, r: col}, optional)
            if total is not None and total <= best + slack:
                fixed[r] = col
                break
    return fixed


def _result(w: WeightMatrix, choice: Choice, complete: bool | None = None) -> MatchResult:
    pairs = tuple((r, c) for r, c in sorted(choice.items()) if c is not None)
    total = 0.0
    for r, c in pairs:
        total += float(w.weights[r, c])
    if complete is None:
        complete = len(pairs) == w.rows
    return MatchResult(pairs, total, complete)


def max_weight_matching(w: WeightMatrix, require_all_rows: bool) -> MatchResult:
    """Maximum-weight matching of rows to columns.

    With ``require_all_rows`` every row must be matched; when that needs a
    forbidden edge the best partial matching is returned with
    ``complete=False``. Otherwise rows may stay unmatched, which is what a
    zero-weight dummy column per row expresses. Among optimal matchings the
    lowest row gets the lowest column, then the next row, and so on.
    """
    if require_all_rows and w.rows > w.cols:
        raise DomainError(f"{w.rows} rows cannot all be matched into {w.cols} columns")
    cost = np.where(w.forbidden, np.inf, -w.weights)

    if require_all_rows:
        choice = _lowest_optimal_choice(cost, optional=False)
        if choice is not None:
            return _result(w, choice)

    choice = _lowest_optimal_choice(cost, optional=True)
    return _result(w, choice, complete=False if require_all_rows else None)
