"""Design-matrix construction: dummy coding with interactions.

Reference level per categorical variable is the most frequent level (ties
broken lexicographically), a deterministic choice recorded in the result.
Multi-category race selections collapse to a single "multiracial" level so
race enters the model as one factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


def collapse_race(race: Iterable[str]) -> str:
    """Race selections with several categories become one combined level."""
    values = sorted(set(race))
    if not values:
        raise ValueError("race set must be non-empty")
    return values[0] if len(values) == 1 else "multiracial"


@dataclass
class DesignMatrix:
    X: np.ndarray
    columns: list[str]            # one label per column
    terms: dict[str, list[int]]   # model term -> column indices
    reference_levels: dict[str, str]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def term_names(self) -> list[str]:
        return [t for t in self.terms if t != "Intercept"]


def _reference_level(values: Sequence[str]) -> str:
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    # most frequent wins; ties prefer the lexicographically smallest level
    return min(counts, key=lambda level: (-counts[level], level))


def _as_level(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, frozenset) or isinstance(value, set):
        return collapse_race(value)
    return str(value)


def build_design_matrix(
    rows: Sequence[Mapping],
    categorical: Sequence[str] = (),
    numeric: Sequence[str] = (),
    interactions: Sequence[tuple[str, str]] = (),
) -> DesignMatrix:
    """Intercept + dummy columns (+ products for interaction terms)."""
    if not rows:
        raise ValueError("design matrix needs at least one row")
    n = len(rows)
    columns = ["Intercept"]
    terms: dict[str, list[int]] = {"Intercept": [0]}
    blocks: list[np.ndarray] = [np.ones((n, 1))]
    reference: dict[str, str] = {}
    dummies: dict[str, dict[str, np.ndarray]] = {}

    for var in categorical:
        levels = [_as_level(row[var]) for row in rows]
        ref = _reference_level(levels)
        reference[var] = ref
        non_ref = sorted(set(levels) - {ref})
        var_dummies: dict[str, np.ndarray] = {}
        idx: list[int] = []
        for level in non_ref:
            col = np.fromiter((1.0 if v == level else 0.0 for v in levels), float, n)
            var_dummies[level] = col
            idx.append(len(columns))
            columns.append(f"{var}[{level}]")
            blocks.append(col.reshape(-1, 1))
        dummies[var] = var_dummies
        if idx:
            terms[var] = idx

    for var in numeric:
        col = np.fromiter((float(row[var]) for row in rows), float, n)
        terms[var] = [len(columns)]
        columns.append(var)
        blocks.append(col.reshape(-1, 1))

    for left, right in interactions:
        if left not in dummies or right not in dummies:
            raise ValueError(f"interaction {left}:{right} needs both factors dummy-coded first")
        idx = []
        for l_level, l_col in dummies[left].items():
            for r_level, r_col in dummies[right].items():
                idx.append(len(columns))
                columns.append(f"{left}[{l_level}]:{right}[{r_level}]")
                blocks.append((l_col * r_col).reshape(-1, 1))
        if idx:
            terms[f"{left}:{right}"] = idx

    X = np.hstack(blocks)
    return DesignMatrix(X=X, columns=columns, terms=terms, reference_levels=reference)
