"""Ranking statistics for the ablation evaluation.

Evaluator rankings arrive as an N x k matrix (rows = evaluators,
columns = conditions, entries = ranks 1..k). Friedman's test decides
whether the conditions differ at all; Nemenyi's post-hoc locates the
differing pairs. Ties are rejected: every row must be a strict ranking.

p-values come from scipy (chi-square tail, studentized-range tail with
infinite degrees of freedom); the test suite pins both against
independent oracles.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy import stats as _sps

__all__ = [
    "RankingDataset",
    "FriedmanResult",
    "friedman_statistic",
    "friedman_test",
    "nemenyi_posthoc",
    "mean_rankings",
    "studentized_range_sf",
    "format_mean_rankings",
    "format_pairwise_table",
]


@dataclass(frozen=True)
class RankingDataset:
    """Strict rankings of k conditions by N independent evaluators."""

    conditions: tuple[str, ...]
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        k = len(self.conditions)
        if k < 2:
            raise ValueError("need at least 2 conditions")
        if len(set(self.conditions)) != k:
            raise ValueError("condition labels must be unique")
        expected = set(range(1, k + 1))
        for i, row in enumerate(self.rows, start=1):
            if len(row) != k:
                raise ValueError(f"row {i}: expected {k} ranks, got {len(row)}")
            if len(set(row)) != len(row):
                raise ValueError(
                    f"row {i}: tied ranks are not supported; every row must "
                    f"be a strict ranking (a permutation of 1..{k})"
                )
            if set(row) != expected:
                raise ValueError(
                    f"row {i}: ranks must be a permutation of 1..{k}, got {row}"
                )

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def k(self) -> int:
        return len(self.conditions)

    def to_csv(self) -> str:
        """Header = condition labels, one evaluator's ranks per line."""
        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.conditions)
        for row in self.rows:
            writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path) -> "RankingDataset":
        with open(path, newline="", encoding="utf-8") as fh:
            raw = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
        if not raw:
            raise ValueError(f"{path}: empty rankings file")
        conditions = tuple(cell.strip() for cell in raw[0])
        rows = []
        for i, line in enumerate(raw[1:], start=1):
            try:
                rows.append(tuple(int(cell) for cell in line))
            except ValueError:
                raise ValueError(
                    f"{path}: row {i}: ranks must be integers, got {line}"
                ) from None
        try:
            return cls(conditions=conditions, rows=tuple(rows))
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None


class FriedmanResult(NamedTuple):
    chi_square: float
    p_value: float


def friedman_statistic(data: RankingDataset) -> float:
    """chi^2 = 12/(N*k*(k+1)) * sum_j Rj^2 - 3*N*(k+1).

    Defined for k >= 2 so the perfect-agreement closed form N*(k-1) can
    be exercised below the test's k >= 3 floor. Integer ranks make the
    statistic rational; computing it exactly before the single float
    conversion keeps perfect-agreement datasets at N*(k-1) with no
    rounding residue.
    """
    if data.n < 1:
        raise ValueError("empty dataset")
    n, k = data.n, data.k
    col_sums = [sum(row[j] for row in data.rows) for j in range(k)]
    exact = Fraction(12, n * k * (k + 1)) * sum(s * s for s in col_sums) - 3 * n * (k + 1)
    return float(exact)


def friedman_test(data: RankingDataset) -> FriedmanResult:
    """Friedman's chi-square over rank columns, p from k-1 df."""
    if data.n < 2:
        raise ValueError(f"Friedman test needs N >= 2 evaluators, got {data.n}")
    if data.k < 3:
        raise ValueError(f"Friedman test needs k >= 3 conditions, got {data.k}")
    stat = friedman_statistic(data)
    p = float(_sps.chi2.sf(stat, df=data.k - 1))
    return FriedmanResult(chi_square=stat, p_value=p)


def mean_rankings(data: RankingDataset) -> tuple[float, ...]:
    """Arithmetic mean of each condition's rank column."""
    matrix = np.asarray(data.rows, dtype=float)
    return tuple(float(v) for v in matrix.mean(axis=0))


def studentized_range_sf(q: float, k: int) -> float:
    """Upper tail of the studentized range, infinite degrees of freedom."""
    if q <= 0.0:
        return 1.0
    return float(_sps.studentized_range.sf(q, k, np.inf))


def nemenyi_posthoc(data: RankingDataset) -> np.ndarray:
    """Pairwise p-value matrix over mean-rank differences.

    q_ij = |R_i - R_j| * sqrt(2) / sqrt(k(k+1)/(6N)), referred to the
    studentized range with k groups. Symmetric, diagonal fixed at 1.
    """
    if data.n < 2:
        raise ValueError(f"Nemenyi test needs N >= 2 evaluators, got {data.n}")
    if data.k < 3:
        raise ValueError(f"Nemenyi test needs k >= 3 conditions, got {data.k}")
    means = mean_rankings(data)
    k, n = data.k, data.n
    scale = math.sqrt(k * (k + 1) / (6.0 * n))
    out = np.ones((k, k), dtype=float)
    for i in range(k):
        for j in range(i + 1, k):
            q = abs(means[i] - means[j]) / scale * math.sqrt(2.0)
            p = studentized_range_sf(q, k)
            out[i, j] = out[j, i] = p
    return out


def format_mean_rankings(data: RankingDataset) -> str:
    """One-line listing: '1.25 for CD, 2.75 for BL, ...'."""
    means = mean_rankings(data)
    parts = [f"{m:.2f} for {label}" for m, label in zip(means, data.conditions)]
    return "average rankings: " + ", ".join(parts)


def _p_cell(p: float, threshold: float) -> str:
    return f"< {threshold:g}" if p < threshold else f"{p:.2f}"


def format_pairwise_table(data: RankingDataset, *, threshold: float = 0.01) -> str:
    """Pairwise p-values as an upper-triangle matrix.

    Column headers carry each condition's mean ranking; cells on or
    below the diagonal print '-'; values under the threshold print as
    '< 0.01'-style bounds rather than raw numbers.
    """
    matrix = nemenyi_posthoc(data)
    means = mean_rankings(data)
    k = data.k
    headers = [""] + [
        f"{label} (μ={mean:.2f})" for label, mean in zip(data.conditions, means)
    ]
    grid = [headers]
    for i in range(k):
        cells = [data.conditions[i]]
        for j in range(k):
            cells.append("-" if j <= i else _p_cell(matrix[i][j], threshold))
        grid.append(cells)
    widths = [max(len(row[c]) for row in grid) for c in range(k + 1)]
    lines = [
        "  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip()
        for row in grid
    ]
    return "\n".join(lines)
