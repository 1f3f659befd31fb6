"""Estimation and sample-quality checks on trial logs and count tables:
correlation estimates with standard errors, single-click distributions, and
block homogeneity testing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .inequalities import InequalityResult
from .models import OUTCOMES, Setting
from .special import chi_square_tail


@dataclass(frozen=True)
class CorrelationEstimate:
    """Post-selected correlation: E = (N++ + N-- - N+- - N-+) / N with
    se = sqrt((1 - E^2) / N), the plug-in multinomial error for +-1 data."""

    e: float
    se: float
    n: int


def estimate_correlation(selected: np.ndarray) -> CorrelationEstimate:
    """From a 2x2 post-selected count table, rows a in (-1, +1), cols b."""
    t = np.asarray(selected, dtype=np.int64)
    if t.shape != (2, 2):
        raise ValidationError("expected a 2x2 post-selected count table")
    n = int(t.sum())
    if n < 1:
        raise ValidationError("empty post-selected table")
    e = float(t[0, 0] + t[1, 1] - t[0, 1] - t[1, 0]) / n
    se = float(np.sqrt(max(1.0 - e * e, 0.0) / n))
    return CorrelationEstimate(e, se, n)


@dataclass(frozen=True)
class SinglesDistribution:
    """Per-outcome frequencies over all windows at one setting, with
    binomial standard errors.  Not post-selected."""

    side: str
    setting_label: str
    n: int
    freqs: tuple[float, float, float]   # outcomes -1, 0, +1
    ses: tuple[float, float, float]


def singles_distribution(log, side: str, setting: Setting | str) -> SinglesDistribution:
    """Estimated click/no-click distribution of one wing at one setting."""
    if side not in ("A", "B"):
        raise ValidationError("side must be 'A' or 'B'")
    label = setting.label if isinstance(setting, Setting) else setting
    pair_labels = [p.x.label if side == "A" else p.y.label for p in log.pairs]
    wanted = [k for k, lbl in enumerate(pair_labels) if lbl == label]
    if not wanted:
        raise ValidationError(f"no windows at setting {side}:{label}")
    mask = np.isin(log.pair_index, wanted)
    n = int(mask.sum())
    if n == 0:
        raise ValidationError(f"no windows at setting {side}:{label}")
    values = (log.a if side == "A" else log.b)[mask]
    counts = np.bincount((values.astype(np.int64) + 1), minlength=3)
    freqs = counts / n
    ses = np.sqrt(freqs * (1.0 - freqs) / n)
    return SinglesDistribution(
        side, label, n, tuple(map(float, freqs)), tuple(map(float, ses))
    )


@dataclass(frozen=True)
class HomogeneityReport:
    blocks: int
    categories: int
    chi_square: float
    dof: int
    p_value: float
    merged_categories: tuple[tuple[int, ...], ...]
    underpowered: bool
    block_frequencies: np.ndarray  # (blocks, categories)


def chi_square_homogeneity(table: np.ndarray) -> tuple[float, int, float, np.ndarray]:
    """Pearson chi-square on a B x k contingency table.

    Returns (statistic, dof, p, expected).  Zero-total rows or columns are
    dropped before computing expectations.
    """
    t = np.asarray(table, dtype=np.float64)
    t = t[t.sum(axis=1) > 0][:, t.sum(axis=0) > 0]
    if t.shape[0] < 2 or t.shape[1] < 2:
        return 0.0, 0, 1.0, t
    expected = np.outer(t.sum(axis=1), t.sum(axis=0)) / t.sum()
    chi = float(((t - expected) ** 2 / expected).sum())
    dof = (t.shape[0] - 1) * (t.shape[1] - 1)
    return chi, dof, chi_square_tail(chi, dof), expected


MIN_EXPECTED = 5.0


def _merge_sparse_categories(counts: np.ndarray) -> tuple[np.ndarray, tuple[tuple[int, ...], ...]]:
    """Merge the smallest categories until every expected cell is >= 5.

    ``counts`` is (B, k); merging combines columns.  Returns the merged table
    and the groups of original category indices that were combined.
    """
    groups = [(j,) for j in range(counts.shape[1])]
    table = counts.astype(np.float64)
    while table.shape[1] > 2:
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / max(table.sum(), 1.0)
        if expected.min() >= MIN_EXPECTED:
            break
        order = np.argsort(table.sum(axis=0))
        j1, j2 = sorted((int(order[0]), int(order[1])))
        table[:, j1] += table[:, j2]
        table = np.delete(table, j2, axis=1)
        groups[j1] = tuple(groups[j1]) + tuple(groups[j2])
        del groups[j2]
    return table, tuple(tuple(g) for g in groups)


def homogeneity_counts(counts: np.ndarray) -> HomogeneityReport:
    """Homogeneity test on pre-blocked category counts (B x k)."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 2 or counts.shape[0] < 2:
        raise ValidationError("homogeneity needs at least 2 blocks of category counts")
    merged, groups = _merge_sparse_categories(counts)
    expected = np.outer(merged.sum(axis=1), merged.sum(axis=0)) / max(merged.sum(), 1.0)
    underpowered = bool(merged.shape[1] < 2 or expected.min() < MIN_EXPECTED)
    chi, dof, p, _ = chi_square_homogeneity(merged)
    b = counts.shape[0]
    totals = merged.sum(axis=1, keepdims=True)
    freqs = np.divide(merged, totals, out=np.zeros_like(merged), where=totals > 0)
    merged_groups = tuple(g for g in groups if len(g) > 1)
    return HomogeneityReport(
        blocks=b,
        categories=merged.shape[1],
        chi_square=chi,
        dof=dof,
        p_value=p,
        merged_categories=merged_groups,
        underpowered=underpowered,
        block_frequencies=freqs,
    )


def homogeneity_test(log, pair, blocks: int) -> HomogeneityReport:
    """Split the windows at one pair into contiguous blocks and test whether
    the joint outcome distribution drifts across them.

    Categories are the 9 joint outcomes, merged while any expected cell is
    below 5 (drift over time is the concern, so blocks are contiguous).
    """
    if blocks < 2:
        raise ValidationError("need at least 2 blocks")
    idx = log.windows_at(pair)
    if idx.size < blocks:
        raise ValidationError("fewer windows than blocks")
    code = (log.a[idx].astype(np.int64) + 1) * 3 + (log.b[idx].astype(np.int64) + 1)
    bounds = np.linspace(0, idx.size, blocks + 1).astype(int)
    counts = np.vstack([
        np.bincount(code[bounds[i]:bounds[i + 1]], minlength=9)
        for i in range(blocks)
    ])
    return homogeneity_counts(counts)


def significance(result: InequalityResult) -> float:
    """z-score of an inequality value against its classical bound."""
    return result.z
