"""Experimental protocol emulation: setting schedules, synchronized windows,
click/no-click registration, and coincidence post-selection.

Each synchronized window yields exactly one trial record.  A wing's outcome
is recorded as 0 (no click) when its detection delay exceeds the coincidence
window width W; post-selected statistics keep only windows where both wings
clicked.  Window simulation is a pure function of (model, schedule, seed,
window index), so runs shard across workers without changing output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .errors import ValidationError
from .models import OUTCOMES, Setting, SettingPair
from .rng import sub_seed
from .special import chi_square_tail

CHUNK = 1 << 18

# Stream tags so schedule draws, per-pair scans and comparison arms never
# share positions with each other.
_TAG_RUN = 0x5EED
_TAG_FAST = 0xFA57
_TAG_BLOCK = 0xB10C


def worker_count(workers: int | None = None) -> int:
    """Resolve the worker count: explicit argument, then BELLSIM_THREADS, then 1."""
    if workers is None:
        raw = os.environ.get("BELLSIM_THREADS", "").strip()
        workers = int(raw) if raw else 1
    if workers < 1:
        raise ValidationError("worker count must be >= 1")
    return workers


@dataclass(frozen=True)
class SettingSchedule:
    """How setting pairs are assigned to windows.

    ``fast`` draws a pair independently per window from the pair weights;
    ``blocks`` runs contiguous blocks of ``block_length`` windows, cycling
    round-robin through the pair list.
    """

    pairs: tuple[SettingPair, ...]
    mode: str = "fast"
    block_length: int = 10_000

    def __post_init__(self):
        if self.mode not in ("fast", "blocks"):
            raise ValidationError(f"schedule mode must be 'fast' or 'blocks', got {self.mode!r}")
        if not self.pairs:
            raise ValidationError("schedule needs at least one setting pair")
        if self.block_length < 1:
            raise ValidationError("block_length must be >= 1")
        object.__setattr__(self, "pairs", tuple(self.pairs))
        total = sum(p.weight for p in self.pairs)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"pair weights sum to {total}, not 1")

    def pair_indices(self, seed: int, lo: int, hi: int) -> np.ndarray:
        """Pair index for windows [lo, hi); pure in (seed, window index)."""
        idx = np.arange(lo, hi, dtype=np.uint64)
        if self.mode == "fast":
            cum = np.cumsum([p.weight for p in self.pairs])
            return kernels.pair_choices(sub_seed(seed, _TAG_RUN), idx, cum)
        return ((idx // np.uint64(self.block_length)) % np.uint64(len(self.pairs))).astype(np.int32)

    def describe(self) -> dict:
        d = {
            "mode": self.mode,
            "pairs": [
                {
                    "setting_a": p.x.label, "angle_a": p.x.angle,
                    "setting_b": p.y.label, "angle_b": p.y.angle,
                    "weight": p.weight,
                }
                for p in self.pairs
            ],
        }
        if self.mode == "blocks":
            d["block_length"] = self.block_length
        return d


@dataclass(frozen=True)
class TrialRecord:
    window_index: int
    pair: SettingPair
    a: int
    b: int
    delay_a: float
    delay_b: float


@dataclass
class RunMeta:
    seed: int
    n: int
    window: float
    schedule: dict
    model: dict
    backend: str = field(default_factory=kernels.backend_name)


@dataclass
class TrialLog:
    """Columnar record of one run: one entry per window, in window order."""

    pairs: tuple[SettingPair, ...]
    pair_index: np.ndarray  # int32
    a: np.ndarray           # int8, post-suppression
    b: np.ndarray
    delay_a: np.ndarray     # float64, raw delays (kept even when suppressed)
    delay_b: np.ndarray
    meta: RunMeta

    def __len__(self) -> int:
        return len(self.pair_index)

    def records(self) -> Iterator[TrialRecord]:
        for w in range(len(self)):
            yield TrialRecord(
                w, self.pairs[self.pair_index[w]],
                int(self.a[w]), int(self.b[w]),
                float(self.delay_a[w]), float(self.delay_b[w]),
            )

    def windows_at(self, pair: SettingPair) -> np.ndarray:
        for k, p in enumerate(self.pairs):
            if p.labels == pair.labels:
                return np.flatnonzero(self.pair_index == k)
        raise KeyError(f"pair {pair.labels} not present in this log")


class CoincidenceCounts:
    """Per-pair 3x3 outcome count tables with a post-selected 2x2 view."""

    def __init__(self, pairs: Sequence[SettingPair], tables: np.ndarray):
        tables = np.asarray(tables, dtype=np.int64)
        if tables.shape != (len(pairs), 3, 3):
            raise ValidationError("count tables must have shape (n_pairs, 3, 3)")
        self.pairs = tuple(pairs)
        self.tables = tables

    def _index(self, pair: SettingPair) -> int:
        for k, p in enumerate(self.pairs):
            if p.labels == pair.labels:
                return k
        raise KeyError(f"pair {pair.labels} not tabulated")

    def table(self, pair: SettingPair) -> np.ndarray:
        """Full 3x3 count table, outcomes indexed (-1, 0, +1) on both axes."""
        return self.tables[self._index(pair)]

    def selected(self, pair: SettingPair) -> np.ndarray:
        """2x2 view over the +-1 outcomes only (both wings clicked)."""
        t = self.table(pair)
        return t[np.ix_([0, 2], [0, 2])]

    def total(self, pair: SettingPair) -> int:
        return int(self.table(pair).sum())

    def n_coincidences(self, pair: SettingPair) -> int:
        return int(self.selected(pair).sum())

    def singles_a(self, pair: SettingPair) -> np.ndarray:
        """Alice's outcome counts over all windows at this pair (no selection)."""
        return self.table(pair).sum(axis=1)

    def singles_b(self, pair: SettingPair) -> np.ndarray:
        return self.table(pair).sum(axis=0)

    def merged(self, other: "CoincidenceCounts") -> "CoincidenceCounts":
        if tuple(p.labels for p in self.pairs) != tuple(p.labels for p in other.pairs):
            raise ValidationError("cannot merge counts over different pair lists")
        return CoincidenceCounts(self.pairs, self.tables + other.tables)


def _suppress(a, b, da, db, window):
    a = np.where(da > window, 0, a).astype(np.int8)
    b = np.where(db > window, 0, b).astype(np.int8)
    return a, b


def run_experiment(
    model,
    schedule: SettingSchedule,
    n: int,
    window: float,
    seed: int,
    workers: int | None = None,
) -> TrialLog:
    """Simulate ``n`` synchronized windows and log every trial.

    Deterministic in ``seed`` for any ``workers`` value: the window range is
    cut into fixed chunks whose contents depend only on (seed, index range),
    and results are assembled in index order.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if window <= 0:
        raise ValidationError("window width must be > 0")
    workers = worker_count(workers)

    pair_index = schedule.pair_indices(seed, 0, n)
    a = np.empty(n, dtype=np.int8)
    b = np.empty(n, dtype=np.int8)
    da = np.empty(n, dtype=np.float64)
    db = np.empty(n, dtype=np.float64)
    run_seed = sub_seed(seed, _TAG_RUN + 1)

    if getattr(model, "sequenced", False):
        ra, rb, rda, rdb = model.sample_sequenced(pair_index, run_seed)
        a[:], b[:] = _suppress(ra, rb, rda, rdb, window)
        da[:], db[:] = rda, rdb
    else:
        def fill(lo: int, hi: int) -> None:
            chunk_pairs = pair_index[lo:hi]
            idx = np.arange(lo, hi, dtype=np.uint64)
            for k, pair in enumerate(schedule.pairs):
                mask = chunk_pairs == k
                if not mask.any():
                    continue
                ca, cb, cda, cdb = model.sample_windows(pair, idx[mask], run_seed)
                sel = lo + np.flatnonzero(mask)
                a[sel], b[sel] = _suppress(ca, cb, cda, cdb, window)
                da[sel], db[sel] = cda, cdb

        spans = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
        if workers == 1 or len(spans) == 1:
            for lo, hi in spans:
                fill(lo, hi)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda span: fill(*span), spans))

    meta = RunMeta(
        seed=seed, n=n, window=window,
        schedule=schedule.describe(),
        model=_describe_model(model),
    )
    return TrialLog(schedule.pairs, pair_index, a, b, da, db, meta)


def _describe_model(model) -> dict:
    from .serialize import model_to_dict

    try:
        return model_to_dict(model)
    except (ValidationError, TypeError, AttributeError):
        return {"family": getattr(model, "family", type(model).__name__)}


def tabulate(log: TrialLog) -> CoincidenceCounts:
    """Count outcomes per pair; the 2x2 view drops windows with any 0."""
    npairs = len(log.pairs)
    if len(log) == 0:
        return CoincidenceCounts(log.pairs, np.zeros((npairs, 3, 3), dtype=np.int64))
    code = (
        log.pair_index.astype(np.int64) * 9
        + (log.a.astype(np.int64) + 1) * 3
        + (log.b.astype(np.int64) + 1)
    )
    flat = np.bincount(code, minlength=npairs * 9)
    return CoincidenceCounts(log.pairs, flat.reshape(npairs, 3, 3))


def scan_pairs(
    model,
    pairs: Sequence[SettingPair],
    n_per_pair: int,
    window: float,
    seed: int,
    workers: int | None = None,
) -> CoincidenceCounts:
    """Accumulate counts for ``n_per_pair`` windows at each pair without
    materializing a log.  Each pair gets its own derived seed stream."""
    counts = window_sweep_counts(model, pairs, n_per_pair, [window], seed, workers)[0]
    return counts


def window_sweep_counts(
    model,
    pairs: Sequence[SettingPair],
    n_per_pair: int,
    windows: Sequence[float],
    seed: int,
    workers: int | None = None,
) -> list[CoincidenceCounts]:
    """Counts at several window widths over one shared trial stream.

    The same per-pair delays feed every window width, so the returned tables
    are directly comparable and the set of suppressed wings grows monotonely
    as the window shrinks.
    """
    if n_per_pair < 1:
        raise ValidationError("n_per_pair must be >= 1")
    for w in windows:
        if w <= 0:
            raise ValidationError("window width must be > 0")
    workers = worker_count(workers)
    pairs = tuple(pairs)
    tables = np.zeros((len(windows), len(pairs), 3, 3), dtype=np.int64)

    def accumulate(task):
        k, lo, hi = task
        pair = pairs[k]
        pair_seed = sub_seed(seed, _TAG_RUN + 2 + k)
        idx = np.arange(lo, hi, dtype=np.uint64)
        a, b, da, db = model.sample_windows(pair, idx, pair_seed)
        out = np.zeros((len(windows), 9), dtype=np.int64)
        for wi, w in enumerate(windows):
            sa, sb = _suppress(a, b, da, db, w)
            code = (sa.astype(np.int64) + 1) * 3 + (sb.astype(np.int64) + 1)
            out[wi] = np.bincount(code, minlength=9)
        return k, out

    tasks = [
        (k, lo, min(lo + CHUNK, n_per_pair))
        for k in range(len(pairs))
        for lo in range(0, n_per_pair, CHUNK)
    ]
    if workers == 1:
        results = map(accumulate, tasks)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(accumulate, tasks)
    for k, out in results:
        tables[:, k] += out.reshape(len(windows), 3, 3)
    if workers != 1:
        pool.shutdown()
    return [CoincidenceCounts(pairs, tables[wi]) for wi in range(len(windows))]


@dataclass(frozen=True)
class PairComparison:
    pair: SettingPair
    e_fast: float
    se_fast: float
    n_fast: int
    e_blocks: float
    se_blocks: float
    n_blocks: int
    z: float
    underpowered: bool


@dataclass(frozen=True)
class ScheduleComparison:
    """Fast-switching vs fixed-blocks estimates of the same correlations."""

    per_pair: tuple[PairComparison, ...]
    chi_square: float
    dof: int
    p_value: float | None
    underpowered: bool


MIN_COINCIDENCES = 100


def compare_schedules(
    model,
    pairs: Sequence[SettingPair],
    n: int,
    window: float,
    seed: int,
    block_length: int = 10_000,
    workers: int | None = None,
) -> ScheduleComparison:
    """Run both schedule modes with independent seed streams and compare the
    post-selected correlation per pair.

    Pairs with fewer than ``MIN_COINCIDENCES`` post-selected events in either
    mode are flagged as underpowered and excluded from the pooled statistic.
    """
    from .stats import estimate_correlation

    pairs = tuple(pairs)
    fast = SettingSchedule(pairs, mode="fast")
    blocks = SettingSchedule(pairs, mode="blocks", block_length=block_length)
    log_f = run_experiment(model, fast, n, window, sub_seed(seed, _TAG_FAST), workers)
    log_b = run_experiment(model, blocks, n, window, sub_seed(seed, _TAG_BLOCK), workers)
    counts_f = tabulate(log_f)
    counts_b = tabulate(log_b)

    rows = []
    chi = 0.0
    dof = 0
    for pair in pairs:
        nf = counts_f.n_coincidences(pair)
        nb = counts_b.n_coincidences(pair)
        weak = nf < MIN_COINCIDENCES or nb < MIN_COINCIDENCES
        if weak:
            rows.append(PairComparison(pair, np.nan, np.nan, nf, np.nan, np.nan, nb, np.nan, True))
            continue
        est_f = estimate_correlation(counts_f.selected(pair))
        est_b = estimate_correlation(counts_b.selected(pair))
        se = float(np.hypot(est_f.se, est_b.se))
        z = (est_f.e - est_b.e) / se if se > 0 else 0.0
        rows.append(PairComparison(
            pair, est_f.e, est_f.se, nf, est_b.e, est_b.se, nb, z, False,
        ))
        chi += z * z
        dof += 1
    p = chi_square_tail(chi, dof) if dof > 0 else None
    return ScheduleComparison(
        per_pair=tuple(rows),
        chi_square=chi,
        dof=dof,
        p_value=p,
        underpowered=any(r.underpowered for r in rows),
    )
