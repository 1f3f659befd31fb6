"""Hot per-window simulation kernels, numba-compiled with a numpy fallback.

Set ``BELLSIM_NUMBA=0`` to force the pure-numpy path (``1`` to require numba;
unset means use numba when importable).  Both backends evaluate the same
counter-based random stream and the same arithmetic per window, and each is
bit-reproducible for any chunking of the window index range; see
``benchmarks/bench_kernels.py`` for a side-by-side timing.

Outcome conventions match :mod:`bellsim.models`: int8 values in {-1, 0, +1},
delays in float64 time units.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .rng import (
    GOLDEN,
    MASK64,
    SLOT_PAIR,
    SLOT_SOURCE,
    SLOT_WING_A,
    SLOT_WING_B,
    SLOTS_PER_WINDOW,
    uniforms,
)

_INV53 = 1.0 / 9007199254740992.0


def _numba_requested() -> bool | None:
    raw = os.environ.get("BELLSIM_NUMBA", "").strip().lower()
    if raw in ("0", "off", "no", "false"):
        return False
    if raw in ("1", "on", "yes", "true"):
        return True
    return None


_req = _numba_requested()
if _req is False:
    USING_NUMBA = False
else:
    try:
        import numba

        USING_NUMBA = True
    except ImportError:
        if _req is True:
            raise
        USING_NUMBA = False


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"


@dataclass(frozen=True)
class TableWing:
    """Deterministic wing: draw an instrument component from ``inst_cum``
    and read ``table[source_component, instrument_component]``."""

    inst_cum: np.ndarray  # (k,) cumulative weights
    table: np.ndarray     # (n_source_side, k) int8


@dataclass(frozen=True)
class StochasticWing:
    """Stochastic wing: draw the outcome directly from the cumulative rows
    of ``row_cum[source_component]`` over (-1, 0, +1)."""

    row_cum: np.ndarray   # (n_source_side, 3) cumulative probabilities


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _pick(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(cum, u, side="right"), cum.size - 1)


def _np_coincidence_windows(seed, indices, x_angle, y_angle, dexp, t0):
    theta = 2.0 * np.pi * uniforms(seed, indices, SLOT_SOURCE)
    ra = uniforms(seed, indices, SLOT_WING_A)
    rb = uniforms(seed, indices, SLOT_WING_B)
    pa = 2.0 * (theta - x_angle)
    pb = 2.0 * (theta - y_angle)
    a = np.where(np.cos(pa) >= 0.0, 1, -1).astype(np.int8)
    b = np.where(np.cos(pb) >= 0.0, 1, -1).astype(np.int8)
    da = t0 * ra * np.abs(np.sin(pa)) ** dexp
    db = t0 * rb * np.abs(np.sin(pb)) ** dexp
    return a, b, da, db


def _np_wing_outcomes(wing, src_side, u):
    if isinstance(wing, StochasticWing):
        # Row-wise inverse CDF over the three outcomes.
        cum = wing.row_cum[src_side]
        pick = (u[:, None] >= cum).sum(axis=1)
        return (np.minimum(pick, 2) - 1).astype(np.int8)
    k = _pick(wing.inst_cum, u)
    return wing.table[src_side, k]


def _np_finite_windows(seed, indices, source_weights, wing_a, wing_b):
    n1, n2 = source_weights.shape
    cum_src = np.cumsum(source_weights.ravel())
    s = _pick(cum_src, uniforms(seed, indices, SLOT_SOURCE))
    i, j = s // n2, s % n2
    a = _np_wing_outcomes(wing_a, i, uniforms(seed, indices, SLOT_WING_A))
    b = _np_wing_outcomes(wing_b, j, uniforms(seed, indices, SLOT_WING_B))
    zeros = np.zeros(len(indices), dtype=np.float64)
    return a, b, zeros, zeros


def _np_pair_choices(seed, indices, pair_cum):
    return _pick(pair_cum, uniforms(seed, indices, SLOT_PAIR)).astype(np.int32)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if USING_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _nb_uniform(seed, window, slot):
        pos = window * np.uint64(SLOTS_PER_WINDOW) + np.uint64(slot)
        z = np.uint64(seed) + (pos + np.uint64(1)) * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
        return np.float64(z >> np.uint64(11)) * _INV53

    @njit(cache=True, nogil=True)
    def _nb_pick(cum, u):
        # First index with cum[idx] > u, matching searchsorted side="right".
        lo, hi = 0, cum.size - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cum[mid] > u:
                hi = mid
            else:
                lo = mid + 1
        return lo

    @njit(cache=True, nogil=True)
    def _nb_coincidence_windows(seed, indices, x_angle, y_angle, dexp, t0):
        n = indices.size
        a = np.empty(n, dtype=np.int8)
        b = np.empty(n, dtype=np.int8)
        da = np.empty(n, dtype=np.float64)
        db = np.empty(n, dtype=np.float64)
        for t in range(n):
            w = indices[t]
            theta = 2.0 * np.pi * _nb_uniform(seed, w, SLOT_SOURCE)
            ra = _nb_uniform(seed, w, SLOT_WING_A)
            rb = _nb_uniform(seed, w, SLOT_WING_B)
            pa = 2.0 * (theta - x_angle)
            pb = 2.0 * (theta - y_angle)
            a[t] = 1 if math.cos(pa) >= 0.0 else -1
            b[t] = 1 if math.cos(pb) >= 0.0 else -1
            da[t] = t0 * ra * abs(math.sin(pa)) ** dexp
            db[t] = t0 * rb * abs(math.sin(pb)) ** dexp
        return a, b, da, db

    @njit(cache=True, nogil=True)
    def _nb_finite_windows(
        seed, indices, cum_src, n2,
        mode_a, inst_cum_a, table_a, row_cum_a,
        mode_b, inst_cum_b, table_b, row_cum_b,
    ):
        n = indices.size
        a = np.empty(n, dtype=np.int8)
        b = np.empty(n, dtype=np.int8)
        for t in range(n):
            w = indices[t]
            s = _nb_pick(cum_src, _nb_uniform(seed, w, SLOT_SOURCE))
            i = s // n2
            j = s % n2
            ua = _nb_uniform(seed, w, SLOT_WING_A)
            if mode_a == 0:
                a[t] = table_a[i, _nb_pick(inst_cum_a, ua)]
            else:
                row = row_cum_a[i]
                pick = 0
                while pick < 2 and ua >= row[pick]:
                    pick += 1
                a[t] = pick - 1
            ub = _nb_uniform(seed, w, SLOT_WING_B)
            if mode_b == 0:
                b[t] = table_b[j, _nb_pick(inst_cum_b, ub)]
            else:
                row = row_cum_b[j]
                pick = 0
                while pick < 2 and ub >= row[pick]:
                    pick += 1
                b[t] = pick - 1
        zeros = np.zeros(n, dtype=np.float64)
        return a, b, zeros, zeros

    @njit(cache=True, nogil=True)
    def _nb_pair_choices(seed, indices, pair_cum):
        n = indices.size
        out = np.empty(n, dtype=np.int32)
        for t in range(n):
            out[t] = _nb_pick(pair_cum, _nb_uniform(seed, indices[t], SLOT_PAIR))
        return out

    _EMPTY_CUM = np.ones(1, dtype=np.float64)
    _EMPTY_TABLE = np.zeros((1, 1), dtype=np.int8)
    _EMPTY_ROWS = np.ones((1, 3), dtype=np.float64)

    def _wing_args(wing):
        if isinstance(wing, StochasticWing):
            return 1, _EMPTY_CUM, _EMPTY_TABLE, np.ascontiguousarray(wing.row_cum)
        return (
            0,
            np.ascontiguousarray(wing.inst_cum),
            np.ascontiguousarray(wing.table),
            _EMPTY_ROWS,
        )


# ---------------------------------------------------------------------------
# public dispatch
# ---------------------------------------------------------------------------

def coincidence_windows(seed, indices, x_angle, y_angle, dexp, t0):
    """Simulate the delay-based continuous model at the given window indices."""
    indices = np.ascontiguousarray(indices, dtype=np.uint64)
    if USING_NUMBA:
        return _nb_coincidence_windows(
            np.uint64(seed & MASK64), indices,
            float(x_angle), float(y_angle), float(dexp), float(t0),
        )
    return _np_coincidence_windows(seed, indices, x_angle, y_angle, dexp, t0)


def finite_windows(seed, indices, source_weights, wing_a, wing_b):
    """Simulate a finite model at the given window indices.

    Wings are :class:`TableWing` (deterministic response of source component
    and a drawn instrument component) or :class:`StochasticWing` (outcome
    drawn from a per-source-component distribution).
    """
    indices = np.ascontiguousarray(indices, dtype=np.uint64)
    if USING_NUMBA:
        cum_src = np.cumsum(source_weights.ravel())
        ma, ca, ta, ra = _wing_args(wing_a)
        mb, cb, tb, rb = _wing_args(wing_b)
        return _nb_finite_windows(
            np.uint64(seed & MASK64), indices, cum_src, source_weights.shape[1],
            ma, ca, ta, ra, mb, cb, tb, rb,
        )
    return _np_finite_windows(seed, indices, source_weights, wing_a, wing_b)


def pair_choices(seed, indices, pair_cum):
    """Fast-switching schedule draws: pair index per window."""
    indices = np.ascontiguousarray(indices, dtype=np.uint64)
    if USING_NUMBA:
        return _nb_pair_choices(
            np.uint64(seed & MASK64), indices, np.ascontiguousarray(pair_cum)
        )
    return _np_pair_choices(seed, indices, pair_cum)
