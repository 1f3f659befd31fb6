"""Dense phase-1 simplex for small linear feasibility problems.

Solves: does x >= 0 with A x = b exist?  Artificial variables are driven to
zero by minimizing their sum; the residual optimum decides feasibility.
Entering columns are chosen by most-negative reduced cost with a Bland-rule
fallback against cycling; leaving rows by minimum ratio with the largest
pivot magnitude as tie-break (partial pivoting).
"""

from __future__ import annotations

import numpy as np

FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-11


class SimplexError(RuntimeError):
    """Iteration limit or numerical breakdown."""


def solve_feasibility(
    a: np.ndarray, b: np.ndarray, tol: float = FEAS_TOL, max_iter: int | None = None
) -> tuple[bool, np.ndarray | None]:
    """Phase-1 simplex on A x = b, x >= 0.

    Returns (feasible, x) where x is a feasible point when one exists.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).copy()
    m, n = a.shape
    if b.shape != (m,):
        raise ValueError("b must have one entry per row of A")
    a = a.copy()
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # Tableau: columns [original | artificial | rhs]; artificial basis.
    t = np.zeros((m + 1, n + m + 1))
    t[:m, :n] = a
    t[:m, n:n + m] = np.eye(m)
    t[:m, -1] = b
    # Objective row: minimize sum of artificials, expressed in reduced costs.
    t[m, :n] = -a.sum(axis=0)
    t[m, -1] = -b.sum()
    basis = np.arange(n, n + m)

    if max_iter is None:
        max_iter = 50 * (m + n)
    degenerate_streak = 0
    for _ in range(max_iter):
        costs = t[m, :n + m]
        if degenerate_streak > 2 * m:
            candidates = np.flatnonzero(costs < -tol)  # Bland: lowest index
            if candidates.size == 0:
                break
            enter = int(candidates[0])
        else:
            enter = int(np.argmin(costs))
            if costs[enter] >= -tol:
                break
        col = t[:m, enter]
        pos = col > _PIVOT_TOL
        if not pos.any():
            # Unbounded descent cannot happen in phase 1; numerical guard.
            raise SimplexError("no admissible pivot row")
        ratios = np.full(m, np.inf)
        ratios[pos] = t[:m, -1][pos] / col[pos]
        best = ratios.min()
        if not np.isfinite(best):
            raise SimplexError("numerical breakdown in the ratio test")
        ties = np.flatnonzero(ratios <= best)
        leave = int(ties[np.argmax(np.abs(col[ties]))])
        degenerate_streak = degenerate_streak + 1 if best < tol else 0

        pivot = t[leave, enter]
        t[leave] /= pivot
        rows = np.arange(m + 1) != leave
        t[rows] -= np.outer(t[rows, enter], t[leave])
        basis[leave] = enter
    else:
        raise SimplexError("iteration limit exceeded")

    residual = -t[m, -1]
    if residual > tol:
        return False, None
    x = np.zeros(n)
    for row, var in enumerate(basis):
        if var < n:
            x[var] = max(t[row, -1], 0.0)
    return True, x
