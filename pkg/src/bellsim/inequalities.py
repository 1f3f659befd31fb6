"""Bell-type inequality evaluation and joint-distribution feasibility.

Covers the CHSH combination with standard errors, the CH/Eberhard count
inequality for 0/+-1 data, the deterministic-strategy bound by enumeration,
the four pair-correlation conditions for three dichotomous variables, linear
feasibility of a joint distribution reproducing given moments, and the
no-signaling marginal check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import CapabilityError, ValidationError
from .models import JointOutcomeDist, SettingPair
from .protocol import CoincidenceCounts
from .simplex import solve_feasibility
from .special import chi_square_tail

CLASSICAL_CHSH_BOUND = 2.0
DEFAULT_SIGMA_LEVEL = 5.0
MOMENT_TOL = 1e-9
MAX_FEASIBILITY_VARIABLES = 12


@dataclass(frozen=True)
class InequalityResult:
    name: str
    value: float
    se: float
    bound: float
    sigma_level: float = DEFAULT_SIGMA_LEVEL

    @property
    def z(self) -> float:
        if self.se == 0:
            return float("inf") if self.value > self.bound else 0.0
        return (self.value - self.bound) / self.se

    @property
    def violates(self) -> bool:
        if self.se == 0:
            return self.value > self.bound
        return self.value > self.bound + self.sigma_level * self.se

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "se": self.se,
            "bound": self.bound,
            "sigma": self.z,
            "violates": self.violates,
        }


@dataclass(frozen=True)
class ChshInput:
    """Four correlations E(x,y), E(x,y'), E(x',y), E(x',y') with errors."""

    es: tuple[float, float, float, float]
    ses: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for e, se in zip(self.es, self.ses):
            if se < 0:
                raise ValidationError("standard errors must be nonnegative")
            if abs(e) > 1.0 + 3.0 * se + 1e-12:
                raise ValidationError(f"correlation {e} outside [-1, 1] by more than 3 se")


def chsh(inp: ChshInput, sigma_level: float = DEFAULT_SIGMA_LEVEL) -> InequalityResult:
    """CHSH statistic, maximized over the four placements of the minus sign."""
    es = np.asarray(inp.es)
    total = es.sum()
    s = float(np.max(np.abs(total - 2.0 * es)))
    se = float(np.sqrt(np.sum(np.square(inp.ses))))
    return InequalityResult("CHSH", s, se, CLASSICAL_CHSH_BOUND, sigma_level)


def chsh_from_counts(
    counts: CoincidenceCounts,
    pairs: Sequence[SettingPair],
    sigma_level: float = DEFAULT_SIGMA_LEVEL,
) -> InequalityResult:
    """CHSH from post-selected 2x2 tables at the four pairs."""
    from .stats import estimate_correlation

    if len(pairs) != 4:
        raise ValidationError("CHSH needs exactly four setting pairs")
    ests = [estimate_correlation(counts.selected(p)) for p in pairs]
    return chsh(
        ChshInput(tuple(e.e for e in ests), tuple(e.se for e in ests)),
        sigma_level,
    )


def ch_eberhard(
    counts: CoincidenceCounts,
    pairs: Sequence[SettingPair],
    sigma_level: float = DEFAULT_SIGMA_LEVEL,
) -> InequalityResult:
    """CH/Eberhard count statistic J on raw 0/+-1 data, per emitted pair.

    With pairs ordered (x,y), (x,y'), (x',y), (x',y') and f_ab the per-window
    frequency of outcome pair (a, b) at a setting pair:

        J = f_++(x,y) - f_+-(x,y') - f_+0(x,y')
                      - f_-+(x',y) - f_0+(x',y) - f_++(x',y')

    Locally causal models with setting-independent parameters give J <= 0;
    J > 0 at the configured sigma level flags a violation.  This is the
    standard single-channel form; the exact layout is locked by golden tests.
    """
    if len(pairs) != 4:
        raise ValidationError("CH/Eberhard needs exactly four setting pairs")
    pxy, pxyp, pxpy, pxpyp = pairs

    def freq(pair: SettingPair, cells: list[tuple[int, int]]) -> tuple[float, float, int]:
        t = counts.table(pair)
        n = int(t.sum())
        if n == 0:
            return 0.0, 0.0, 0
        p = sum(int(t[a + 1, b + 1]) for a, b in cells) / n
        return p, p * (1.0 - p) / n, n

    terms = [
        (+1.0, freq(pxy, [(1, 1)])),
        (-1.0, freq(pxyp, [(1, -1), (1, 0)])),
        (-1.0, freq(pxpy, [(-1, 1), (0, 1)])),
        (-1.0, freq(pxpyp, [(1, 1)])),
    ]
    j = sum(sign * p for sign, (p, _, _) in terms)
    var = sum(v for _, (_, v, _) in terms)
    return InequalityResult("CH-Eberhard", float(j), float(np.sqrt(var)), 0.0, sigma_level)


def deterministic_bound(settings_per_side: int = 2) -> float:
    """Maximum |S| over all deterministic two-setting strategies, by
    exhaustive enumeration of the 16 assignment pairs."""
    if settings_per_side != 2:
        raise CapabilityError("deterministic bound implemented for 2 settings per side")
    best = 0.0
    for a1, a2, b1, b2 in itertools.product((-1, 1), repeat=4):
        es = strategy_correlations((a1, a2), (b1, b2))
        best = max(best, chsh(ChshInput(es)).value)
    return best


def strategy_correlations(
    a: tuple[int, int], b: tuple[int, int]
) -> tuple[float, float, float, float]:
    """Correlations (E11, E12, E21, E22) of one deterministic strategy."""
    return (
        float(a[0] * b[0]), float(a[0] * b[1]),
        float(a[1] * b[0]), float(a[1] * b[1]),
    )


@dataclass(frozen=True)
class TripleCorrelations:
    """Pairwise correlations of three +-1 variables."""

    e12: float
    e13: float
    e23: float

    def __post_init__(self):
        for e in (self.e12, self.e13, self.e23):
            if abs(e) > 1.0 + 1e-12:
                raise ValidationError("pair correlations must lie in [-1, 1]")


@dataclass(frozen=True)
class BooleResult:
    satisfiable: bool
    violated_conditions: tuple[str, ...]
    margins: tuple[float, float, float, float]


def boole_check(t: TripleCorrelations) -> BooleResult:
    """The four linear conditions equivalent to the existence of a joint
    distribution for three +-1 variables with the given pair correlations."""
    conds = (
        ("1+E12+E13+E23", 1.0 + t.e12 + t.e13 + t.e23),
        ("1+E12-E13-E23", 1.0 + t.e12 - t.e13 - t.e23),
        ("1-E12+E13-E23", 1.0 - t.e12 + t.e13 - t.e23),
        ("1-E12-E13+E23", 1.0 - t.e12 - t.e13 + t.e23),
    )
    violated = tuple(name for name, value in conds if value < -1e-12)
    return BooleResult(
        satisfiable=not violated,
        violated_conditions=violated,
        margins=tuple(value for _, value in conds),
    )


@dataclass(frozen=True)
class FeasibilityProblem:
    """Do the stated single/pairwise moments of +-1 variables admit a joint
    distribution?  Moments are keyed by index tuples: (i,) for a single
    expectation, (i, j) for a pair product."""

    variables: tuple[str, ...]
    moments: tuple[tuple[tuple[int, ...], float], ...]

    def __post_init__(self):
        n = len(self.variables)
        if len(set(self.variables)) != n:
            raise ValidationError("variable names must be unique")
        for subset, value in self.moments:
            if not subset or len(subset) > 2 or len(set(subset)) != len(subset):
                raise ValidationError(f"moment subset {subset} must name 1 or 2 distinct variables")
            if any(i < 0 or i >= n for i in subset):
                raise ValidationError(f"moment subset {subset} out of range")
            if abs(value) > 1.0 + 1e-12:
                raise ValidationError(f"moment value {value} outside [-1, 1]")


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: np.ndarray | None
    max_moment_error: float | None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "max_moment_error": self.max_moment_error,
        }


def _assignments(n: int) -> np.ndarray:
    # Row r encodes the +-1 assignment with bit pattern r (bit i -> variable i).
    bits = (np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1
    return 2 * bits - 1


def joint_feasibility(problem: FeasibilityProblem) -> FeasibilityResult:
    """Linear feasibility of a joint pmf over all +-1 assignments matching
    the given moments; returns a verified witness when feasible."""
    n = len(problem.variables)
    if n > MAX_FEASIBILITY_VARIABLES:
        raise CapabilityError(
            f"feasibility supports at most {MAX_FEASIBILITY_VARIABLES} variables (2^n columns)"
        )
    assign = _assignments(n).astype(np.float64)
    rows = [np.ones(2 ** n)]
    rhs = [1.0]
    for subset, value in problem.moments:
        col = np.prod(assign[:, list(subset)], axis=1)
        rows.append(col)
        rhs.append(value)
    feasible, x = solve_feasibility(np.vstack(rows), np.asarray(rhs), tol=MOMENT_TOL)
    if not feasible:
        return FeasibilityResult(False, None, None)
    # Re-verify the witness against every input moment.
    x = np.maximum(x, 0.0)
    x = x / x.sum()
    errs = [abs(float(np.prod(assign[:, list(s)], axis=1) @ x) - v) for s, v in problem.moments]
    max_err = max(errs, default=0.0)
    if max_err > MOMENT_TOL * 10:
        raise ValidationError(
            f"simplex returned a witness violating its moments by {max_err:.3e}"
        )
    return FeasibilityResult(True, x, max_err)


def triple_feasibility(t: TripleCorrelations) -> FeasibilityResult:
    problem = FeasibilityProblem(
        variables=("S1", "S2", "S3"),
        moments=(((0, 1), t.e12), ((0, 2), t.e13), ((1, 2), t.e23)),
    )
    return joint_feasibility(problem)


def chsh_moment_problem(es: tuple[float, float, float, float]) -> FeasibilityProblem:
    """The four pairwise moments E(A,B), E(A,B'), E(A',B), E(A',B') over
    variables (A, A', B, B')."""
    return FeasibilityProblem(
        variables=("A", "Ap", "B", "Bp"),
        moments=(((0, 2), es[0]), ((0, 3), es[1]), ((1, 2), es[2]), ((1, 3), es[3])),
    )


@dataclass(frozen=True)
class MarginalCheck:
    side: str
    setting_label: str
    remote_labels: tuple[str, ...]
    discrepancy: float          # max total-variation distance (exact mode)
    chi_square: float | None    # counts mode
    dof: int | None
    p_value: float | None
    passed: bool


@dataclass(frozen=True)
class NoSignalingReport:
    checks: tuple[MarginalCheck, ...]
    max_discrepancy: float
    passed: bool


def _group_by_shared(pairs: Sequence[SettingPair]):
    by_x: dict[str, list[SettingPair]] = {}
    by_y: dict[str, list[SettingPair]] = {}
    for p in pairs:
        by_x.setdefault(p.x.label, []).append(p)
        by_y.setdefault(p.y.label, []).append(p)
    groups = [("A", lbl, ps) for lbl, ps in by_x.items() if len(ps) > 1]
    groups += [("B", lbl, ps) for lbl, ps in by_y.items() if len(ps) > 1]
    if not groups:
        raise ValidationError("no setting is shared by two or more pairs")
    return groups


def no_signaling_check(
    tables: Mapping[SettingPair, JointOutcomeDist] | CoincidenceCounts,
    tol: float = 1e-10,
    alpha: float = 0.001,
) -> NoSignalingReport:
    """Does either wing's outcome marginal depend on the remote setting?

    Exact probability tables are compared by total-variation distance at
    ``tol``; count tables by a chi-square homogeneity test at level
    ``alpha``.
    """
    if isinstance(tables, CoincidenceCounts):
        return _no_signaling_counts(tables, alpha)
    pairs = list(tables.keys())
    checks = []
    for side, label, group in _group_by_shared(pairs):
        margs = []
        remotes = []
        for p in group:
            dist = tables[p]
            margs.append(dist.marginal_a() if side == "A" else dist.marginal_b())
            remotes.append(p.y.label if side == "A" else p.x.label)
        disc = 0.0
        for m1, m2 in itertools.combinations(margs, 2):
            disc = max(disc, 0.5 * float(np.abs(m1 - m2).sum()))
        checks.append(MarginalCheck(
            side, label, tuple(remotes), disc, None, None, None, disc <= tol,
        ))
    max_disc = max(c.discrepancy for c in checks)
    return NoSignalingReport(tuple(checks), max_disc, all(c.passed for c in checks))


def _no_signaling_counts(counts: CoincidenceCounts, alpha: float) -> NoSignalingReport:
    from .stats import chi_square_homogeneity

    checks = []
    for side, label, group in _group_by_shared(counts.pairs):
        rows = []
        remotes = []
        for p in group:
            rows.append(counts.singles_a(p) if side == "A" else counts.singles_b(p))
            remotes.append(p.y.label if side == "A" else p.x.label)
        table = np.vstack(rows)
        chi, dof, p_value, _ = chi_square_homogeneity(table)
        freqs = table / table.sum(axis=1, keepdims=True)
        disc = 0.0
        for f1, f2 in itertools.combinations(freqs, 2):
            disc = max(disc, 0.5 * float(np.abs(f1 - f2).sum()))
        checks.append(MarginalCheck(
            side, label, tuple(remotes), disc, chi, dof, p_value, p_value > alpha,
        ))
    max_disc = max(c.discrepancy for c in checks)
    return NoSignalingReport(tuple(checks), max_disc, all(c.passed for c in checks))
