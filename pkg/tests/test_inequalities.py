import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellsim import models
from bellsim.errors import CapabilityError, ValidationError
from bellsim.inequalities import (
    BooleResult,
    ChshInput,
    FeasibilityProblem,
    TripleCorrelations,
    boole_check,
    ch_eberhard,
    chsh,
    chsh_from_counts,
    chsh_moment_problem,
    deterministic_bound,
    joint_feasibility,
    no_signaling_check,
    strategy_correlations,
    triple_feasibility,
)
from bellsim.protocol import CoincidenceCounts, scan_pairs
from bellsim.quantum import CHSH_OPTIMAL_ANGLES, TSIRELSON, singlet_expectation


# ---------------------------------------------------------------------------
# chsh
# ---------------------------------------------------------------------------

def test_chsh_zero_correlations():
    assert chsh(ChshInput((0.0, 0.0, 0.0, 0.0))).value == 0.0


def test_chsh_algebraic_maximum():
    res = chsh(ChshInput((1.0, 1.0, 1.0, -1.0)))
    assert res.value == 4.0
    assert res.violates


def test_chsh_singlet_reaches_tsirelson():
    ax, axp, by, byp = CHSH_OPTIMAL_ANGLES
    es = tuple(
        singlet_expectation(a, b) for a, b in
        [(ax, by), (ax, byp), (axp, by), (axp, byp)]
    )
    res = chsh(ChshInput(es))
    assert res.value == pytest.approx(TSIRELSON, abs=1e-12)


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.permutations(range(4)))
@settings(max_examples=200, deadline=None)
def test_chsh_invariant_under_term_relabeling(es, perm):
    s1 = chsh(ChshInput(tuple(es))).value
    s2 = chsh(ChshInput(tuple(es[i] for i in perm))).value
    assert s1 == pytest.approx(s2, abs=1e-12)


def test_chsh_se_by_quadrature():
    res = chsh(ChshInput((0.5, 0.5, 0.5, -0.5), (0.1, 0.1, 0.1, 0.1)))
    assert res.se == pytest.approx(0.2, abs=1e-15)
    assert res.z == pytest.approx((res.value - 2.0) / 0.2, abs=1e-12)


# ---------------------------------------------------------------------------
# ch_eberhard
# ---------------------------------------------------------------------------

def counts_from_cells(pairs, cell_maps):
    tables = np.zeros((len(pairs), 3, 3), dtype=np.int64)
    for k, cells in enumerate(cell_maps):
        for (a, b), count in cells.items():
            tables[k, a + 1, b + 1] = count
    return CoincidenceCounts(pairs, tables)


def test_eberhard_all_zero_counts(pairs):
    counts = counts_from_cells(pairs, [{}, {}, {}, {}])
    res = ch_eberhard(counts, pairs)
    assert res.value == 0.0
    assert not res.violates


def test_eberhard_golden_hand_computed(pairs):
    # Hand computation: J = 40/100 - (10+5)/100 - (8+2)/100 - 20/100 = -0.05;
    # variance = (0.4*0.6 + 0.15*0.85 + 0.1*0.9 + 0.2*0.8) / 100 = 0.006175.
    counts = counts_from_cells(pairs, [
        {(1, 1): 40, (-1, -1): 60},
        {(1, -1): 10, (1, 0): 5, (-1, -1): 85},
        {(-1, 1): 8, (0, 1): 2, (-1, -1): 90},
        {(1, 1): 20, (-1, -1): 80},
    ])
    res = ch_eberhard(counts, pairs)
    assert res.value == pytest.approx(-0.05, abs=1e-15)
    assert res.se == pytest.approx(math.sqrt(0.006175), abs=1e-15)
    assert not res.violates


def test_eberhard_nonpositive_for_lrhv_run(pairs):
    rng = np.random.default_rng(7)
    model = models.random_lrhv_model(rng, outcomes=(-1, 0, 1))
    counts = scan_pairs(model, pairs, 200_000, window=1.0, seed=12)
    res = ch_eberhard(counts, pairs)
    assert res.value <= 4 * res.se


def test_eberhard_nonpositive_for_coincidence_run(pairs):
    # Per-wing window suppression keeps the no-click outcome a local
    # deterministic function of the hidden parameters, so the full-count
    # statistic stays at or below zero no matter how narrow the window;
    # only the post-selected CHSH view shows a violation.
    model = models.coincidence_instance(delay_exponent=4.0, max_delay=1.0)
    counts = scan_pairs(model, pairs, 1_000_000, window=0.01, seed=3)
    res = ch_eberhard(counts, pairs)
    assert res.value <= 0.0 + 4 * res.se
    post = chsh_from_counts(counts, pairs)
    assert post.value > 2.0 and post.violates


def test_eberhard_missing_pair_errors(pairs):
    counts = counts_from_cells(pairs[:3], [{(1, 1): 5}] * 3)
    with pytest.raises(KeyError):
        ch_eberhard(counts, pairs)


# ---------------------------------------------------------------------------
# deterministic bound
# ---------------------------------------------------------------------------

def test_deterministic_bound_is_two():
    assert deterministic_bound(2) == 2.0


def test_single_constant_strategy_reaches_two():
    es = strategy_correlations((1, 1), (1, 1))
    assert chsh(ChshInput(es)).value == 2.0


def test_convex_mixtures_respect_bound():
    rng = np.random.default_rng(1789)
    strategies = [
        np.array(strategy_correlations(a, b))
        for a in itertools.product((-1, 1), repeat=2)
        for b in itertools.product((-1, 1), repeat=2)
    ]
    for _ in range(1000):
        w = rng.random(16)
        w /= w.sum()
        es = sum(wi * s for wi, s in zip(w, strategies))
        assert chsh(ChshInput(tuple(es))).value <= 2.0 + 1e-12


def test_deterministic_bound_other_sizes_unsupported():
    with pytest.raises(CapabilityError):
        deterministic_bound(3)


# ---------------------------------------------------------------------------
# boole conditions and feasibility
# ---------------------------------------------------------------------------

def test_boole_perfect_anticorrelation_unsatisfiable():
    res = boole_check(TripleCorrelations(-1.0, -1.0, -1.0))
    assert not res.satisfiable
    assert "1+E12+E13+E23" in res.violated_conditions
    assert res.margins[0] == pytest.approx(-2.0)


def test_boole_perfect_correlation_satisfiable():
    assert boole_check(TripleCorrelations(1.0, 1.0, 1.0)).satisfiable


def test_boole_symmetric_negative_triples():
    # Common pairwise correlation e is achievable for three +-1 variables
    # only down to e = -1/3 (first condition: 1 + 3e >= 0).  Both routes
    # agree that -0.4 is already out and -0.3 still has an LP witness.
    out = TripleCorrelations(-0.4, -0.4, -0.4)
    assert not boole_check(out).satisfiable
    assert not triple_feasibility(out).feasible

    ok = TripleCorrelations(-0.3, -0.3, -0.3)
    assert boole_check(ok).satisfiable
    res = triple_feasibility(ok)
    assert res.feasible
    assert res.max_moment_error <= 1e-9


def test_chsh_singlet_moments_infeasible():
    ax, axp, by, byp = CHSH_OPTIMAL_ANGLES
    es = tuple(
        singlet_expectation(a, b) for a, b in
        [(ax, by), (ax, byp), (axp, by), (axp, byp)]
    )
    assert not joint_feasibility(chsh_moment_problem(es)).feasible


def test_independent_fair_coins_feasible():
    problem = FeasibilityProblem(
        variables=("C1", "C2", "C3", "C4"),
        moments=tuple(((i,), 0.0) for i in range(4))
        + tuple(((i, j), 0.0) for i in range(4) for j in range(i + 1, 4)),
    )
    res = joint_feasibility(problem)
    assert res.feasible
    assert res.max_moment_error <= 1e-9
    # The uniform distribution is one valid witness; the solver returns a
    # basic solution, so only the moment match is asserted.
    assert res.witness.sum() == pytest.approx(1.0, abs=1e-12)


def test_boole_and_feasibility_agree_on_grid():
    grid = np.linspace(-1, 1, 9)
    for e12 in grid:
        for e13 in grid:
            for e23 in grid:
                t = TripleCorrelations(e12, e13, e23)
                assert boole_check(t).satisfiable == triple_feasibility(t).feasible


def test_witness_reproduces_moments_for_random_feasible_sets():
    rng = np.random.default_rng(99)
    for _ in range(25):
        n = int(rng.integers(2, 5))
        p = rng.random(2 ** n)
        p /= p.sum()
        signs = 2 * ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1) - 1
        moments = []
        for i in range(n):
            moments.append(((i,), float(signs[:, i] @ p)))
        for i in range(n):
            for j in range(i + 1, n):
                moments.append(((i, j), float((signs[:, i] * signs[:, j]) @ p)))
        problem = FeasibilityProblem(
            tuple(f"V{i}" for i in range(n)), tuple(moments)
        )
        res = joint_feasibility(problem)
        assert res.feasible
        assert res.max_moment_error <= 1e-9


def test_feasibility_size_cap():
    problem = FeasibilityProblem(
        tuple(f"V{i}" for i in range(13)), (((0,), 0.0),)
    )
    with pytest.raises(CapabilityError):
        joint_feasibility(problem)


def test_simplex_agrees_with_scipy_on_random_problems():
    from scipy.optimize import linprog

    from bellsim.simplex import solve_feasibility

    rng = np.random.default_rng(2025)
    for _ in range(40):
        m, n = int(rng.integers(2, 6)), int(rng.integers(4, 12))
        a = rng.normal(size=(m, n))
        b = rng.normal(size=m)
        ours, _ = solve_feasibility(a, b)
        ref = linprog(np.zeros(n), A_eq=a, b_eq=b, bounds=[(0, None)] * n,
                      method="highs")
        assert ours == ref.success


# ---------------------------------------------------------------------------
# no-signaling check
# ---------------------------------------------------------------------------

def test_no_signaling_exact_product_tables(pairs):
    rng = np.random.default_rng(313)
    model = models.random_product_model(rng, outcomes=(-1, 0, 1))
    tables = {p: models.contextual_joint(model, p) for p in pairs}
    report = no_signaling_check(tables)
    assert report.passed
    assert report.max_discrepancy <= 1e-12


def test_no_signaling_flags_constructed_signaling_target():
    (x, _), (y, yp) = models.chsh_settings()
    t1 = np.zeros((3, 3))
    t1[2, 2], t1[0, 2] = 0.6, 0.4
    t2 = np.zeros((3, 3))
    t2[2, 2], t2[0, 2] = 0.4, 0.6
    model = models.fit_contextual({
        models.SettingPair(x, y): t1, models.SettingPair(x, yp): t2,
    })
    tables = {
        p: models.contextual_joint(model, p)
        for p in (models.SettingPair(x, y), models.SettingPair(x, yp))
    }
    report = no_signaling_check(tables)
    assert not report.passed
    assert report.max_discrepancy == pytest.approx(0.2, abs=1e-12)


def test_no_signaling_counts_mode(pairs):
    model = models.coincidence_instance()
    counts = scan_pairs(model, pairs, 1_000_000, window=0.05, seed=6)
    report = no_signaling_check(counts)
    assert report.passed
    assert all(c.p_value > 0.001 for c in report.checks)


def test_no_signaling_requires_shared_settings():
    (x, xp), (y, yp) = models.chsh_settings()
    p1, p2 = models.SettingPair(x, y), models.SettingPair(xp, yp)
    tables = {
        p1: models.JointOutcomeDist(p1, np.full((3, 3), 1 / 9)),
        p2: models.JointOutcomeDist(p2, np.full((3, 3), 1 / 9)),
    }
    with pytest.raises(ValidationError):
        no_signaling_check(tables)
