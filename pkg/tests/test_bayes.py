from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellsim import bayes, models
from bellsim.bayes import (
    Event,
    FiniteProbabilitySpace,
    balls_events,
    balls_space,
    cond_prob,
    drug_trial_space,
    freedom_check,
    lambda_table,
    measurement_independence_check,
    total_prob,
)
from bellsim.errors import CapabilityError, ValidationError
from bellsim.models import (
    ContextualProductModel,
    FiniteInstrument,
    FiniteJointSource,
    LrhvModel,
    SettingPair,
)


# ---------------------------------------------------------------------------
# exact model builders
# ---------------------------------------------------------------------------

def rational_product_model(rng: np.random.Generator) -> ContextualProductModel:
    (sx, sxp), (sy, syp) = models.chsh_settings()
    n1, n2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))

    def rational_vector(n):
        nums = rng.integers(1, 9, size=n)
        total = int(nums.sum())
        return tuple(Fraction(int(k), total) for k in nums)

    src_rows = []
    nums = rng.integers(1, 9, size=(n1, n2))
    total = int(nums.sum())
    src_exact = tuple(
        tuple(Fraction(int(nums[i, j]), total) for j in range(n2)) for i in range(n1)
    )
    src = FiniteJointSource(
        np.array([[float(w) for w in row] for row in src_exact]), src_exact
    )
    instruments, responses = {}, {}
    for s in (sx, sxp, sy, syp):
        k = int(rng.integers(1, 4))
        exact = rational_vector(k)
        instruments[s] = FiniteInstrument(np.array([float(w) for w in exact]), exact)
        n_src = n1 if s.side == "A" else n2
        responses[s] = rng.choice((-1, 0, 1), size=(n_src, k))
    return ContextualProductModel(src, (sx, sxp), (sy, syp), instruments, responses)


def rational_lrhv_model(rng: np.random.Generator) -> LrhvModel:
    (sx, sxp), (sy, syp) = models.chsh_settings()
    n1, n2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    nums = rng.integers(1, 9, size=(n1, n2))
    total = int(nums.sum())
    exact = tuple(
        tuple(Fraction(int(nums[i, j]), total) for j in range(n2)) for i in range(n1)
    )
    src = FiniteJointSource(np.array([[float(w) for w in row] for row in exact]), exact)
    responses = {
        s: rng.choice((-1, 1), size=(n1 if s.side == "A" else n2,))
        for s in (sx, sxp, sy, syp)
    }
    return LrhvModel(src, (sx, sxp), (sy, syp), responses)


def equal_weights(pairs):
    return {p: Fraction(1, len(pairs)) for p in pairs}


# ---------------------------------------------------------------------------
# the balls example
# ---------------------------------------------------------------------------

def test_balls_conditionals_exact():
    space = balls_space()
    ev = balls_events(space)
    assert cond_prob(space, ev["big"], ev["red"]) == Fraction(1, 3)
    assert cond_prob(space, ev["red"], ev["big"]) == Fraction(1, 2)


def test_balls_conditionals_differ():
    # P(big | red) != P(red | big): conditioning carries no direction.
    space = balls_space()
    ev = balls_events(space)
    assert cond_prob(space, ev["big"], ev["red"]) != cond_prob(space, ev["red"], ev["big"])


def test_balls_total_probability():
    space = balls_space()
    ev = balls_events(space)
    p = total_prob(space, ev["big"], [ev["red"], ev["white"]])
    assert p == space.prob(ev["big"])
    # The two conditional terms: (1/3)(3/8) + (1/5)(5/8).
    assert p == Fraction(1, 3) * Fraction(3, 8) + Fraction(1, 5) * Fraction(5, 8)


def test_conditioning_on_everything_is_unconditional():
    space = balls_space()
    ev = balls_events(space)
    assert cond_prob(space, ev["big"], space.everything()) == space.prob(ev["big"])


def test_event_inside_condition_gives_one():
    space = balls_space()
    red_big = space.event([("red", "big")])
    red = balls_events(space)["red"]
    assert cond_prob(space, red, red_big) == 1


def test_zero_probability_condition_rejected():
    space = FiniteProbabilitySpace(("a", "b"), (Fraction(1), Fraction(0)))
    with pytest.raises(ValidationError):
        cond_prob(space, space.event(["a"]), space.event(["b"]))


def test_partition_validation():
    space = balls_space()
    ev = balls_events(space)
    with pytest.raises(ValidationError, match="overlap"):
        total_prob(space, ev["big"], [ev["red"], ev["red"]])
    with pytest.raises(ValidationError, match="cover"):
        total_prob(space, ev["big"], [ev["red"]])


def test_space_requires_exact_normalization():
    with pytest.raises(ValidationError):
        FiniteProbabilitySpace(("a", "b"), (Fraction(1, 3), Fraction(1, 3)))


def test_drug_trial_space_identities():
    space = drug_trial_space()
    treated = space.event(lambda a: a[0] == "candesartan")
    placebo = space.event(lambda a: a[0] == "placebo")
    lowered = space.event(lambda a: a[1] == "lowered")
    assert total_prob(space, lowered, [treated, placebo]) == space.prob(lowered)
    lhs = cond_prob(space, lowered, treated) * space.prob(treated)
    assert lhs == cond_prob(space, treated, lowered) * space.prob(lowered)


# ---------------------------------------------------------------------------
# property tests on random rational spaces
# ---------------------------------------------------------------------------

@st.composite
def rational_space_and_events(draw):
    n = draw(st.integers(2, 6))
    nums = draw(
        st.lists(st.integers(0, 12), min_size=n, max_size=n)
        .filter(lambda v: sum(v) > 0)
    )
    total = sum(nums)
    space = FiniteProbabilitySpace(
        tuple(range(n)), tuple(Fraction(k, total) for k in nums)
    )
    a = draw(st.sets(st.sampled_from(range(n))))
    e = draw(st.sets(st.sampled_from(range(n))))
    return space, space.event(a), space.event(e)


@given(rational_space_and_events())
@settings(max_examples=200, deadline=None)
def test_bayes_symmetry_exact(space_and_events):
    space, a, e = space_and_events
    if space.prob(a) == 0 or space.prob(e) == 0:
        return
    assert cond_prob(space, a, e) * space.prob(e) == cond_prob(space, e, a) * space.prob(a)


@given(rational_space_and_events())
@settings(max_examples=200, deadline=None)
def test_total_probability_exact(space_and_events):
    space, a, _ = space_and_events
    partition = [
        space.event([atom])
        for atom, w in zip(space.atoms, space.weights) if w > 0
    ]
    assert total_prob(space, a, partition) == space.prob(a)


# ---------------------------------------------------------------------------
# measurement independence and freedom of choice
# ---------------------------------------------------------------------------

def test_source_only_families_are_independent():
    rng = np.random.default_rng(10)
    pairs = models.chsh_pairs()
    model = rational_lrhv_model(rng)
    report = measurement_independence_check(model, equal_weights(pairs))
    assert report.independent
    assert report.exact
    assert report.max_deviation == 0


def test_fitted_model_with_distinct_targets_is_dependent():
    from bellsim.quantum import singlet_table

    pairs = models.chsh_pairs()
    model = models.fit_contextual(
        {p: singlet_table(p.x.angle, p.y.angle) for p in pairs}
    )
    report = measurement_independence_check(model, {p: 0.25 for p in pairs})
    assert not report.independent


def test_product_model_dependent_on_union_space_yet_freedom_holds():
    rng = np.random.default_rng(20)
    pairs = models.chsh_pairs()
    model = rational_product_model(rng)
    weights = equal_weights(pairs)
    independence = measurement_independence_check(model, weights)
    freedom = freedom_check(model, weights)
    # Setting-tagged instrument atoms make the per-pair distributions differ,
    # while every occurring atom still pins down its pair with certainty.
    assert not independence.independent
    assert freedom.factorization_holds
    assert freedom.all_posteriors_one
    assert freedom.exact


def test_freedom_factorization_exact_over_random_rational_models():
    rng = np.random.default_rng(30)
    pairs = models.chsh_pairs()
    for _ in range(25):
        model = rational_product_model(rng)
        report = freedom_check(model, equal_weights(pairs))
        assert report.factorization_holds
        assert report.max_factorization_error == 0
        assert all(v == 1 for v in report.setting_posteriors.values())


def test_freedom_single_pair_trivially_one():
    rng = np.random.default_rng(40)
    model = rational_product_model(rng)
    pair = models.chsh_pairs()[0]
    report = freedom_check(model, {pair: Fraction(1)})
    assert report.setting_posteriors[pair.labels] == 1


def test_freedom_requires_product_family():
    pairs = models.chsh_pairs()
    from bellsim.quantum import singlet_table

    fitted = models.fit_contextual({p: singlet_table(0.0, 0.5) for p in pairs[:1]})
    with pytest.raises(ValidationError):
        freedom_check(fitted, {pairs[0]: Fraction(1)})


def test_lambda_table_requires_finite_model():
    with pytest.raises(CapabilityError):
        lambda_table(models.coincidence_instance(), models.chsh_pairs()[0])


def test_lambda_table_float_models_checked_at_tolerance():
    rng = np.random.default_rng(50)
    pairs = models.chsh_pairs()
    model = models.random_product_model(rng)  # float weights, no exact payload
    report = freedom_check(model, {p: 0.25 for p in pairs})
    assert not report.exact
    assert report.factorization_holds
    assert report.all_posteriors_one
