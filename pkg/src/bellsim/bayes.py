"""Exact finite probability spaces and conditional-probability computations.

Everything in this module is exact rational arithmetic: probabilities are
``fractions.Fraction`` and identities are checked with zero tolerance.
Besides the generic conditional/total-probability engine, it provides the
two checks that separate "parameters depend on the settings" from
"parameters constrain the choice of settings": ``measurement_independence_check``
asks whether the hidden-parameter distribution is the same for every setting
pair, and ``freedom_check`` verifies that, even when it is not, observing the
instrument parameters merely identifies which settings were in use.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from .errors import CapabilityError, ValidationError
from .models import (
    ContextualFittedModel,
    ContextualProductModel,
    LrhvModel,
    SettingPair,
    ShvModel,
)

FLOAT_TOL = Fraction(1, 10**12)


@dataclass(frozen=True)
class FiniteProbabilitySpace:
    """Labeled atoms with exact rational weights summing to exactly 1."""

    atoms: tuple[Hashable, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.atoms) != len(self.weights):
            raise ValidationError("one weight per atom required")
        if len(set(self.atoms)) != len(self.atoms):
            raise ValidationError("atom labels must be distinct")
        ws = tuple(Fraction(w) for w in self.weights)
        if any(w < 0 for w in ws):
            raise ValidationError("weights must be nonnegative")
        if sum(ws) != 1:
            raise ValidationError(f"weights sum to {sum(ws)}, not exactly 1")
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "weights", ws)

    def event(self, members: Iterable[Hashable] | Callable[[Hashable], bool]) -> "Event":
        if callable(members):
            atoms = frozenset(a for a in self.atoms if members(a))
        else:
            atoms = frozenset(members)
            unknown = atoms - set(self.atoms)
            if unknown:
                raise ValidationError(f"atoms not in this space: {sorted(map(str, unknown))}")
        return Event(self, atoms)

    def everything(self) -> "Event":
        return Event(self, frozenset(self.atoms))

    def prob(self, event: "Event") -> Fraction:
        if event.space is not self:
            raise ValidationError("event belongs to a different space")
        return sum(
            (w for a, w in zip(self.atoms, self.weights) if a in event.atoms),
            Fraction(0),
        )


@dataclass(frozen=True)
class Event:
    space: FiniteProbabilitySpace
    atoms: frozenset

    def __and__(self, other: "Event") -> "Event":
        if self.space is not other.space:
            raise ValidationError("events from different spaces")
        return Event(self.space, self.atoms & other.atoms)

    @property
    def probability(self) -> Fraction:
        return self.space.prob(self)


def cond_prob(space: FiniteProbabilitySpace, a: Event, e: Event) -> Fraction:
    """P(A | E) = P(A and E) / P(E), exact."""
    pe = space.prob(e)
    if pe == 0:
        raise ValidationError("conditioning event has probability zero")
    return space.prob(a & e) / pe


def total_prob(
    space: FiniteProbabilitySpace, a: Event, partition: Sequence[Event]
) -> Fraction:
    """Sum of P(A | E_i) P(E_i) over a disjoint partition covering A."""
    seen: set = set()
    covered: set = set()
    for e in partition:
        if e.space is not space:
            raise ValidationError("partition event from a different space")
        if seen & e.atoms:
            raise ValidationError("partition events overlap")
        if space.prob(e) == 0:
            raise ValidationError("partition event has probability zero")
        seen |= e.atoms
        covered |= e.atoms
    support = {at for at, w in zip(space.atoms, space.weights) if w > 0 and at in a.atoms}
    if not support <= covered:
        raise ValidationError("partition does not cover the event's support")
    return sum((cond_prob(space, a, e) * space.prob(e) for e in partition), Fraction(0))


def balls_space() -> FiniteProbabilitySpace:
    """The balls-in-a-box demo: color x size with fixed rational weights.

    The weights are chosen so that a third of the red balls are big and half
    of the big balls are red, the two conditionals the demo is about:
    P(big | red) = 1/3 and P(red | big) = 1/2, exactly.
    """
    return FiniteProbabilitySpace(
        atoms=(("red", "big"), ("red", "small"), ("white", "big"), ("white", "small")),
        weights=(Fraction(1, 8), Fraction(1, 4), Fraction(1, 8), Fraction(1, 2)),
    )


def balls_events(space: FiniteProbabilitySpace) -> dict[str, Event]:
    return {
        "red": space.event(lambda a: a[0] == "red"),
        "white": space.event(lambda a: a[0] == "white"),
        "big": space.event(lambda a: a[1] == "big"),
        "small": space.event(lambda a: a[1] == "small"),
    }


def drug_trial_space() -> FiniteProbabilitySpace:
    """Randomized drug-trial demo: treatment x response.

    The weights are illustrative placeholders chosen for the demo; only the
    shape of the computation matters.
    """
    return FiniteProbabilitySpace(
        atoms=(
            ("candesartan", "lowered"), ("candesartan", "unchanged"),
            ("placebo", "lowered"), ("placebo", "unchanged"),
        ),
        weights=(Fraction(7, 20), Fraction(3, 20), Fraction(1, 5), Fraction(3, 10)),
    )


# ---------------------------------------------------------------------------
# Setting-tagged hidden-parameter spaces
# ---------------------------------------------------------------------------

Weight = Fraction | float


def _source_weight(model, i: int, j: int) -> Weight:
    if model.source.exact is not None:
        return model.source.exact[i][j]
    return float(model.source.weights[i, j])


def _instrument_weight(model: ContextualProductModel, setting, k: int) -> Weight:
    inst = model.instruments[setting]
    if inst.exact is not None:
        return inst.exact[k]
    return float(inst.weights[k])


def lambda_table(model, pair: SettingPair) -> dict[Hashable, Weight]:
    """Hidden-parameter distribution used at one setting pair, over atoms
    tagged so that different settings' instrument components never collide.

    Exact rationals when the model carries exact weights, floats otherwise.
    """
    fam = getattr(model, "family", None)
    if getattr(model, "continuous", False):
        raise CapabilityError("hidden-parameter tables require a finite model")
    table: dict[Hashable, Weight] = {}
    if isinstance(model, ContextualProductModel):
        n1, n2 = model.source.shape
        for i in range(n1):
            for j in range(n2):
                w_src = _source_weight(model, i, j)
                for k in range(model.instruments[pair.x].size):
                    w_a = _instrument_weight(model, pair.x, k)
                    for l in range(model.instruments[pair.y].size):
                        w_b = _instrument_weight(model, pair.y, l)
                        atom = (i, j, ("A", pair.x.label, k), ("B", pair.y.label, l))
                        table[atom] = w_src * w_a * w_b
        return table
    if isinstance(model, ContextualFittedModel):
        t = model.table_for(pair)
        exact = model.exact_tables.get(pair.labels) if model.exact_tables else None
        for a in range(3):
            for b in range(3):
                w = exact[a][b] if exact is not None else float(t[a, b])
                table[(("pair", *pair.labels), a - 1, b - 1)] = w
        return table
    if isinstance(model, (ShvModel, LrhvModel)):
        n1, n2 = model.source.shape
        for i in range(n1):
            for j in range(n2):
                table[(i, j)] = _source_weight(model, i, j)
        return table
    raise ValidationError(f"unsupported model family {fam!r}")


def _as_weights(values, exact: bool):
    if exact:
        return [Fraction(v) for v in values]
    return [float(v) for v in values]


@dataclass(frozen=True)
class IndependenceReport:
    independent: bool
    max_deviation: Fraction | float
    exact: bool


def measurement_independence_check(
    model, schedule_weights: Mapping[SettingPair, Weight]
) -> IndependenceReport:
    """Is the hidden-parameter distribution the same for every setting pair?

    Builds the pair-averaged distribution over the union of the tagged atom
    spaces and compares each per-pair distribution against it.  Exact for
    rational inputs; otherwise compared at 1e-12.
    """
    pairs = list(schedule_weights.keys())
    if not pairs:
        raise ValidationError("no setting pairs supplied")
    tables = {p: lambda_table(model, p) for p in pairs}
    exact = all(
        isinstance(w, Fraction) for t in tables.values() for w in t.values()
    ) and all(isinstance(w, Fraction) for w in schedule_weights.values())

    total = sum(schedule_weights.values())
    if (exact and total != 1) or (not exact and abs(float(total) - 1.0) > 1e-12):
        raise ValidationError("schedule weights must sum to 1")

    union: dict[Hashable, Weight] = {}
    zero: Weight = Fraction(0) if exact else 0.0
    for p in pairs:
        wp = schedule_weights[p]
        for atom, w in tables[p].items():
            union[atom] = union.get(atom, zero) + wp * w
    max_dev: Weight = zero
    for p in pairs:
        t = tables[p]
        for atom, marginal in union.items():
            dev = abs(t.get(atom, zero) - marginal)
            if dev > max_dev:
                max_dev = dev
    tol = Fraction(0) if exact else 1e-12
    return IndependenceReport(max_dev <= tol, max_dev, exact)


@dataclass(frozen=True)
class FreedomReport:
    factorization_holds: bool
    max_factorization_error: Fraction | float
    setting_posteriors: dict          # pair labels -> min over atoms of P(pair | atom)
    all_posteriors_one: bool
    skipped_atoms: tuple
    exact: bool
    conclusion: str


FREEDOM_CONCLUSION = (
    "Observing the instrument parameters identifies which settings were in "
    "use; identification is not causation, so setting-dependent parameter "
    "distributions leave the choice of settings unconstrained."
)


def freedom_check(
    model: ContextualProductModel,
    schedule_weights: Mapping[SettingPair, Weight],
) -> FreedomReport:
    """Verify the two facts behind 'setting-dependent parameters do not
    constrain the experimenters':

    (i) each pair's parameter distribution factorizes as source x instrument
    x instrument, and (ii) for every parameter atom that can occur under a
    pair, the posterior probability of that pair given the atom equals 1
    (atoms of different pairs never collide thanks to the setting tags).
    """
    if not isinstance(model, ContextualProductModel):
        raise ValidationError("the factorized-freedom check requires the product form")
    pairs = list(schedule_weights.keys())
    if not pairs:
        raise ValidationError("no setting pairs supplied")
    tables = {p: lambda_table(model, p) for p in pairs}
    exact = all(
        isinstance(w, Fraction) for t in tables.values() for w in t.values()
    ) and all(isinstance(w, Fraction) for w in schedule_weights.values())
    zero: Weight = Fraction(0) if exact else 0.0
    tol: Weight = Fraction(0) if exact else 1e-12

    # (i) factorization: recompute each atom weight from the stored factors.
    max_err: Weight = zero
    for p in pairs:
        for atom, w in tables[p].items():
            i, j, (_, _, k), (_, _, l) = atom
            recomputed = (
                _source_weight(model, i, j)
                * _instrument_weight(model, p.x, k)
                * _instrument_weight(model, p.y, l)
            )
            err = abs(w - recomputed)
            if err > max_err:
                max_err = err

    # (ii) posterior of the pair given each atom in its support.
    union: dict[Hashable, Weight] = {}
    for p in pairs:
        wp = schedule_weights[p]
        for atom, w in tables[p].items():
            union[atom] = union.get(atom, zero) + wp * w
    posteriors: dict[tuple[str, str], Weight] = {}
    skipped = []
    for p in pairs:
        wp = schedule_weights[p]
        worst: Weight | None = None
        for atom, w in tables[p].items():
            joint = wp * w
            if union[atom] == 0:
                skipped.append(atom)
                continue
            post = joint / union[atom]
            if worst is None or post < worst:
                worst = post
        posteriors[p.labels] = worst if worst is not None else zero
    one = Fraction(1) if exact else 1.0
    all_one = all(
        abs(v - one) <= tol for v in posteriors.values()
    )
    return FreedomReport(
        factorization_holds=max_err <= tol,
        max_factorization_error=max_err,
        setting_posteriors=posteriors,
        all_posteriors_one=all_one,
        skipped_atoms=tuple(skipped),
        exact=exact,
        conclusion=FREEDOM_CONCLUSION,
    )
