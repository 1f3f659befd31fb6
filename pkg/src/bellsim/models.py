"""Hidden-variable model families and their exact / sampling evaluation.

Four families are implemented:

* ``ContextualProductModel`` -- a shared source distribution over a pair of
  index sets plus, for every analyzer setting, its own instrument
  distribution; outcomes are deterministic functions of (source component,
  instrument component).  The per-pair parameter distribution factorizes as
  source x instrument x instrument by construction.
* ``ContextualFittedModel`` -- one parameter distribution per setting pair,
  directly encoding an arbitrary target outcome table.
* ``ShvModel`` -- stochastic responses conditioned on the source components
  only (no instrument variables).
* ``LrhvModel`` -- deterministic responses of the source components only.

All finite families support exact summation of their joint outcome tables
and counter-based sampling; the continuous ``CoincidenceModel`` (shared
polarization angle, delay-based detection) supports sampling only.

Outcomes are coded -1, 0, +1 where 0 is the absence of a click.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .errors import CapabilityError, ValidationError
from .rng import SLOT_SOURCE, SLOT_WING_A, SLOT_WING_B, uniforms

OUTCOMES = (-1, 0, 1)

TWO_PI = 2.0 * math.pi

NORM_TOL = 1e-12
TABLE_TOL = 1e-10


def outcome_index(value: int) -> int:
    """Index of an outcome value in the canonical (-1, 0, +1) order."""
    if value not in OUTCOMES:
        raise ValidationError(f"outcome must be -1, 0 or +1, got {value!r}")
    return value + 1


@dataclass(frozen=True)
class Setting:
    """One analyzer setting: which wing it belongs to, and its angle."""

    side: str  # "A" or "B"
    angle: float
    label: str

    def __post_init__(self):
        if self.side not in ("A", "B"):
            raise ValidationError(f"side must be 'A' or 'B', got {self.side!r}")
        object.__setattr__(self, "angle", self.angle % TWO_PI)

    @property
    def key(self) -> str:
        return f"{self.side}:{self.label}"


@dataclass(frozen=True)
class SettingPair:
    """A joint choice of settings, one per wing, with a schedule weight."""

    x: Setting
    y: Setting
    weight: float = 1.0

    def __post_init__(self):
        if self.x.side != "A" or self.y.side != "B":
            raise ValidationError("pair must combine an A-side and a B-side setting")
        if not 0.0 <= self.weight <= 1.0:
            raise ValidationError(f"pair weight must lie in [0, 1], got {self.weight}")

    @property
    def labels(self) -> tuple[str, str]:
        return (self.x.label, self.y.label)


def _check_weights(w: np.ndarray, what: str, tol: float = NORM_TOL) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.size == 0:
        raise ValidationError(f"{what}: empty distribution")
    if np.any(w < 0):
        raise ValidationError(f"{what}: negative weight")
    if abs(float(w.sum()) - 1.0) > tol:
        raise ValidationError(f"{what}: weights sum to {w.sum()!r}, not 1")
    return w


def _exact_grid(exact, shape) -> tuple[tuple[Fraction, ...], ...] | None:
    if exact is None:
        return None
    rows = tuple(tuple(Fraction(v) for v in row) for row in exact)
    if len(rows) != shape[0] or any(len(r) != shape[1] for r in rows):
        raise ValidationError("exact weights do not match the declared shape")
    if sum(v for row in rows for v in row) != 1:
        raise ValidationError("exact weights must sum to exactly 1")
    return rows


@dataclass(frozen=True)
class FiniteJointSource:
    """Joint distribution over the two source index sets.

    ``weights[i, j]`` is the probability of the source emitting component
    pair (i, j).  An optional exact rational copy of the weights powers the
    zero-tolerance conditional-probability checks.
    """

    weights: np.ndarray
    exact: tuple[tuple[Fraction, ...], ...] | None = None

    def __post_init__(self):
        w = _check_weights(self.weights, "source")
        if w.ndim != 2:
            raise ValidationError("source weights must be a 2-d table")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "exact", _exact_grid(self.exact, w.shape))

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape


@dataclass(frozen=True)
class FiniteInstrument:
    """Distribution of one instrument's parameter, bound to one setting."""

    weights: np.ndarray
    exact: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        w = _check_weights(self.weights, "instrument")
        if w.ndim != 1:
            raise ValidationError("instrument weights must be a 1-d vector")
        object.__setattr__(self, "weights", w)
        if self.exact is not None:
            ex = tuple(Fraction(v) for v in self.exact)
            if len(ex) != w.size:
                raise ValidationError("exact instrument weights: wrong length")
            if sum(ex) != 1:
                raise ValidationError("exact instrument weights must sum to 1")
            object.__setattr__(self, "exact", ex)

    @property
    def size(self) -> int:
        return int(self.weights.size)


def _check_response_table(t: np.ndarray, what: str) -> np.ndarray:
    t = np.asarray(t)
    if not np.isin(t, OUTCOMES).all():
        raise ValidationError(f"{what}: response values must be in {{-1, 0, +1}}")
    return t.astype(np.int8)


@dataclass(frozen=True)
class JointOutcomeDist:
    """3x3 outcome probability table for one setting pair.

    Axis order is (a, b), both indexed in the canonical (-1, 0, +1) order.
    """

    pair: SettingPair
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        if t.shape != (3, 3):
            raise ValidationError("joint outcome table must be 3x3")
        if np.any(t < -TABLE_TOL) or abs(float(t.sum()) - 1.0) > TABLE_TOL:
            raise ValidationError("joint outcome table is not a distribution")
        object.__setattr__(self, "table", t)

    def prob(self, a: int, b: int) -> float:
        return float(self.table[outcome_index(a), outcome_index(b)])

    def marginal_a(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def marginal_b(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def expectation(self) -> float:
        vals = np.array(OUTCOMES, dtype=np.float64)
        return float(vals @ self.table @ vals)


@dataclass(frozen=True)
class AveragedResponseTable:
    """Per-source-component responses with the instrument variables averaged out."""

    a_bar: np.ndarray  # indexed by the first source component
    b_bar: np.ndarray  # indexed by the second source component

    def __post_init__(self):
        for name in ("a_bar", "b_bar"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if np.any(np.abs(v) > 1.0 + NORM_TOL):
                raise ValidationError(f"{name}: averaged response outside [-1, 1]")
            object.__setattr__(self, name, v)


def _settings_map(settings: Sequence[Setting], side: str) -> dict[str, Setting]:
    out: dict[str, Setting] = {}
    for s in settings:
        if s.side != side:
            raise ValidationError(f"setting {s.key} listed under side {side}")
        if s.label in out:
            raise ValidationError(f"duplicate setting label {s.label!r} on side {side}")
        out[s.label] = s
    return out


@dataclass(frozen=True)
class ContextualProductModel:
    """Finite product-form contextual model.

    ``instruments[s]`` is the parameter distribution of setting ``s``;
    ``responses[s]`` maps (source component on s's side, instrument
    component) to an outcome.  The joint parameter distribution for a pair
    (x, y) is source x instruments[x] x instruments[y] by construction.
    """

    source: FiniteJointSource
    settings_a: tuple[Setting, ...]
    settings_b: tuple[Setting, ...]
    instruments: Mapping[Setting, FiniteInstrument]
    responses: Mapping[Setting, np.ndarray]

    family = "contextual_product"

    def __post_init__(self):
        _settings_map(self.settings_a, "A")
        _settings_map(self.settings_b, "B")
        n1, n2 = self.source.shape
        resp = {}
        for s in (*self.settings_a, *self.settings_b):
            if s not in self.instruments:
                raise ValidationError(f"no instrument distribution for {s.key}")
            if s not in self.responses:
                raise ValidationError(f"no response table for {s.key}")
            n_src = n1 if s.side == "A" else n2
            t = _check_response_table(self.responses[s], s.key)
            if t.shape != (n_src, self.instruments[s].size):
                raise ValidationError(
                    f"{s.key}: response table shape {t.shape} does not match "
                    f"(source={n_src}, instrument={self.instruments[s].size})"
                )
            resp[s] = t
        object.__setattr__(self, "responses", resp)
        object.__setattr__(self, "instruments", dict(self.instruments))
        object.__setattr__(self, "settings_a", tuple(self.settings_a))
        object.__setattr__(self, "settings_b", tuple(self.settings_b))

    def sample_windows(self, pair: SettingPair, indices: np.ndarray, seed: int):
        n1, n2 = self.source.shape
        plan_a = kernels.TableWing(
            inst_cum=np.cumsum(self.instruments[pair.x].weights),
            table=self.responses[pair.x],
        )
        plan_b = kernels.TableWing(
            inst_cum=np.cumsum(self.instruments[pair.y].weights),
            table=self.responses[pair.y],
        )
        return kernels.finite_windows(seed, indices, self.source.weights, plan_a, plan_b)


@dataclass(frozen=True)
class ContextualFittedModel:
    """One parameter distribution per setting pair, copied to the outcomes.

    The parameter space of pair (x, y) is the set of outcome pairs itself;
    responses read off the components.  Reproduces any target table.
    """

    settings_a: tuple[Setting, ...]
    settings_b: tuple[Setting, ...]
    tables: Mapping[tuple[str, str], np.ndarray]
    exact_tables: Mapping[tuple[str, str], tuple] | None = None

    family = "contextual_fitted"

    def __post_init__(self):
        _settings_map(self.settings_a, "A")
        _settings_map(self.settings_b, "B")
        tabs = {}
        for key, t in self.tables.items():
            t = np.asarray(t, dtype=np.float64)
            if t.shape != (3, 3):
                raise ValidationError(f"target table for {key} must be 3x3")
            _check_weights(t.ravel(), f"target {key}", tol=TABLE_TOL)
            tabs[tuple(key)] = t
        object.__setattr__(self, "tables", tabs)
        object.__setattr__(self, "settings_a", tuple(self.settings_a))
        object.__setattr__(self, "settings_b", tuple(self.settings_b))

    def table_for(self, pair: SettingPair) -> np.ndarray:
        try:
            return self.tables[pair.labels]
        except KeyError:
            raise KeyError(f"no fitted table for setting pair {pair.labels}") from None

    def sample_windows(self, pair: SettingPair, indices: np.ndarray, seed: int):
        # A single draw picks the outcome-pair atom; responses copy it out.
        t = self.table_for(pair)
        cum = np.cumsum(t.ravel())
        u = uniforms(seed, indices, SLOT_SOURCE)
        atom = np.minimum(np.searchsorted(cum, u, side="right"), 8)
        a = (atom // 3 - 1).astype(np.int8)
        b = (atom % 3 - 1).astype(np.int8)
        zeros = np.zeros(len(indices), dtype=np.float64)
        return a, b, zeros, zeros


@dataclass(frozen=True)
class ShvModel:
    """Stochastic responses of the source components only.

    ``response_probs[s][i]`` is the outcome distribution (over -1, 0, +1)
    when setting ``s`` receives source component ``i``.
    """

    source: FiniteJointSource
    settings_a: tuple[Setting, ...]
    settings_b: tuple[Setting, ...]
    response_probs: Mapping[Setting, np.ndarray]

    family = "shv"

    def __post_init__(self):
        _settings_map(self.settings_a, "A")
        _settings_map(self.settings_b, "B")
        n1, n2 = self.source.shape
        probs = {}
        for s in (*self.settings_a, *self.settings_b):
            if s not in self.response_probs:
                raise ValidationError(f"no response distribution for {s.key}")
            p = np.asarray(self.response_probs[s], dtype=np.float64)
            n_src = n1 if s.side == "A" else n2
            if p.shape != (n_src, 3):
                raise ValidationError(f"{s.key}: response rows must be ({n_src}, 3)")
            for row in p:
                _check_weights(row, f"{s.key} response row")
            probs[s] = p
        object.__setattr__(self, "response_probs", probs)
        object.__setattr__(self, "settings_a", tuple(self.settings_a))
        object.__setattr__(self, "settings_b", tuple(self.settings_b))

    def sample_windows(self, pair: SettingPair, indices: np.ndarray, seed: int):
        plan_a = kernels.StochasticWing(
            row_cum=np.cumsum(self.response_probs[pair.x], axis=1)
        )
        plan_b = kernels.StochasticWing(
            row_cum=np.cumsum(self.response_probs[pair.y], axis=1)
        )
        return kernels.finite_windows(seed, indices, self.source.weights, plan_a, plan_b)


@dataclass(frozen=True)
class LrhvModel:
    """Deterministic responses of the source components only."""

    source: FiniteJointSource
    settings_a: tuple[Setting, ...]
    settings_b: tuple[Setting, ...]
    responses: Mapping[Setting, np.ndarray]

    family = "lrhv"

    def __post_init__(self):
        _settings_map(self.settings_a, "A")
        _settings_map(self.settings_b, "B")
        n1, n2 = self.source.shape
        resp = {}
        for s in (*self.settings_a, *self.settings_b):
            if s not in self.responses:
                raise ValidationError(f"no response vector for {s.key}")
            v = _check_response_table(self.responses[s], s.key)
            n_src = n1 if s.side == "A" else n2
            if v.shape != (n_src,):
                raise ValidationError(f"{s.key}: response must be a length-{n_src} vector")
            resp[s] = v
        object.__setattr__(self, "responses", resp)
        object.__setattr__(self, "settings_a", tuple(self.settings_a))
        object.__setattr__(self, "settings_b", tuple(self.settings_b))

    def sample_windows(self, pair: SettingPair, indices: np.ndarray, seed: int):
        plan_a = kernels.TableWing(
            inst_cum=np.ones(1), table=self.responses[pair.x][:, None]
        )
        plan_b = kernels.TableWing(
            inst_cum=np.ones(1), table=self.responses[pair.y][:, None]
        )
        return kernels.finite_windows(seed, indices, self.source.weights, plan_a, plan_b)


@dataclass(frozen=True)
class CoincidenceModel:
    """Continuous product-form model with delay-based detection.

    The source emits one polarization angle, uniform on [0, 2pi), shared by
    both wings.  Each wing draws an instrument parameter r uniform on [0, 1];
    the outcome at analyzer angle ``s`` is sign(cos 2(theta - s)) (ties to
    +1) and the detection delay is ``max_delay * r * |sin 2(theta - s)|**
    delay_exponent``.  A wing registers no click (outcome 0) whenever its
    delay exceeds the coincidence window applied by the protocol.
    """

    delay_exponent: float = 4.0
    max_delay: float = 1.0

    family = "contextual_product"
    continuous = True

    def __post_init__(self):
        if self.delay_exponent < 0:
            raise ValidationError("delay_exponent must be >= 0")
        if self.max_delay <= 0:
            raise ValidationError("max_delay must be > 0")

    def sample_windows(self, pair: SettingPair, indices: np.ndarray, seed: int):
        return kernels.coincidence_windows(
            seed, indices, pair.x.angle, pair.y.angle,
            self.delay_exponent, self.max_delay,
        )


@dataclass(frozen=True)
class SequentialDependenceDouble:
    """Verification control: a model whose b-outcome reads the previous
    window's setting pair.

    Under a fixed-blocks schedule consecutive windows almost always share a
    pair and the wings agree; under fast switching they frequently differ and
    the b-sign flips.  Used as the positive control for schedule comparison.
    Not a member of any of the locally-causal families.
    """

    family = "sequential_double"
    sequenced = True

    def sample_sequenced(self, pair_index: np.ndarray, seed: int):
        n = len(pair_index)
        idx = np.arange(n, dtype=np.uint64)
        lam = np.where(uniforms(seed, idx, SLOT_SOURCE) < 0.5, -1, 1).astype(np.int8)
        prev = np.empty_like(pair_index)
        prev[0] = pair_index[0]
        prev[1:] = pair_index[:-1]
        flip = np.where(prev == pair_index, 1, -1).astype(np.int8)
        zeros = np.zeros(n, dtype=np.float64)
        return lam, lam * flip, zeros, zeros


FiniteModel = ContextualProductModel | ContextualFittedModel | ShvModel | LrhvModel
Model = FiniteModel | CoincidenceModel


def _require_family(model, families: tuple[str, ...], what: str):
    if getattr(model, "family", None) not in families:
        raise ValidationError(f"{what} requires a model in {families}, got {model!r}")
    if getattr(model, "continuous", False):
        raise CapabilityError("exact summation unavailable, use sampling")


def contextual_joint(model, pair: SettingPair) -> JointOutcomeDist:
    """Exact joint outcome table of a finite contextual model.

    Accumulates the outcome indicator over the full product parameter space
    (source pairs x instrument components of both settings).
    """
    _require_family(model, ("contextual_product", "contextual_fitted"), "contextual_joint")
    if isinstance(model, ContextualFittedModel):
        # Atom space is the outcome-pair grid; responses copy components.
        t = model.table_for(pair)
        table = np.zeros((3, 3))
        for atom in range(9):
            table[atom // 3, atom % 3] += t.ravel()[atom]
        return JointOutcomeDist(pair, table)

    w_src = model.source.weights
    wx = model.instruments[pair.x].weights
    wy = model.instruments[pair.y].weights
    resp_a = model.responses[pair.x]  # (n1, nx)
    resp_b = model.responses[pair.y]  # (n2, ny)
    n1, n2 = w_src.shape
    nx, ny = wx.size, wy.size

    p4 = (
        w_src[:, :, None, None]
        * wx[None, None, :, None]
        * wy[None, None, None, :]
    )
    ai = np.broadcast_to((resp_a + 1)[:, None, :, None], p4.shape)
    bi = np.broadcast_to((resp_b + 1)[None, :, None, :], p4.shape)
    table = np.zeros((3, 3))
    np.add.at(table, (ai.ravel(), bi.ravel()), p4.ravel())
    return JointOutcomeDist(pair, table)


def shv_joint(model: ShvModel, pair: SettingPair) -> JointOutcomeDist:
    """Exact joint outcome table of a stochastic-response model."""
    _require_family(model, ("shv",), "shv_joint")
    pa = model.response_probs[pair.x]  # (n1, 3)
    pb = model.response_probs[pair.y]  # (n2, 3)
    table = np.einsum("ij,ia,jb->ab", model.source.weights, pa, pb)
    return JointOutcomeDist(pair, table)


def lrhv_joint(model: LrhvModel, pair: SettingPair) -> JointOutcomeDist:
    _require_family(model, ("lrhv",), "lrhv_joint")
    a = model.responses[pair.x]
    b = model.responses[pair.y]
    table = np.zeros((3, 3))
    np.add.at(
        table,
        (np.add.outer(a, np.zeros_like(b)) + 1, np.add.outer(np.zeros_like(a), b) + 1),
        model.source.weights,
    )
    return JointOutcomeDist(pair, table)


def lrhv_expectation(model: LrhvModel, pair: SettingPair) -> float:
    """E = sum over source pairs of A(i) * B(j) * P(i, j), exactly."""
    _require_family(model, ("lrhv",), "lrhv_expectation")
    a = model.responses[pair.x].astype(np.float64)
    b = model.responses[pair.y].astype(np.float64)
    return float(a @ model.source.weights @ b)


def joint_distribution(model, pair: SettingPair) -> JointOutcomeDist:
    """Family dispatch to the appropriate exact summation."""
    fam = getattr(model, "family", None)
    if fam == "shv":
        return shv_joint(model, pair)
    if fam == "lrhv":
        return lrhv_joint(model, pair)
    return contextual_joint(model, pair)


def alice_marginal(model, x: Setting, y: Setting) -> np.ndarray:
    """Distribution of Alice's outcome when the pair (x, y) is in use.

    For any product-form family the result does not depend on y.
    """
    return joint_distribution(model, SettingPair(x, y)).marginal_a()


def bob_marginal(model, x: Setting, y: Setting) -> np.ndarray:
    return joint_distribution(model, SettingPair(x, y)).marginal_b()


def expectation(model, pair: SettingPair) -> float:
    """Outcome-product expectation from the exact joint table."""
    return joint_distribution(model, pair).expectation()


def averaged_response_table(
    model: ContextualProductModel, pair: SettingPair
) -> AveragedResponseTable:
    """Average the instrument variables out of the deterministic responses."""
    if not isinstance(model, ContextualProductModel):
        raise ValidationError("instrument averaging requires the product form")
    wx = model.instruments[pair.x].weights
    wy = model.instruments[pair.y].weights
    a_bar = model.responses[pair.x].astype(np.float64) @ wx
    b_bar = model.responses[pair.y].astype(np.float64) @ wy
    return AveragedResponseTable(a_bar, b_bar)


def instrument_averaged_expectation(
    model: ContextualProductModel, pair: SettingPair
) -> float:
    """Expectation via the Bell-1970-style two-stage summation.

    First averages each wing's response over its instrument distribution,
    then takes the source-weighted product of the averaged responses.
    Algebraically identical to ``expectation`` for product-form models; the
    two code paths are kept separate so the identity can be verified
    numerically.
    """
    bar = averaged_response_table(model, pair)
    return float(bar.a_bar @ model.source.weights @ bar.b_bar)


def fit_contextual(
    targets: Mapping[SettingPair, JointOutcomeDist | np.ndarray],
) -> ContextualFittedModel:
    """Build a fitted contextual model reproducing the given target tables."""
    if not targets:
        raise ValidationError("fit_contextual needs at least one target")
    settings_a: dict[str, Setting] = {}
    settings_b: dict[str, Setting] = {}
    tables = {}
    for pair, target in targets.items():
        t = target.table if isinstance(target, JointOutcomeDist) else np.asarray(target)
        existing = settings_a.get(pair.x.label)
        if existing is not None and existing != pair.x:
            raise ValidationError(f"conflicting definitions of setting {pair.x.key}")
        settings_a[pair.x.label] = pair.x
        existing = settings_b.get(pair.y.label)
        if existing is not None and existing != pair.y:
            raise ValidationError(f"conflicting definitions of setting {pair.y.key}")
        settings_b[pair.y.label] = pair.y
        tables[pair.labels] = t
    return ContextualFittedModel(
        settings_a=tuple(settings_a.values()),
        settings_b=tuple(settings_b.values()),
        tables=tables,
    )


def coincidence_instance(
    delay_exponent: float = 4.0, max_delay: float = 1.0
) -> CoincidenceModel:
    """The delay-based continuous product model (see ``CoincidenceModel``)."""
    return CoincidenceModel(delay_exponent=delay_exponent, max_delay=max_delay)


def sample_trial(model, pair: SettingPair, seed: int, window: int = 0):
    """Draw one trial: (a, b, delay_a, delay_b), deterministic in (seed, window)."""
    idx = np.asarray([window], dtype=np.uint64)
    a, b, da, db = model.sample_windows(pair, idx, seed)
    return int(a[0]), int(b[0]), float(da[0]), float(db[0])


def chsh_settings(
    angles: tuple[float, float, float, float] | None = None,
) -> tuple[tuple[Setting, Setting], tuple[Setting, Setting]]:
    """Two settings per side at the given (x, x', y, y') angles."""
    from .quantum import CHSH_OPTIMAL_ANGLES

    ax, axp, by, byp = angles if angles is not None else CHSH_OPTIMAL_ANGLES
    return (
        (Setting("A", ax, "x"), Setting("A", axp, "xp")),
        (Setting("B", by, "y"), Setting("B", byp, "yp")),
    )


def chsh_pairs(
    angles: tuple[float, float, float, float] | None = None,
) -> tuple[SettingPair, ...]:
    """The four setting pairs (x,y), (x,y'), (x',y), (x',y') with equal weights."""
    (x, xp), (y, yp) = chsh_settings(angles)
    return tuple(
        SettingPair(a, b, weight=0.25) for a in (x, xp) for b in (y, yp)
    )


def _random_source(rng: np.random.Generator, n1: int, n2: int) -> FiniteJointSource:
    w = rng.random((n1, n2)) + 0.05
    return FiniteJointSource(w / w.sum())


def random_product_model(
    rng: np.random.Generator,
    max_source: int = 3,
    max_instrument: int = 3,
    outcomes: Sequence[int] = (-1, 1),
) -> ContextualProductModel:
    """Random finite product-form instance with two settings per side."""
    (sx, sxp), (sy, syp) = chsh_settings()
    n1 = int(rng.integers(1, max_source + 1))
    n2 = int(rng.integers(1, max_source + 1))
    instruments = {}
    responses = {}
    for s in (sx, sxp, sy, syp):
        k = int(rng.integers(1, max_instrument + 1))
        w = rng.random(k) + 0.05
        instruments[s] = FiniteInstrument(w / w.sum())
        n_src = n1 if s.side == "A" else n2
        responses[s] = rng.choice(outcomes, size=(n_src, k))
    return ContextualProductModel(
        source=_random_source(rng, n1, n2),
        settings_a=(sx, sxp),
        settings_b=(sy, syp),
        instruments=instruments,
        responses=responses,
    )


def random_shv_model(
    rng: np.random.Generator,
    max_source: int = 4,
    zero_outcomes: bool = False,
) -> ShvModel:
    (sx, sxp), (sy, syp) = chsh_settings()
    n1 = int(rng.integers(1, max_source + 1))
    n2 = int(rng.integers(1, max_source + 1))
    probs = {}
    for s in (sx, sxp, sy, syp):
        n_src = n1 if s.side == "A" else n2
        p = rng.random((n_src, 3)) + 0.02
        if not zero_outcomes:
            p[:, 1] = 0.0
        probs[s] = p / p.sum(axis=1, keepdims=True)
    return ShvModel(
        source=_random_source(rng, n1, n2),
        settings_a=(sx, sxp),
        settings_b=(sy, syp),
        response_probs=probs,
    )


def random_lrhv_model(
    rng: np.random.Generator,
    max_source: int = 8,
    outcomes: Sequence[int] = (-1, 1),
) -> LrhvModel:
    (sx, sxp), (sy, syp) = chsh_settings()
    n1 = int(rng.integers(1, max_source + 1))
    n2 = int(rng.integers(1, max_source + 1))
    responses = {
        s: rng.choice(outcomes, size=(n1 if s.side == "A" else n2,))
        for s in (sx, sxp, sy, syp)
    }
    return LrhvModel(
        source=_random_source(rng, n1, n2),
        settings_a=(sx, sxp),
        settings_b=(sy, syp),
        responses=responses,
    )
