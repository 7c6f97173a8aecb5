"""Formulas over metric algebras and the reasoning tools built on them.

Formulas come in three shapes.  A metric equation ``s =[e] t`` asserts
that the distance between the values of two terms is at most ``e``.  A
metric implication chains premise equations to a conclusion equation; it
is *basic* when every premise compares two variables.  A metric
inequality applies an exact arithmetic expression (sums, differences,
products, maxima, minima, squares, rational constants) to distance
atoms ``d(s, t)`` and compares the result with zero.

Satisfaction is decided by exhaustive valuation enumeration, which is
complete on finite algebras: the enumeration order is deterministic
(variables sorted by name, carrier order per variable), so reported
countermodels are always the lexicographically least ones.  Entailment
is relative to an explicit finite list of algebras, and every verdict
names its sample.

A presentation packages generators, relation equations, a closure mode,
and a term depth.  Its free algebra is the depth-bounded term universe
modulo the largest pseudometric satisfying the relations and the mode's
closure rule.  Relations constrain the generators themselves, so they
are instantiated at their literal terms; adding substitution instances
would be unsound in mode M, where nothing links an operation's output
distance to its input distances.  Distances computed this way never
undershoot the true free-algebra distances, and they can only shrink as
the depth grows.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .algebra import (
    MetricAlgebra,
    generate_subalgebra,
    is_quantitative,
    is_reflexive_quotient,
    product,
    quotient,
)
from .congruence import (
    coarsest_congruence,
    finest_congruence,
    generate_congruence,
    grid_congruences,
)
from .errors import (
    DomainError,
    ParseError,
    ResourceLimitError,
    SignatureError,
    UnsupportedInputError,
    Verdict,
)
from .extmetric import ExtRat, INF, ZERO, metric_identification
from .terms import App, Signature, Term, Var, check_term, evaluate, enumerate_terms


# ---------------------------------------------------------------------------
# Formula types


@dataclass(frozen=True)
class MetricEquation:
    """The formula ``lhs =[bound] rhs``."""

    lhs: Term
    rhs: Term
    bound: ExtRat

    def __post_init__(self):
        object.__setattr__(self, "bound", ExtRat(self.bound))
        for side in (self.lhs, self.rhs):
            if not isinstance(side, Term):
                raise DomainError(f"{side!r} is not a term")

    def variables(self) -> frozenset:
        return self.lhs.variables() | self.rhs.variables()

    def __str__(self):
        return f"{self.lhs} =[{self.bound}] {self.rhs}"


@dataclass(frozen=True)
class MetricImplication:
    """Premise equations joined to a conclusion equation."""

    premises: tuple
    conclusion: MetricEquation

    def __post_init__(self):
        object.__setattr__(self, "premises", tuple(self.premises))
        for p in self.premises:
            if not isinstance(p, MetricEquation):
                raise DomainError(f"premise {p!r} is not a metric equation")
        if not isinstance(self.conclusion, MetricEquation):
            raise DomainError("the conclusion must be a metric equation")

    @property
    def is_basic(self) -> bool:
        """True when every premise compares two variables."""
        return all(
            isinstance(p.lhs, Var) and isinstance(p.rhs, Var) for p in self.premises
        )

    def variables(self) -> frozenset:
        out = self.conclusion.variables()
        for p in self.premises:
            out |= p.variables()
        return out

    def __str__(self):
        if not self.premises:
            return str(self.conclusion)
        return " , ".join(str(p) for p in self.premises) + f" |- {self.conclusion}"


def as_implication(formula) -> MetricImplication:
    """View a bare equation as a premise-free implication."""
    if isinstance(formula, MetricImplication):
        return formula
    if isinstance(formula, MetricEquation):
        return MetricImplication((), formula)
    raise DomainError(f"{formula!r} is not a formula")


# ---------------------------------------------------------------------------
# Inequality expressions


class IneqExpr:
    """Base class for exact expression trees over distance atoms."""

    def evaluate(self, algebra, valuation) -> Fraction:
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError


@dataclass(frozen=True)
class Const(IneqExpr):
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))

    def evaluate(self, algebra, valuation):
        return self.value

    def variables(self):
        return frozenset()

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class DistAtom(IneqExpr):
    lhs: Term
    rhs: Term

    def evaluate(self, algebra, valuation):
        a = evaluate(self.lhs, algebra, valuation)
        b = evaluate(self.rhs, algebra, valuation)
        d = algebra.space.get(a, b)
        if d.is_infinite:
            raise UnsupportedInputError(
                f"d({self.lhs}, {self.rhs}) is infinite; expression arithmetic "
                f"needs finite distances"
            )
        return d.finite

    def variables(self):
        return self.lhs.variables() | self.rhs.variables()

    def __str__(self):
        return f"d({self.lhs}, {self.rhs})"


@dataclass(frozen=True)
class _BinOp(IneqExpr):
    left: IneqExpr
    right: IneqExpr

    symbol = ""

    @staticmethod
    def _op(a, b):
        raise NotImplementedError

    def evaluate(self, algebra, valuation):
        return self._op(
            self.left.evaluate(algebra, valuation),
            self.right.evaluate(algebra, valuation),
        )

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self):
        return f"({self.left} {self.symbol} {self.right})"


class Add(_BinOp):
    symbol = "+"

    @staticmethod
    def _op(a, b):
        return a + b


class Sub(_BinOp):
    symbol = "-"

    @staticmethod
    def _op(a, b):
        return a - b


class Mul(_BinOp):
    symbol = "*"

    @staticmethod
    def _op(a, b):
        return a * b


class Max(_BinOp):
    symbol = "max"

    @staticmethod
    def _op(a, b):
        return max(a, b)


class Min(_BinOp):
    symbol = "min"

    @staticmethod
    def _op(a, b):
        return min(a, b)


@dataclass(frozen=True)
class Square(IneqExpr):
    inner: IneqExpr

    def evaluate(self, algebra, valuation):
        v = self.inner.evaluate(algebra, valuation)
        return v * v

    def variables(self):
        return self.inner.variables()

    def __str__(self):
        return f"{self.inner}^2"


_RELATIONS = (">=", "<=", "=")


@dataclass(frozen=True)
class MetricInequality:
    """An expression compared with zero: ``expr >= 0``, ``<= 0``, or ``= 0``."""

    expr: IneqExpr
    relation: str

    def __post_init__(self):
        if self.relation not in _RELATIONS:
            raise DomainError(f"relation must be one of {_RELATIONS}")
        if not isinstance(self.expr, IneqExpr):
            raise DomainError(f"{self.expr!r} is not an inequality expression")

    def holds(self, value: Fraction) -> bool:
        if self.relation == ">=":
            return value >= 0
        if self.relation == "<=":
            return value <= 0
        return value == 0

    def variables(self) -> frozenset:
        return self.expr.variables()

    def __str__(self):
        return f"{self.expr} {self.relation} 0"


# ---------------------------------------------------------------------------
# Satisfaction


def _valuations(algebra, variables, max_valuations):
    names = sorted(variables)
    total = len(algebra.carrier) ** len(names) if names else 1
    if total > max_valuations:
        raise ResourceLimitError(
            f"{total} valuations exceed the cap {max_valuations}",
            "max_valuations",
            max_valuations,
        )
    for choice in itertools.product(algebra.carrier, repeat=len(names)):
        yield dict(zip(names, choice))


def satisfies_under(algebra: MetricAlgebra, valuation, e: MetricEquation) -> bool:
    """Whether one valuation satisfies one metric equation, exactly."""
    a = evaluate(e.lhs, algebra, valuation)
    b = evaluate(e.rhs, algebra, valuation)
    return algebra.space.get(a, b) <= e.bound


def _holds_under(algebra, valuation, phi: MetricImplication) -> bool:
    if all(satisfies_under(algebra, valuation, p) for p in phi.premises):
        return satisfies_under(algebra, valuation, phi.conclusion)
    return True


def satisfies(algebra: MetricAlgebra, formula, max_valuations=1_000_000) -> Verdict:
    """Whether every valuation satisfies the formula.

    Failures carry the lexicographically least countermodel valuation.
    """
    phi = as_implication(formula)
    for valuation in _valuations(algebra, phi.variables(), max_valuations):
        if not _holds_under(algebra, valuation, phi):
            return Verdict.failed(
                "countermodel", tuple(sorted(valuation.items())), valuation
            )
    return Verdict.passed()


def entails(
    algebras: Sequence[MetricAlgebra],
    delta: Sequence[MetricEquation],
    e: MetricEquation,
    max_valuations=1_000_000,
) -> Verdict:
    """Entailment over an explicit finite list of algebras.

    Checks that every valuation satisfying all of ``delta`` in any of
    the listed algebras also satisfies ``e``.  The passing verdict
    records the sample size; failures name the algebra index and the
    least countermodel valuation.
    """
    algebras = list(algebras)
    delta = tuple(delta)
    variables = set(e.variables())
    for d in delta:
        variables |= d.variables()
    for pos, algebra in enumerate(algebras):
        for valuation in _valuations(algebra, variables, max_valuations):
            if all(satisfies_under(algebra, valuation, d) for d in delta):
                if not satisfies_under(algebra, valuation, e):
                    return Verdict.failed(
                        "countermodel",
                        (pos, tuple(sorted(valuation.items()))),
                        {"algebra": pos, "valuation": valuation},
                    )
    return Verdict.passed(len(algebras))


def evaluate_inequality(algebra: MetricAlgebra, valuation, q: MetricInequality) -> bool:
    """Evaluate the expression under one valuation and compare with zero."""
    return q.holds(q.expr.evaluate(algebra, valuation))


def satisfies_inequality(
    algebra: MetricAlgebra, q: MetricInequality, max_valuations=1_000_000
) -> Verdict:
    """Whether the inequality holds under every valuation."""
    for valuation in _valuations(algebra, q.variables(), max_valuations):
        if not evaluate_inequality(algebra, valuation, q):
            return Verdict.failed(
                "countermodel", tuple(sorted(valuation.items())), valuation
            )
    return Verdict.passed()


# ---------------------------------------------------------------------------
# Presentations and free algebras


_MODES = ("M", "Q", "LIP")


class Presentation:
    """Generators, relations, a closure mode, and a term depth."""

    __slots__ = ("sig", "variables", "relations", "mode", "lipschitz", "depth")

    def __init__(self, sig: Signature, variables, relations, mode="M", depth=1, lipschitz=None):
        self.sig = sig
        self.variables = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise DomainError("generator names must be distinct")
        self.relations = tuple(relations)
        names = set(self.variables)
        for r in self.relations:
            if not isinstance(r, MetricEquation):
                raise DomainError(f"relation {r!r} is not a metric equation")
            for side in (r.lhs, r.rhs):
                check_term(side, sig)
            stray = r.variables() - names
            if stray:
                raise DomainError(
                    f"relation {r} mentions unknown generators {sorted(stray)}"
                )
        if mode not in _MODES:
            raise DomainError(f"unknown mode {mode!r}; expected M, Q, or LIP")
        self.mode = mode
        if mode == "LIP":
            if lipschitz is None:
                raise DomainError("LIP mode needs a Lipschitz constant")
            if isinstance(lipschitz, Mapping):
                self.lipschitz = {s: Fraction(k) for s, k in lipschitz.items()}
            else:
                self.lipschitz = {s: Fraction(lipschitz) for s in sig.symbols}
        else:
            self.lipschitz = None
        if depth < 0:
            raise DomainError("depth must be nonnegative")
        self.depth = int(depth)

    def __repr__(self):
        return (
            f"Presentation(variables={self.variables!r}, "
            f"relations={len(self.relations)}, mode={self.mode!r}, depth={self.depth})"
        )


class FreeAlgebra:
    """Depth-bounded term universe with the generated pseudometric.

    The carrier is every term up to the presentation's depth; the
    pseudometric is the largest one satisfying the relations and the
    mode's closure rule.  Because operations on a truncated universe
    cannot be total (applying them once more exceeds the depth), the
    operation tables are partial; ``apply`` works on class
    representatives whenever the result stays within the universe.
    """

    def __init__(self, presentation: Presentation, universe, theta):
        self.presentation = presentation
        self.universe = tuple(universe)
        if tuple(theta.carrier) != self.universe:
            raise DomainError("the pseudometric does not live on the term universe")
        self.theta = theta
        self._members = frozenset(self.universe)
        self._identified = None

    def _quotient(self):
        if self._identified is None:
            self._identified = metric_identification(self.theta)
        return self._identified

    @property
    def space(self):
        """Metric space on class representatives (built on first use)."""
        return self._quotient()[0]

    def class_of(self, term: Term) -> Term:
        """Representative of a term's zero-distance class."""
        return self._quotient()[1].class_of(term)

    def eta(self, name: str) -> Term:
        """The unit map: a generator's class representative."""
        if name not in self.presentation.variables:
            raise DomainError(f"{name!r} is not a generator")
        return self.class_of(Var(name))

    def distance(self, s: Term, t: Term) -> ExtRat:
        """Computed free distance between two universe terms."""
        return self.theta.get(s, t)

    def apply(self, symbol: str, args) -> Term:
        """Apply an operation to class representatives when possible."""
        arity = self.presentation.sig.arity(symbol)
        args = tuple(args)
        if len(args) != arity:
            raise SignatureError(f"{symbol} expects {arity} arguments, got {len(args)}")
        candidate = App(symbol, args)
        if candidate not in self._members:
            raise DomainError(
                f"{candidate} falls outside the depth-{self.presentation.depth} universe"
            )
        return self.class_of(candidate)

    @property
    def size(self) -> int:
        return len(self.universe)

    def __repr__(self):
        return f"<FreeAlgebra on {len(self.universe)} terms>"


def free_algebra(
    p: Presentation, max_terms: int = 20000, max_decreases: int = 1_000_000
) -> FreeAlgebra:
    """Free algebra of a presentation on the depth-bounded term universe.

    Relations whose terms exceed the depth are rejected rather than
    silently dropped, so the result always satisfies every relation
    (checked before returning).  Distances are exact upper bounds for
    the unbounded free algebra and can only shrink at greater depth.
    """
    universe = enumerate_terms(p.sig, p.variables, p.depth, max_terms=max_terms)
    members = set(universe)
    for r in p.relations:
        for side in (r.lhs, r.rhs):
            if side not in members:
                raise UnsupportedInputError(
                    f"relation term {side} exceeds depth {p.depth}; "
                    f"raise the presentation depth"
                )
    ops: dict = {}
    for t in universe:
        if isinstance(t, App):
            ops.setdefault(t.symbol, {})[t.args] = t
    constraints = [(r.lhs, r.rhs, r.bound) for r in p.relations]
    theta = generate_congruence(
        universe, ops, constraints, mode=p.mode, lipschitz=p.lipschitz,
        max_decreases=max_decreases,
    )
    free = FreeAlgebra(p, universe, theta)
    for r in p.relations:
        assert free.distance(r.lhs, r.rhs) <= r.bound, (
            "the free algebra must satisfy its own relations"
        )
    return free


def in_mode_class(algebra: MetricAlgebra, mode: str, lipschitz=None) -> Verdict:
    """Whether an algebra belongs to the class a mode quantifies over.

    Mode M admits every metric algebra: equal arguments give equal
    results, which is all the zero-propagation rule asks on a metric
    space.  Mode Q requires nonexpansive operations, and mode LIP
    requires each operation to satisfy its Lipschitz bound.
    """
    if mode == "M":
        return Verdict.passed()
    if mode == "Q":
        return is_quantitative(algebra)
    if mode != "LIP":
        raise DomainError(f"unknown mode {mode!r}")
    if lipschitz is None:
        raise DomainError("LIP mode needs a Lipschitz constant")
    constants = (
        {s: Fraction(k) for s, k in lipschitz.items()}
        if isinstance(lipschitz, Mapping)
        else {s: Fraction(lipschitz) for s in algebra.sig.symbols}
    )
    for symbol in algebra.sig.symbols:
        arity = algebra.sig.arity(symbol)
        if arity == 0:
            continue
        if symbol not in constants:
            raise SignatureError(f"no Lipschitz constant for symbol {symbol!r}")
        k = constants[symbol]
        for a_args in itertools.product(algebra.carrier, repeat=arity):
            for b_args in itertools.product(algebra.carrier, repeat=arity):
                spread = max(algebra.space.get(x, y) for x, y in zip(a_args, b_args))
                out = algebra.space.get(
                    algebra.apply(symbol, a_args), algebra.apply(symbol, b_args)
                )
                bound = spread if spread.is_infinite else spread.scale(k)
                if out > bound:
                    return Verdict.failed("not-lipschitz", (symbol, a_args, b_args))
    return Verdict.passed()


def soundness_check(
    free: FreeAlgebra, samples: Sequence[MetricAlgebra], trials: int = 20, seed: int = 0
) -> Verdict:
    """Certify computed free distances against sample models.

    Whenever the computed distance between two universe terms is some
    finite ``e``, the relations must entail ``s =[e] t`` over any sample
    algebras from the mode's class: samples can witness that a computed
    distance is too small, never that it is too large.  Checks the
    relation and generator pairs, then randomly chosen pairs.
    """
    p = free.presentation
    delta = p.relations
    pairs = [(r.lhs, r.rhs) for r in delta]
    for a, b in itertools.combinations(p.variables, 2):
        pairs.append((Var(a), Var(b)))
    rng = random.Random(seed)
    for _ in range(trials):
        pairs.append((rng.choice(free.universe), rng.choice(free.universe)))
    checked = 0
    for s, t in pairs:
        eps = free.distance(s, t)
        if eps.is_infinite:
            continue
        verdict = entails(samples, delta, MetricEquation(s, t, eps))
        checked += 1
        if not verdict:
            return Verdict.failed(
                "unsound-distance", (s, t, eps), verdict.value
            )
    return Verdict.passed(checked)


def check_soundness_of_free(
    p: Presentation, samples: Sequence[MetricAlgebra], trials: int = 20, seed: int = 0
) -> Verdict:
    """Build the free algebra and certify it against sample models."""
    for pos, sample in enumerate(samples):
        verdict = in_mode_class(sample, p.mode, p.lipschitz)
        if not verdict:
            raise DomainError(
                f"sample {pos} is outside the mode-{p.mode} class: {verdict.reason} "
                f"at {verdict.witness}"
            )
    return soundness_check(free_algebra(p), samples, trials, seed)


def factoring_map(free: FreeAlgebra, algebra: MetricAlgebra, valuation) -> Verdict:
    """The induced map from the free algebra into a model.

    For an algebra in the presentation's mode class and a valuation
    satisfying the relations, evaluation factors through the quotient:
    the map on class representatives is well defined, nonexpansive, and
    preserves every in-universe operation application.  The passing
    verdict carries the mapping.
    """
    p = free.presentation
    verdict = in_mode_class(algebra, p.mode, p.lipschitz)
    if not verdict:
        raise DomainError(
            f"the algebra is outside the mode-{p.mode} class: {verdict.reason}"
        )
    for r in p.relations:
        if not satisfies_under(algebra, valuation, r):
            raise DomainError(f"the valuation does not satisfy the relation {r}")
    values = {t: evaluate(t, algebra, valuation) for t in free.universe}
    for s, t in itertools.combinations(free.universe, 2):
        if algebra.space.get(values[s], values[t]) > free.distance(s, t):
            return Verdict.failed("not-nonexpansive", (s, t))
    mapping = {}
    for t in free.universe:
        rep = free.class_of(t)
        if rep in mapping and mapping[rep] != values[t]:
            return Verdict.failed("not-well-defined", (rep, t))
        mapping[rep] = values[t]
    for t in free.universe:
        if isinstance(t, App):
            direct = values[t]
            through = algebra.apply(t.symbol, tuple(values[a] for a in t.args))
            if direct != through:
                return Verdict.failed("not-a-homomorphism", (t,))
    return Verdict.passed(mapping)


# ---------------------------------------------------------------------------
# Weak compactness, equicontinuity, continuous families


def weak_compactness_search(
    algebras: Sequence[MetricAlgebra],
    delta: Sequence[MetricEquation],
    e: MetricEquation,
    slack,
    max_valuations=1_000_000,
) -> Verdict:
    """Smallest subset of the premises entailing the slack-relaxed goal.

    Searches subsets in increasing size (then in positional order), so
    the witness is minimal; the relaxed bound may not undershoot the
    goal's own bound.  The exhaustion verdict carries the countermodel
    found for the full premise set.
    """
    delta = tuple(delta)
    slack = ExtRat(slack)
    if slack < e.bound:
        raise DomainError("the relaxed bound cannot undershoot the goal bound")
    if len(delta) > 20:
        raise ResourceLimitError(
            f"subset search over {len(delta)} premises is out of reach",
            "subset_search",
            20,
        )
    relaxed = MetricEquation(e.lhs, e.rhs, slack)
    for size in range(len(delta) + 1):
        for combo in itertools.combinations(range(len(delta)), size):
            subset = tuple(delta[i] for i in combo)
            if entails(algebras, subset, relaxed, max_valuations):
                return Verdict.passed(combo)
    full = entails(algebras, delta, relaxed, max_valuations)
    return Verdict.failed("not-entailed-by-full-set", (), full.value)


def equicontinuity_check(
    algebras: Sequence[MetricAlgebra],
    formula,
    eps_prime,
    delta_grid,
    max_valuations=1_000_000,
) -> Verdict:
    """Largest grid delta making the relaxed implication hold everywhere.

    Premises are loosened by delta and the conclusion bound is replaced
    with ``eps_prime``, which must strictly exceed the original bound.
    Larger deltas fire more premises, so working deltas form a downward
    closed set and the grid is scanned from the largest down; the first
    success is returned.
    """
    phi = as_implication(formula)
    eps_prime = ExtRat(eps_prime)
    if not eps_prime > phi.conclusion.bound:
        raise DomainError("eps_prime must strictly exceed the conclusion bound")
    grid = sorted({ExtRat(d) for d in delta_grid}, reverse=True)
    if not grid:
        raise DomainError("the delta grid must be nonempty")
    if grid[-1] == ZERO:
        raise DomainError("grid deltas must be positive")
    if grid[0].is_infinite:
        raise DomainError("grid deltas must be finite")
    goal = MetricEquation(phi.conclusion.lhs, phi.conclusion.rhs, eps_prime)
    last = None
    for delta in grid:
        relaxed = MetricImplication(
            tuple(
                MetricEquation(p.lhs, p.rhs, p.bound + delta) for p in phi.premises
            ),
            goal,
        )
        countermodel = None
        for algebra in algebras:
            verdict = satisfies(algebra, relaxed, max_valuations)
            if not verdict:
                countermodel = (delta, verdict.witness)
                break
        if countermodel is None:
            return Verdict.passed(delta)
        last = countermodel
    return Verdict.failed("no-grid-delta-works", last or ())


def _schema_for(symbol: str, arity: int, phi: MetricImplication) -> bool:
    """Whether phi is the congruence schema for the symbol."""
    c = phi.conclusion
    if c.bound != ZERO:
        return False
    if not (isinstance(c.lhs, App) and isinstance(c.rhs, App)):
        return False
    if c.lhs.symbol != symbol or c.rhs.symbol != symbol:
        return False
    left = c.lhs.args
    right = c.rhs.args
    if len(left) != arity or len(right) != arity:
        return False
    names = []
    for v in left + right:
        if not isinstance(v, Var):
            return False
        names.append(v.name)
    if len(set(names)) != 2 * arity:
        return False
    wanted = {
        frozenset((left[i].name, right[i].name)) for i in range(arity)
    }
    seen = set()
    for p in phi.premises:
        if p.bound != ZERO:
            return False
        if not (isinstance(p.lhs, Var) and isinstance(p.rhs, Var)):
            return False
        seen.add(frozenset((p.lhs.name, p.rhs.name)))
    return seen == wanted


def _relaxation_of(phi: MetricImplication, psi: MetricImplication, eps_prime) -> bool:
    """Whether psi is phi with premises shifted by one common delta and
    the conclusion bound replaced by eps_prime."""
    if psi.conclusion.lhs != phi.conclusion.lhs:
        return False
    if psi.conclusion.rhs != phi.conclusion.rhs:
        return False
    if psi.conclusion.bound != eps_prime:
        return False
    if len(psi.premises) != len(phi.premises):
        return False
    if not phi.premises:
        return True

    def key(p):
        return (p.lhs.sort_key(), p.rhs.sort_key())

    ours = sorted(phi.premises, key=key)
    theirs = sorted(psi.premises, key=key)
    shift = None
    for p, q in zip(ours, theirs):
        if (p.lhs, p.rhs) != (q.lhs, q.rhs):
            return False
        if q.bound < p.bound:
            return False
        if p.bound.is_infinite:
            continue
        if q.bound.is_infinite:
            return False
        gap = ExtRat(q.bound.finite - p.bound.finite)
        if shift is None:
            shift = gap
        elif shift != gap:
            return False
    return True


def is_continuous_family(
    family: Sequence[MetricImplication],
    sig: Signature,
    probes: Sequence[Sequence],
) -> Verdict:
    """Probe-relative continuity check for a family of implications.

    Condition (a): the zero-bound congruence schema for every operation
    symbol appears in the family.  Condition (b): for each member and
    each probed bound above its conclusion bound, the family contains
    the member's relaxed form: same terms, premises shifted by one
    common nonnegative delta, conclusion bound exactly the probe.  A
    finite family can only witness finitely many probes, so the verdict
    is relative to the probe list.
    """
    family = [as_implication(phi) for phi in family]
    if len(probes) != len(family):
        raise DomainError("probes must align with the family, one list per member")
    for symbol in sig.symbols:
        arity = sig.arity(symbol)
        if not any(_schema_for(symbol, arity, phi) for phi in family):
            return Verdict.failed("missing-congruence-schema", (symbol,))
    checked = 0
    for pos, (phi, eps_list) in enumerate(zip(family, probes)):
        for eps_prime in eps_list:
            eps_prime = ExtRat(eps_prime)
            if not eps_prime > phi.conclusion.bound:
                raise DomainError(
                    f"probe {eps_prime} does not exceed the conclusion bound "
                    f"of member {pos}"
                )
            if not any(_relaxation_of(phi, psi, eps_prime) for psi in family):
                return Verdict.failed("missing-relaxation", (pos, eps_prime))
            checked += 1
    return Verdict.passed(checked)


# ---------------------------------------------------------------------------
# Closure suite


@dataclass
class ClosureRecord:
    """One preservation check inside a closure suite run."""

    construction: str
    source: str
    ok: bool
    expected: bool
    witness: tuple = ()


@dataclass
class ClosureReport:
    """Outcome of a closure suite: records plus failure views."""

    records: list = field(default_factory=list)

    @property
    def unexpected_failures(self):
        return [r for r in self.records if not r.ok and r.expected]

    @property
    def expected_failures(self):
        return [r for r in self.records if not r.ok and not r.expected]

    def summary(self) -> str:
        bad = len(self.unexpected_failures)
        noted = len(self.expected_failures)
        return (
            f"{len(self.records)} checks, {bad} unexpected failures, "
            f"{noted} expected failures"
        )


def _congruence_family(algebra, values=None, cap=4096):
    try:
        return grid_congruences(algebra, values=values, cap=cap)
    except ResourceLimitError:
        return [finest_congruence(algebra), coarsest_congruence(algebra)]


def closure_suite(
    formulas,
    instances: Sequence[MetricAlgebra],
    quotient_values: Sequence | None = None,
    max_product_size: int = 256,
    max_valuations: int = 1_000_000,
) -> ClosureReport:
    """Exercise class-closure properties of formula satisfaction.

    Instances satisfying every formula are combined into products and
    generated subalgebras, which must keep satisfying them.  When every
    formula is a bare equation, arbitrary congruence quotients must
    preserve them as well.  When implications are present (they must be
    basic), quotients are split by whether the projection admits an
    isometric section: reflexive quotients must preserve satisfaction,
    while failures under non-reflexive quotients are recorded as
    expected, documenting that the reflexivity hypothesis is needed.
    ``quotient_values`` widens the value grid the quotient congruences
    are drawn from.
    """
    formulas = list(formulas)
    implications = [f for f in formulas if isinstance(f, MetricImplication)]
    for phi in implications:
        if not phi.is_basic:
            raise DomainError(
                "closure arguments cover implications with variable premises only"
            )
    equations_only = not implications
    instances = list(instances)
    if instances:
        sig = instances[0].sig
        for a in instances[1:]:
            if a.sig != sig:
                raise DomainError("closure suite instances must share a signature")
    report = ClosureReport()

    def check_all(algebra):
        for f in formulas:
            verdict = satisfies(algebra, f, max_valuations)
            if not verdict:
                return verdict
        return Verdict.passed()

    sat = [
        (f"A{pos}", a) for pos, a in enumerate(instances) if check_all(a).ok
    ]
    for (name_a, a), (name_b, b) in itertools.combinations_with_replacement(sat, 2):
        if a.space.size * b.space.size > max_product_size:
            continue
        prod, _ = product([a, b])
        verdict = check_all(prod)
        report.records.append(
            ClosureRecord(
                "product", f"{name_a} x {name_b}", verdict.ok, True, verdict.witness
            )
        )
    for name, a in sat:
        for x in a.carrier:
            sub, _ = generate_subalgebra(a, [x])
            verdict = check_all(sub)
            report.records.append(
                ClosureRecord(
                    "subalgebra",
                    f"{name} from {x!r}",
                    verdict.ok,
                    True,
                    verdict.witness,
                )
            )
    for name, a in sat:
        for pos, theta in enumerate(_congruence_family(a, quotient_values)):
            quot, projection = quotient(a, theta)
            verdict = check_all(quot)
            if equations_only:
                report.records.append(
                    ClosureRecord(
                        "quotient", f"{name} / theta{pos}", verdict.ok, True,
                        verdict.witness,
                    )
                )
                continue
            reflexive = is_reflexive_quotient(projection)
            if reflexive.ok:
                report.records.append(
                    ClosureRecord(
                        "reflexive-quotient",
                        f"{name} / theta{pos}",
                        verdict.ok,
                        True,
                        verdict.witness,
                    )
                )
            else:
                report.records.append(
                    ClosureRecord(
                        "non-reflexive-quotient",
                        f"{name} / theta{pos}",
                        verdict.ok,
                        False,
                        verdict.witness,
                    )
                )
    return report


# ---------------------------------------------------------------------------
# Concrete syntax


_TOKEN = re.compile(
    r"""(?P<space>\s+)
      | (?P<eqb>=\[)
      | (?P<ent>\|-)
      | (?P<ge>>=)
      | (?P<le><=)
      | (?P<sq>\^2)
      | (?P<num>\d+(?:/\d+)?)
      | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
      | (?P<sym>[()\[\],+\-*=])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            raise ParseError(f"unreadable character {text[pos]!r}", 1, pos + 1)
        if match.lastgroup != "space":
            tokens.append((match.lastgroup, match.group(), pos + 1))
        pos = match.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Stream:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        token = self.tokens[self.pos]
        if token[0] != "end":
            self.pos += 1
        return token

    def expect(self, kind, text=None):
        token = self.peek()
        if token[0] != kind or (text is not None and token[1] != text):
            wanted = text if text is not None else kind
            raise ParseError(
                f"expected {wanted!r}, found {token[1] or 'end of input'!r}",
                1,
                token[2],
            )
        return self.next()

    def at_symbol(self, text):
        token = self.peek()
        return token[0] == "sym" and token[1] == text


def _parse_term(stream: _Stream, sig: Signature | None) -> Term:
    kind, text, col = stream.peek()
    if kind != "name":
        raise ParseError(f"expected a term, found {text or 'end of input'!r}", 1, col)
    stream.next()
    if stream.at_symbol("("):
        stream.next()
        args = [_parse_term(stream, sig)]
        while stream.at_symbol(","):
            stream.next()
            args.append(_parse_term(stream, sig))
        stream.expect("sym", ")")
        term = App(text, tuple(args))
    elif sig is not None and text in sig.symbols:
        if sig.arity(text) != 0:
            raise ParseError(
                f"symbol {text!r} takes {sig.arity(text)} arguments", 1, col
            )
        term = App(text, ())
    else:
        term = Var(text)
    return term


def _parse_bound(stream: _Stream) -> ExtRat:
    kind, text, col = stream.peek()
    if kind == "num":
        stream.next()
        return ExtRat(Fraction(text))
    if kind == "name" and text == "inf":
        stream.next()
        return INF
    raise ParseError(f"expected a bound, found {text or 'end of input'!r}", 1, col)


def _parse_equation(stream: _Stream, sig) -> MetricEquation:
    lhs = _parse_term(stream, sig)
    stream.expect("eqb")
    bound = _parse_bound(stream)
    stream.expect("sym", "]")
    rhs = _parse_term(stream, sig)
    eq = MetricEquation(lhs, rhs, bound)
    if sig is not None:
        check_term(lhs, sig)
        check_term(rhs, sig)
    return eq


def _finish(stream: _Stream):
    kind, text, col = stream.peek()
    if kind != "end":
        raise ParseError(f"unexpected {text!r} after the formula", 1, col)


def parse_equation(text: str, sig: Signature | None = None) -> MetricEquation:
    """Parse ``s =[bound] t``; bounds are rationals or ``inf``."""
    stream = _Stream(_tokenize(text))
    eq = _parse_equation(stream, sig)
    _finish(stream)
    return eq


def parse_formula(text: str, sig: Signature | None = None):
    """Parse an equation, or an implication written ``e1 , e2 |- e``."""
    stream = _Stream(_tokenize(text))
    first = _parse_equation(stream, sig)
    premises = [first]
    while stream.at_symbol(","):
        stream.next()
        premises.append(_parse_equation(stream, sig))
    if stream.peek()[0] == "ent":
        stream.next()
        conclusion = _parse_equation(stream, sig)
        _finish(stream)
        return MetricImplication(tuple(premises), conclusion)
    if len(premises) > 1:
        col = stream.peek()[2]
        raise ParseError("premise list needs a |- conclusion", 1, col)
    _finish(stream)
    return first


def parse_implication(text: str, sig: Signature | None = None) -> MetricImplication:
    """Parse a formula and view it as an implication."""
    return as_implication(parse_formula(text, sig))


def _parse_primary(stream: _Stream, sig) -> IneqExpr:
    kind, text, col = stream.peek()
    if kind == "num":
        stream.next()
        return Const(Fraction(text))
    if stream.at_symbol("("):
        stream.next()
        inner = _parse_maxmin(stream, sig)
        stream.expect("sym", ")")
        return inner
    if kind == "name" and text == "d":
        stream.next()
        stream.expect("sym", "(")
        lhs = _parse_term(stream, sig)
        stream.expect("sym", ",")
        rhs = _parse_term(stream, sig)
        stream.expect("sym", ")")
        if sig is not None:
            check_term(lhs, sig)
            check_term(rhs, sig)
        return DistAtom(lhs, rhs)
    raise ParseError(
        f"expected a constant, d(s,t), or a parenthesised expression, "
        f"found {text or 'end of input'!r}",
        1,
        col,
    )


def _parse_postfix(stream: _Stream, sig) -> IneqExpr:
    node = _parse_primary(stream, sig)
    while stream.peek()[0] == "sq":
        stream.next()
        node = Square(node)
    return node


def _parse_product(stream: _Stream, sig) -> IneqExpr:
    node = _parse_postfix(stream, sig)
    while stream.at_symbol("*"):
        stream.next()
        node = Mul(node, _parse_postfix(stream, sig))
    return node


def _parse_sum(stream: _Stream, sig) -> IneqExpr:
    node = _parse_product(stream, sig)
    while stream.at_symbol("+") or stream.at_symbol("-"):
        op = stream.next()[1]
        right = _parse_product(stream, sig)
        node = Add(node, right) if op == "+" else Sub(node, right)
    return node


def _parse_maxmin(stream: _Stream, sig) -> IneqExpr:
    node = _parse_sum(stream, sig)
    while stream.peek()[0] == "name" and stream.peek()[1] in ("max", "min"):
        op = stream.next()[1]
        right = _parse_sum(stream, sig)
        node = Max(node, right) if op == "max" else Min(node, right)
    return node


def parse_inequality(text: str, sig: Signature | None = None) -> MetricInequality:
    """Parse an expression compared with zero, such as
    ``d(x,z) - d(x,y) - d(y,z) <= 0``."""
    stream = _Stream(_tokenize(text))
    expr = _parse_maxmin(stream, sig)
    kind, rel_text, col = stream.peek()
    if kind == "ge":
        relation = ">="
    elif kind == "le":
        relation = "<="
    elif kind == "sym" and rel_text == "=":
        relation = "="
    else:
        raise ParseError(
            f"expected >=, <=, or =, found {rel_text or 'end of input'!r}", 1, col
        )
    stream.next()
    kind, text2, col = stream.peek()
    if kind != "num" or Fraction(text2) != 0:
        raise ParseError("inequalities compare with 0", 1, col)
    stream.next()
    _finish(stream)
    return MetricInequality(expr, relation)
