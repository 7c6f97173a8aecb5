"""Finite metric algebras and structure-preserving maps between them.

A metric algebra is a finite metric space with total operation tables
over a signature.  Homomorphisms are required to preserve operations and
to be nonexpansive; both properties are validated when a
``Homomorphism`` is constructed.  Quantitativity (every operation
nonexpansive for the supremum metric on argument tuples) is a separate
check, not a construction invariant.
"""

from __future__ import annotations

import itertools
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .errors import (
    AxiomError,
    DomainError,
    ResourceLimitError,
    SignatureError,
    TableError,
    Verdict,
)
from .extmetric import (
    FiniteMetricSpace,
    PseudometricMatrix,
    QuotientMap,
    metric_identification,
    render_id,
    restrict_space,
    sup_product,
)
from .terms import Signature

if TYPE_CHECKING:  # pragma: no cover
    from .congruence import Congruence


class MetricAlgebra:
    """A finite metric space with total operation tables."""

    __slots__ = ("sig", "space", "ops")

    def __init__(self, sig: Signature, space: FiniteMetricSpace, ops: Mapping):
        if not isinstance(space, FiniteMetricSpace):
            space = FiniteMetricSpace(space.carrier, space.entries)
        normalized = {}
        for symbol, table in dict(ops).items():
            if symbol not in sig:
                raise SignatureError(f"table for unknown symbol {symbol!r}")
            if sig.arity(symbol) == 0 and not isinstance(table, Mapping):
                table = {(): table}
            normalized[symbol] = {tuple(k): v for k, v in dict(table).items()}
        self.sig = sig
        self.space = space
        self.ops = normalized
        verdict = validate_algebra(self)
        if not verdict:
            raise TableError(
                f"bad operation table: {verdict.reason} at {verdict.witness}"
            )

    @property
    def carrier(self) -> tuple:
        return self.space.carrier

    def apply(self, symbol: str, args: Sequence) -> object:
        args = tuple(args)
        if self.sig.arity(symbol) != len(args):
            raise SignatureError(
                f"{symbol} expects {self.sig.arity(symbol)} arguments, got {len(args)}"
            )
        try:
            return self.ops[symbol][args]
        except KeyError:
            raise DomainError(
                f"arguments {tuple(render_id(a) for a in args)} not in the carrier"
            ) from None

    def constant(self, symbol: str) -> object:
        return self.apply(symbol, ())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MetricAlgebra):
            return NotImplemented
        return (
            self.sig == other.sig
            and self.space == other.space
            and self.ops == other.ops
        )

    def __repr__(self) -> str:
        return f"<MetricAlgebra |A|={self.space.size} sig={self.sig!r}>"


def validate_algebra(algebra: MetricAlgebra) -> Verdict:
    """Check that every table is total over the carrier with in-carrier values."""
    carrier = set(algebra.space.carrier)
    for symbol in algebra.sig.symbols:
        if symbol not in algebra.ops:
            return Verdict.failed("missing-table", (symbol,))
    for symbol, table in algebra.ops.items():
        arity = algebra.sig.arity(symbol)
        expected = len(carrier) ** arity
        for args, value in table.items():
            if len(args) != arity or any(a not in carrier for a in args):
                return Verdict.failed("bad-arguments", (symbol, args))
            if value not in carrier:
                return Verdict.failed("value-outside-carrier", (symbol, args))
        if len(table) != expected:
            return Verdict.failed("partial-table", (symbol,))
    return Verdict.passed()


def is_quantitative(algebra: MetricAlgebra, max_checks: int = 1_000_000) -> Verdict:
    """Check every operation nonexpansive for the sup metric on tuples.

    The witness of a failure is ``(symbol, args, args2)`` for the first
    violating pair in the deterministic scan order.
    """
    space = algebra.space
    checks = 0
    for symbol in algebra.sig.symbols:
        arity = algebra.sig.arity(symbol)
        if arity == 0:
            continue
        tuples = list(itertools.product(space.carrier, repeat=arity))
        checks += len(tuples) ** 2
        if checks > max_checks:
            raise ResourceLimitError(
                f"quantitativity scan exceeds {max_checks} pairs",
                "max_checks",
                max_checks,
            )
        for a_args in tuples:
            for b_args in tuples:
                bound = max(space.get(a, b) for a, b in zip(a_args, b_args))
                if space.get(algebra.apply(symbol, a_args), algebra.apply(symbol, b_args)) > bound:
                    return Verdict.failed("expansive-operation", (symbol, a_args, b_args))
    return Verdict.passed()


def is_homomorphism(f: Mapping, source: MetricAlgebra, target: MetricAlgebra) -> Verdict:
    """Check operation preservation and nonexpansiveness of ``f``."""
    if source.sig != target.sig:
        return Verdict.failed("signature-mismatch", ())
    for a in source.carrier:
        if a not in f:
            return Verdict.failed("undefined", (a,))
        if f[a] not in set(target.carrier):
            return Verdict.failed("value-outside-target", (a,))
    for symbol in source.sig.symbols:
        arity = source.sig.arity(symbol)
        for args in itertools.product(source.carrier, repeat=arity):
            mapped = tuple(f[a] for a in args)
            if f[source.apply(symbol, args)] != target.apply(symbol, mapped):
                return Verdict.failed("operation-not-preserved", (symbol, args))
    for a in source.carrier:
        for b in source.carrier:
            if target.space.get(f[a], f[b]) > source.space.get(a, b):
                return Verdict.failed("expansive", (a, b))
    return Verdict.passed()


class Homomorphism:
    """A validated nonexpansive, operation-preserving map."""

    __slots__ = ("source", "target", "mapping")

    def __init__(self, source: MetricAlgebra, target: MetricAlgebra, mapping: Mapping):
        verdict = is_homomorphism(mapping, source, target)
        if not verdict:
            raise AxiomError(
                f"not a homomorphism: {verdict.reason} at {verdict.witness}", verdict
            )
        self.source = source
        self.target = target
        self.mapping = dict(mapping)

    def __call__(self, x) -> object:
        try:
            return self.mapping[x]
        except KeyError:
            raise DomainError(f"{render_id(x)} is not in the source carrier") from None

    @property
    def is_surjective(self) -> bool:
        return set(self.mapping.values()) == set(self.target.carrier)

    @property
    def is_injective(self) -> bool:
        values = list(self.mapping.values())
        return len(set(values)) == len(values)

    @property
    def is_isometric(self) -> bool:
        src = self.source.space
        dst = self.target.space
        return all(
            dst.get(self(a), self(b)) == src.get(a, b)
            for a in src.carrier
            for b in src.carrier
        )

    def then(self, other: "Homomorphism") -> "Homomorphism":
        if self.target is not other.source and self.target != other.source:
            raise DomainError("composition needs matching middle algebra")
        return Homomorphism(
            self.source, other.target, {a: other(self(a)) for a in self.source.carrier}
        )

    def __repr__(self) -> str:
        return f"<Homomorphism {self.source.space.size} -> {self.target.space.size}>"


def generate_subalgebra(
    algebra: MetricAlgebra, seed: Iterable
) -> tuple[MetricAlgebra, Homomorphism]:
    """Smallest subalgebra containing ``seed``, with its inclusion map.

    The carrier is closed under every operation by a worklist pass;
    constants always join the closure.  The carrier order of the result
    follows the base algebra.
    """
    closure = set()
    frontier = list(dict.fromkeys(seed))
    for x in frontier:
        algebra.space.index(x)
    for symbol in algebra.sig.symbols:
        if algebra.sig.arity(symbol) == 0:
            frontier.append(algebra.constant(symbol))
    if not frontier:
        raise DomainError("subalgebra seed is empty and the signature has no constants")
    while frontier:
        x = frontier.pop()
        if x in closure:
            continue
        closure.add(x)
        for symbol in algebra.sig.symbols:
            arity = algebra.sig.arity(symbol)
            if arity == 0:
                continue
            for args in itertools.product(sorted(closure, key=algebra.space.index), repeat=arity):
                value = algebra.apply(symbol, args)
                if value not in closure:
                    frontier.append(value)
    sub_space = restrict_space(algebra.space, closure)
    ops = {}
    for symbol in algebra.sig.symbols:
        arity = algebra.sig.arity(symbol)
        ops[symbol] = {
            args: algebra.apply(symbol, args)
            for args in itertools.product(sub_space.carrier, repeat=arity)
        }
    sub = MetricAlgebra(algebra.sig, sub_space, ops)
    inclusion = Homomorphism(sub, algebra, {x: x for x in sub_space.carrier})
    return sub, inclusion


def product(
    algebras: Sequence[MetricAlgebra], max_size: int = 4096
) -> tuple[MetricAlgebra, list[Homomorphism]]:
    """Componentwise product with the supremum metric and projections."""
    if not algebras:
        raise DomainError("product of zero algebras is not defined")
    sig = algebras[0].sig
    for a in algebras[1:]:
        if a.sig != sig:
            raise SignatureError("product factors must share one signature")
    space = sup_product([a.space for a in algebras], max_size=max_size)
    ops = {}
    for symbol in sig.symbols:
        arity = sig.arity(symbol)
        if len(space.carrier) ** arity > 1_000_000:
            raise ResourceLimitError(
                f"product table for {symbol} would exceed 1000000 entries",
                "table_size",
                1_000_000,
            )
        table = {}
        for args in itertools.product(space.carrier, repeat=arity):
            value = tuple(
                a.apply(symbol, tuple(arg[i] for arg in args))
                for i, a in enumerate(algebras)
            )
            table[args] = value
        ops[symbol] = table
    prod = MetricAlgebra(sig, space, ops)
    projections = [
        Homomorphism(prod, a, {p: p[i] for p in space.carrier})
        for i, a in enumerate(algebras)
    ]
    return prod, projections


def quotient(
    algebra: MetricAlgebra, theta: "Congruence"
) -> tuple[MetricAlgebra, Homomorphism]:
    """Quotient algebra by a congruential pseudometric, with its projection.

    The carrier is the metric identification of theta's zero classes,
    named by earliest representatives; the metric is theta itself read
    on representatives; operations act on representatives and are well
    defined because theta's zero-set is closed under every operation.
    """
    if theta.base is not algebra and theta.base != algebra:
        raise DomainError("congruence is not on this algebra")
    space, qmap = metric_identification(
        PseudometricMatrix(theta.matrix.carrier, theta.matrix.entries)
    )
    ops = {}
    for symbol in algebra.sig.symbols:
        arity = algebra.sig.arity(symbol)
        table = {}
        for args in itertools.product(space.carrier, repeat=arity):
            table[args] = qmap.class_of(algebra.apply(symbol, args))
        ops[symbol] = table
    quot = MetricAlgebra(algebra.sig, space, ops)
    projection = Homomorphism(
        algebra, quot, {x: qmap.class_of(x) for x in algebra.carrier}
    )
    return quot, projection


def kernel(f: Homomorphism) -> "Congruence":
    """ker(f)(a, b) = d(f(a), f(b)), a congruence on the source algebra."""
    from .congruence import Congruence

    carrier = f.source.carrier
    rows = [[f.target.space.get(f(a), f(b)) for b in carrier] for a in carrier]
    return Congruence(f.source, PseudometricMatrix(carrier, rows))


def image(f: Homomorphism) -> MetricAlgebra:
    """Set-image of ``f`` with the structure induced from the target."""
    sub, _ = generate_subalgebra(f.target, [f(a) for a in f.source.carrier])
    if set(sub.carrier) != {f(a) for a in f.source.carrier}:
        raise AxiomError("image of a homomorphism must already be closed")
    return sub


def saturate(algebra: MetricAlgebra, subset: Iterable, theta: "Congruence") -> tuple:
    """Elements at theta-distance zero from the subset, in carrier order."""
    if theta.base != algebra:
        raise DomainError("congruence is not on this algebra")
    subset = list(subset)
    for s in subset:
        algebra.space.index(s)
    from .extmetric import ZERO

    out = []
    for a in algebra.carrier:
        if any(theta.matrix.get(s, a) == ZERO for s in subset):
            out.append(a)
    return tuple(out)


def is_reflexive_quotient(p: Homomorphism, max_sections: int = 1_000_000) -> Verdict:
    """Search for an isometric section of a surjective homomorphism.

    Sections assign to each target element one of its preimages; they
    are enumerated lexicographically in target-carrier and preimage
    order, so the first witness found is deterministic.  The section
    must preserve distances exactly but need not preserve operations.
    """
    if not p.is_surjective:
        return Verdict.failed("not-surjective", ())
    targets = p.target.carrier
    fibers = [
        [a for a in p.source.carrier if p(a) == b] for b in targets
    ]
    total = 1
    for fiber in fibers:
        total *= len(fiber)
        if total > max_sections:
            raise ResourceLimitError(
                f"section search space exceeds {max_sections}",
                "max_sections",
                max_sections,
            )
    dst = p.target.space
    src = p.source.space
    for choice in itertools.product(*fibers):
        good = True
        for i, b in enumerate(targets):
            for j, b2 in enumerate(targets):
                if src.get(choice[i], choice[j]) != dst.get(b, b2):
                    good = False
                    break
            if not good:
                break
        if good:
            section = dict(zip(targets, choice))
            return Verdict.passed(section)
    return Verdict.failed("no-isometric-section", ())


def find_isomorphism(a: MetricAlgebra, b: MetricAlgebra) -> dict | None:
    """A bijective isometric homomorphism from ``a`` onto ``b``, or None.

    Backtracking assignment in carrier order, pruning on exact distance
    agreement with every previously assigned element; operation tables
    are verified on each completed candidate.  Returns the
    lexicographically first isomorphism for deterministic output.
    """
    if a.sig != b.sig or a.space.size != b.space.size:
        return None
    xs = a.carrier
    ys = b.carrier

    def extend(assignment: dict, used: set) -> dict | None:
        if len(assignment) == len(xs):
            if is_homomorphism(assignment, a, b):
                return dict(assignment)
            return None
        x = xs[len(assignment)]
        for y in ys:
            if y in used:
                continue
            if any(
                b.space.get(y, assignment[x2]) != a.space.get(x, x2)
                for x2 in assignment
            ):
                continue
            assignment[x] = y
            used.add(y)
            found = extend(assignment, used)
            if found is not None:
                return found
            del assignment[x]
            used.remove(y)
        return None

    return extend({}, set())


def relabel(algebra: MetricAlgebra, mapping: Mapping) -> MetricAlgebra:
    """Rename carrier elements along a bijection; structure is transported."""
    carrier = algebra.carrier
    if sorted(map(render_id, mapping)) != sorted(map(render_id, carrier)) or len(
        set(mapping.values())
    ) != len(carrier):
        raise DomainError("relabeling must be a bijection on the carrier")
    new_carrier = [mapping[x] for x in carrier]
    rows = [
        [algebra.space.get(x, y) for y in carrier] for x in carrier
    ]
    space = FiniteMetricSpace(new_carrier, rows)
    ops = {}
    for symbol, table in algebra.ops.items():
        ops[symbol] = {
            tuple(mapping[x] for x in args): mapping[value]
            for args, value in table.items()
        }
    return MetricAlgebra(algebra.sig, space, ops)
