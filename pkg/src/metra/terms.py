"""Signatures, finite term universes, evaluation, and substitution."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import (
    DomainError,
    ResourceLimitError,
    SignatureError,
    ValuationError,
)

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_']*$")


class Signature:
    """A finite map from operation symbols to arities."""

    __slots__ = ("_arities",)

    def __init__(self, arities: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        items = dict(arities)
        for name, arity in items.items():
            if not isinstance(name, str) or not _NAME.match(name):
                raise SignatureError(f"bad operation symbol {name!r}")
            if not isinstance(arity, int) or arity < 0:
                raise SignatureError(f"arity of {name} must be a nonnegative integer")
        self._arities = items

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(sorted(self._arities))

    def arity(self, name: str) -> int:
        try:
            return self._arities[name]
        except KeyError:
            raise SignatureError(f"unknown operation symbol {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._arities

    def items(self):
        return tuple((s, self._arities[s]) for s in self.symbols)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Signature):
            return NotImplemented
        return self._arities == other._arities

    def __hash__(self) -> int:
        return hash(self.items())

    def __repr__(self) -> str:
        body = "; ".join(f"{s}/{a}" for s, a in self.items())
        return f"Signature({{{body}}})"


class Term:
    """Base class for terms; instances are ``Var`` or ``App``."""

    __slots__ = ()

    def height(self) -> int:
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError

    def sort_key(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Var(Term):
    name: str

    def height(self) -> int:
        return 0

    def variables(self) -> frozenset:
        return frozenset((self.name,))

    def sort_key(self):
        return (0, self.name)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class App(Term):
    symbol: str
    args: tuple[Term, ...] = ()

    def height(self) -> int:
        # Constants sit at height 0, like variables.
        if not self.args:
            return 0
        return 1 + max(a.height() for a in self.args)

    def variables(self) -> frozenset:
        out: frozenset = frozenset()
        for a in self.args:
            out |= a.variables()
        return out

    def sort_key(self):
        return (1, self.symbol, tuple(a.sort_key() for a in self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.symbol
        return f"{self.symbol}({','.join(str(a) for a in self.args)})"


def check_term(term: Term, sig: Signature) -> None:
    """Raise unless every applied symbol exists in ``sig`` with its arity."""
    if isinstance(term, Var):
        return
    if isinstance(term, App):
        if sig.arity(term.symbol) != len(term.args):
            raise SignatureError(
                f"{term.symbol} has arity {sig.arity(term.symbol)}, "
                f"got {len(term.args)} arguments"
            )
        for a in term.args:
            check_term(a, sig)
        return
    raise SignatureError(f"not a term: {term!r}")


def enumerate_terms(
    sig: Signature,
    variables: Iterable[str],
    depth: int,
    max_terms: int = 20000,
) -> list[Term]:
    """All terms of height at most ``depth``, in canonical order.

    The order lists variables first (by name), then applications by
    symbol name and lexicographically in their subterms.  The order is
    total, so repeated calls agree and deeper universes extend shallower
    ones as sets.
    """
    if depth < 0:
        raise DomainError("depth must be nonnegative")
    names = sorted(set(variables))
    for name in names:
        if not _NAME.match(name):
            raise SignatureError(f"bad variable name {name!r}")
        if name in sig:
            raise SignatureError(f"variable {name!r} collides with an operation symbol")
    universe: list[Term] = [Var(name) for name in names]
    universe += [App(s) for s, a in sig.items() if a == 0]
    seen = set(universe)
    for _ in range(depth):
        layer = list(universe)
        grew = False
        for symbol, arity in sig.items():
            if arity == 0:
                continue
            for args in _tuples(layer, arity):
                candidate = App(symbol, args)
                if candidate not in seen:
                    universe.append(candidate)
                    seen.add(candidate)
                    grew = True
                    if len(universe) > max_terms:
                        raise ResourceLimitError(
                            f"term universe exceeds {max_terms} terms",
                            "max_terms",
                            max_terms,
                        )
        if not grew:
            break
    return sorted(universe, key=lambda t: t.sort_key())


def _tuples(pool: Sequence[Term], arity: int):
    if arity == 1:
        for t in pool:
            yield (t,)
        return
    for first in pool:
        for rest in _tuples(pool, arity - 1):
            yield (first,) + rest


def evaluate(term: Term, algebra, valuation: Mapping) -> object:
    """Evaluate ``term`` in ``algebra`` under ``valuation`` by recursion."""
    if isinstance(term, Var):
        if term.name not in valuation:
            raise ValuationError(f"valuation does not cover variable {term.name!r}")
        value = valuation[term.name]
        algebra.space.index(value)
        return value
    if isinstance(term, App):
        args = tuple(evaluate(a, algebra, valuation) for a in term.args)
        return algebra.apply(term.symbol, args)
    raise SignatureError(f"not a term: {term!r}")


def substitute(term: Term, mapping: Mapping[str, Term]) -> Term:
    """Simultaneously replace variables by terms."""
    if isinstance(term, Var):
        return mapping.get(term.name, term)
    if isinstance(term, App):
        return App(term.symbol, tuple(substitute(a, mapping) for a in term.args))
    raise SignatureError(f"not a term: {term!r}")


_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_']*|[(),])")


def parse_term(text: str, sig: Signature | None = None) -> Term:
    """Parse the concrete syntax ``name`` / ``f(t1,...,tn)``.

    With a signature, bare names that are nullary symbols become
    constants and applied symbols are arity-checked; without one, every
    bare name is a variable.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise SignatureError(f"bad character in term: {text[pos:].strip()[0]!r}")
            break
        tokens.append(m.group(1))
        pos = m.end()

    def parse(at: int) -> tuple[Term, int]:
        if at >= len(tokens):
            raise SignatureError(f"unexpected end of term in {text!r}")
        head = tokens[at]
        if not _NAME.match(head):
            raise SignatureError(f"expected a name in {text!r}, got {head!r}")
        at += 1
        if at < len(tokens) and tokens[at] == "(":
            args = []
            at += 1
            if at < len(tokens) and tokens[at] == ")":
                at += 1
            else:
                while True:
                    arg, at = parse(at)
                    args.append(arg)
                    if at < len(tokens) and tokens[at] == ",":
                        at += 1
                        continue
                    if at < len(tokens) and tokens[at] == ")":
                        at += 1
                        break
                    raise SignatureError(f"expected ',' or ')' in {text!r}")
            term: Term = App(head, tuple(args))
            if sig is not None:
                check_term(App(head, tuple(args)), sig)
            return term, at
        if sig is not None and head in sig:
            if sig.arity(head) != 0:
                raise SignatureError(
                    f"symbol {head!r} has arity {sig.arity(head)} and needs arguments"
                )
            return App(head), at
        return Var(head), at

    term, at = parse(0)
    if at != len(tokens):
        raise SignatureError(f"trailing tokens in term {text!r}")
    return term
