"""Congruential pseudometrics and their lattice of operations.

A congruential pseudometric on a metric algebra sits pointwise below the
algebra's metric and has a zero-set closed under every operation, so the
quotient is again a metric algebra.  Congruences are ordered by reversed
pointwise comparison: theta1 is below theta2 when theta1 >= theta2
pointwise.  Meets are pointwise suprema; joins are computed by a
decreasing fixpoint that alternates shortest-path closure with a
mode-dependent operation rule:

  M        force zero distances on operation images of zero argument pairs
  Q        bound d(op(a), op(b)) by the supremum of argument distances
  LIP(K)   bound d(op(a), op(b)) by K_op times that supremum

The same engine generates the smallest congruential pseudometric above a
finite set of distance constraints, which is what presentations of free
algebras need.  Internally the engine runs on scaled int64 numpy
matrices whenever the occurring rationals admit a modest common
denominator, falling back to exact Fraction arithmetic otherwise; both
paths compute the same fixpoint.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .algebra import Homomorphism, MetricAlgebra, product, quotient
from .errors import (
    CongruenceError,
    DomainError,
    OrderError,
    ResourceLimitError,
    SignatureError,
    Verdict,
)
from .extmetric import (
    INF,
    ZERO,
    ExtRat,
    PseudometricMatrix,
    SquareMatrix,
    check_pseudometric,
    render_id,
)

_INT_INF = 1 << 60
_VALUE_GUARD = 1 << 45


def is_congruential(algebra: MetricAlgebra, matrix: SquareMatrix) -> Verdict:
    """Check that ``matrix`` is a congruential pseudometric on ``algebra``.

    Verified in order: same carrier, pseudometric axioms, pointwise
    containment below the algebra metric, and closure of the zero-set
    under every operation.  A zero-set failure is witnessed by
    ``(symbol, args, args2)`` for the first violating argument pair.
    """
    if matrix.carrier != algebra.carrier:
        return Verdict.failed("carrier-mismatch", ())
    axioms = check_pseudometric(matrix)
    if not axioms:
        return axioms
    carrier = algebra.carrier
    for a in carrier:
        for b in carrier:
            if matrix.get(a, b) > algebra.space.get(a, b):
                return Verdict.failed("containment", (a, b))
    classes = _zero_classes(matrix)
    for symbol in algebra.sig.symbols:
        arity = algebra.sig.arity(symbol)
        if arity == 0:
            continue
        for args in itertools.product(carrier, repeat=arity):
            pools = [classes[a] for a in args]
            for args2 in itertools.product(*pools):
                if matrix.get(
                    algebra.apply(symbol, args), algebra.apply(symbol, args2)
                ) != ZERO:
                    return Verdict.failed("zero-set", (symbol, args, args2))
    return Verdict.passed()


def _zero_classes(matrix: SquareMatrix) -> dict:
    """Map each element to the tuple of elements at distance zero from it."""
    out = {}
    for a in matrix.carrier:
        out[a] = tuple(b for b in matrix.carrier if matrix.get(a, b) == ZERO)
    return out


class Congruence:
    """A validated congruential pseudometric on a fixed base algebra."""

    __slots__ = ("base", "matrix")

    def __init__(self, base: MetricAlgebra, matrix: SquareMatrix):
        verdict = is_congruential(base, matrix)
        if not verdict:
            raise CongruenceError(
                f"not congruential: {verdict.reason} at "
                f"{tuple(render_id(w) if not isinstance(w, tuple) else w for w in verdict.witness)}",
                verdict,
            )
        self.base = base
        self.matrix = PseudometricMatrix(matrix.carrier, matrix.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Congruence):
            return NotImplemented
        return self.base == other.base and self.matrix == other.matrix

    def __repr__(self) -> str:
        return f"<Congruence on {self.matrix.size} points>"


def finest_congruence(algebra: MetricAlgebra) -> Congruence:
    """The algebra metric itself: the bottom of the congruence order."""
    return Congruence(algebra, algebra.space)


def coarsest_congruence(algebra: MetricAlgebra) -> Congruence:
    """The all-zero pseudometric: the top of the congruence order."""
    n = algebra.space.size
    rows = [[ZERO] * n for _ in range(n)]
    return Congruence(algebra, SquareMatrix(algebra.carrier, rows))


def pointwise_leq(m1: SquareMatrix, m2: SquareMatrix) -> tuple | None:
    """First pair where m1 exceeds m2, or None when m1 <= m2 pointwise."""
    for a in m1.carrier:
        for b in m1.carrier:
            if m1.get(a, b) > m2.get(a, b):
                return (a, b)
    return None


def order_leq(t1: Congruence, t2: Congruence) -> bool:
    """t1 below t2 in the congruence order (reversed pointwise order)."""
    return pointwise_leq(t2.matrix, t1.matrix) is None


def _same_base(thetas: Sequence[Congruence]) -> MetricAlgebra:
    if not thetas:
        raise DomainError("need at least one congruence")
    base = thetas[0].base
    for t in thetas[1:]:
        if t.base != base:
            raise DomainError("congruences live on different algebras")
    return base


def meet(thetas: Sequence[Congruence]) -> Congruence:
    """Greatest lower bound in the congruence order: the pointwise supremum."""
    base = _same_base(thetas)
    carrier = base.carrier
    rows = [
        [max(t.matrix.get(a, b) for t in thetas) for b in carrier] for a in carrier
    ]
    return Congruence(base, SquareMatrix(carrier, rows))


def compose(t1: Congruence, t2: Congruence) -> SquareMatrix:
    """Min-plus relational composition; not a pseudometric in general."""
    if t1.base != t2.base:
        raise DomainError("congruences live on different algebras")
    carrier = t1.base.carrier
    rows = []
    for a in carrier:
        row = []
        for b in carrier:
            row.append(
                min(t1.matrix.get(a, c) + t2.matrix.get(c, b) for c in carrier)
            )
        rows.append(row)
    return SquareMatrix(carrier, rows)


def are_permutable(t1: Congruence, t2: Congruence) -> bool:
    """True when the two relational compositions agree as matrices."""
    return compose(t1, t2) == compose(t2, t1)


def join(
    thetas: Sequence[Congruence],
    mode: str = "M",
    lipschitz: Mapping[str, Fraction] | None = None,
    max_decreases: int = 1_000_000,
) -> Congruence:
    """Least upper bound in the congruence order.

    Starts from the pointwise minimum and closes it with the fixpoint
    engine under the requested mode rule.  In mode M the closure also
    asserts that, whenever every input satisfies a Lipschitz bound for
    its operations, the bare shortest-path formula already lands on the
    fixpoint and no zero-forcing was needed.
    """
    base = _same_base(thetas)
    carrier = base.carrier
    rows = [
        [min(t.matrix.get(a, b) for t in thetas) for b in carrier] for a in carrier
    ]
    closed = closure_fixpoint(
        carrier, base.ops, rows, mode, lipschitz, max_decreases
    )
    result = Congruence(base, closed)
    if mode == "M" and base.space.size <= 32:
        if all(_lipschitz_able(t.matrix, base) for t in thetas):
            path_only = closure_fixpoint(carrier, {}, rows, "M", None, max_decreases)
            assert path_only == closed, (
                "path formula must already be congruential under the Lipschitz hypothesis"
            )
    return result


def _lipschitz_able(matrix: SquareMatrix, algebra: MetricAlgebra) -> bool:
    """True when some finite constant bounds each operation under ``matrix``."""
    for symbol in algebra.sig.symbols:
        arity = algebra.sig.arity(symbol)
        if arity == 0:
            continue
        for args in itertools.product(algebra.carrier, repeat=arity):
            for args2 in itertools.product(algebra.carrier, repeat=arity):
                spread = max(matrix.get(x, y) for x, y in zip(args, args2))
                out = matrix.get(
                    algebra.apply(symbol, args), algebra.apply(symbol, args2)
                )
                if spread == ZERO and out != ZERO:
                    return False
                if not spread.is_infinite and out.is_infinite:
                    return False
    return True


def restrict(theta: Congruence, sub: MetricAlgebra) -> Congruence:
    """Restriction of a congruence to a subalgebra of its base."""
    base = theta.base
    for x in sub.carrier:
        base.space.index(x)
    for symbol in sub.sig.symbols:
        arity = sub.sig.arity(symbol)
        for args in itertools.product(sub.carrier, repeat=arity):
            if sub.apply(symbol, args) != base.apply(symbol, args):
                raise DomainError("not a subalgebra: operation tables disagree")
    rows = [
        [theta.matrix.get(a, b) for b in sub.carrier] for a in sub.carrier
    ]
    return Congruence(sub, SquareMatrix(sub.carrier, rows))


def quotient_congruence(rho: Congruence, theta: Congruence) -> Congruence:
    """Push a congruence ``rho`` down to the quotient by ``theta``.

    Requires ``rho`` pointwise below ``theta`` (that is, above it in the
    congruence order), which is exactly what makes the pushed-down
    values independent of the chosen representatives; the
    well-definedness check always runs and failures carry a witness
    pair.
    """
    if rho.base != theta.base:
        raise DomainError("congruences live on different algebras")
    bad = pointwise_leq(rho.matrix, theta.matrix)
    if bad is not None:
        hint = ""
        if pointwise_leq(theta.matrix, rho.matrix) is None:
            hint = " (the arguments appear to be in the opposite order)"
        raise OrderError(
            f"rho must sit pointwise below theta; it exceeds it at "
            f"({render_id(bad[0])}, {render_id(bad[1])}){hint}"
        )
    quot, projection = quotient(theta.base, theta)
    classes = _zero_classes(theta.matrix)
    for a in theta.base.carrier:
        for a2 in classes[a]:
            for b in theta.base.carrier:
                if rho.matrix.get(a, b) != rho.matrix.get(a2, b):
                    raise OrderError(
                        f"pushed-down value not well defined at "
                        f"({render_id(a)}, {render_id(b)})"
                    )
    reps = quot.carrier
    rows = [[rho.matrix.get(a, b) for b in reps] for a in reps]
    return Congruence(quot, SquareMatrix(reps, rows))


def pullback_congruence(f: Homomorphism, rho: Congruence) -> Congruence:
    """Pull a congruence on the target back along a homomorphism."""
    if rho.base != f.target:
        raise DomainError("congruence is not on the target algebra")
    carrier = f.source.carrier
    rows = [[rho.matrix.get(f(a), f(b)) for b in carrier] for a in carrier]
    return Congruence(f.source, SquareMatrix(carrier, rows))


@dataclass
class Decomposition:
    """Outcome of a binary product decomposition attempt."""

    ok: bool
    reason: str = ""
    witness: tuple = ()
    factors: tuple = ()
    algebra: MetricAlgebra | None = field(default=None, repr=False)
    iso: Homomorphism | None = field(default=None, repr=False)


def decompose_product(
    algebra: MetricAlgebra, t1: Congruence, t2: Congruence
) -> Decomposition:
    """Factor an algebra as the product of its two quotients.

    Requires the congruence meet to equal the algebra metric, the join
    to be the all-zero pseudometric, and the pair to permute.  When the
    hypotheses hold, the canonical map into the product of quotients is
    verified to be a bijective isometric homomorphism and returned.
    """
    for t in (t1, t2):
        if t.base != algebra:
            raise DomainError("congruence is not on this algebra")
    both = meet([t1, t2])
    bad = _matrix_disagreement(both.matrix, algebra.space)
    if bad is not None:
        return Decomposition(False, "meet-not-the-metric", bad)
    joined = join([t1, t2])
    for a in algebra.carrier:
        for b in algebra.carrier:
            if joined.matrix.get(a, b) != ZERO:
                return Decomposition(False, "join-not-zero", (a, b))
    if not are_permutable(t1, t2):
        c12 = compose(t1, t2)
        c21 = compose(t2, t1)
        bad = _matrix_disagreement(c12, c21)
        return Decomposition(False, "not-permutable", bad or ())
    q1, p1 = quotient(algebra, t1)
    q2, p2 = quotient(algebra, t2)
    prod, _ = product([q1, q2])
    mapping = {x: (p1(x), p2(x)) for x in algebra.carrier}
    iso = Homomorphism(algebra, prod, mapping)
    if not iso.is_injective or not iso.is_surjective:
        return Decomposition(False, "canonical-map-not-bijective", (), (q1, q2), prod)
    if not iso.is_isometric:
        return Decomposition(False, "canonical-map-not-isometric", (), (q1, q2), prod)
    return Decomposition(True, "", (), (q1, q2), prod, iso)


def _matrix_disagreement(m1: SquareMatrix, m2: SquareMatrix) -> tuple | None:
    for a in m1.carrier:
        for b in m1.carrier:
            if m1.get(a, b) != m2.get(a, b):
                return (a, b)
    return None


def generate_congruence(
    carrier: Sequence,
    ops: Mapping[str, Mapping[tuple, object]],
    constraints: Iterable[tuple],
    mode: str = "M",
    lipschitz: Mapping[str, Fraction] | None = None,
    max_decreases: int = 1_000_000,
) -> PseudometricMatrix:
    """Largest pseudometric satisfying the constraints and the mode rule.

    Starts from the discrete pseudometric (zero on the diagonal,
    infinity elsewhere), caps entries by the given ``(x, y, bound)``
    constraints, and closes downward under symmetry, triangle, and the
    mode rule.  Operation tables may be partial; rules fire only on the
    listed entries, which yields a sound over-approximation on truncated
    term universes.  Entries only ever decrease and the total number of
    decreases is capped.
    """
    carrier = tuple(carrier)
    index = {x: i for i, x in enumerate(carrier)}
    if len(index) != len(carrier) or not carrier:
        raise DomainError("carrier must be nonempty and free of duplicates")
    rows = [
        [ZERO if i == j else INF for j in range(len(carrier))]
        for i in range(len(carrier))
    ]
    for x, y, bound in constraints:
        if x not in index or y not in index:
            raise DomainError(
                f"constraint mentions {render_id(x)} or {render_id(y)} outside the carrier"
            )
        bound = ExtRat(bound)
        i, j = index[x], index[y]
        if bound < rows[i][j]:
            rows[i][j] = bound
            rows[j][i] = bound
    return closure_fixpoint(carrier, ops, rows, mode, lipschitz, max_decreases)


def closure_fixpoint(
    carrier: Sequence,
    ops: Mapping[str, Mapping[tuple, object]],
    rows: Sequence[Sequence[ExtRat]],
    mode: str,
    lipschitz: Mapping[str, Fraction] | None,
    max_decreases: int,
) -> PseudometricMatrix:
    """Close ``rows`` downward to the largest mode-congruential pseudometric."""
    if mode not in ("M", "Q", "LIP"):
        raise DomainError(f"unknown mode {mode!r}; expected M, Q, or LIP")
    carrier = tuple(carrier)
    index = {x: i for i, x in enumerate(carrier)}
    tables = []
    for symbol in sorted(ops):
        table = dict(ops[symbol])
        if not table or not next(iter(table)):
            continue
        arity = len(next(iter(table)))
        for args, value in table.items():
            if len(args) != arity:
                raise SignatureError(f"mixed arities in the table for {symbol}")
            for a in args:
                if a not in index:
                    raise DomainError(f"table argument {render_id(a)} outside carrier")
            if value not in index:
                raise DomainError(f"table value {render_id(value)} outside carrier")
        entries = sorted(
            table.items(), key=lambda kv: tuple(index[a] for a in kv[0])
        )
        k = None
        if mode == "LIP":
            if lipschitz is None or symbol not in lipschitz:
                raise SignatureError(f"LIP mode needs a constant for {symbol}")
            k = Fraction(lipschitz[symbol])
            if k <= 0:
                raise DomainError(f"Lipschitz constant for {symbol} must be positive")
        args_idx = [
            np.array([index[args[pos]] for args, _ in entries], dtype=np.intp)
            for pos in range(arity)
        ]
        res_idx = np.array([index[value] for _, value in entries], dtype=np.intp)
        tables.append((symbol, args_idx, res_idx, k))

    scaled = _scale_rows(rows)
    if scaled is not None:
        try:
            out_rows = _fix_int(scaled[0], scaled[1], tables, mode, max_decreases)
            return PseudometricMatrix(carrier, out_rows)
        except _ScaleOverflow:
            pass
    out_rows = _fix_frac(rows, tables, mode, max_decreases)
    return PseudometricMatrix(carrier, out_rows)


class _ScaleOverflow(Exception):
    pass


def _scale_rows(rows) -> tuple[np.ndarray, int] | None:
    import math

    denom = 1
    for row in rows:
        for v in row:
            if not v.is_infinite:
                denom = math.lcm(denom, v.finite.denominator)
                if denom > 1 << 32:
                    return None
    n = len(rows)
    out = np.full((n, n), _INT_INF, dtype=np.int64)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            if not v.is_infinite:
                s = v.finite.numerator * (denom // v.finite.denominator)
                if s >= _VALUE_GUARD:
                    return None
                out[i, j] = s
    return out, denom


def _components(finite: np.ndarray) -> list[np.ndarray]:
    n = finite.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in np.nonzero(finite[i, i + 1 :])[0]:
            ri, rj = find(i), find(int(j) + i + 1)
            if ri != rj:
                parent[rj] = ri
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g, dtype=np.intp) for g in groups.values() if len(g) > 1]


def _fix_int(D: np.ndarray, denom: int, tables, mode: str, max_decreases: int):
    decreases = 0
    np.fill_diagonal(D, 0)
    np.minimum(D, D.T, out=D)
    while True:
        before = D.copy()
        for idx in _components(D < _INT_INF):
            sub = D[np.ix_(idx, idx)]
            for k in range(len(idx)):
                np.minimum(sub, sub[:, k, None] + sub[None, k, :], out=sub)
            D[np.ix_(idx, idx)] = sub
        for _, args_idx, res_idx, k in tables:
            cand = D[np.ix_(args_idx[0], args_idx[0])].copy()
            for pos in range(1, len(args_idx)):
                np.maximum(cand, D[np.ix_(args_idx[pos], args_idx[pos])], out=cand)
            if mode == "M":
                cand = np.where(cand == 0, 0, _INT_INF)
            elif mode == "LIP":
                p, q = k.numerator, k.denominator
                if q != 1:
                    # Rescale the shared denominator so K * value stays integral;
                    # the pass baseline must move to the same scale.  Guards use
                    # Python ints so an overflow can never wrap silently.
                    finite = D < _INT_INF
                    big = max(
                        int(D[finite].max(initial=0)),
                        int(before[before < _INT_INF].max(initial=0)),
                    )
                    if big * q >= _VALUE_GUARD:
                        raise _ScaleOverflow
                    D = np.where(finite, D * q, _INT_INF)
                    before = np.where(before < _INT_INF, before * q, _INT_INF)
                    denom *= q
                    cand = np.where(cand < _INT_INF, cand * q, _INT_INF)
                mx = int(cand[cand < _INT_INF].max(initial=0))
                if (mx // q) * p >= _VALUE_GUARD:
                    raise _ScaleOverflow
                cand = np.where(cand < _INT_INF, (cand // q) * p, _INT_INF)
            if len(set(res_idx.tolist())) == len(res_idx):
                block = D[np.ix_(res_idx, res_idx)]
                np.minimum(block, cand, out=block)
                D[np.ix_(res_idx, res_idx)] = block
            else:
                np.minimum.at(
                    D, (res_idx[:, None], res_idx[None, :]), cand
                )
        np.fill_diagonal(D, 0)
        np.minimum(D, D.T, out=D)
        dropped = int((D < before).sum())
        decreases += dropped
        if decreases > max_decreases:
            raise ResourceLimitError(
                f"closure exceeded {max_decreases} entry decreases",
                "max_decreases",
                max_decreases,
            )
        if dropped == 0:
            break
    n = D.shape[0]
    return [
        [
            INF if D[i, j] >= _INT_INF else ExtRat(Fraction(int(D[i, j]), denom))
            for j in range(n)
        ]
        for i in range(n)
    ]


def _fix_frac(rows, tables, mode: str, max_decreases: int):
    n = len(rows)
    m = [[ExtRat(v) for v in row] for row in rows]
    for i in range(n):
        m[i][i] = ZERO
    decreases = 0

    def lower(i, j, value) -> int:
        nonlocal m
        if value < m[i][j]:
            m[i][j] = value
            m[j][i] = value
            return 1
        return 0

    while True:
        dropped = 0
        for i in range(n):
            for j in range(n):
                if m[j][i] < m[i][j]:
                    dropped += lower(i, j, m[j][i])
        for k in range(n):
            for i in range(n):
                if m[i][k].is_infinite:
                    continue
                for j in range(n):
                    dropped += lower(i, j, m[i][k] + m[k][j])
        for _, args_idx, res_idx, k in tables:
            for e in range(len(res_idx)):
                for f in range(len(res_idx)):
                    spread = max(
                        m[int(args_idx[pos][e])][int(args_idx[pos][f])]
                        for pos in range(len(args_idx))
                    )
                    if mode == "M":
                        if spread == ZERO:
                            dropped += lower(int(res_idx[e]), int(res_idx[f]), ZERO)
                    elif mode == "Q":
                        dropped += lower(int(res_idx[e]), int(res_idx[f]), spread)
                    else:
                        bound = spread if spread.is_infinite else spread.scale(k)
                        dropped += lower(int(res_idx[e]), int(res_idx[f]), bound)
        decreases += dropped
        if decreases > max_decreases:
            raise ResourceLimitError(
                f"closure exceeded {max_decreases} entry decreases",
                "max_decreases",
                max_decreases,
            )
        if dropped == 0:
            break
    return m


def grid_congruences(
    algebra: MetricAlgebra,
    values: Sequence[ExtRat] | None = None,
    cap: int = 100_000,
) -> list[Congruence]:
    """All congruences with off-diagonal entries from a finite value set.

    Candidates are symmetric matrices over the value grid; the ones that
    pass the congruential check are returned in a deterministic order.
    The default grid is the set of metric values plus zero and infinity.
    """
    if values is None:
        seen = {ZERO, INF}
        for row in algebra.space.entries:
            seen.update(row)
        values = sorted(seen)
    n = algebra.space.size
    cells = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if len(values) ** len(cells) > cap:
        raise ResourceLimitError(
            f"grid has {len(values) ** len(cells)} candidates, over the cap {cap}",
            "grid_cap",
            cap,
        )
    out = []
    for combo in itertools.product(values, repeat=len(cells)):
        rows = [[ZERO] * n for _ in range(n)]
        for (i, j), v in zip(cells, combo):
            rows[i][j] = v
            rows[j][i] = v
        mat = SquareMatrix(algebra.carrier, rows)
        if is_congruential(algebra, mat):
            out.append(Congruence(algebra, mat))
    return out
