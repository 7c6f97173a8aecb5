"""Shared strategies and independent oracles used across the test suite."""

from __future__ import annotations

import itertools
from fractions import Fraction

from hypothesis import strategies as st

from metra.extmetric import (
    INF,
    ZERO,
    ExtRat,
    FiniteMetricSpace,
    PseudometricMatrix,
)

# Small pool of exact distances; keeps closures and lcm computations tame.
FINITE_POOL = [
    Fraction(0),
    Fraction(1, 2),
    Fraction(1),
    Fraction(3, 2),
    Fraction(2),
    Fraction(3),
]
POSITIVE_POOL = FINITE_POOL[1:]


def fw_close(rows):
    """Min-plus shortest-path closure, written independently as an oracle."""
    n = len(rows)
    m = [[ExtRat(v) for v in row] for row in rows]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                through = m[i][k] + m[k][j]
                if through < m[i][j]:
                    m[i][j] = through
    return m


def symmetric_rows(draw, n, values):
    rows = [[ZERO for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            v = draw(values)
            rows[i][j] = v
            rows[j][i] = v
    return rows


LABELS = ("a", "b", "c", "d", "e", "f")


@st.composite
def pseudometric_spaces(draw, max_size=4, allow_inf=True):
    n = draw(st.integers(min_value=1, max_value=max_size))
    pool = [ExtRat(q) for q in FINITE_POOL]
    if allow_inf:
        pool = pool + [INF]
    rows = symmetric_rows(draw, n, st.sampled_from(pool))
    return PseudometricMatrix(LABELS[:n], fw_close(rows))


@st.composite
def metric_spaces(draw, max_size=4, allow_inf=False):
    n = draw(st.integers(min_value=1, max_value=max_size))
    pool = [ExtRat(q) for q in POSITIVE_POOL]
    if allow_inf:
        pool = pool + [INF]
    rows = symmetric_rows(draw, n, st.sampled_from(pool))
    return FiniteMetricSpace(LABELS[:n], fw_close(rows))


def all_correspondences(nx, ny):
    """Every relation on nx x ny points that is total on both sides."""
    cells = list(itertools.product(range(nx), range(ny)))
    for mask in range(1, 1 << len(cells)):
        rel = [cells[i] for i in range(len(cells)) if mask >> i & 1]
        if len({x for x, _ in rel}) == nx and len({y for _, y in rel}) == ny:
            yield rel


def brute_force_gh(x_space, y_space):
    """Reference Gromov-Hausdorff value by exhausting all correspondences."""
    best = None
    for rel in all_correspondences(x_space.size, y_space.size):
        dis = Fraction(0)
        for (i, j), (i2, j2) in itertools.product(rel, rel):
            gap = abs(x_space.at(i, i2).finite - y_space.at(j, j2).finite)
            if gap > dis:
                dis = gap
        if best is None or dis < best:
            best = dis
    return ExtRat(best / 2)


def line_algebra(op, top=2):
    """Algebra on {0..top} with the line metric and one binary operation."""
    from metra.algebra import MetricAlgebra
    from metra.extmetric import space_from
    from metra.terms import Signature

    carrier = list(range(top + 1))
    sig = Signature({"sigma": 2})
    space = space_from(carrier, lambda x, y: abs(x - y))
    table = {
        (p, q): op(p, q) for p in carrier for q in carrier
    }
    return MetricAlgebra(sig, space, {"sigma": table})


def line_min_algebra(top=2):
    return line_algebra(lambda p, q: min(p + q, top), top)


def line_max_algebra(top=2):
    return line_algebra(max, top)


def bare_algebra(space):
    """Wrap a metric space as an algebra over the empty signature."""
    from metra.algebra import MetricAlgebra
    from metra.terms import Signature

    return MetricAlgebra(Signature(), space, {})
