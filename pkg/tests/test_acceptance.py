"""Acceptance suite: one test per headline property, run at exact tolerance.

Each test is self-contained, uses exact rational arithmetic
throughout, and checks its stated runtime budget where one applies.
Oracles are independent of the code under test: lattice operations are
compared against brute-force bounds over a finite candidate family,
isomorphisms are certified by explicit bijective isometric
homomorphisms, and free-algebra distances are certified from below by
concrete witness models.
"""

import itertools
import random
import time
from fractions import Fraction
from functools import cache

from metra.algebra import (
    Homomorphism,
    MetricAlgebra,
    generate_subalgebra,
    kernel,
    product,
    quotient,
)
from metra.congruence import (
    Congruence,
    are_permutable,
    compose,
    decompose_product,
    is_congruential,
    join,
    meet,
)
from metra.errors import MetraError
from metra.extmetric import (
    INF,
    ONE,
    ZERO,
    ExtRat,
    FiniteMetricSpace,
    SquareMatrix,
    check_pseudometric,
    gromov_hausdorff,
    hausdorff_distance,
)
from metra.filters import FiniteFilter, all_filters, pointwise_limit_metric, reduced_product
from metra.logic import (
    Const,
    DistAtom,
    MetricEquation,
    MetricInequality,
    Add, Max, Min, Mul, Square, Sub,
    Presentation,
    closure_suite,
    factoring_map,
    free_algebra,
    in_mode_class,
    parse_formula,
    satisfies,
    satisfies_inequality,
)
from metra.terms import App, Signature, Var

SIG0 = Signature()
SIG2 = Signature({"sigma": 2})

HALF = Fraction(1, 2)


def line_algebra(op, top, scale=1):
    """Points 0..top on the rational line with one binary operation."""
    pts = tuple(range(top + 1))
    rows = [[ExtRat(Fraction(abs(p - q)) * scale) for q in pts] for p in pts]
    ops = {"sigma": {(p, q): op(p, q) for p in pts for q in pts}}
    return MetricAlgebra(SIG2, FiniteMetricSpace(pts, rows), ops)


def modular_algebra(n, scale=1):
    """Addition mod n on a uniform discrete metric."""
    pts = tuple(range(n))
    rows = [[ZERO if p == q else ExtRat(Fraction(scale)) for q in pts] for p in pts]
    ops = {"sigma": {(p, q): (p + q) % n for p in pts for q in pts}}
    return MetricAlgebra(SIG2, FiniteMetricSpace(pts, rows), ops)


def bare_space(carrier, rows):
    """A metric space viewed as an algebra with no operations."""
    return MetricAlgebra(SIG0, FiniteMetricSpace(carrier, rows), {})


def random_bare_space(rng, n, pool):
    """Random metric with entries from a pool inside [m, 2m]: always valid."""
    rows = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            v = ExtRat(rng.choice(pool))
            rows[i][j] = rows[j][i] = v
    return bare_space(tuple(range(n)), rows)


def assert_isomorphic(iso: Homomorphism):
    assert iso.is_injective
    assert iso.is_surjective
    assert iso.is_isometric


# ---------------------------------------------------------------------------
# 1. Product decompositions


def test_criterion_01_grid_product_decomposition():
    """The 9-point grid splits into two 3-point intervals; randomized
    complete instances built from products always decompose.  < 1 s."""
    start = time.perf_counter()
    xs = (Fraction(0), HALF, Fraction(1))
    interval = bare_space(
        (0, 1, 2), [[ExtRat(abs(p - q)) for q in xs] for p in xs]
    )
    grid, (p1, p2) = product([interval, interval])
    assert len(grid.carrier) == 9
    assert max(
        grid.space.get(x, y) for x in grid.carrier for y in grid.carrier
    ) == ONE
    d = decompose_product(grid, kernel(p1), kernel(p2))
    assert d.ok, d.reason
    assert [len(f.carrier) for f in d.factors] == [3, 3]
    for factor in d.factors:
        assert gromov_hausdorff(factor.space, interval.space) == ZERO
    assert_isomorphic(d.iso)

    pool = [Fraction(1), Fraction(5, 4), Fraction(3, 2), Fraction(7, 4), Fraction(2)]
    rng = random.Random(7)
    for k in range(100):
        a = random_bare_space(rng, 2, pool)
        b = random_bare_space(rng, rng.choice((2, 3)), pool)
        prod, (q1, q2) = product([a, b])
        outcome = decompose_product(prod, kernel(q1), kernel(q2))
        assert outcome.ok, (k, outcome.reason)
        assert_isomorphic(outcome.iso)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 2. First Isomorphism Theorem


def _hom_corpus():
    """Every homomorphism between ordered pairs of fixture algebras."""
    fixtures = [
        line_algebra(max, 1), line_algebra(max, 2), line_algebra(max, 3),
        line_algebra(max, 2, HALF),
        line_algebra(min, 2), line_algebra(min, 3), line_algebra(min, 3, HALF),
        line_algebra(lambda p, q: min(p + q, 2), 2),
        line_algebra(lambda p, q: min(p + q, 3), 3),
        modular_algebra(2), modular_algebra(3), modular_algebra(4),
        modular_algebra(3, 2),
    ]
    for a, b in itertools.product(fixtures, repeat=2):
        for images in itertools.product(b.carrier, repeat=len(a.carrier)):
            mapping = dict(zip(a.carrier, images))
            try:
                yield Homomorphism(a, b, mapping)
            except MetraError:
                continue


def test_criterion_02_first_isomorphism_theorem():
    """Quotient by the kernel is isometrically isomorphic to the image,
    over an exhaustive corpus of at least 100 homomorphisms.  < 30 s."""
    start = time.perf_counter()
    checked = 0
    for hom in _hom_corpus():
        a = hom.source
        image, _ = generate_subalgebra(hom.target, set(hom.mapping.values()))
        onto = Homomorphism(a, image, hom.mapping)
        quot, _ = quotient(a, kernel(onto))
        iso = Homomorphism(quot, image, {c: hom.mapping[c] for c in quot.carrier})
        assert_isomorphic(iso)
        checked += 1
    assert checked >= 100, checked
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 3 and 4. The congruence lattice against a brute-force oracle


@cache
def _lattice_family():
    """All congruential matrices over {0, 1/2, 1, inf} on a fixed algebra.

    The base algebra has three points at mutually infinite distance and
    one unary operation folding 0 onto 1, so the zero-set rule genuinely
    constrains the family.  Also returns the larger candidate family
    over every value reachable by triangle closure, used as the search
    space for brute-force bounds.
    """
    space = FiniteMetricSpace(
        (0, 1, 2), [[ZERO, INF, INF], [INF, ZERO, INF], [INF, INF, ZERO]]
    )
    algebra = MetricAlgebra(
        Signature({"u": 1}), space, {"u": {(0,): 1, (1,): 1, (2,): 2}}
    )

    def matrix(t):
        e01, e02, e12 = t
        return SquareMatrix(
            (0, 1, 2), [[ZERO, e01, e02], [e01, ZERO, e12], [e02, e12, ZERO]]
        )

    grid = (ZERO, ExtRat(HALF), ONE, INF)
    reachable = tuple(
        ExtRat(Fraction(k, 2)) for k in range(7)
    ) + (INF,)
    family = [
        t for t in itertools.product(grid, repeat=3)
        if is_congruential(algebra, matrix(t)).ok
    ]
    candidates = [
        t for t in itertools.product(reachable, repeat=3)
        if is_congruential(algebra, matrix(t)).ok
    ]
    return algebra, matrix, family, candidates


def _pointwise_leq(a, b):
    return all(x <= y for x, y in zip(a, b))


def test_criterion_03_congruence_lattice_matches_the_oracle():
    """join is the least upper bound and meet the greatest lower bound,
    both certified by brute force over the candidate family.  < 60 s."""
    start = time.perf_counter()
    algebra, matrix, family, candidates = _lattice_family()
    assert len(family) == 22
    thetas = {t: Congruence(algebra, matrix(t)) for t in family}
    for t1 in family:
        for t2 in family:
            joined = join([thetas[t1], thetas[t2]]).matrix
            jt = (joined.get(0, 1), joined.get(0, 2), joined.get(1, 2))
            below = [
                c for c in candidates
                if _pointwise_leq(c, t1) and _pointwise_leq(c, t2)
            ]
            lub = tuple(max(col) for col in zip(*below))
            assert lub in below, "upper bounds have no greatest element"
            assert jt == lub, (t1, t2, jt, lub)
            met = meet([thetas[t1], thetas[t2]]).matrix
            mt = (met.get(0, 1), met.get(0, 2), met.get(1, 2))
            above = [
                c for c in candidates
                if _pointwise_leq(t1, c) and _pointwise_leq(t2, c)
            ]
            glb = tuple(min(col) for col in zip(*above))
            assert glb in above, "lower bounds have no least element"
            assert mt == glb, (t1, t2, mt, glb)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"took {elapsed:.2f}s"


def test_criterion_04_agreeing_compositions_equal_the_join():
    """Whenever the two min-plus compositions agree as matrices, the
    composition is exactly the lattice join."""
    algebra, matrix, family, _ = _lattice_family()
    thetas = {t: Congruence(algebra, matrix(t)) for t in family}
    agreeing = 0
    for t1 in family:
        for t2 in family:
            c12 = compose(thetas[t1], thetas[t2])
            c21 = compose(thetas[t2], thetas[t1])
            assert are_permutable(thetas[t1], thetas[t2]) == (
                c12.entries == c21.entries
            )
            if c12.entries == c21.entries:
                agreeing += 1
                joined = join([thetas[t1], thetas[t2]]).matrix
                assert c12.entries == joined.entries, (t1, t2)
    assert agreeing == 386


# ---------------------------------------------------------------------------
# 5. Reduced products over every small filter


def _random_binary_algebra(rng):
    pts = (0, 1)
    gap = ExtRat(rng.choice([HALF, Fraction(1), Fraction(3, 2), Fraction(2)]))
    ops = {"sigma": {(p, q): rng.choice(pts) for p in pts for q in pts}}
    return MetricAlgebra(
        SIG2, FiniteMetricSpace(pts, [[ZERO, gap], [gap, ZERO]]), ops
    )


def test_criterion_05_reduced_products_over_every_small_filter():
    """For every filter on index sets of size at most 4, the reduced
    product is isomorphic to the product over the core; principal
    ultrafilters select their factor.  Exact."""
    rng = random.Random(5)
    checked = ultrafilters = 0
    for n in (1, 2, 3, 4):
        index_set = tuple(range(1, n + 1))
        for filt in all_filters(index_set):
            factors = [_random_binary_algebra(rng) for _ in index_set]
            rp = reduced_product(factors, filt)
            assert rp.exists, (n, filt.core)
            position = {i: k for k, i in enumerate(index_set)}
            core_pos = [position[i] for i in filt.core]
            core_prod, _ = product([factors[p] for p in core_pos])
            mapping = {
                x: tuple(x[p] for p in core_pos) for x in rp.algebra.carrier
            }
            assert_isomorphic(Homomorphism(rp.algebra, core_prod, mapping))
            checked += 1
            if len(filt.core) == 1:
                k = core_pos[0]
                direct = Homomorphism(
                    rp.algebra, factors[k], {x: x[k] for x in rp.algebra.carrier}
                )
                assert_isomorphic(direct)
                ultrafilters += 1
    assert checked == 26
    assert ultrafilters == 10


# ---------------------------------------------------------------------------
# 6. Inequality preservation in reduced products


def _random_inequality_expr(rng, names, depth):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.45:
            return Const(rng.choice([HALF, Fraction(1), Fraction(3, 2), Fraction(2)]))
        a, b = rng.sample(names, 2)
        return DistAtom(Var(a), Var(b))
    shape = rng.randrange(6)
    if shape == 5:
        return Square(_random_inequality_expr(rng, names, depth - 1))
    ctor = (Add, Sub, Mul, Max, Min)[shape]
    return ctor(
        _random_inequality_expr(rng, names, depth - 1),
        _random_inequality_expr(rng, names, depth - 1),
    )


def test_criterion_06_inequalities_survive_reduced_products():
    """50 random (factors, ultrafilter, inequality) triples where every
    factor satisfies the inequality; the reduced product must too."""
    pool = [HALF, Fraction(1), Fraction(3, 2), Fraction(2)]
    rng = random.Random(11)
    accepted = attempts = 0
    while accepted < 50:
        attempts += 1
        assert attempts <= 200, "triple generation stalled"
        n = rng.choice((2, 3))
        factors = [random_bare_space(rng, 2, pool) for _ in range(n)]
        filt = FiniteFilter(
            tuple(range(1, n + 1)), (rng.randrange(1, n + 1),)
        )
        expr = _random_inequality_expr(rng, ("x", "y", "z"), 2)
        for relation in ("<=", ">=", "="):
            q = MetricInequality(expr, relation)
            if all(satisfies_inequality(a, q).ok for a in factors):
                rp = reduced_product(factors, filt)
                assert rp.exists
                assert satisfies_inequality(rp.algebra, q).ok, str(expr)
                accepted += 1
                break
    assert accepted == 50


# ---------------------------------------------------------------------------
# 7. Hausdorff and Gromov-Hausdorff sanity


def _line_space(rng, n):
    xs = sorted(rng.sample([Fraction(k, 4) for k in range(13)], n))
    return FiniteMetricSpace(
        tuple(range(n)), [[ExtRat(abs(p - q)) for q in xs] for p in xs]
    )


def _fat_space(rng, n):
    rows = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            v = ExtRat(Fraction(rng.randrange(4, 9), 4))
            rows[i][j] = rows[j][i] = v
    return FiniteMetricSpace(tuple(range(n)), rows)


def test_criterion_07_hausdorff_and_gromov_hausdorff_sanity():
    """Hausdorff distance is a metric on the subsets of a 4-point space;
    one-point GH distance is half the diameter; GH satisfies the
    triangle inequality.  Exact rational equality throughout."""
    pts = ("a", "b", "c", "d")
    gaps = {
        ("a", "b"): HALF, ("a", "c"): Fraction(1), ("a", "d"): Fraction(2),
        ("b", "c"): Fraction(1), ("b", "d"): Fraction(3, 2),
        ("c", "d"): Fraction(1),
    }

    def dist(p, q):
        return ZERO if p == q else ExtRat(gaps[tuple(sorted((p, q)))])

    space = FiniteMetricSpace(pts, [[dist(p, q) for q in pts] for p in pts])
    subsets = [
        s for k in range(1, 5) for s in itertools.combinations(pts, k)
    ]
    table = {
        (s, t): hausdorff_distance(space, s, t)
        for s in subsets for t in subsets
    }
    for s in subsets:
        assert table[(s, s)] == ZERO
        for t in subsets:
            assert table[(s, t)] == table[(t, s)]
            if s != t:
                assert table[(s, t)] > ZERO
            for u in subsets:
                assert table[(s, u)] <= table[(s, t)] + table[(t, u)]

    rng = random.Random(23)
    point = FiniteMetricSpace(("p",), [[ZERO]])
    for k in range(20):
        n = rng.choice((1, 2, 3, 4))
        space_k = _line_space(rng, n) if k % 2 else _fat_space(rng, n)
        diameter = max(
            space_k.get(p, q) for p in space_k.carrier for q in space_k.carrier
        )
        assert gromov_hausdorff(point, space_k) == ExtRat(diameter.finite / 2)

    pool = [
        _line_space(rng, rng.choice((1, 2, 3))) if i % 2
        else _fat_space(rng, rng.choice((2, 3)))
        for i in range(8)
    ]
    gh = {}
    for i, j in itertools.combinations_with_replacement(range(8), 2):
        gh[(i, j)] = gh[(j, i)] = gromov_hausdorff(pool[i], pool[j])
    for i, j, k in itertools.product(range(8), repeat=3):
        assert gh[(i, k)] <= gh[(i, j)] + gh[(j, k)]


# ---------------------------------------------------------------------------
# 8. The free quantitative algebra on one bounded pair


def test_criterion_08_free_quantitative_algebra_fixpoint():
    """Over generators x, y with x =[1] y in mode Q, the distance from
    sigma(x,x) to sigma(y,y) is exactly 1 at every depth from 1 to 3;
    the lower bound is certified by the two-point max algebra, and
    distances are monotone in the depth.  < 5 s."""
    start = time.perf_counter()
    sxx = App("sigma", (Var("x"), Var("x")))
    syy = App("sigma", (Var("y"), Var("y")))
    relation = MetricEquation(Var("x"), Var("y"), 1)
    frees = {}
    for depth in (1, 2, 3):
        p = Presentation(SIG2, ["x", "y"], [relation], mode="Q", depth=depth)
        frees[depth] = free_algebra(p)
        assert frees[depth].distance(sxx, syy) == ONE

    witness = line_algebra(max, 1)
    assert in_mode_class(witness, "Q").ok
    assert satisfies(witness, relation).ok
    verdict = factoring_map(frees[2], witness, {"x": 0, "y": 1})
    assert verdict.ok, verdict.reason
    mapping = verdict.value
    image_xx = mapping[frees[2].class_of(sxx)]
    image_yy = mapping[frees[2].class_of(syy)]
    assert witness.space.get(image_xx, image_yy) == ONE

    shallow = frees[1].universe
    for s in shallow:
        for t in shallow:
            d1 = frees[1].theta.get(s, t)
            d2 = frees[2].theta.get(s, t)
            d3 = frees[3].theta.get(s, t)
            assert d2 <= d1
            assert d3 <= d2
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 9. Closure suites


def test_criterion_09_closure_suites_with_the_quotient_counterexample():
    """Equation-defined classes close under product, subalgebra, and
    every quotient; inference-defined classes close under reflexive
    quotients and break on the documented non-reflexive one.  At least
    200 generated instances, zero unexpected failures."""
    instances = [
        line_algebra(max, 1), line_algebra(max, 2), line_algebra(max, 3),
        line_algebra(min, 2), line_algebra(min, 3),
        line_algebra(max, 2, HALF),
    ]
    suites = [
        closure_suite([parse_formula("sigma(x,y) =[0] sigma(y,x)", SIG2)], instances),
        closure_suite([parse_formula("sigma(x,x) =[0] x", SIG2)], instances),
        closure_suite([parse_formula("x =[inf] y", SIG2)], instances),
        closure_suite(
            [parse_formula("x =[1] y |- sigma(x,x) =[1] sigma(y,y)", SIG2)],
            instances,
        ),
    ]
    line3 = bare_space(
        (0, 1, 2), [[ExtRat(abs(p - q)) for q in (0, 1, 2)] for p in (0, 1, 2)]
    )
    grid = [ZERO, ExtRat(HALF), ONE, ExtRat(Fraction(3, 2)), ExtRat(2), INF]
    counterexample = closure_suite(
        [parse_formula("x =[1/2] y |- x =[0] y", SIG0)],
        [line3],
        quotient_values=grid,
    )
    suites.append(counterexample)

    total = sum(len(s.records) for s in suites)
    assert total >= 200, total
    for suite in suites:
        assert suite.unexpected_failures == []
    broken = [
        r for r in counterexample.expected_failures
        if r.construction == "non-reflexive-quotient"
    ]
    assert broken, "the documented counterexample did not fire"
    reflexive = [
        r for r in counterexample.records
        if r.construction == "reflexive-quotient"
    ]
    assert reflexive and all(r.ok for r in reflexive)


# ---------------------------------------------------------------------------
# 10. Congruential failure for reduced limits


def test_criterion_10_limit_pseudometric_congruentiality_failure():
    """The stagewise distances d_n(a,b) = 1/n have a valid pointwise
    limit, but with sigma(a) = a and sigma(b) = c the limit's zero-set
    is not closed under sigma: the check fails at the pair (a, b).  < 1 s."""
    start = time.perf_counter()
    pts = ("a", "b", "c")
    algebra = MetricAlgebra(
        Signature({"sigma": 1}),
        FiniteMetricSpace(
            pts, [[ZERO, ONE, ONE], [ONE, ZERO, ONE], [ONE, ONE, ZERO]]
        ),
        {"sigma": {("a",): "a", ("b",): "c", ("c",): "c"}},
    )
    limit = pointwise_limit_metric(
        pts, {("a", "b"): "1/n", ("a", "c"): "1", ("b", "c"): "1"}
    )
    assert check_pseudometric(limit).ok
    assert limit.get("a", "b") == ZERO
    assert limit.get("a", "c") == ONE
    assert limit.get("b", "c") == ONE
    verdict = is_congruential(algebra, SquareMatrix(pts, limit.entries))
    assert not verdict.ok
    assert verdict.reason == "zero-set"
    assert verdict.witness == ("sigma", ("a",), ("b",))
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
