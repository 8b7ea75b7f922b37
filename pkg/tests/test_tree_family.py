import random
from fractions import Fraction

import pytest

from badapprox.construction import construct
from badapprox.exact_arith import RatInterval
from badapprox.fractal_measure import QUARTER
from badapprox.tree_family import (
    RegularTree,
    TreeFamily,
    UbiquityError,
    WidthLawError,
    adic_rule,
    adic_tree,
    all_nodes,
    avoiding_subtree,
    ball_count_ok,
    beta_c,
    check_tree_like,
    check_ubiquity,
    extract_regular,
    limit_measure,
)
from badapprox.exact_arith import Exponent
from oracles import HALF, closed_sets, ninefold_mass, oracle_regular_in, oracle_ubiquitous, subtree_leaf_masks


def iv(a, b):
    return RatInterval(Fraction(a), Fraction(b))


# ---------------------------------------------------------------------------


def test_tree_like_on_construction_family(golden):
    res = construct([HALF], QUARTER, golden, 16, 3)
    fam = res.stages[0].family()
    assert check_tree_like(fam)


def test_tree_like_violations():
    good = TreeFamily([[iv(0, 1)], [iv(0, "1/3"), iv("2/3", 1)]], [[-1], [0, 0]])
    assert check_tree_like(good)
    dup = TreeFamily([[iv(0, 1)], [iv(0, "1/3"), iv(0, "1/3")]], [[-1], [0, 0]])
    v = check_tree_like(dup)
    assert not v and v.condition == 2 and v.witness == (iv(0, "1/3"), iv(0, "1/3"))
    touching = TreeFamily([[iv(0, 1)], [iv(0, "1/2"), iv("1/2", 1)]], [[-1], [0, 0]])
    assert check_tree_like(touching)
    orphan = TreeFamily([[iv(0, "1/2")], [iv(0, "1/4"), iv("3/4", 1)]], [[-1], [0, 0]])
    v = check_tree_like(orphan)
    assert not v and v.condition == 3 and v.witness == iv("3/4", 1)
    barren = TreeFamily([[iv(0, "1/3"), iv("2/3", 1)], [iv(0, "1/9")]], [[-1, -1], [0]])
    v = check_tree_like(barren)
    assert not v and v.condition == 4 and v.witness == iv("2/3", 1)
    flat = TreeFamily([[iv(0, 0)]], [[-1]])
    assert check_tree_like(flat).condition == 1


def test_ubiquity_examples():
    F = all_nodes(2, 2)
    T = [u for u in F if u != (1, 1)]
    assert check_ubiquity(T, 2, 2, 2)
    assert oracle_ubiquitous(T, 2, 2, 2)
    assert not check_ubiquity([()], 3, 1, 1)
    for r in (1, 2, 3):
        assert check_ubiquity(all_nodes(3, 3), 3, r, 3)
    with pytest.raises(ValueError):
        check_ubiquity([()], 2, 3, 1)
    with pytest.raises(ValueError):
        check_ubiquity([(0, 0)], 2, 1, 2)


def test_extraction_examples():
    S = extract_regular(all_nodes(5, 2), 5, 2, 2)
    assert oracle_regular_in(S, all_nodes(5, 2), 4, 2)
    full = all_nodes(3, 2)
    assert sorted(extract_regular(full, 3, 1, 2)) == sorted(full)
    with pytest.raises(UbiquityError) as err:
        extract_regular([()], 3, 1, 1)
    assert err.value.witness is not None


def _cross_check(T, r0, r, depth, masks):
    got = check_ubiquity(T, r0, r, depth)
    assert got == oracle_ubiquitous(T, r0, r, depth, masks)
    if got:
        S = extract_regular(T, r0, r, depth)
        assert oracle_regular_in(S, T, r0 - r + 1, depth)
    else:
        W = avoiding_subtree(T, r0, r, depth)
        assert oracle_regular_in(W, all_nodes(r0, depth), r, depth)
        assert not any(len(u) == depth and u in T for u in W)


@pytest.mark.parametrize("r0,depth", [(1, 1), (1, 3), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2)])
def test_ubiquity_full_enumeration_small(r0, depth):
    for r in range(1, r0 + 1):
        masks = subtree_leaf_masks(r0, r, depth)
        for T in closed_sets(r0, depth, canonical=False):
            _cross_check(T, r0, r, depth, masks)


def test_ubiquity_random_labelled_four_ary():
    rng = random.Random(2024)
    cache = {}
    done = 0
    while done < 60:
        depth = rng.choice([1, 2, 3])
        r = rng.choice([1, 2, 4] if depth == 3 else [1, 2, 3, 4])
        keep = rng.choice([0.6, 0.75, 0.9])
        T = {()}
        for u in all_nodes(4, depth):
            if u and u[:-1] in T and rng.random() < keep:
                T.add(u)
        key = (r, depth)
        if key not in cache:
            cache[key] = subtree_leaf_masks(4, r, depth)
        _cross_check(frozenset(T), 4, r, depth, cache[key])
        done += 1


def test_regular_tree_validation():
    fam = adic_tree(3, [0, 2], 2)
    rt = RegularTree(fam, 2)
    assert rt.depth == 2
    with pytest.raises(ValueError):
        RegularTree(fam, 3)
    lop = TreeFamily([[iv(0, 1)], [iv(0, "1/3"), iv("2/3", 1)], [iv(0, "1/9")]], [[-1], [0, 0], [0]])
    with pytest.raises(UbiquityError):
        RegularTree.extract(lop, 2)
    assert RegularTree.extract(lop, 1).family.levels[1] == [iv(0, "1/3")]


# ---------------------------------------------------------------------------
# limit measure


@pytest.fixture(scope="module")
def nine():
    picks = [0, 4, 8]
    return picks, limit_measure(adic_tree(9, picks, 4), 9, rule=adic_rule(9, picks))


def test_tree_measure_exponent_and_masses(nine):
    _, mu = nine
    assert mu.exponent.exact == Fraction(1, 2)
    for n in range(5):
        lvl = mu.tree.levels[n]
        assert all(mu.node_mass(n, k) == Fraction(1, 3**n) for k in range(len(lvl)))
        assert sum(mu.node_mass(n, k) for k in range(len(lvl))) == 1
    cert = mu.cert
    assert cert.b1 == Fraction(1, 3) and cert.b2 == 9


def test_tree_measure_ball_masses(nine):
    picks, mu = nine
    rng = random.Random(5)
    for _ in range(150):
        x = mu.sample_point(rng, 9)
        n = rng.randint(0, 6)
        r = Fraction(1, 9**n)
        lo, hi = ninefold_mass(picks, x - r, x + r, n + 3)
        assert (lo, hi) == mu.mass_bounds(RatInterval.ball(x, r), n + 3)
        # R^-beta r^beta <= mass <= 3 R^beta r^beta with r^beta = 3^-n
        assert Fraction(1, 3) * Fraction(1, 3**n) <= lo and hi <= 9 * Fraction(1, 3**n)


def test_support_identity(nine):
    picks, mu = nine
    rng = random.Random(9)
    for _ in range(100):
        x = mu.sample_point(rng, 6)
        for n, lvl in enumerate(mu.tree.levels):
            assert any(x in I for I in lvl)
    # 1/9 is a kept right end, the open gap between the first two level-1 nodes is empty
    assert mu.support_point_in(iv("1/9", "4/9")) == Fraction(1, 9)
    assert mu.support_point_in(iv(Fraction(1, 9) + Fraction(1, 100), Fraction(4, 9) - Fraction(1, 100))) is None
    # 1/2 is the centre of the middle cell at every scale: found through the self-similar cycle
    assert mu.support_point_in(RatInterval.point(Fraction(1, 2))) == Fraction(1, 2)
    assert mu.support_point_in(RatInterval.point(Fraction(1, 3))) is None
    p = mu.support_point_in(iv("1/3", "1/2"))
    assert p is not None and Fraction(4, 9) <= p <= Fraction(1, 2)


def test_ball_count_bound(nine):
    _, mu = nine
    rng = random.Random(1)
    samples = []
    for _ in range(200):
        n = rng.randint(0, 3)
        r = Fraction(rng.randint(1, 9), 9 ** (n + 1))
        samples.append((Fraction(rng.randrange(10**6), 10**6), r))
    assert ball_count_ok(mu.tree, 9, samples)
    bad = TreeFamily([[iv(0, 1)], [iv(Fraction(k, 9), Fraction(k + 1, 9)) for k in range(9)]], [[-1], [0] * 9])
    assert not ball_count_ok(bad, 9, [(Fraction(4, 9), Fraction(1, 9))])


def test_width_law_enforced():
    fam = TreeFamily([[iv(0, 1)], [iv(0, "1/3")]], [[-1], [0]])
    with pytest.raises(WidthLawError):
        limit_measure(fam, 9)


def test_beta_c_examples():
    half = Exponent.rational(Fraction(1, 2))
    ident = beta_c(9, half, 20, 1)
    assert ident.degree == 3 and ident.exponent.exact == Fraction(1, 2)
    # R = 20^4, b1 = b2: lower bound beta - log_R 20 = 1/2 - 1/4
    b = beta_c(20**4, half, 1, 1)
    assert b.lower_bound.lo <= Fraction(1, 4) <= b.lower_bound.hi
    assert float(b.exponent) >= 0.25
    sweep = [float(beta_c(2**e, half, 1, 1).exponent) for e in (4, 8, 16)]
    assert sweep == sorted(sweep) and sweep[-1] > sweep[0]
    assert sweep[-1] < 0.5
