"""Moore cones, adic towers, completion, inversion and fracture squares."""

import random

import pytest

from oracles import (
    elements,
    factors_signature,
    finite_homology_signature,
    module_signature,
    scale,
    subquotient_signature,
)

from towerkit.complexes import Complex
from towerkit.errors import CertificateError
from towerkit.modules import BaseRing, FGModule
from towerkit.moore import (
    Element,
    acyclicity_equivalence,
    adic_tower,
    completion_homology,
    derived_completion,
    fracture_square,
    invert,
    level_fibre_checks,
    localization_check,
    moore_smash,
    order_independence,
    smash,
)


def conc(orders, base=None):
    M = FGModule(tuple(orders), base=base) if base else FGModule(tuple(orders))
    return Complex.concentrated(M, 0)


def factors(M):
    return M.invariant_factors()


# ---------------------------------------------------------------------------
# Oracles on explicit elements of a finite group X in degree 0


def cone_homology_signature(orders, n, k, bound):
    """``H_k`` of ``X --n--> X`` (the cone of multiplication by ``n``) by enumeration."""
    mods = {0: tuple(orders), 1: tuple(orders)}
    diffs = {1: [[n if i == j else 0 for j in range(len(orders))] for i in range(len(orders))]}
    return finite_homology_signature(mods, diffs, k, bound)


def stable_multiple(orders, f):
    """``f^n X`` for large ``n``: the elements on which ``f`` acts invertibly."""
    cur = set(elements(orders))
    while True:
        nxt = {scale(f, x, orders) for x in cur}
        if nxt == cur:
            return cur
        cur = nxt


def group_signature(S, orders, bound):
    zero = {tuple(0 for _ in orders)}
    return subquotient_signature(list(S), zero, orders, bound)


# ---------------------------------------------------------------------------
# Moore cones


def test_moore_two_homology():
    M = moore_smash([2]).complex
    assert factors(M.homology(0)) == [2]
    assert M.homology(1).is_zero()


def test_moore_ff_has_extra_homology():
    single = moore_smash([2]).complex
    double = moore_smash([2, 2]).complex
    assert factors(double.homology(0)) == [2]
    assert single.homology(1).is_zero()
    assert not double.homology(1).is_zero()


def test_moore_unit_cone_contractible():
    M = moore_smash([1]).complex
    assert all(M.homology(k).is_zero() for k in M.degrees())


@pytest.mark.parametrize("fs", [[2], [3, 6], [4, 6], [5]])
def test_moore_h0_is_quotient(fs):
    from math import gcd
    g = 0
    for f in fs:
        g = gcd(g, f)
    M = moore_smash(fs).complex
    assert factors(M.homology(0)) == ([g] if g > 1 else [])


def test_unit_map_is_quotient_on_h0():
    md = moore_smash([6])
    h = md.unit.on_homology(0)
    assert h.is_surjective()
    assert factors(h.target) == [6]


@pytest.mark.parametrize("seed", range(12))
def test_smash_homology_matches_enumeration(seed):
    rng = random.Random(seed)
    orders = tuple(rng.choice((2, 3, 4, 8, 9)) for _ in range(rng.randint(1, 2)))
    n = rng.choice((2, 3, 4))
    Y = smash(conc(orders), [n])
    for k in (0, 1):
        assert module_signature(Y.homology(k), 64) == cone_homology_signature(orders, n, k, 64)


# ---------------------------------------------------------------------------
# Adic towers


def test_adic_tower_of_integers():
    at = adic_tower(conc((0,)), [3], 6)
    H = at.tower.homology(0)
    assert [factors(H.level(s)) for s in range(5)] == [[3], [9], [27], [81], [243]]
    for s in range(1, 5):
        assert H.transition(s).is_surjective()


@pytest.mark.parametrize("p,k", [(2, 1), (2, 3), (3, 2), (5, 1)])
def test_adic_tower_of_prime_power_is_eventually_constant(p, k):
    at = adic_tower(conc((p ** k,)), [p], 8)
    assert at.exact and at.tower.is_periodic
    for s in range(k - 1, k + 3):
        lvl = at.tower.level(s)
        assert factors(lvl.homology(0)) == [p ** k]
        assert factors(lvl.homology(1)) == [p ** k]


def test_adic_tower_no_elements_is_constant():
    X = conc((0, 4))
    at = adic_tower(X, [], 3)
    assert at.tower.is_periodic
    assert factors(at.tower.level(5).homology(0)) == [4, 0]


@pytest.mark.parametrize("orders,f", [((0,), 2), ((9,), 3), ((4, 3), 2), ((0, 5), 5)])
def test_level_fibre_sequences(orders, f):
    checks = level_fibre_checks(adic_tower(conc(orders), [f], 6))
    assert checks and all(checks.values())


@pytest.mark.parametrize("seed", range(10))
def test_adic_levels_match_enumeration(seed):
    rng = random.Random(100 + seed)
    p = rng.choice((2, 3))
    orders = (p ** rng.randint(1, 3), rng.choice((1, 5, 7)))
    orders = tuple(d for d in orders if d > 1)
    at = adic_tower(conc(orders), [p], 6)
    for s in range(4):
        lvl = at.tower.level(s)
        for k in (0, 1):
            assert module_signature(lvl.homology(k), 64) == cone_homology_signature(orders, p ** (s + 1), k, 64)


# ---------------------------------------------------------------------------
# Completion


@pytest.mark.parametrize("p,k,q", [(2, 2, 3), (3, 1, 5), (5, 2, 2), (2, 4, 7)])
def test_completion_of_torsion_sum(p, k, q):
    X = conc((p ** k, q))
    dc = derived_completion(X, [p], 8)
    assert dc.evaluable
    lim = dc.per_degree[0].lim
    assert factors(lim) == [p ** k]
    assert dc.per_degree[0].lim1 == "zero"
    assert dc.localization.holds


def test_completion_of_inverted_prime_is_zero():
    base = BaseRing.localized([3])
    dc = derived_completion(conc((0,), base), [3], 8)
    assert dc.evaluable
    for res in dc.per_degree.values():
        assert isinstance(res.lim, FGModule) and res.lim.is_zero()
        assert res.lim1 == "zero"


def test_completion_of_integers_is_pro():
    dc = derived_completion(conc((0,)), [3], 6)
    assert not dc.evaluable
    assert not isinstance(dc.per_degree[0].lim, FGModule)
    assert dc.per_degree[0].lim1 == "zero"
    assert completion_homology(conc((0,)), [3], 6) is None


def test_positive_degree_element_leaves_connective_complex_complete():
    X = conc((0, 4))
    comp = derived_completion(X, [Element(2, 0)], 6)
    lim0 = comp.per_degree[0].lim
    assert isinstance(lim0, FGModule) and lim0.isomorphic(X.homology(0))


@pytest.mark.parametrize("orders,f", [((9, 2), 3), ((8,), 2), ((4, 5, 7), 5)])
def test_completion_homology_matches_enumeration(orders, f):
    ch = completion_homology(conc(orders), [f], 8)
    assert ch is not None
    lim, a = ch[0]
    # X^ for finite X is X / (prime-to-f part), i.e. X / f^n X for large n
    n = 1
    for d in orders:
        n *= d
    assert module_signature(lim, 64) == cone_homology_signature(orders, f ** n, 0, 64)
    assert a.is_surjective()


@pytest.mark.parametrize("orders", [(0,), (0, 5), (3, 5), (9,)])
def test_localization_property(orders):
    loc = localization_check(conc(orders), 3, 6)
    assert loc.holds
    assert loc.levelwise_iso and loc.factorization and loc.pro_invertible


# ---------------------------------------------------------------------------
# Inversion


def test_invert_integers():
    inv = invert(conc((0,)), [5])
    assert str(inv.base) == "Z[1/5]"
    assert factors(inv.complex.homology(0)) == [0]
    assert inv.acts_invertibly()


def test_invert_kills_torsion_at_the_prime():
    inv = invert(conc((5,)), [5])
    assert all(inv.complex.homology(k).is_zero() for k in inv.complex.degrees())


@pytest.mark.parametrize("orders,f", [((0, 4, 3), 2), ((9, 5), 3), ((0,), 6)])
def test_invert_idempotent(orders, f):
    once = invert(conc(orders), [f])
    twice = invert(once.complex, [f])
    assert twice.base == once.base
    for k in once.complex.degrees():
        assert twice.iota.on_homology(k).is_isomorphism()


@pytest.mark.parametrize("orders,f", [((8, 9, 5), 2), ((27, 4), 3), ((25, 7), 5)])
def test_invert_matches_enumeration(orders, f):
    inv = invert(conc(orders), [f])
    H = inv.complex.homology(0)
    expect = group_signature(stable_multiple(orders, f), orders, 64)
    assert module_signature(H, 64) == expect
    assert inv.acts_invertibly()


# ---------------------------------------------------------------------------
# Fracture squares


@pytest.mark.parametrize("p,q,k", [(2, 3, 1), (3, 2, 2), (5, 7, 1), (2, 13, 4), (13, 11, 1)])
def test_fracture_square_corners(p, q, k):
    orders = (p ** k, q)
    sq = fracture_square(conc(orders), p, 20)
    assert sq.verdict is True
    A, B, D = sq.corners[0]
    n = p ** k * q
    assert module_signature(A, 64) == cone_homology_signature(orders, p ** n, 0, 64)
    assert module_signature(B, 32) == group_signature(stable_multiple(orders, p), orders, 32)
    assert D.is_zero()
    assert all(sq.corollary.values())


def test_fracture_square_of_zero():
    sq = fracture_square(conc(()), 3, 6)
    assert sq.verdict is True
    assert all(m.is_zero() for c in sq.corners.values() for m in c)


def test_fracture_square_with_unit_element():
    X = conc((4, 3))
    sq = fracture_square(X, 5, 6)
    assert sq.verdict is True
    A, B, D = sq.corners[0]
    assert A.is_zero() and D.is_zero()
    assert factors(B) == factors(X.homology(0))


def test_fracture_square_not_evaluable_for_free_part():
    sq = fracture_square(conc((0, 5)), 3, 6)
    assert sq.verdict is None
    assert "eventually constant" in sq.report


# ---------------------------------------------------------------------------
# Acyclicity for different generators, order independence


def test_acyclicity_p_vs_pp():
    cert = {"g_in_f": [(1, [1]), (1, [1])], "f_in_g": [(1, [1, 0])]}
    for orders in [(3,), (9, 2), (2,), (0,)]:
        r = acyclicity_equivalence(conc(orders), [3], [3, 3], cert)
        assert r.equivalent
        assert r.nilpotent_g_on_f and r.nilpotent_f_on_g


def test_acyclicity_mod_p_not_acyclic():
    cert = {"g_in_f": [(1, [1])], "f_in_g": [(1, [1])]}
    r = acyclicity_equivalence(conc((3,)), [3], [3], cert)
    assert not r.acyclic_f and not r.acyclic_g


def test_acyclicity_coprime_torsion():
    cert = {"g_in_f": [(1, [3])], "f_in_g": [(2, [1])]}
    r = acyclicity_equivalence(conc((5,)), [3], [9], cert)
    assert r.acyclic_f and r.acyclic_g


def test_acyclicity_missing_certificate():
    with pytest.raises(CertificateError):
        acyclicity_equivalence(conc((3,)), [3], [5], None)


def test_acyclicity_false_certificate():
    with pytest.raises(CertificateError):
        acyclicity_equivalence(conc((3,)), [3], [5], {"g_in_f": [(1, [1])], "f_in_g": [(1, [1])]})


@pytest.mark.parametrize("orders,fs", [((0, 4), [2, 4]), ((8, 9), [2, 3]), ((0,), [3, 9])])
def test_order_independence(orders, fs):
    res = order_independence(conc(orders), fs, [1, 0], 6)
    assert res.verdict is True


def test_bound_signature_helper_consistency():
    assert factors_signature([4, 2], 16) == module_signature(FGModule((2, 4)), 16)
