"""Spectral sequence pages, convergence verdicts, Boardman sequence and Adams towers."""

import random

import pytest

from builders import rand_finite_tower
from oracles import mod_p_cone_tower, module_signature, subquotient_signature

from towerkit.adams import (
    boardman_check,
    convergence_report,
    fibre_invariants_ok,
    mod_ring,
    nilpotent_completion,
    pages,
    standard_adams_tower,
    unit_ring,
)
from towerkit.complexes import Complex
from towerkit.errors import DepthError
from towerkit.modules import FGModule, ModuleMap, image
from towerkit.towers import Tower

BOUND = 64


def conc(orders):
    return Complex.concentrated(FGModule(tuple(orders)), 0)


def check_mod_p_fixture(p, s_max, r_max):
    at = standard_adams_tower(mod_ring(p), conc((0,)), s_max + 2 * r_max)
    P = pages(at, r_max, s_max, [-1, 0, 1])
    oracle = mod_p_cone_tower(p, s_max + 2 * r_max + 1)
    for page in P:
        r = page.r
        for (s, t), c in page.cells.items():
            k = t - s
            if k == 0:
                assert c.module.invariant_factors() == [p]
            else:
                assert c.module.is_zero()
            if k in (0, -1):
                assert module_signature(c.module, p) == oracle.page(s, k, r, p)
        for (s, t), d in page.differentials.items():
            assert d.is_zero()
            if t == s:
                assert oracle.differential_image_size(s, r) == 1
    rep = convergence_report(at, [0], s_max)
    d = rep.degrees[0]
    assert d.verdicts["strong-to-lim"] is True
    assert d.lim1_of_tower == "zero"
    assert d.agree
    for s in range(s_max + 1):
        assert d.e_inf[s].module.isomorphic(d.E_inf[s])


# ---------------------------------------------------------------------------
# Mod-p Adams fixture


def test_mod_two_fixture():
    check_mod_p_fixture(2, 8, 3)


def test_mod_three_fixture_low_window():
    check_mod_p_fixture(3, 5, 2)


def test_adams_tower_levels():
    at = standard_adams_tower(mod_ring(3), conc((0,)), 6)
    assert [at.tower.level(n).homology(0).invariant_factors() for n in range(4)] == [[3], [9], [27], [81]]
    assert all(at.W(n).homology(0).invariant_factors() == [3] for n in range(4))
    assert fibre_invariants_ok(at)


def test_unit_ring_gives_constant_tower():
    X = conc((0, 4))
    at = standard_adams_tower(unit_ring(), X, 4)
    assert at.exact
    for n in range(3):
        assert at.tower.level(n).homology(0).isomorphic(X.homology(0))
    P = pages(at, 2, 3, [0])
    for (s, t), c in P[0].cells.items():
        if s == 0:
            assert c.module.isomorphic(X.homology(0))
        else:
            assert c.module.is_zero()


def test_zero_complex_pages_vanish():
    at = standard_adams_tower(mod_ring(2), conc(()), 8)
    P = pages(at, 2, 3, [0, -1])
    assert all(page.is_zero() for page in P)
    rep = convergence_report(at, [0], 3)
    assert all(v in (True, False) for v in rep.degrees[0].conditions)
    assert rep.degrees[0].verdicts["strong-to-lim"] is True


def test_window_past_truncation_is_depth_error():
    at = standard_adams_tower(mod_ring(2), conc((0,)), 4)
    with pytest.raises(DepthError):
        pages(at, 3, 8, [0])


# ---------------------------------------------------------------------------
# Random finite-group towers against the exact-couple oracle


@pytest.mark.parametrize("seed", range(25))
def test_pages_match_oracle(seed):
    rng = random.Random(seed)
    T, O = rand_finite_tower(rng, max_prefix=4, max_size=32)
    s_max, r_max = 3, 3
    P = pages(T, r_max, s_max, [-1, 0])
    for page in P:
        r = page.r
        for (s, t), c in page.cells.items():
            assert module_signature(c.module, BOUND) == O.page(s, t - s, r, BOUND)
        for s in range(s_max + 1):
            d = page.differentials[(s, s)]
            size = 1
            for e in image(d)[0].invariant_factors():
                size *= e
            assert size == O.differential_image_size(s, r)


@pytest.mark.parametrize("seed", range(30))
def test_three_conditions_agree(seed):
    rng = random.Random(1000 + seed)
    T, O = rand_finite_tower(rng)
    rep = convergence_report(T, [0])
    d = rep.degrees[0]
    assert rep.exact
    assert d.agree
    assert len(set(d.conditions)) == 1
    # finite levels: stable images exist, hence lim^1 vanishes
    assert d.lim1_of_tower == "zero"
    assert module_signature(d.lim, BOUND) == _set_signature(O.loop_stable(), O.orders(O.N))


def _set_signature(S, orders):
    return subquotient_signature(list(S), {tuple(0 for _ in orders)}, orders, BOUND)


# ---------------------------------------------------------------------------
# Non Mittag-Leffler tower


def test_multiplication_tower_not_completely_convergent():
    Z = FGModule((0,))
    T = Tower.from_endomorphism(Z, ModuleMap.scalar(Z, 3))
    rep = convergence_report(T, [-1, 0])
    d = rep.degrees[0]
    assert d.ml_per_s and not all(d.ml_per_s.values())
    assert d.verdicts["mittag-leffler"] is False
    assert isinstance(d.lim, FGModule) and d.lim.is_zero()
    assert d.lim1_of_tower == "nonzero"
    assert d.verdicts["strong-to-lim"] is False
    assert d.agree
    # separatedness one degree down fails through lim^1 of this tower
    below = rep.degrees[-1]
    assert below.lim1_of_tower_above == "nonzero"
    assert below.verdicts["completely-convergent"] is False


# ---------------------------------------------------------------------------
# Boardman sequence


@pytest.mark.parametrize("seed", range(30))
def test_boardman_on_random_towers(seed):
    rng = random.Random(2000 + seed)
    T, O = rand_finite_tower(rng)
    res = boardman_check(T)
    assert res.verdict is True
    # every level is finite, so each descending image chain stabilizes
    for s in range(O.N + 1):
        assert O.stable_image(s)
    assert res.terms == ("zero", "zero", "zero")


def test_boardman_constant_tower():
    T = Tower.constant(FGModule((4, 3)))
    res = boardman_check(T)
    assert res.verdict is True and res.terms[1] == "zero"


def test_boardman_infinite_level_skipped():
    res = boardman_check(Tower.constant(FGModule((0,))))
    assert res.verdict is None and "not finite" in res.reason


# ---------------------------------------------------------------------------
# Nilpotent completion


def test_nilpotent_completion_of_prime_power():
    nc = nilpotent_completion(mod_ring(3), conc((9,)), 6)
    assert nc.evaluate(0).lim.invariant_factors() == [9]


def test_nilpotent_completion_of_integers_is_pro():
    nc = nilpotent_completion(mod_ring(2), conc((0,)), 6)
    assert [nc.tower.level(n).homology(0).invariant_factors() for n in range(4)] == [[2], [4], [8], [16]]
    assert not isinstance(nc.evaluate(0).lim, FGModule)


def test_nilpotent_completion_unit_ring():
    X = conc((0, 5))
    nc = nilpotent_completion(unit_ring(), X, 4)
    assert nc.evaluate(0).lim.isomorphic(X.homology(0))
