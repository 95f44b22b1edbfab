import random

import pytest
from builders import rand_finite_tower
from oracles import module_signature, subquotient_signature

from towerkit.complexes import ChainMap, Complex
from towerkit.errors import DepthError, UndeterminedError
from towerkit.linalg import Mat
from towerkit.modules import FGModule, ModuleMap
from towerkit.towers import (
    ProDescriptor,
    ProMap,
    Reindexing,
    Tower,
    inverse_promap,
    is_mittag_leffler,
    is_pro_contractible,
    is_pro_isomorphism,
    is_pro_weak_equivalence,
    lim_lim1,
    maps_equal,
    postnikov_projection,
    reindex,
    tensor_promap,
    two_of_three_contractible,
)

Z = FGModule.free(1)


def z_tower(c):
    return Tower.from_endomorphism(Z, ModuleMap(Z, Z, Mat([[c]])))


def p_adic_tower(p, N=4):
    """``Z/p <- Z/p^2 <- ... <- Z/p^(N+1)`` truncated at level ``N``."""
    mods = [FGModule((p ** (s + 1),)) for s in range(N + 1)]
    trans = [ModuleMap(mods[s], mods[s - 1], Mat([[1]])) for s in range(1, N + 1)]
    return Tower(mods, trans)


def lazy_p_adic_tower(p, horizon):
    return Tower.lazy(lambda s: FGModule((p ** (s + 1),)),
                      lambda s: ModuleMap(FGModule((p ** (s + 1),)), FGModule((p ** s,)), Mat([[1]])),
                      horizon=horizon)


def to_zero(T):
    O = FGModule.zero()
    zero_tower = Tower.constant(O)
    return ProMap(T, zero_tower, Reindexing.identity(), lambda k: ModuleMap.zero(T.level(k), O))


def rand_reindexing(rng):
    b = rng.randint(0, 2)
    values = [b]
    for k in range(1, rng.randint(1, 3)):
        values.append(max(values[-1], k) + rng.randint(0, 2))
    return Reindexing(values, rng.randint(1, 2))


# ---------------------------------------------------------------------------
# Reindexing


def test_identity_reindexing_returns_same_tower():
    T = z_tower(3)
    assert reindex(T, Reindexing.identity()) is T


def test_reindexing_rejects_decreasing_values():
    with pytest.raises(ValueError):
        Reindexing([2, 1])


def test_even_reindexing_of_p_adic_tower():
    T = p_adic_tower(3, N=6)
    R = reindex(T, Reindexing.affine(2, 0))
    assert [R.level(k) for k in range(4)] == [FGModule((3 ** (2 * k + 1),)) for k in range(4)]
    assert maps_equal(R.transition(1), T.composite(2, 0))


@pytest.mark.parametrize("seed", range(20))
def test_double_reindex_composes(seed):
    rng = random.Random(700 + seed)
    T, _ = rand_finite_tower(rng, max_prefix=6, max_size=32)
    n, m = rand_reindexing(rng), rand_reindexing(rng)
    twice = reindex(reindex(T, n), m)
    once = reindex(T, n.compose(m))
    for k in range(8):
        assert twice.level(k) == once.level(k)
        if k:
            assert maps_equal(twice.transition(k), once.transition(k))


@pytest.mark.parametrize("seed", range(20))
def test_canonical_map_of_reindexing_is_pro_isomorphism(seed):
    rng = random.Random(800 + seed)
    T, _ = rand_finite_tower(rng, max_prefix=6, max_size=32)
    n = rand_reindexing(rng)
    assert is_pro_isomorphism(ProMap.canonical(T, n)).verdict


# ---------------------------------------------------------------------------
# Pro-isomorphism as an equivalence relation


@pytest.mark.parametrize("seed", range(20))
def test_pro_isomorphism_reflexive_symmetric_transitive(seed):
    rng = random.Random(900 + seed)
    T, _ = rand_finite_tower(rng, max_prefix=5, max_size=32)
    assert is_pro_isomorphism(ProMap.identity(T)).verdict
    n, m = rand_reindexing(rng), rand_reindexing(rng)
    phi = ProMap.canonical(T, n)
    assert is_pro_isomorphism(phi).verdict
    shift = ProMap.canonical(T, Reindexing(n.values, 1))
    res = is_pro_isomorphism(shift)
    back = inverse_promap(shift, res)
    assert is_pro_isomorphism(back).verdict
    psi = ProMap.canonical(phi.source, m)
    assert is_pro_isomorphism(phi.compose(psi)).verdict


@pytest.mark.parametrize("seed", range(30))
def test_pro_zero_matches_stable_images(seed):
    rng = random.Random(1000 + seed)
    T, F = rand_finite_tower(rng, max_prefix=5, max_size=32)
    expected = all(len(F.stable_image(s)) == 1 for s in range(F.N + 2))
    assert is_pro_isomorphism(to_zero(T)).verdict == expected


def test_zero_transitions_are_pro_zero():
    M = FGModule((4,))
    T = Tower.from_endomorphism(M, ModuleMap.zero(M, M))
    assert is_pro_isomorphism(to_zero(T)).verdict


def test_multiplication_by_p_is_not_pro_zero():
    res = is_pro_isomorphism(to_zero(z_tower(3)))
    assert not res.verdict and res.failing_level is not None


def test_witness_triangles_commute():
    T = p_adic_tower(2, N=6)
    T = Tower(T.levels, T.transitions, 1, ModuleMap.identity(T.levels[-1]))
    n = Reindexing.affine(1, 2)
    phi = ProMap.canonical(T, n)
    res = is_pro_isomorphism(phi)
    for k, (m, psi) in res.witness.items():
        assert maps_equal(phi.at(k) @ psi, phi.target.composite(m, k))


def test_horizon_exceeded_is_undetermined():
    T = Tower.lazy(lambda s: Z, lambda s: ModuleMap(Z, Z, Mat([[2]])), horizon=3)
    with pytest.raises(UndeterminedError):
        is_pro_isomorphism(to_zero(T))
    assert lim_lim1(T).lim1 == "undetermined"


def test_truncated_tower_refuses_deeper_levels():
    with pytest.raises(DepthError):
        p_adic_tower(2, N=3).level(7)


# ---------------------------------------------------------------------------
# Mittag-Leffler, lim, lim^1


def test_surjective_tower_is_mittag_leffler():
    assert is_mittag_leffler(p_adic_tower(5, N=5))


def test_eventually_constant_tower_is_mittag_leffler():
    M = FGModule((6,))
    T = Tower([M, M], [ModuleMap.scalar(M, 5)], 1, ModuleMap.identity(M))
    assert is_mittag_leffler(T)


def test_identity_on_z_has_lim_z():
    r = lim_lim1(z_tower(1))
    assert r.lim == Z and r.lim1 == "zero"


@pytest.mark.parametrize("p", [2, 3, 5])
def test_multiplication_by_p_tower(p):
    r = lim_lim1(z_tower(p))
    assert r.ml_verdict is False
    assert r.lim.is_zero() and r.lim1 == "nonzero"


def test_p_adic_lim_is_pro_descriptor():
    r = lim_lim1(lazy_p_adic_tower(3, 6))
    assert isinstance(r.lim, ProDescriptor) and r.lim1 == "zero"


@pytest.mark.parametrize("c", [-3, -1, 0, 1, 2, 4, 6])
def test_ml_implies_lim1_zero_on_integer_towers(c):
    r = lim_lim1(z_tower(c))
    assert r.ml_verdict == (c in (-1, 0, 1))
    if r.ml_verdict:
        assert r.lim1 == "zero"
    else:
        assert r.lim1 == "nonzero"


@pytest.mark.parametrize("seed", range(30))
def test_finite_tower_lim_matches_loop_stable_image(seed):
    rng = random.Random(1100 + seed)
    T, F = rand_finite_tower(rng, max_prefix=5, max_size=32)
    r = lim_lim1(T)
    assert r.ml_verdict is True and r.lim1 == "zero"
    S = F.loop_stable()
    amb = F.orders(F.N)
    assert module_signature(r.lim, 64) == subquotient_signature(S, {tuple(0 for _ in amb)}, amb, 64)


# ---------------------------------------------------------------------------
# Complex towers


def _cz(module, k=0):
    return Complex.concentrated(module, k)


def test_zero_tower_is_pro_contractible():
    assert is_pro_contractible(Tower.constant(Complex.zero()))


def test_acyclic_tower_is_pro_contractible():
    C = Complex({0: Z, 1: Z}, {1: ModuleMap(Z, Z, Mat([[1]]))})
    assert is_pro_contractible(Tower.constant(C))


def test_constant_z_is_not_pro_contractible():
    assert not is_pro_contractible(Tower.constant(_cz(Z)))


def test_identity_is_pro_weak_equivalence():
    assert is_pro_weak_equivalence(ProMap.identity(Tower.constant(_cz(Z)))).verdict


def test_z_to_z_mod_p_is_not_weak_equivalence():
    A, B = _cz(Z), _cz(FGModule((3,)))
    f = ChainMap(A, B, {0: ModuleMap(Z, FGModule((3,)), Mat([[1]]))})
    phi = ProMap(Tower.constant(A), Tower.constant(B), Reindexing.identity(), lambda k: f)
    assert not is_pro_weak_equivalence(phi).verdict


@pytest.mark.parametrize("seed", range(10))
def test_postnikov_projection_is_weak_equivalence(seed):
    from builders import library_free_complex, rand_free_complex

    rng = random.Random(1200 + seed)
    X = library_free_complex(*rand_free_complex(rng, entry=2))
    assert is_pro_weak_equivalence(postnikov_projection(X)).verdict


@pytest.mark.parametrize("seed", range(6))
def test_tensor_preserves_postnikov_weak_equivalence(seed):
    from builders import library_free_complex, rand_free_complex

    rng = random.Random(1300 + seed)
    X = library_free_complex(*rand_free_complex(rng, entry=2))
    c = rng.randint(0, 2)
    E = Complex.concentrated(FGModule.free(1), c)
    if rng.random() < 0.5:
        E = Complex({c: Z, c + 1: Z}, {c + 1: ModuleMap(Z, Z, Mat([[rng.choice([2, 3])]]))})
    assert is_pro_weak_equivalence(tensor_promap(postnikov_projection(X), E)).verdict


@pytest.mark.parametrize("seed", range(10))
def test_tensor_preserves_pro_isomorphism(seed):
    rng = random.Random(1400 + seed)
    T, _ = rand_finite_tower(rng, max_prefix=4, max_size=16)
    CT = T.map_levels(lambda M: _cz(M), lambda f, s: ChainMap(_cz(f.source), _cz(f.target), {0: f}, check=False))
    phi = ProMap.canonical(CT, rand_reindexing(rng))
    E = Complex({0: Z, 1: Z}, {1: ModuleMap(Z, Z, Mat([[rng.choice([2, 3, 4])]]))})
    assert is_pro_weak_equivalence(phi).verdict
    assert is_pro_weak_equivalence(tensor_promap(phi, E)).verdict


# ---------------------------------------------------------------------------
# Two-of-three


def _split_levels(F):
    """Fibre sequence ``F -> F (+) B -> B`` with ``B = Z/3``."""
    B = _cz(FGModule((3,)))
    tot_mod = FGModule(F.module(0).orders + (3,)) if F.modules else FGModule((3,))
    tot = _cz(tot_mod)
    nF = F.module(0).n
    i = ChainMap(F, tot, {0: ModuleMap(F.module(0), tot_mod, Mat([[int(r == c) for c in range(nF)]
                                                                   for r in range(nF + 1)], nF + 1, nF))}
                 if nF else {})
    g = ChainMap(tot, B, {0: ModuleMap(tot_mod, FGModule((3,)), Mat([[0] * nF + [1]], 1, nF + 1))})
    return i, g, tot, B


def test_two_of_three_with_zero_fibre():
    F = Complex.zero()
    i, g, tot, B = _split_levels(F)
    rep = two_of_three_contractible(Tower.constant(F), Tower.constant(tot), Tower.constant(B),
                                    (lambda s: i, lambda s: g))
    assert rep.consistent and rep.base_equivalence and rep.fibre_contractible


def test_two_of_three_with_constant_z_fibre():
    F = _cz(Z)
    i, g, tot, B = _split_levels(F)
    rep = two_of_three_contractible(Tower.constant(F), Tower.constant(tot), Tower.constant(B),
                                    (lambda s: i, lambda s: g))
    assert rep.consistent and not rep.base_equivalence and not rep.fibre_contractible
    assert "fibre tower" in rep.failing_side
