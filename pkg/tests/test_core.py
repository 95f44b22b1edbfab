import random
from math import gcd

import pytest
from builders import (
    library_chain_map,
    library_complex,
    library_free_complex,
    rand_chain_map_rows,
    rand_finite_complex,
    rand_free_complex,
    rand_hom_rows,
)
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import (
    apply,
    elements,
    factors_signature,
    finite_factors,
    finite_homology_signature,
    free_homology,
    kunneth,
    mod_reduction_prediction,
    module_signature,
    oracle_cone,
    same_factors,
    span,
    subquotient_signature,
)

from towerkit import linalg
from towerkit.complexes import (
    ChainMap,
    Complex,
    cone,
    derived_tensor,
    postnikov_sequence,
    truncate,
    verify_long_exact,
)
from towerkit.errors import BaseMismatchError, ShapeError, UnsupportedBaseError
from towerkit.linalg import Mat
from towerkit.modules import BaseRing, FGModule, ModuleMap, cokernel, image, kernel, module_from_presentation

ZZ = BaseRing.integers()


def Zmod(*orders):
    return FGModule(tuple(orders))


def scalar_complex(c, lo=1):
    """``Z --c--> Z`` in degrees ``lo -> lo-1``."""
    Z = FGModule.free(1)
    return Complex({lo: Z, lo - 1: Z}, {lo: ModuleMap(Z, Z, Mat([[c]]))})


# ---------------------------------------------------------------------------
# Presentations and Smith form


def test_presentation_diag_two_zero():
    M = module_from_presentation(ZZ, [[2, 0], [0, 0]])
    assert same_factors(M.invariant_factors(), [2, 0])


def test_presentation_unit_relation_kills():
    assert module_from_presentation(ZZ, [[1]]).is_zero()


def test_presentation_rejects_unknown_base():
    with pytest.raises(UnsupportedBaseError):
        module_from_presentation("Q", [[1]])


def test_presentation_normal_form_is_canonical():
    a = module_from_presentation(ZZ, [[2, 0], [0, 3]])
    b = module_from_presentation(ZZ, [[6]])
    assert a == b


def _coker_mod_m_signature(rows, m, bound):
    """Element enumeration of ``coker(M) (x) Z/m`` inside ``(Z/m)^n``."""
    n = len(rows[0])
    amb = (m,) * n
    gens = [tuple(x % m for x in r) for r in rows]
    B = span(gens, amb)
    return subquotient_signature(elements(amb), B, amb, bound)


@pytest.mark.parametrize("seed", range(40))
def test_presentation_matches_enumeration(seed):
    rng = random.Random(seed)
    rows = [[rng.randint(-4, 4) for _ in range(3)] for _ in range(3)]
    M = module_from_presentation(ZZ, rows)
    m = rng.choice([4, 6, 8, 9, 12])
    predicted = [d for d in ((m if d == 0 else gcd(d, m)) for d in M.invariant_factors()) if d > 1]
    assert _coker_mod_m_signature(rows, m, m) == factors_signature(predicted, m)


@given(st.lists(st.lists(st.integers(-6, 6), min_size=3, max_size=3), min_size=1, max_size=3))
@settings(max_examples=60, deadline=None)
def test_smith_decomposition_identity(rows):
    A = Mat(rows)
    s = linalg.smith(A)
    D = s.U @ A @ s.V
    for i in range(D.m):
        for j in range(D.n):
            assert D.rows[i][j] == (s.diag[i] if i == j and i < len(s.diag) else 0)
    nz = [d for d in s.diag if d]
    assert all(b % a == 0 for a, b in zip(nz, nz[1:]))


@given(st.lists(st.lists(st.integers(-20, 20), min_size=2, max_size=4), min_size=2, max_size=4))
@settings(max_examples=40, deadline=None)
def test_compiled_and_python_kernels_agree(rows):
    n = len(rows[0])
    rows = [r[:n] + [0] * (n - len(r)) for r in rows]
    A = Mat(rows)
    if linalg.backend() != "compiled":
        pytest.skip("compiled kernel not built")
    a = linalg.smith(A).diag
    prev = linalg.use_backend("python")
    try:
        b = linalg.smith(A).diag
    finally:
        linalg.use_backend(prev)
    assert a == b


def test_large_entries_fall_back_to_python_ints():
    big = 2 ** 70
    A = Mat([[big, 0], [0, 3 * big]])
    assert [d for d in linalg.smith(A).diag if d] == [big, 3 * big]


# ---------------------------------------------------------------------------
# Kernels, cokernels, images


def _mult(M, c):
    return ModuleMap.scalar(M, c)


def test_kernel_of_two_on_z_is_zero():
    assert kernel(_mult(FGModule.free(1), 2))[0].is_zero()


def test_cokernel_of_two_on_z():
    assert cokernel(_mult(FGModule.free(1), 2))[0] == Zmod(2)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_kernel_of_p_on_p_squared(p):
    M = Zmod(p * p)
    K = kernel(_mult(M, p))[0]
    enum = [x for x in elements((p * p,)) if (p * x[0]) % (p * p) == 0]
    assert K.size() == len(enum) == p


def test_weight_mismatch_is_shape_error():
    A = FGModule((0,), (0,))
    B = FGModule((0,), (1,))
    with pytest.raises(ShapeError):
        ModuleMap(A, B, Mat([[1]]))


@pytest.mark.parametrize("seed", range(30))
def test_kernel_image_cokernel_match_enumeration(seed):
    rng = random.Random(100 + seed)
    from builders import rand_orders

    so, to = rand_orders(rng, 36), rand_orders(rng, 36)
    rows = rand_hom_rows(rng, so, to)
    f = ModuleMap(Zmod(*so), Zmod(*to), Mat(rows, len(to), len(so)))
    img = {apply(rows, x, to) for x in elements(so)}
    ker = [x for x in elements(so) if all(v == 0 for v in apply(rows, x, to))]
    assert kernel(f)[0].size() == len(ker)
    assert image(f)[0].size() == len(img)
    bound = 36
    assert module_signature(cokernel(f)[0], bound) == subquotient_signature(elements(to), img, to, bound)
    assert module_signature(kernel(f)[0], bound) == subquotient_signature(ker, {tuple(0 for _ in so)}, so, bound)


@given(st.lists(st.lists(st.integers(-5, 5), min_size=3, max_size=3), min_size=1, max_size=4))
@settings(max_examples=40, deadline=None)
def test_rank_nullity_over_integers(rows):
    A = FGModule.free(3)
    B = FGModule.free(len(rows))
    f = ModuleMap(A, B, Mat(rows))
    assert kernel(f)[0].rank() + image(f)[0].rank() == 3


# ---------------------------------------------------------------------------
# Homology


def test_homology_of_multiplication_by_two():
    C = scalar_complex(2)
    assert C.homology(0) == Zmod(2)
    assert C.homology(1).is_zero()


def test_zero_complex_has_no_homology():
    C = Complex.zero()
    assert all(C.homology(k).is_zero() for k in range(-2, 3))


@pytest.mark.parametrize("seed", range(25))
def test_free_homology_matches_sympy_and_mod_reduction(seed):
    rng = random.Random(200 + seed)
    ranks, diffs = rand_free_complex(rng, entry=2)
    C = library_free_complex(ranks, diffs)
    for k in range(0, 3):
        rk, tors = free_homology(ranks, diffs, k)
        assert same_factors(C.homology(k).invariant_factors(), [0] * rk + tors)
    m = rng.choice([2, 4, 6])
    mod = {k: (m,) * n for k, n in ranks.items()}
    for k in range(0, 3):
        hk = _split(C.homology(k))
        hk1 = _split(C.homology(k - 1))
        pred = mod_reduction_prediction(hk, hk1, m)
        assert finite_homology_signature(mod, diffs, k, m) == factors_signature(pred, m)


def _split(M):
    inv = M.invariant_factors()
    return sum(1 for d in inv if d == 0), [d for d in inv if d]


@pytest.mark.parametrize("seed", range(25))
def test_finite_homology_matches_enumeration(seed):
    rng = random.Random(300 + seed)
    orders, diffs = rand_finite_complex(rng)
    C = library_complex(orders, diffs)
    for k in (-1, 0, 1, 2, 3):
        assert module_signature(C.homology(k), 64) == finite_homology_signature(orders, diffs, k, 64)


def test_d_squared_nonzero_is_rejected():
    Z = FGModule.free(1)
    one = ModuleMap(Z, Z, Mat([[1]]))
    with pytest.raises(Exception):
        Complex({0: Z, 1: Z, 2: Z}, {1: one, 2: one})


# ---------------------------------------------------------------------------
# Cones


def test_cone_of_non_zero_divisor():
    Z = Complex.concentrated(FGModule.free(1), 0)
    C = cone(ChainMap.scalar(Z, 5)).complex
    assert C.homology(0) == Zmod(5) and C.homology(1).is_zero()


def test_cone_of_zero_divisor_sees_annihilator():
    X = Complex.concentrated(Zmod(6), 0)
    C = cone(ChainMap.scalar(X, 2)).complex
    assert C.homology(0) == Zmod(2)
    assert C.homology(1) == Zmod(2)


def test_cone_of_two_on_z4():
    X = Complex.concentrated(Zmod(4), 0)
    C = cone(ChainMap.scalar(X, 2)).complex
    assert C.homology(0) == Zmod(2) and C.homology(1) == Zmod(2)


def test_cone_of_zero_map_splits():
    X = Complex.concentrated(Zmod(3), 0)
    C = cone(ChainMap.zero(X, X)).complex
    assert C.homology(0) == Zmod(3) and C.homology(1) == Zmod(3)


@pytest.mark.parametrize("seed", range(30))
def test_cone_homology_matches_enumeration(seed):
    rng = random.Random(400 + seed)
    so, sd = rand_finite_complex(rng, degrees=(0, 1), max_size=24)
    to, td = rand_finite_complex(rng, degrees=(0, 1), max_size=24)
    maps = rand_chain_map_rows(rng, so, sd, to, td)
    if maps is None:
        maps = {k: [[0] * len(so[k]) for _ in to[k]] for k in so}
    X, Y = library_complex(so, sd), library_complex(to, td)
    g = library_chain_map(X, Y, maps)
    C = cone(g).complex
    oo, od = oracle_cone(so, sd, to, td, maps)
    for k in range(-1, 4):
        assert module_signature(C.homology(k), 64) == finite_homology_signature(oo, od, k, 64)
    assert verify_long_exact(g)


# ---------------------------------------------------------------------------
# Derived tensor


def test_tor_of_z2_with_itself():
    X = Complex.concentrated(Zmod(2), 0)
    T = derived_tensor(X, X)
    assert T.homology(0) == Zmod(2) and T.homology(1) == Zmod(2)


def test_coprime_orders_tensor_to_zero():
    T = derived_tensor(Complex.concentrated(Zmod(2), 0), Complex.concentrated(Zmod(3), 0))
    assert T.is_acyclic()


def test_tensor_with_unit_is_identity_on_homology():
    X = scalar_complex(6)
    U = Complex.concentrated(FGModule.free(1), 0)
    T = derived_tensor(X, U)
    assert all(T.homology(k) == X.homology(k) for k in range(-1, 3))


def test_tensor_over_different_grounds_is_rejected():
    X = Complex.concentrated(Zmod(2), 0)
    Y = Complex.concentrated(FGModule((3,), base=BaseRing.localized([2])), 0)
    with pytest.raises(BaseMismatchError):
        derived_tensor(X, Y)


@pytest.mark.parametrize("seed", range(30))
def test_derived_tensor_matches_kunneth(seed):
    rng = random.Random(500 + seed)
    xo, xd = rand_finite_complex(rng, degrees=(0, 1), max_size=16)
    X = library_complex(xo, xd)
    if rng.random() < 0.5:
        yo, yd = rand_finite_complex(rng, degrees=(0, 1), max_size=16)
        Y = library_complex(yo, yd)
        hy = {k: finite_factors(yo, yd, k) for k in (0, 1)}
    else:
        ranks, diffs = rand_free_complex(rng, entry=2)
        Y = library_free_complex(ranks, diffs)
        hy = {}
        for k in range(3):
            rk, tors = free_homology(ranks, diffs, k)
            hy[k] = [0] * rk + tors
    hx = {k: finite_factors(xo, xd, k) for k in (0, 1)}
    T = derived_tensor(X, Y)
    for n in range(0, 5):
        assert same_factors(T.homology(n).invariant_factors(), kunneth(hx, hy, n))


# ---------------------------------------------------------------------------
# Truncations


def _z_in_zero_and_one():
    Z = FGModule.free(1)
    return Complex({0: Z, 1: Z}, {})


def test_truncate_below_keeps_degree_zero():
    T = truncate(_z_in_zero_and_one(), 0, "below").complex
    assert T.homology(0) == FGModule.free(1) and T.homology(1).is_zero()


def test_truncate_above_keeps_degree_one():
    T = truncate(_z_in_zero_and_one(), 1, "above").complex
    assert T.homology(1) == FGModule.free(1) and T.homology(0).is_zero()


@pytest.mark.parametrize("seed", range(20))
def test_postnikov_sequence_splits_homology(seed):
    rng = random.Random(600 + seed)
    ranks, diffs = rand_free_complex(rng, entry=2)
    C = library_free_complex(ranks, diffs)
    n = rng.randint(0, 2)
    above, below = postnikov_sequence(C, n)
    inc, proj = above.map, below.map
    for k in range(-1, 4):
        top, bottom = inc.source.homology(k), proj.target.homology(k)
        if k >= n:
            assert inc.on_homology(k).is_isomorphism() and bottom.is_zero()
        else:
            assert proj.on_homology(k).is_isomorphism() and top.is_zero()
