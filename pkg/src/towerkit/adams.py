"""Adams towers, their exact couples, spectral-sequence pages and convergence verdicts.

A tower ``X_0 <- X_1 <- ...`` of complexes with ``X_{-1} = 0`` is completed by
the fibres ``F_s = fib(f_s : X_s -> X_{s-1})`` with ``l_s : F_s -> X_s`` and the
connecting maps ``d_s : H_{k+1}(X_{s-1}) -> H_k(F_s)``.  Pages use

* ``E_r^{s,s+k} = Z_r / B_r`` inside ``H_k(F_s)``,
* ``Z_r = l_s^{-1}(im(H_k X_{s+r-1} -> H_k X_s))``,
* ``B_r = d_s(ker(H_{k+1} X_{s-1} -> H_{k+1} X_{s-r}))``,
* ``d_r(z) = d_{s+r}(y)`` for any ``y`` in ``H_k X_{s+r-1}`` lifting ``l_s(z)``.
"""

from dataclasses import dataclass, field

from .complexes import ChainMap, Complex, TensorComplex, cone, fibre, free_model, minimize, tensor_chain_maps
from .errors import DepthError, NonUnitalError, StructuralError
from .linalg import Mat
from .modules import FGModule, ModuleMap, Solver, cokernel, kernel
from .moore import _map_from_cols, _rewrap, unit_complex
from .towers import (
    ProMap,
    Reindexing,
    Sub,
    Tower,
    image_chain,
    image_sub,
    intersect,
    is_mittag_leffler,
    kernel_sub,
    lim_lim1,
    ml_levels,
    preimage,
    quotient,
    zero_sub,
)


# ---------------------------------------------------------------------------
# Ring complexes


@dataclass
class RingComplex:
    """A complex ``E`` with a unit ``S -> E`` and optionally a multiplication ``E (x) E -> E``."""

    complex: Complex
    unit: ChainMap
    mult: ChainMap = None

    def __post_init__(self):
        S = self.unit.source
        if S.modules.keys() != {0} or S.module(0).n != 1:
            raise NonUnitalError("the unit must start at the unit complex")
        if self.unit.commutation_failures():
            raise NonUnitalError("the unit is not a chain map")
        if self.mult is not None:
            problems = self.unitality_failures()
            if problems:
                raise NonUnitalError(f"multiplication is not unital in degree {problems[0]}")

    def unitality_failures(self):
        E = self.complex
        S = self.unit.source
        left = tensor_chain_maps(self.unit, ChainMap.identity(E), TensorComplex(S, E), self.mult.source)
        right = tensor_chain_maps(ChainMap.identity(E), self.unit, TensorComplex(E, S), self.mult.source)
        out = []
        for side in (left, right):
            comp = self.mult @ side
            for k in E.degrees():
                h = _rewrap(comp, source=E).on_homology(k)
                if not h == ModuleMap.identity(E.homology(k)):
                    out.append(k)
        return sorted(set(out))

    @property
    def base(self):
        return self.complex.base


def mod_ring(m, base=None):
    """``Z/m`` as the free complex ``Z -m-> Z`` with unit and multiplication."""
    from .modules import ZZ
    base = base or ZZ
    S = unit_complex(base)
    U = FGModule.free(1, base)
    E = Complex({0: U, 1: U}, {1: ModuleMap(U, U, Mat([[m]]))}, base)
    unit = ChainMap(S, E, {0: ModuleMap(U, U, Mat.identity(1))})
    EE = TensorComplex(E, E)
    comps = {}
    for n, entries in EE.layout.items():
        if n > 1:
            continue
        M = Mat.zeros(1, EE.module(n).n)
        for i, j, off, T, idx in entries:
            for _, g in idx.items():
                M.rows[0][off + g] = 1
        comps[n] = ModuleMap(EE.module(n), E.module(n), M)
    return RingComplex(E, unit, ChainMap(EE, E, comps))


def unit_ring(base=None):
    """The unit complex as a ring; its unit is an isomorphism."""
    from .modules import ZZ
    S = unit_complex(base or ZZ)
    SS = TensorComplex(S, S)
    mult = ChainMap(SS, S, {0: ModuleMap(SS.module(0), S.module(0), Mat.identity(1))})
    return RingComplex(S, ChainMap.identity(S), mult)


def module_ring(R):
    """A ring given as a module ``R`` in degree 0: the free model with the lifted unit."""
    fm = free_model(Complex.concentrated(R))
    P = fm.complex
    S = unit_complex(P.base)
    if R.n != 1:
        raise NonUnitalError("only cyclic rings are supported as modules")
    unit = ChainMap(S, P, {0: ModuleMap(S.module(0), P.module(0), Mat.identity(1))})
    return RingComplex(P, unit)


# ---------------------------------------------------------------------------
# Fibre data of a tower


class FibreTower:
    """A tower of complexes with its fibres, ``l`` maps and connecting maps on homology."""

    def __init__(self, tower):
        self.tower = tower
        self._cache = {}

    @classmethod
    def from_module_tower(cls, T, degree=0):
        """Place every level of a module tower in one homological degree."""
        objs = {}

        def lev(A):
            key = id(A)
            if key not in objs:
                objs[key] = (A, Complex.concentrated(A, degree))
            return objs[key][1]

        def mp(f, s):
            return ChainMap(lev(f.source), lev(f.target), {degree: f}, check=False)

        return cls(T.map_levels(lev, mp))

    def depth(self):
        """Highest usable level, or ``None`` for periodic towers."""
        return self.tower.depth_limit()

    def X(self, s):
        if s < 0:
            return Complex.zero(self.tower.level(0).base)
        return self.tower.level(s)

    def transition(self, s):
        if s == 0:
            X0 = self.X(0)
            return ChainMap(X0, self.X(-1), {}, check=False)
        return self.tower.transition(s)

    def fibre_data(self, s):
        key = ("F", self._fibre_key(s))
        if key not in self._cache:
            self._cache[key] = fibre(self.transition(s))
        return self._cache[key]

    def _fibre_key(self, s):
        T = self.tower
        if T.is_periodic and s > T.N:
            j = T.fold(s)
            return ("tail", j) if j == T.N - T.P + 1 else j
        return s

    def F(self, s):
        return self.fibre_data(s).complex

    def HX(self, s, k):
        return self.X(s).homology(k)

    def HF(self, s, k):
        return self.F(s).homology(k)

    def l(self, s, k):
        fd = self.fibre_data(s)
        p = fd.projection
        f = p.at(k)
        from .complexes import induced_matrix_map
        return induced_matrix_map(fd.complex.homology_data(k), self.X(s).homology_data(k), f.matrix, f.den)

    def d(self, s, k):
        """``H_{k+1}(X_{s-1}) -> H_k(F_s)``."""
        if s == 0:
            return ModuleMap.zero(FGModule.zero(self.X(0).base), self.HF(0, k))
        m = self.fibre_data(s).connecting(k)
        return ModuleMap(self.HX(s - 1, k + 1), self.HF(s, k), m.matrix, m.den, check=False)

    def composite(self, s, t, k):
        """``H_k X_s -> H_k X_t`` for ``s >= t``; into zero when ``t < 0``."""
        if t < 0:
            return ModuleMap.zero(self.HX(s, k), FGModule.zero(self.X(0).base))
        Hk = self.tower.homology(k)
        f = Hk.composite(s, t)
        return ModuleMap(self.HX(s, k), self.HX(t, k), f.matrix, f.den, check=False)

    def degrees(self):
        degs = set()
        for s in self.tower.inspected_levels():
            degs |= set(self.X(s).degrees())
            degs |= set(self.F(s).degrees())
        return sorted(degs)


# ---------------------------------------------------------------------------
# Pages


@dataclass
class Cell:
    module: FGModule
    Z: Sub
    B: Sub
    proj: ModuleMap
    sec: Mat


@dataclass
class SpectralSequencePage:
    r: int
    cells: dict
    differentials: dict
    moving: set = field(default_factory=set)

    def module(self, s, t):
        c = self.cells.get((s, t))
        return c.module if c else None

    def is_zero(self):
        return all(c.module.is_zero() for c in self.cells.values())


def _depth_check(ft, need):
    top = ft.depth()
    if top is not None and need > top:
        raise DepthError(f"the window needs tower level {need} but the tower stops at {top}", required=need)


def cell(ft, s, k, r):
    """``E_r^{s,s+k}`` as a subquotient of ``H_k(F_s)``."""
    key = ("cell", s, k, r)
    if key in ft._cache:
        return ft._cache[key]
    _depth_check(ft, s + r - 1)
    l = ft.l(s, k)
    D = image_sub(ft.composite(s + r - 1, s, k))
    Z = preimage(l, D)
    dmap = ft.d(s, k)
    if s == 0:
        B = zero_sub(ft.HF(s, k))
    else:
        K = kernel_sub(ft.composite(s - 1, s - r, k + 1))
        B = image_sub(dmap @ K.inc)
    E, proj, sec = quotient(Z, B)
    out = Cell(E, Z, B, proj, sec)
    ft._cache[key] = out
    return out


def infinity_cell(ft, s, k):
    """``E_infinity^{s,s+k}`` from the stable image, or ``None`` when it is not evaluable."""
    key = ("cellinf", s, k)
    if key in ft._cache:
        return ft._cache[key]
    S = stable_image(ft, s, k)
    if S is None:
        ft._cache[key] = None
        return None
    Z = preimage(ft.l(s, k), S)
    B = image_sub(ft.d(s, k)) if s else zero_sub(ft.HF(s, k))
    E, proj, sec = quotient(Z, B)
    out = Cell(E, Z, B, proj, sec)
    ft._cache[key] = out
    return out


def stable_image(ft, s, k):
    """``lim_r im(H_k X_{s+r} -> H_k X_s)`` as a submodule, or ``None``."""
    key = ("stable", s, k)
    if key not in ft._cache:
        T = ft.tower.homology(k)
        if T.is_periodic:
            ch = image_chain(T, s)
            val = ch.value if ch.stable else None
        else:
            top = T.depth_limit()
            if s > top:
                val = None
            else:
                ch = image_chain(T, s)
                val = ch.value if ch.stable else None
        if val is not None:
            val = Sub(ModuleMap(val.module, ft.HX(s, k), val.inc.matrix, val.inc.den, check=False))
        ft._cache[key] = val
    return ft._cache[key]


def differential(ft, s, k, r):
    """``d_r : E_r^{s,s+k} -> E_r^{s+r,s+r+k-1}``."""
    key = ("diff", s, k, r)
    if key in ft._cache:
        return ft._cache[key]
    src = cell(ft, s, k, r)
    tgt = cell(ft, s + r, k - 1, r)
    l = ft.l(s, k)
    lift = Solver(ft.composite(s + r - 1, s, k))
    dnext = ft.d(s + r, k - 1)
    zsol = Solver(tgt.Z.inc)
    cols = []
    for j in range(src.Z.module.n):
        v, den = l.apply(src.Z.inc.matrix.col(j))
        res = lift.solve(v)
        if res is None:
            raise StructuralError(f"cycle at ({s},{k}) on page {r} does not lift")
        y, d1 = res
        w, d2 = dnext.apply(y)
        res2 = zsol.solve(w)
        if res2 is None:
            raise StructuralError(f"differential at ({s},{k}) on page {r} leaves the cycles")
        z, d3 = res2
        e, d4 = tgt.proj.apply(z)
        cols.append((e, den * d1 * d2 * d3 * d4 * src.Z.inc.den))
    onZ = _map_from_cols(src.Z.module, tgt.module, cols)
    sol_b = Solver(src.Z.inc)
    for j in range(src.B.module.n):
        res = sol_b.solve(src.B.inc.matrix.col(j))
        if res is None or not tgt.module.is_zero_vector(onZ.apply(res[0])[0]):
            raise StructuralError(f"differential at ({s},{k}) on page {r} does not vanish on boundaries")
    dm = ModuleMap(src.module, tgt.module, onZ.matrix @ src.sec, onZ.den, check=False)
    ft._cache[key] = dm
    return dm


def pages(T, r_max=None, s_max=8, k_range=None, check_turnover=True):
    """Pages ``E_1 .. E_{r_max}`` on ``0 <= s <= s_max`` and ``k`` in ``k_range``.

    ``T`` is a ``FibreTower``, an ``AdamsTower`` or a tower of complexes.
    """
    ft = as_fibre_tower(T)
    if r_max is None:
        r_max = s_max + 2
    if k_range is None:
        k_range = ft.degrees()
    k_range = list(k_range)
    _depth_check(ft, s_max + 2 * r_max - 1)
    out = []
    for r in range(1, r_max + 1):
        cells, diffs = {}, {}
        for s in range(s_max + 1):
            for k in k_range:
                cells[(s, s + k)] = cell(ft, s, k, r)
                diffs[(s, s + k)] = differential(ft, s, k, r)
        out.append(SpectralSequencePage(r, cells, diffs))
    if check_turnover:
        bad = turnover_failures(ft, out, s_max, k_range)
        if bad:
            raise StructuralError(f"page turnover fails at {bad[0]}")
    for a, b in zip(out, out[1:]):
        for key in a.cells:
            if not a.cells[key].module.isomorphic(b.cells[key].module):
                a.moving.add(key)
    last = out[-1]
    for key in last.cells:
        s, t = key
        k = t - s
        inf = infinity_cell(ft, s, k)
        if inf is None or not inf.module.isomorphic(last.cells[key].module):
            last.moving.add(key)
    return out


def turnover_failures(ft, page_list, s_max, k_range):
    """Cells where ``E_{r+1}`` is not ``ker d_r / im d_r``."""
    bad = []
    for page, nxt in zip(page_list, page_list[1:]):
        r = page.r
        for s in range(s_max + 1):
            for k in k_range:
                out_d = differential(ft, s, k, r)
                K, inc = kernel(out_d)
                if s - r >= 0:
                    in_d = differential(ft, s - r, k + 1, r)
                    sol = Solver(inc)
                    cols = [sol.solve(in_d.matrix.col(j)) for j in range(in_d.source.n)]
                    if any(c is None for c in cols):
                        bad.append((r, s, s + k))
                        continue
                    cols = [(v, d * in_d.den) for v, d in cols]
                    H = cokernel(_map_from_cols(in_d.source, K, cols))[0]
                else:
                    H = K
                if not H.isomorphic(nxt.cells[(s, s + k)].module):
                    bad.append((r, s, s + k))
    return bad


def as_fibre_tower(T):
    if isinstance(T, FibreTower):
        return T
    if isinstance(T, AdamsTower):
        return T.fibre_tower
    if isinstance(T, Tower):
        if T.is_module_tower:
            return FibreTower.from_module_tower(T)
        return FibreTower(T)
    raise TypeError(f"cannot build fibre data from {type(T).__name__}")


# ---------------------------------------------------------------------------
# Convergence


@dataclass
class DegreeReport:
    k: int
    ml_per_s: dict
    lim: object
    lim1_of_tower: str
    lim1_of_tower_above: str
    lim1_of_pages: dict
    e_inf: dict
    E_inf: dict
    Q: dict
    outgoing_differentials: dict
    conditions: tuple
    agree: bool
    verdicts: dict
    notes: list = field(default_factory=list)


@dataclass
class ConvergenceReport:
    degrees: dict
    exact: bool

    @property
    def all_agree(self):
        return all(d.agree for d in self.degrees.values())


def _bool3(x):
    return None if x is None else bool(x)


def _and3(*vals):
    if any(v is False for v in vals):
        return False
    if any(v is None for v in vals):
        return None
    return True


def convergence_report(T, k_range=None, s_max=None, window=None):
    """All convergence verdicts per degree, with the three-way equivalence checked."""
    ft = as_fibre_tower(T)
    tower = ft.tower
    if k_range is None:
        k_range = ft.degrees()
    if s_max is None:
        s_max = tower.N + tower.P if tower.is_periodic else max(0, tower.depth_limit() - (window or 2))
    out = {}
    for k in k_range:
        out[k] = _degree_report(ft, k, s_max, window)
    return ConvergenceReport(out, tower.is_periodic)


def _degree_report(ft, k, s_max, window):
    tower = ft.tower
    Hk = tower.homology(k)
    lim = lim_lim1(Hk, window)
    above = lim_lim1(tower.homology(k + 1), window)
    if tower.is_periodic:
        levels = range(max(s_max, tower.N + tower.P) + 1)
    else:
        levels = range(min(s_max, max(ml_levels(Hk, window))) + 1)
    notes = []
    ml_per_s, lim1_pages, e_inf, E_inf, Q, outgoing = {}, {}, {}, {}, {}, {}
    chain_stable = {}
    for s in levels:
        ch = image_chain(Hk, s, window)
        chain_stable[s] = ch.stable
        ml_per_s[s] = ch.stable
    for s in levels:
        lim1_pages[s] = _page_chain_verdict(chain_stable, s)
    ml = is_mittag_leffler(Hk, window)
    for s in levels:
        S = stable_image(ft, s, k)
        Einf = infinity_cell(ft, s, k)
        E_inf[s] = Einf.module if Einf is not None else None
        if ml and S is not None:
            Q[s] = S
            if s == 0:
                e = S
            else:
                e = intersect(S, kernel_sub(ModuleMap(ft.HX(s, k), ft.HX(s - 1, k),
                                                      Hk.transition(s).matrix, Hk.transition(s).den,
                                                      check=False)))
            e_inf[s] = e
        else:
            Q[s] = None
            e_inf[s] = None
        outgoing[s] = _outgoing_count(ft, s, k, window)

    # condition 1: strong convergence to lim and vanishing lim^1, through the filtration of the limit
    if ml is None:
        c1 = None
    elif not ml:
        c1 = False
    else:
        c1 = True
        for s in levels:
            if Q[s] is None or E_inf[s] is None:
                c1 = None
                continue
            gr = _graded_piece(ft, Q, s, k, Hk)
            if not gr.isomorphic(E_inf[s]):
                c1 = False
    # condition 2: e_inf = E_inf as submodules of H_k X_s, and lim^1 = 0
    lim1_zero = {"zero": True, "nonzero": False, "undetermined": None}[lim.lim1]
    eq = True
    for s in levels:
        if e_inf[s] is None or E_inf[s] is None:
            eq = None if eq is not False else False
            continue
        Einf = infinity_cell(ft, s, k)
        img = image_sub(ft.l(s, k) @ Einf.Z.inc)
        if not (img == e_inf[s]):
            eq = False
    c2 = _and3(eq, lim1_zero) if lim1_zero is not False else False
    # condition 3: every page tower {E_r^{s,s+k}}_r has vanishing lim^1
    c3 = _and3(*[{"zero": True, "nonzero": False, "undetermined": None}[v] for v in lim1_pages.values()])
    conds = (c1, c2, c3)
    known = [c for c in conds if c is not None]
    agree = len(set(known)) <= 1
    if not agree:
        raise AssertionError(f"convergence conditions disagree in degree {k}: {conds}")
    strong = c1 if c1 is not None else (c3 if c3 is not None else c2)
    ml_ss = c3
    if ml_ss is not None and ml is not None and ml_ss != ml:
        raise AssertionError(f"page-wise and tower-wise Mittag-Leffler verdicts differ in degree {k}")
    complete_eq = eq if eq is not None else None
    above_zero = {"zero": True, "nonzero": False, "undetermined": None}[above.lim1]
    completely = _and3(complete_eq, above_zero)
    strongly_ml = None
    if ml_ss is False:
        strongly_ml = False
    elif ml_ss:
        strongly_ml = _eventually_zero(ft, k, levels, E_inf)
    conditional_only = any(c is None for c in conds)
    if conditional_only:
        notes.append("some verdicts depend on levels beyond the horizon")
    verdicts = {
        "strong-to-lim": strong,
        "completely-convergent": completely,
        "mittag-leffler": ml_ss if ml_ss is not None else ml,
        "strongly-mittag-leffler": strongly_ml,
        "conditional-only": conditional_only,
    }
    return DegreeReport(k, ml_per_s, lim.lim, lim.lim1, above.lim1, lim1_pages, e_inf, E_inf,
                        {s: (q.module if q is not None else None) for s, q in Q.items()}, outgoing,
                        conds, agree, verdicts, notes)


def _page_chain_verdict(chain_stable, s):
    """``lim^1_r E_r^{s,s+k}``: the page chain stabilizes exactly when the image chain at ``s`` does,
    given that every lower image chain stabilizes (extension of stable chains is stable)."""
    st = chain_stable.get(s)
    if st is True:
        return "zero"
    if st is None:
        return "undetermined"
    below = [chain_stable.get(j) for j in range(s)]
    if all(b is True for b in below):
        return "nonzero"
    return "undetermined"


def _graded_piece(ft, Q, s, k, Hk):
    """``F^s lim / F^(s+1) lim`` realized as ``ker(Q_s -> Q_(s-1))``."""
    if s == 0:
        return Q[0].module
    t = Hk.transition(s)
    restricted = ModuleMap(Q[s].module, ft.HX(s - 1, k), (t.matrix @ Q[s].inc.matrix), t.den * Q[s].inc.den,
                           check=False)
    return kernel(restricted)[0]


def _outgoing_count(ft, s, k, window):
    """Nonzero outgoing differentials from ``E_r^{s,s+k}`` for the pages that fit the tower."""
    T = ft.tower
    bound = T.N + 2 * T.P + 2 if T.is_periodic else ft.depth()
    count = 0
    for r in range(1, bound + 1):
        try:
            if not differential(ft, s, k, r).is_zero():
                count += 1
        except DepthError:
            break
    return count


def _eventually_zero(ft, k, levels, E_inf):
    T = ft.tower
    if T.is_periodic:
        tail = [s for s in levels if s > T.N]
        vals = [E_inf.get(s) for s in tail]
        if any(v is None for v in vals):
            return None
        return all(v.is_zero() for v in vals)
    vals = [E_inf.get(s) for s in list(levels)[-2:]]
    if any(v is None for v in vals):
        return None
    return all(v.is_zero() for v in vals)


# ---------------------------------------------------------------------------
# Boardman sequence


@dataclass
class BoardmanResult:
    verdict: object
    terms: tuple = None
    reason: str = ""


def boardman_check(T, k=0):
    """``0 -> lim^1_s lim_r X_s^(r) -> lim^1_s X_s -> lim_s lim^1_r X_s^(r) -> 0`` for finite towers."""
    ft = as_fibre_tower(T)
    tower = ft.tower
    if not tower.is_periodic:
        return BoardmanResult(None, reason="only eventually periodic towers are evaluated exactly")
    Hk = tower.homology(k)
    for s in range(tower.N + 1):
        if not Hk.level(s).is_finite():
            return BoardmanResult(None, reason=f"level {s} is not finite")
    # middle term
    middle = lim_lim1(Hk).lim1
    # left term: the tower of stable images with restricted transitions
    stable = {}
    for s in range(tower.N + tower.P + 1):
        stable[s] = image_chain(Hk, s).value
    levels = [stable[s].module for s in range(tower.N + 1)]
    trans = [_restrict(Hk.transition(s), stable[s], stable[s - 1]) for s in range(1, tower.N + 1)]
    wrap = _restrict(Hk.transition(tower.N + 1), stable[tower.N - tower.P + 1], stable[tower.N])
    ST = Tower(levels, trans, tower.P, wrap, check=False)
    left = lim_lim1(ST).lim1
    # right term: for each s the descending chain X_s^(r) of finite subgroups
    rights = []
    for s in range(tower.N + 1):
        ch = image_chain(Hk, s)
        rights.append("zero" if ch.stable else "nonzero")
    right = "zero" if all(r == "zero" for r in rights) else "nonzero"
    zero = {"zero": True, "nonzero": False}
    exact = zero[middle] == (zero[left] and zero[right])
    return BoardmanResult(exact, (left, middle, right))


def _restrict(f, a, b):
    """``f`` restricted to submodules ``a -> b``."""
    sol = Solver(b.inc)
    cols = []
    for j in range(a.module.n):
        v, den = f.apply(a.inc.matrix.col(j))
        res = sol.solve(v)
        if res is None:
            raise StructuralError("map does not respect the stable images")
        cols.append((res[0], res[1] * den * a.inc.den))
    return _map_from_cols(a.module, b.module, cols)


# ---------------------------------------------------------------------------
# Standard Adams tower


@dataclass
class AdamsTower:
    ring: RingComplex
    X: Complex
    N: int
    fibre_tower: FibreTower
    powers: list
    power_maps: list
    to_unit: list
    under: Tower
    over: Tower
    exact: bool
    unit_maps: object = None

    @property
    def tower(self):
        return self.under

    def E_bar_under(self, n):
        return self.under.level(n)

    def W(self, n):
        return self.fibre_tower.F(n)


def standard_adams_tower(E, X, N=8):
    """``X (x) E_n`` with ``E_n = cone(Ebar^(n+1) -> S)`` and ``Ebar = fib(S -> E)``.

    ``E`` is a ``RingComplex`` over a torsion-free base; its complex must be free.
    """
    if not isinstance(E, RingComplex):
        raise NonUnitalError("the ring needs a unit map")
    if not E.complex.is_free():
        raise NonUnitalError("the ring complex must be free; use module_ring for modules")
    S = E.unit.source
    fd = fibre(E.unit)
    mb = minimize(fd.complex)
    Eb = mb.complex
    iota = fd.projection @ mb.inclusion
    iota = _rewrap(iota, Eb, S)
    powers = [S]
    to_unit = [ChainMap.identity(S)]
    step = []
    for n in range(1, N + 2):
        prev = powers[-1]
        P = TensorComplex(prev, Eb)
        mp = minimize(P)
        # prev (x) Ebar -> prev (x) S = prev
        one = tensor_chain_maps(ChainMap.identity(prev), iota, P, TensorComplex(prev, S))
        one = _rewrap(one, P, prev)
        j = one @ mp.inclusion
        powers.append(mp.complex)
        step.append(j)
        to_unit.append(to_unit[-1] @ j)
    cones = [cone(to_unit[n + 1]) for n in range(N + 1)]
    levels = [c.complex for c in cones]
    trans = []
    for n in range(1, N + 1):
        trans.append(_cone_map(cones[n], cones[n - 1], step[n], S))
    under_S = Tower(levels, trans, check=False)
    stable_at = next((n for n in range(1, N + 1) if all(m.n == 0 for m in powers[n].modules.values())), None)
    exact = False
    if stable_at is not None and stable_at <= N:
        top = stable_at - 1
        under_S = Tower(levels[:top + 1], trans[:top], 1, ChainMap.identity(levels[top]), check=False)
        exact = True
    idX = ChainMap.identity(X)
    cache = {}

    def lev(C):
        key = id(C)
        if key not in cache:
            cache[key] = (C, TensorComplex(X, C))
        return cache[key][1]

    under = under_S.map_levels(lev, lambda f, s: tensor_chain_maps(idX, f, lev(f.source), lev(f.target)))
    over_levels = [TensorComplex(X, P) for P in powers[:N + 1]]
    over_trans = [tensor_chain_maps(idX, step[n - 1], over_levels[n], over_levels[n - 1])
                  for n in range(1, N + 1)]
    over = Tower(over_levels, over_trans, check=False)

    def unit_maps(n):
        """``X -> X (x) E_n`` from the inclusion of ``S`` into the cone."""
        c = cones[min(n, len(cones) - 1)]
        u = tensor_chain_maps(idX, c.inclusion, TensorComplex(X, S), lev(c.complex))
        return _rewrap(u, source=X)

    return AdamsTower(E, X, N, FibreTower(under), powers, step, to_unit, under, over, exact, unit_maps)


def _cone_map(c_src, c_tgt, a, S):
    """``cone(g) -> cone(g')`` induced by ``a`` on sources and the identity on ``S``."""
    Cs, Ct = c_src.complex, c_tgt.complex
    comps = {}
    for k in set(Cs.modules) | set(Ct.modules):
        ys = S.module(k).n
        xs = a.source.module(k - 1).n
        yt = S.module(k).n
        xt = a.target.module(k - 1).n
        if Cs.module(k).n == 0 or Ct.module(k).n == 0:
            continue
        M = Mat.zeros(yt + xt, ys + xs)
        for i in range(ys):
            M.rows[i][i] = 1
        am = a.at(k - 1).matrix
        for i in range(xt):
            for j in range(xs):
                M.rows[yt + i][ys + j] = am.rows[i][j]
        comps[k] = ModuleMap(Cs.module(k), Ct.module(k), M, check=False)
    return ChainMap(Cs, Ct, comps, check=True)


def fibre_invariants_ok(at, levels=None):
    """``H(W_n)`` agrees with ``H(X (x) Ebar^n (x) E)`` at each level."""
    levels = range(at.N + 1) if levels is None else levels
    for n in levels:
        W = at.fibre_tower.F(n)
        ref = TensorComplex(TensorComplex(at.X, at.powers[n]), at.ring.complex)
        degs = set(W.degrees()) | set(ref.degrees())
        for k in degs:
            if not W.homology(k).isomorphic(ref.homology(k)):
                return False
    return True


def unit_split_contractible(at):
    """The tower ``{Ebar^n (x) X (x) E}`` has zero transitions on homology from level 1 on."""
    E = at.ring.complex
    idE = ChainMap.identity(E)
    for n in range(1, at.N + 1):
        f = at.over.transition(n)
        src = TensorComplex(f.source, E)
        tgt = TensorComplex(f.target, E)
        g = tensor_chain_maps(f, idE, src, tgt)
        for k in src.degrees():
            if not g.on_homology(k).is_zero():
                return False
    return True


# ---------------------------------------------------------------------------
# Nilpotent completion


@dataclass
class NilpotentCompletion:
    adams: AdamsTower
    tower: Tower
    alpha: ProMap
    lims: dict

    def evaluate(self, k):
        return self.lims[k]


def nilpotent_completion(E, X, N=8):
    """``{X (x) E_n}`` as a pro-object with the completion map from the constant tower ``{X}``."""
    at = standard_adams_tower(E, X, N)
    T = at.under
    const = Tower.constant(X)
    alpha = ProMap(const, T, Reindexing.identity(), lambda n: _rewrap(at.unit_maps(T.fold(n)), target=T.level(n)),
                   check=True)
    degs = set(X.degrees(1))
    for s in T.inspected_levels():
        degs |= set(T.level(s).degrees())
    lims = {k: lim_lim1(T.homology(k)) for k in sorted(degs)}
    return NilpotentCompletion(at, T, alpha, lims)
