"""Moore complexes, adic completion towers, inversion of elements and fracture squares.

Elements act on complexes over the integer bases through their image in the
homology of the unit complex ``Z``: a degree-0 element acts by an integer, an
element of nonzero degree acts by zero.  ``C(f)`` is the cone of
``f : S^p Z -> Z``; level ``s`` of the adic tower of ``X`` is
``X (x) C(f_1^(s+1)) (x) ... (x) C(f_r^(s+1))``.
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import gcd

from .complexes import (
    ChainMap,
    Complex,
    TensorComplex,
    cone,
    fibre,
    tensor_chain_maps,
)
from .errors import CertificateError, DegreeError, StructuralError
from .linalg import Mat
from .modules import (
    ZZ,
    BaseRing,
    FGModule,
    ModuleMap,
    Solver,
    cokernel,
    direct_sum,
    is_exact,
    kernel,
    map_from_columns,
)
from .rings import RingElement
from .towers import (
    DEFAULT_LAZY_HORIZON,
    ProMap,
    Reindexing,
    Tower,
    _loop,
    is_pro_contractible,
    is_pro_isomorphism,
    is_pro_weak_equivalence,
    lim_lim1,
    tensor_tower,
)


class Element:
    """A homogeneous element with its action on integer complexes.

    ``scalar`` is the integer by which it acts on the unit complex; it is 0
    for elements of nonzero degree.
    """

    __slots__ = ("degree", "scalar", "source")

    def __init__(self, degree, scalar, source=None):
        self.degree = int(degree)
        self.scalar = int(scalar) if self.degree == 0 else 0
        self.source = source

    @classmethod
    def coerce(cls, f):
        if isinstance(f, Element):
            return f
        if isinstance(f, bool):
            raise DegreeError(f"cannot interpret {f!r} as a ring element")
        if isinstance(f, int):
            return cls(0, f)
        if isinstance(f, RingElement):
            if f.degree == 0:
                return cls(0, f.ring.as_integer(f), f)
            return cls(f.degree, 0, f)
        raise DegreeError(f"cannot interpret {f!r} as a homogeneous ring element")

    def power(self, n):
        src = self.source.power(n) if isinstance(self.source, RingElement) and self._fits(n) else None
        return Element(self.degree * n, self.scalar ** n, src)

    def _fits(self, n):
        return self.source.ring.in_window(self.degree * n)

    def primes(self):
        c = abs(self.scalar)
        out, p = [], 2
        while c > 1 and p * p <= c:
            if c % p == 0:
                out.append(p)
                while c % p == 0:
                    c //= p
            p += 1
        if c > 1:
            out.append(c)
        return out

    def __repr__(self):
        if self.degree:
            return f"Element(deg={self.degree})"
        return f"Element({self.scalar})"


def _elements(fs):
    return [Element.coerce(f) for f in fs]


def unit_complex(base=ZZ):
    return Complex.concentrated(FGModule.free(1, base), 0)


def moore_complex(f, base=ZZ):
    """``C(f)`` with its unit map ``Z -> C(f)`` and projection to the signed shift."""
    f = Element.coerce(f)
    U = FGModule.free(1, base)
    src = Complex.concentrated(U, f.degree)
    tgt = Complex.concentrated(U, 0)
    maps = {0: ModuleMap.scalar(U, f.scalar)} if f.degree == 0 else {}
    return cone(ChainMap(src, tgt, maps, check=False))


def _top(f, n):
    """Degree of the upper generator of ``C(f^n)``."""
    return f.degree * n + 1


@dataclass
class MooreData:
    complex: Complex
    unit: ChainMap
    elements: list


def _rewrap(f, source=None, target=None):
    """The same components viewed between equal-shaped complexes."""
    source = source or f.source
    target = target or f.target
    maps = {k: ModuleMap(source.module(k), target.module(k), m.matrix, m.den, check=False)
            for k, m in f.maps.items()}
    return ChainMap(source, target, maps, check=False)


def moore_smash(fs, base=ZZ):
    """``C(f_1) (x) ... (x) C(f_r)`` with the unit map from ``Z``."""
    fs = _elements(fs)
    S = unit_complex(base)
    M, unit = S, ChainMap.identity(S)
    for f in fs:
        cd = moore_complex(f, base)
        T = TensorComplex(M, cd.complex)
        u = tensor_chain_maps(unit, cd.inclusion, TensorComplex(S, S), T)
        M, unit = T, _rewrap(u, source=S)
    return MooreData(M, unit, fs)


def smash(X, fs, n=1):
    """``X (x) C(f_1^n) (x) ... (x) C(f_r^n)``, left associated."""
    Y = X
    for f in _elements(fs):
        Y = TensorComplex(Y, moore_complex(f.power(n), X.base).complex)
    return Y


def power_transition(f, n, base=ZZ):
    """``C(f^(n+1)) -> C(f^n)``: identity at the bottom and ``f`` on top."""
    f = Element.coerce(f)
    A = moore_complex(f.power(n + 1), base).complex
    B = moore_complex(f.power(n), base).complex
    U = FGModule.free(1, base)
    maps = {0: ModuleMap.identity(U)}
    if f.degree == 0:
        maps[1] = ModuleMap.scalar(U, f.scalar)
    return ChainMap(A, B, {k: ModuleMap(A.module(k), B.module(k), m.matrix, check=False)
                           for k, m in maps.items() if A.module(k).n and B.module(k).n}, check=False)


def _same_complex(A, B):
    if A.modules != B.modules:
        return False
    return all(A.d(k) == B.d(k) for k in set(A.diffs) | set(B.diffs))


@dataclass
class AdicTower:
    source: Complex
    elements: list
    tower: Tower
    exact: bool
    projections: object = None

    def level_power(self, s):
        return s + 1


def adic_tower(X, fs, N=DEFAULT_LAZY_HORIZON):
    """The diagonal tower ``s -> X (x) M(f^(s+1))``.

    When levels ``s`` and ``s + P`` coincide the tower repeats with period
    ``P`` from ``s`` on: differential entries are powers of the scalars reduced
    modulo fixed orders, and the transitions do not depend on the level.
    """
    fs = _elements(fs)
    if N < 1:
        raise ValueError("adic towers need N >= 1")
    if not fs:
        T = Tower.constant(X)
        return AdicTower(X, fs, T, True, lambda s: ChainMap.identity(X))
    base = X.base
    cache = {}

    def level(s):
        if s not in cache:
            cache[s] = smash(X, fs, s + 1)
        return cache[s]

    def transition(s):
        """``level(s) -> level(s - 1)``."""
        src, tgt = level(s), level(s - 1)
        f_map = ChainMap.identity(X)
        A, B = X, X
        for f in fs:
            q = power_transition(f, s, base)
            A2, B2 = TensorComplex(A, q.source), TensorComplex(B, q.target)
            f_map = tensor_chain_maps(f_map, q, A2, B2)
            A, B = A2, B2
        return _rewrap(f_map, src, tgt)

    def projection(s):
        """``X -> level(s)`` induced by the unit maps."""
        return _rewrap(_unit_map(X, fs, s + 1), target=level(s))

    for top in range(1, N + 1):
        for s in range(top):
            if _same_complex(level(s), level(top)):
                P = top - s
                levels = [level(j) for j in range(top)]
                trans = [transition(j) for j in range(1, top)]
                tail = _rewrap(transition(top), source=level(s))
                T = Tower(levels, trans, P, tail, check=False)
                return AdicTower(X, fs, T, True, lambda j: projection(T.fold(j)))
    T = Tower.lazy(level, transition, N)
    return AdicTower(X, fs, T, False, projection)


def _unit_map(X, fs, n):
    base = X.base
    u = ChainMap.identity(X)
    A, B = X, X
    for f in fs:
        cd = moore_complex(f.power(n), base)
        S = unit_complex(base)
        A2, B2 = TensorComplex(A, S), TensorComplex(B, cd.complex)
        u = tensor_chain_maps(u, cd.inclusion, A2, B2)
        A, B = A2, B2
    return _rewrap(u, source=X)


# ---------------------------------------------------------------------------
# Graded tensor products of maps and the cone-of-powers fibre sequences


def _tensor_graded(f_at, f_deg, g_at, g_deg, src, tgt):
    """``(f (x) g)(x (x) y) = (-1)^(|g| |x|) f(x) (x) g(y)`` between tensor complexes.

    ``f_at(i)`` maps the left factor's degree ``i`` to degree ``i + f_deg``.
    """
    comps = {}
    deg = f_deg + g_deg
    for n, entries in src.layout.items():
        if n + deg not in tgt.layout:
            continue
        tmap = {(i, j): (off, T, idx) for i, j, off, T, idx in tgt.layout[n + deg]}
        M = Mat.zeros(tgt.module(n + deg).n, src.module(n).n)
        used = False
        for i, j, off, T, idx in entries:
            key = (i + f_deg, j + g_deg)
            if key not in tmap:
                continue
            fi, gj = f_at(i), g_at(j)
            if fi is None or gj is None or fi.is_zero() or gj.is_zero():
                continue
            toff, TT, tidx = tmap[key]
            sign = -1 if (g_deg * i) % 2 else 1
            for (a, b), col in idx.items():
                for (c, d), row in tidx.items():
                    x = fi.matrix.rows[c][a] * gj.matrix.rows[d][b]
                    if x:
                        M.rows[toff + row][off + col] += sign * x
                        used = True
        if used:
            comps[n] = ModuleMap(src.module(n), tgt.module(n + deg), M, check=False)
    return comps


@dataclass
class PowerSequence:
    """``S^(np) C(f) -i-> C(f^(n+1)) -g-> C(f^n)`` with ``d h + h d = -g i``."""

    fibre: Complex
    inclusion: ChainMap
    projection: ChainMap
    homotopy: dict


def power_sequence(f, n, base=ZZ):
    f = Element.coerce(f)
    C1 = moore_complex(f, base).complex
    mods = {k + f.degree * n: m for k, m in C1.modules.items()}
    diffs = {k + f.degree * n: d for k, d in C1.diffs.items()}
    F = Complex(mods, diffs, base, check=False)
    big = moore_complex(f.power(n + 1), base).complex
    g = power_transition(f, n, base)
    bottom = f.degree * n
    inc = {}
    if bottom == 0:
        inc[0] = ModuleMap(F.module(0), big.module(0), Mat([[f.scalar ** n]]), check=False)
    top = _top(f, n + 1)
    inc[top] = ModuleMap(F.module(top), big.module(top), Mat.identity(1), check=False)
    i = ChainMap(F, big, inc, check=True)
    small = g.target
    h = {bottom: ModuleMap(F.module(bottom), small.module(bottom + 1), Mat([[-1]]), check=False)}
    return PowerSequence(F, i, g, h)


def is_fibre_sequence_up_to_homotopy(i, g, h):
    """``F -i-> X -g-> B`` with ``d h + h d = -g i``; compares ``F`` with ``fib(g)``.

    The comparison is ``x -> (h x, i x)``.
    """
    F, B = i.source, g.target
    for k in F.degrees(1):
        gi = g.at(k) @ i.at(k)
        hk = h.get(k)
        hk1 = h.get(k - 1)
        lhs = Mat.zeros(B.module(k).n, F.module(k).n)
        if hk is not None:
            lhs = lhs + (B.d(k + 1) @ hk).matrix
        if hk1 is not None:
            lhs = lhs + (hk1 @ F.d(k)).matrix
        total = ModuleMap(F.module(k), B.module(k), lhs + gi.matrix, check=False)
        if not total.is_zero():
            raise StructuralError(f"homotopy identity fails in degree {k}")
    fd = fibre(g)
    comp = {}
    for k in F.modules:
        top = B.module(k + 1).n
        upper = h[k].matrix if k in h else Mat.zeros(top, F.module(k).n)
        M = upper.vstack(i.at(k).matrix)
        comp[k] = ModuleMap(F.module(k), fd.complex.module(k), M, check=False)
    return ChainMap(F, fd.complex, comp).is_quasi_isomorphism()


def level_fibre_checks(at, levels=None):
    """For each level and each element slot, the cone-of-powers fibre sequence holds after smashing."""
    X, fs = at.source, at.elements
    if not fs:
        return {}
    base = X.base
    top = at.tower.depth_limit()
    if top is None:
        top = at.tower.N + 1
    levels = range(1, top + 1) if levels is None else levels
    out = {}
    for s in levels:
        n = s
        for slot, f in enumerate(fs):
            seq = power_sequence(f, n, base)
            before = [e.power(n) for e in fs[:slot]]
            after = [e.power(n + 1) for e in fs[slot + 1:]]
            out[(s, slot)] = _smashed_sequence_ok(X, before, seq, after, base)
    return out


def _smashed_sequence_ok(X, before, seq, after, base):
    """Smash the slot sequence with ``X (x) C(before...)`` on the left and ``C(after...)`` on the right."""
    L = X
    for e in before:
        L = TensorComplex(L, moore_complex(e, base).complex)
    idL = ChainMap.identity(L)
    F = TensorComplex(L, seq.fibre)
    Xm = TensorComplex(L, seq.inclusion.target)
    B = TensorComplex(L, seq.projection.target)
    i = tensor_chain_maps(idL, seq.inclusion, F, Xm)
    g = tensor_chain_maps(idL, seq.projection, Xm, B)
    h = _tensor_graded(lambda k: ModuleMap.identity(L.module(k)), 0,
                       lambda k: seq.homotopy.get(k), 1, F, B)
    for e in after:
        R = moore_complex(e, base).complex
        idR = ChainMap.identity(R)
        F2, X2, B2 = TensorComplex(F, R), TensorComplex(Xm, R), TensorComplex(B, R)
        i = tensor_chain_maps(i, idR, F2, X2)
        g = tensor_chain_maps(g, idR, X2, B2)
        hh = h
        h = _tensor_graded(lambda k: hh.get(k), 1, lambda k: ModuleMap.identity(R.module(k)), 0, F2, B2)
        F, Xm, B = F2, X2, B2
    return is_fibre_sequence_up_to_homotopy(i, g, h)


# ---------------------------------------------------------------------------
# Completion


@dataclass
class LocalizationCheck:
    """How ``f`` acts on the fibre tower of ``X -> X (x) C(f^n)``."""

    applicable: bool
    levelwise_iso: bool = None
    factorization: bool = None
    pro_invertible: bool = None
    smashed_contractible: object = None
    notes: list = field(default_factory=list)

    @property
    def holds(self):
        vals = [self.levelwise_iso, self.factorization, self.pro_invertible, self.smashed_contractible]
        return all(v is not False for v in vals)


@dataclass
class CompletionResult:
    adic: AdicTower
    per_degree: dict
    milnor: dict
    localization: LocalizationCheck

    @property
    def evaluable(self):
        return all(isinstance(r.lim, FGModule) for r in self.per_degree.values()) and all(
            r.lim1 == "zero" for r in self.per_degree.values())


def fibre_tower(at):
    """Levels ``fib(X -> level(s))`` with transitions induced by the tower."""
    X, T = at.source, at.tower
    cache = {}

    def data(s):
        if s not in cache:
            cache[s] = fibre(at.projections(s))
        return cache[s]

    def level(s):
        return data(s).complex

    def transition(s):
        src, tgt = level(s), level(s - 1)
        t = T.transition(s)
        comps = {}
        for k in src.modules:
            top_s, top_t = T.level(s).module(k + 1), T.level(s - 1).module(k + 1)
            xk = X.module(k)
            M = Mat.zeros(tgt.module(k).n, src.module(k).n)
            tm = t.at(k + 1).matrix
            for a in range(top_t.n):
                for b in range(top_s.n):
                    M.rows[a][b] = tm.rows[a][b]
            for a in range(xk.n):
                M.rows[top_t.n + a][top_s.n + a] = 1
            comps[k] = ModuleMap(src.module(k), tgt.module(k), M, t.at(k + 1).den, check=False)
        return ChainMap(src, tgt, comps, check=False)

    if T.is_periodic:
        levels = [level(s) for s in range(T.N + 1)]
        trans = [transition(s) for s in range(1, T.N + 1)]
        tail = _rewrap(transition(T.N + 1), source=levels[T.N - T.P + 1])
        return Tower(levels, trans, T.P, tail, check=False)
    return Tower.lazy(level, transition, T.horizon)


def _xi(X, f, n, F, XC):
    """``S^(np) X -> fib(X -> X (x) C(f^n))``, ``x -> (+-x (x) e_top, -f^n x)``."""
    shift = f.degree * n
    src = Complex({k + shift: m for k, m in X.modules.items()},
                  {k + shift: d for k, d in X.diffs.items()}, X.base, check=False)
    comps = {}
    for k, m in src.modules.items():
        M = Mat.zeros(F.module(k).n, m.n)
        # generators of (X (x) C)_{k+1} from the summand X_{k - np} (x) C_top
        pos = XC.offset(k + 1, k - shift)
        if pos is not None:
            off, T, idx = pos
            sign = -1 if k % 2 else 1
            for (a, b), g in idx.items():
                M.rows[off + g][a] = sign
        if shift == 0:
            base_row = XC.module(k + 1).n
            for a in range(m.n):
                M.rows[base_row + a][a] = -(f.scalar ** n)
        comps[k] = ModuleMap(m, F.module(k), M, check=False)
    return ChainMap(src, F, comps, check=True)


def localization_check(X, f, N):
    """Levelwise identification of the fibre tower with ``{S^(np) X}`` and the action of ``f``."""
    f = Element.coerce(f)
    out = LocalizationCheck(True)
    at = adic_tower(X, [f], N)
    levels = range(min(N, 6))
    xis = {}
    for s in levels:
        n = s + 1
        u = _unit_map(X, [f], n)
        fd = fibre(u)
        xi = _xi(X, f, n, fd.complex, u.target)
        if not xi.is_quasi_isomorphism():
            out.levelwise_iso = False
            out.notes.append(f"identification fails at level {s}")
            return out
        xis[s] = (xi, fd, u)
    if f.degree != 0:
        FT = fibre_tower(at)
        out.pro_invertible = is_pro_contractible(FT)
        out.notes.append("nonzero degree: f acts by zero and the fibre tower is pro-zero")
        out.levelwise_iso = True
        out.factorization = True
        return out
    iso, fact = True, True
    for s in list(levels)[1:]:
        xi1, fd1, u1 = xis[s]
        xi0, fd0, u0 = xis[s - 1]
        t = _fibre_transition(X, f, s, fd1.complex, fd0.complex, u1.target, u0.target)
        for k in X.degrees():
            H1 = xi1.on_homology(k)
            H0 = xi0.on_homology(k)
            sol = Solver(H1)
            cols = []
            for j in range(H1.target.n):
                e = [1 if a == j else 0 for a in range(H1.target.n)]
                res = sol.solve(e)
                if res is None:
                    iso = False
                    break
                v, den = H0.apply(res[0])
                cols.append((v, den * res[1]))
            if not iso:
                break
            s_map = _map_from_cols(H1.target, H0.target, cols)
            if not s_map.is_isomorphism():
                iso = False
            mu = ChainMap.scalar(fd0.complex, f.scalar).on_homology(k)
            if not (mu @ s_map == t.on_homology(k)):
                fact = False
    out.levelwise_iso = iso
    out.factorization = fact
    H = fibre_tower(at)
    per = []
    for k in X.degrees():
        Hk = H.homology(k)
        mu = ProMap(Hk, Hk, Reindexing.identity(),
                    lambda j, Hk=Hk: ModuleMap.scalar(Hk.level(j), f.scalar), check=False)
        per.append(bool(is_pro_isomorphism(mu)))
    out.pro_invertible = all(per)
    return out


def _fibre_transition(X, f, s, F1, F0, XC1, XC0):
    """Transition ``fib(X -> X (x) C(f^(s+1))) -> fib(X -> X (x) C(f^s))``."""
    q = power_transition(f, s, X.base)
    tq = tensor_chain_maps(ChainMap.identity(X), q, TensorComplex(X, q.source), TensorComplex(X, q.target))
    tq = _rewrap(tq, XC1, XC0)
    comps = {}
    for k in F1.modules:
        a1, a0 = XC1.module(k + 1).n, XC0.module(k + 1).n
        M = Mat.zeros(F0.module(k).n, F1.module(k).n)
        tm = tq.at(k + 1).matrix
        for r in range(a0):
            for c in range(a1):
                M.rows[r][c] = tm.rows[r][c]
        for a in range(X.module(k).n):
            M.rows[a0 + a][a1 + a] = 1
        comps[k] = ModuleMap(F1.module(k), F0.module(k), M, check=False)
    return ChainMap(F1, F0, comps, check=True)


def _map_from_cols(src, tgt, cols):
    """Assemble a map, absorbing denominators that are units modulo a finite target."""
    fixed = []
    for v, den in cols:
        if den != 1 and not tgt.base.is_unit(den):
            e = tgt.exponent()
            if not tgt.is_finite() or gcd(den, e) != 1:
                raise StructuralError(f"denominator {den} is not invertible on {tgt}")
            inv = pow(den, -1, e)
            v, den = [x * inv for x in v], 1
        fixed.append((v, den))
    return map_from_columns(src, tgt, fixed)


def derived_completion(X, fs, N=DEFAULT_LAZY_HORIZON, check_localization=True):
    """Per-degree lim and lim^1 of the adic homology towers, with the Milnor pieces."""
    fs = _elements(fs)
    at = adic_tower(X, fs, N)
    T = at.tower
    degs = set(X.degrees(1))
    for s in T.inspected_levels():
        degs |= set(T.level(s).degrees())
    per = {k: lim_lim1(T.homology(k)) for k in sorted(degs)}
    milnor = {}
    for k in sorted(degs):
        up = per.get(k + 1)
        milnor[k] = (up.lim1 if up else "zero", per[k].lim)
    if check_localization and len(fs) == 1:
        loc = localization_check(X, fs[0], N)
    elif check_localization and fs:
        loc = _multi_localization(at)
    else:
        loc = LocalizationCheck(False, notes=["no elements"])
    return CompletionResult(at, per, milnor, loc)


def _multi_localization(at):
    """``fib (x) M(f)`` is pro-contractible when several elements are completed at once."""
    FT = fibre_tower(at)
    M = moore_smash(at.elements, at.source.base).complex
    contractible = is_pro_contractible(tensor_tower(FT, M))
    return LocalizationCheck(True, smashed_contractible=contractible,
                             notes=["several elements: checked that fib (x) M(f) is pro-contractible"])


def completion_homology(X, fs, N=DEFAULT_LAZY_HORIZON):
    """``{k: (lim module, map H_k(X) -> lim)}`` for evaluable towers, else ``None``."""
    at = adic_tower(X, _elements(fs), N)
    T = at.tower
    if not T.is_periodic:
        return None
    out = {}
    degs = set(X.degrees(1))
    for s in T.inspected_levels():
        degs |= set(T.level(s).degrees())
    for k in sorted(degs):
        Hk = T.homology(k)
        res = lim_lim1(Hk)
        if not isinstance(res.lim, FGModule) or res.lim1 != "zero":
            return None
        stable = _loop(Hk).stable
        u = at.projections(T.N).on_homology(k)
        u = ModuleMap(u.source, Hk.level(T.N), u.matrix, u.den, check=False)
        sol = Solver(stable.inc)
        cols = []
        for j in range(u.source.n):
            res2 = sol.solve(u.matrix.col(j))
            if res2 is None:
                raise StructuralError("completion map does not land in the stable image")
            cols.append((res2[0], res2[1] * u.den))
        a = _map_from_cols(u.source, stable.module, cols)
        out[k] = (stable.module, a)
    return out


# ---------------------------------------------------------------------------
# Inversion


def localize_module(M, base):
    """Base change of a diagonal module; returns ``(module, kept generator indices)``."""
    keep, orders, weights = [], [], []
    for i, (d, w) in enumerate(zip(M.orders, M.weights)):
        o = base.normalize_order(d) if d else (base.modulus if base.modulus else 0)
        if o == 1:
            continue
        keep.append(i)
        orders.append(o)
        weights.append(w)
    return FGModule(orders, weights, base), keep


def change_base(X, base):
    """``X`` over a new base with the projection chain map."""
    mods, keeps = {}, {}
    for k, m in X.modules.items():
        mods[k], keeps[k] = localize_module(m, base)
    diffs = {}
    for k, d in X.diffs.items():
        if k - 1 not in mods:
            continue
        M = d.matrix.block(keeps[k - 1], keeps[k])
        if base.modulus == 1:
            continue
        diffs[k] = ModuleMap(mods[k], mods[k - 1], M, d.den, check=False)
    Y = Complex(mods, diffs, base, check=False)
    comps = {}
    for k, m in X.modules.items():
        P = Mat.identity(m.n).take_rows(keeps[k])
        comps[k] = ModuleMap(m, Y.module(k), P, check=False)
    return Y, ChainMap(X, Y, comps, check=False)


@dataclass
class InvertedComplex:
    source: Complex
    elements: list
    complex: Complex
    iota: ChainMap
    base: BaseRing

    def acts_invertibly(self):
        for f in self.elements:
            for k in self.complex.degrees():
                if not ChainMap.scalar(self.complex, f.scalar).on_homology(k).is_isomorphism():
                    return False
        return True


def inverted_base(base, fs):
    """Base with the scalars of ``fs`` made invertible; the zero ring if one of them acts by 0."""
    primes = set()
    for f in fs:
        if f.scalar == 0:
            return BaseRing(modulus=1)
        primes |= set(f.primes())
    if not primes:
        return base
    return base.with_primes(sorted(primes))


def invert(X, S):
    """``X[S^-1]``: the colimit of ``X -s-> X -s-> ...``, realized as base change."""
    fs = _elements(S)
    base = inverted_base(X.base, fs)
    Y, iota = change_base(X, base)
    return InvertedComplex(X, fs, Y, iota, base)


# ---------------------------------------------------------------------------
# Fracture squares


@dataclass
class FractureSquare:
    """Homology-level fracture square ``X -> X^ , X[1/f] -> X^[1/f]`` per degree."""

    element: Element
    evaluable: bool
    corners: dict
    maps: dict
    commutes: bool = None
    middle_exact: bool = None
    connecting_ok: bool = None
    corollary: dict = field(default_factory=dict)
    report: str = ""

    @property
    def verdict(self):
        if not self.evaluable:
            return None
        return bool(self.commutes and self.middle_exact and self.connecting_ok)


def _as_base(M, base):
    """The same diagonal module over another base, when that is meaningful."""
    if M.base == base:
        return M
    if any(d == 0 for d in M.orders) and M.base.primes != base.primes:
        return None
    if any(base.normalize_order(d) != d for d in M.orders if d):
        return None
    return FGModule(M.orders, M.weights, base)


def _rebased(f, src, tgt):
    return _map_from_cols(src, tgt, [(f.matrix.col(j), f.den) for j in range(f.source.n)])


def fracture_square(X, f, N=DEFAULT_LAZY_HORIZON):
    f = Element.coerce(f)
    comp = completion_homology(X, [f], N)
    if comp is None:
        return FractureSquare(f, False, {}, {}, report="completion tower is not eventually constant; "
                                                        "see derived_completion for the pro-level report")
    inv = invert(X, [f])
    base = X.base
    corners, maps = {}, {}
    degs = sorted(set(comp) | set(X.degrees()) | set(inv.complex.degrees()))
    for k in degs:
        HX = X.homology(k)
        A, a = comp.get(k, (FGModule.zero(base), ModuleMap.zero(HX, FGModule.zero(base))))
        B0 = inv.complex.homology(k)
        B = _as_base(B0, base)
        if B is None:
            return FractureSquare(f, False, corners, maps,
                                  report=f"degree {k}: localized homology {B0} is not finitely generated over {base}")
        b = _rebased(inv.iota.on_homology(k), HX, B)
        D0, keep = localize_module(A, inv.base)
        D = _as_base(D0, base)
        if D is None:
            return FractureSquare(f, False, corners, maps,
                                  report=f"degree {k}: localized completion {D0} is not finitely generated over {base}")
        c = ModuleMap(A, D, Mat.identity(A.n).take_rows(keep), check=False)
        sol = Solver(b)
        cols = []
        for j in range(B.n):
            e = [1 if t == j else 0 for t in range(B.n)]
            res = sol.solve(e)
            if res is None:
                raise StructuralError("localized homology is not generated by the image of H(X)")
            v, den = (c @ a).apply(res[0])
            cols.append((v, den * res[1]))
        d = _map_from_cols(B, D, cols)
        corners[k] = (A, B, D)
        maps[k] = (a, b, c, d)
    sq = FractureSquare(f, True, corners, maps)
    sq.commutes = all(c @ a == d @ b for a, b, c, d in maps.values())
    lefts, rights = {}, {}
    for k, (a, b, c, d) in maps.items():
        A, B, D = corners[k]
        HX = a.source
        S = direct_sum(A, B)
        lefts[k] = ModuleMap(HX, S, a.matrix.vstack(b.matrix), check=False)
        rights[k] = ModuleMap(S, D, c.matrix.hstack(-d.matrix), check=False)
    sq.middle_exact = all(is_exact(lefts[k], rights[k]) for k in maps)
    sq.connecting_ok = all(
        kernel(lefts[k])[0].isomorphic(cokernel(rights[k + 1])[0] if k + 1 in rights else FGModule.zero(base))
        for k in maps)
    sq.corollary = fracture_corollary(X, f, comp, inv, N)
    return sq


def fracture_corollary(X, f, comp, inv, N=DEFAULT_LAZY_HORIZON):
    """Completion is idempotent on the complete corner and kills the inverted corner."""
    base = X.base
    A = Complex({k: m for k, (m, _) in comp.items() if m.n}, {}, base, check=False)
    again = completion_homology(A, [f], N)
    idempotent = again is not None and all(
        again.get(k, (FGModule.zero(base),))[0].isomorphic(m) for k, (m, _) in comp.items())
    inv_c = completion_homology(inv.complex, [f], N)
    kills = inv_c is not None and all(m.is_zero() for m, _ in inv_c.values())
    return {"completion idempotent": idempotent, "completion of inverted is zero": kills}


# ---------------------------------------------------------------------------
# Acyclicity for different generator lists


@dataclass
class AcyclicityReport:
    acyclic_f: bool
    acyclic_g: bool
    nilpotent_g_on_f: bool
    nilpotent_f_on_g: bool

    @property
    def equivalent(self):
        return self.acyclic_f == self.acyclic_g


def _check_certificate(targets, gens, cert, label):
    """Each target ``t`` must satisfy ``t^a = sum c_i g_i``; returns the exponents ``a``."""
    if cert is None or len(cert) != len(targets):
        raise CertificateError(f"missing certificate expressing {label}")
    exps = []
    for t, entry in zip(targets, cert):
        a, coeffs = entry
        if a < 1 or len(coeffs) != len(gens):
            raise CertificateError(f"malformed certificate entry {entry!r}")
        if isinstance(t.source, RingElement) and all(isinstance(g.source, RingElement) for g in gens):
            R = t.source.ring
            lhs = t.source.power(a)
            rhs = R.zero(lhs.degree)
            for c, g in zip(coeffs, gens):
                c = R.from_poly(c) if isinstance(c, (int, str)) else c
                if c.is_zero():
                    continue
                rhs = rhs + c * g.source
            ok = lhs == rhs
        else:
            ok = t.scalar ** a == sum(int(c) * g.scalar for c, g in zip(coeffs, gens))
        if not ok:
            raise CertificateError(f"certificate entry {entry!r} does not hold")
        exps.append(a)
    return exps


def _acts_nilpotently(Y, scalar, exponent):
    for k in Y.degrees():
        h = ChainMap.scalar(Y, scalar ** exponent).on_homology(k)
        if not h.is_zero():
            return False
    return True


def acyclicity_equivalence(X, fs, gs, certificate):
    """``X (x) M(f)`` is acyclic exactly when ``X (x) M(g)`` is, given radical certificates.

    ``certificate = {"g_in_f": [(a, [c_1..c_r]), ...], "f_in_g": [...]}`` with
    ``g_j^a = sum c_i f_i`` and symmetrically.
    """
    fs, gs = _elements(fs), _elements(gs)
    certificate = certificate or {}
    ag = _check_certificate(gs, fs, certificate.get("g_in_f"), "g in terms of f")
    af = _check_certificate(fs, gs, certificate.get("f_in_g"), "f in terms of g")
    Yf, Yg = smash(X, fs), smash(X, gs)
    nil_g = all(_acts_nilpotently(Yf, g.scalar, a * (len(fs) + 1)) for g, a in zip(gs, ag))
    nil_f = all(_acts_nilpotently(Yg, f.scalar, a * (len(gs) + 1)) for f, a in zip(fs, af))
    return AcyclicityReport(Yf.is_acyclic(), Yg.is_acyclic(), nil_g, nil_f)


# ---------------------------------------------------------------------------
# Reordering tensor factors


def _tensor_generators(C, depth):
    """``{n: {((deg, gen), ...): index}}`` for a left-associated tensor of ``depth + 1`` factors."""
    if depth == 0:
        return {k: {((k, g),): g for g in range(m.n)} for k, m in C.modules.items()}
    inner = _tensor_generators(C.left, depth - 1)
    out = {}
    for n, entries in C.layout.items():
        table = {}
        for i, j, off, T, idx in entries:
            left_gens = {v: key for key, v in inner.get(i, {}).items()}
            for (a, b), g in idx.items():
                table[left_gens[a] + ((j, b),)] = off + g
        out[n] = table
    return out


def permute_factors(X, factors, perm):
    """Chain isomorphism ``X (x) F_1 (x) ... (x) F_r -> X (x) F_perm(1) (x) ...`` with Koszul signs."""
    src = X
    for F in factors:
        src = TensorComplex(src, F)
    tgt = X
    for p in perm:
        tgt = TensorComplex(tgt, factors[p])
    r = len(factors)
    gs, gt = _tensor_generators(src, r), _tensor_generators(tgt, r)
    comps = {}
    for n, table in gs.items():
        M = Mat.zeros(tgt.module(n).n, src.module(n).n)
        for key, col in table.items():
            x, rest = key[0], key[1:]
            new = (x,) + tuple(rest[p] for p in perm)
            sign = 1
            for a, b in combinations(range(r), 2):
                if perm.index(a) > perm.index(b) and (rest[a][0] * rest[b][0]) % 2:
                    sign = -sign
            M.rows[gt[n][new]][col] = sign
        comps[n] = ModuleMap(src.module(n), tgt.module(n), M, check=False)
    return ChainMap(src, tgt, comps, check=True)


def order_independence(X, fs, perm, N=6):
    """Adic towers for ``fs`` and a permutation of it are pro-weakly equivalent.

    Returns the weak-equivalence result of the levelwise reordering map.
    """
    fs = _elements(fs)
    A = adic_tower(X, fs, N).tower
    B = adic_tower(X, [fs[p] for p in perm], N).tower
    base = X.base

    def level_map(s):
        factors = [moore_complex(f.power(s + 1), base).complex for f in fs]
        return _rewrap(permute_factors(X, factors, list(perm)), A.level(s), B.level(s))

    phi = ProMap(A, B, Reindexing.identity(), level_map, check=True)
    return is_pro_weak_equivalence(phi)
