"""Bounded chain complexes of modules, chain maps and their homology.

Differentials lower degree: ``d_k : C_k -> C_{k-1}``.  Mapping cones and
fibres follow the conventions

* ``cone(g)_k = Y_k + X_{k-1}``,  ``d(y, x) = (dy + g x, -dx)``;
* ``fib(g)_k = Y_{k+1} + X_k``,   ``d(y, x) = (-dy - g x, dx)``.
"""

from dataclasses import dataclass

from .errors import BaseMismatchError, DegreeError, NotWellDefinedError, ShapeError
from .linalg import Mat, blocks, lcm
from .modules import (
    FGModule,
    ModuleMap,
    Solver,
    cokernel,
    direct_sum,
    is_exact,
    kernel,
    map_from_columns,
    tensor_maps,
    tensor_modules,
)


class Complex:
    """A bounded complex; absent degrees hold the zero module."""

    def __init__(self, modules, diffs=None, base=None, check=True):
        mods = {int(k): m for k, m in modules.items() if m.n}
        if base is None:
            base = next(iter(mods.values())).base if mods else FGModule.zero().base
        for k, m in mods.items():
            if m.base != base:
                raise BaseMismatchError(f"module in degree {k} has base {m.base}, expected {base}")
        self.base = base
        self.modules = mods
        self.diffs = {}
        for k, f in (diffs or {}).items():
            k = int(k)
            src, tgt = self.module(k), self.module(k - 1)
            if f.source.orders != src.orders or f.target.orders != tgt.orders:
                raise ShapeError(f"differential in degree {k} does not match the modules")
            if not f.is_zero():
                self.diffs[k] = ModuleMap(src, tgt, f.matrix, f.den, check=False) if (
                    f.source is not src or f.target is not tgt) else f
        self._hcache = {}
        if check:
            for k, f in self.diffs.items():
                f._check()
            bad = self.d_squared_failures()
            if bad:
                raise NotWellDefinedError(f"d o d != 0 in degree {bad[0]}")

    def d_squared_failures(self):
        return [k for k in sorted(self.diffs) if not (self.d(k - 1) @ self.d(k)).is_zero()]

    @classmethod
    def concentrated(cls, module, degree=0):
        return cls({degree: module}, base=module.base)

    @classmethod
    def zero(cls, base=None):
        return cls({}, base=base)

    @property
    def support(self):
        """Inclusive degree range carrying nonzero modules, or ``None``."""
        if not self.modules:
            return None
        return min(self.modules), max(self.modules)

    def degrees(self, pad=0):
        s = self.support
        if s is None:
            return range(0)
        return range(s[0] - pad, s[1] + pad + 1)

    def module(self, k):
        m = self.modules.get(k)
        if m is None:
            return FGModule.zero(self.base)
        return m

    def d(self, k):
        f = self.diffs.get(k)
        if f is None:
            return ModuleMap.zero(self.module(k), self.module(k - 1))
        return f

    def is_free(self):
        return all(d == 0 for m in self.modules.values() for d in m.orders)

    def homology_data(self, k):
        hd = self._hcache.get(k)
        if hd is None:
            hd = HomologyData(self, k)
            self._hcache[k] = hd
        return hd

    def homology(self, k):
        return self.homology_data(k).module

    def homology_invariants(self):
        out = {}
        for k in self.degrees():
            h = self.homology(k)
            if not h.is_zero():
                out[k] = h.invariants()
        return out

    def is_acyclic(self):
        return all(self.homology(k).is_zero() for k in self.degrees())

    def __repr__(self):
        parts = [f"{k}:{self.modules[k]}" for k in sorted(self.modules)]
        return "Complex(" + ", ".join(parts) + ")"


class HomologyData:
    """``H_k`` with cycle representatives and a classifier for cycles."""

    def __init__(self, C, k):
        self.complex = C
        self.degree = k
        Ck = C.module(k)
        K, inc = kernel(C.d(k))
        self._inc = inc
        self._solver = Solver(inc)
        d1 = C.d(k + 1)
        cols = []
        for j in range(d1.source.n):
            res = self._solver.solve(d1.matrix.col(j))
            if res is None:
                raise NotWellDefinedError(f"boundary in degree {k} is not a cycle")
            cols.append(res)
        to_K = map_from_columns(d1.source, K, cols)
        H, proj, sec = cokernel(to_K)
        self.module = H
        self._proj = proj
        self.reps = inc.matrix @ sec
        self.cycles = K
        self.cycle_inclusion = inc
        self._ck = Ck

    def rep(self, j):
        return self.reps.col(j)

    def classify(self, v):
        """Class of the cycle ``v`` as ``(coords, den)``: the class is ``coords / den``."""
        res = self._solver.solve(v)
        if res is None:
            raise ValueError("vector is not a cycle")
        z, den = res
        return self.module.reduce(self._proj.matrix.apply(z)), den

    def is_boundary(self, v):
        coords, _ = self.classify(v)
        return self.module.is_zero_vector(coords)


def homology(C, k):
    return C.homology(k)


def induced_matrix_map(src_hd, tgt_hd, matrix, den=1):
    """Map on homology induced by a chain-level matrix in one degree."""
    cols = []
    for j in range(src_hd.module.n):
        v = matrix.apply(src_hd.rep(j))
        c, d = tgt_hd.classify(v)
        cols.append((c, d * den))
    return map_from_columns(src_hd.module, tgt_hd.module, cols)


class ChainMap:
    """Degree-preserving chain map given by components ``maps[k]: X_k -> Y_k``."""

    def __init__(self, source, target, maps=None, check=True):
        self.source = source
        self.target = target
        self.maps = {}
        for k, f in (maps or {}).items():
            if f.source.orders != source.module(k).orders or f.target.orders != target.module(k).orders:
                raise ShapeError(f"chain map component in degree {k} has wrong shape")
            if not f.is_zero():
                self.maps[k] = f
        if check:
            for f in self.maps.values():
                f._check()
            bad = self.commutation_failures()
            if bad:
                raise NotWellDefinedError(f"chain map fails to commute with d in degree {bad[0]}")

    def commutation_failures(self):
        degs = set(self.source.degrees(1)) | set(self.target.degrees(1))
        out = []
        for k in sorted(degs):
            lhs = self.target.d(k) @ self.at(k)
            rhs = self.at(k - 1) @ self.source.d(k)
            if not (lhs - rhs).is_zero():
                out.append(k)
        return out

    @classmethod
    def identity(cls, C):
        return cls(C, C, {k: ModuleMap.identity(m) for k, m in C.modules.items()}, check=False)

    @classmethod
    def zero(cls, X, Y):
        return cls(X, Y, {}, check=False)

    @classmethod
    def scalar(cls, C, c):
        return cls(C, C, {k: ModuleMap.scalar(m, c) for k, m in C.modules.items()}, check=False)

    def at(self, k):
        f = self.maps.get(k)
        if f is None:
            return ModuleMap.zero(self.source.module(k), self.target.module(k))
        return f

    def __matmul__(self, other):
        degs = set(other.source.modules) & set(self.target.modules)
        return ChainMap(other.source, self.target, {k: self.at(k) @ other.at(k) for k in degs}, check=False)

    def __add__(self, other):
        degs = set(self.maps) | set(other.maps)
        return ChainMap(self.source, self.target, {k: self.at(k) + other.at(k) for k in degs}, check=False)

    def __sub__(self, other):
        degs = set(self.maps) | set(other.maps)
        return ChainMap(self.source, self.target, {k: self.at(k) - other.at(k) for k in degs}, check=False)

    def __neg__(self):
        return ChainMap(self.source, self.target, {k: -f for k, f in self.maps.items()}, check=False)

    def on_homology(self, k):
        f = self.at(k)
        return induced_matrix_map(
            self.source.homology_data(k), self.target.homology_data(k), f.matrix, f.den
        )

    def is_quasi_isomorphism(self):
        degs = set(self.source.degrees()) | set(self.target.degrees())
        return all(self.on_homology(k).is_isomorphism() for k in degs)


def _grid_map(src_parts, tgt_parts, grid):
    """ModuleMap between concatenated sums from a grid of blocks (``None`` = 0)."""
    S = direct_sum(*src_parts) if src_parts else None
    T = direct_sum(*tgt_parts) if tgt_parts else None
    den = 1
    for row in grid:
        for f in row:
            if f is not None:
                den = lcm(den, f.den)
    mats = [[None if f is None else f.matrix.scale(den // f.den) for f in row] for row in grid]
    M = blocks(mats, [t.n for t in tgt_parts], [s.n for s in src_parts])
    return S, T, M, den


def shift(C, s=1, signed=False):
    """``(S^s C)_k = C_{k-s}``; with ``signed`` the differential gets ``(-1)^s``."""
    sign = -1 if (signed and s % 2) else 1
    mods = {k + s: m for k, m in C.modules.items()}
    diffs = {k + s: (f if sign == 1 else -f) for k, f in C.diffs.items()}
    return Complex(mods, diffs, C.base, check=False)


@dataclass
class ConeData:
    complex: Complex
    inclusion: ChainMap
    projection: ChainMap


def _check_same_base(*cs):
    bases = {c.base for c in cs if c.modules}
    if len(bases) > 1:
        raise BaseMismatchError("complexes live over different bases")


def cone(g):
    """Mapping cone of ``g: X -> Y`` with ``Y -> cone`` and ``cone -> S X`` (signed)."""
    X, Y = g.source, g.target
    _check_same_base(X, Y)
    base = Y.base if Y.modules else X.base
    lo = min([k for k in list(Y.modules) + [k + 1 for k in X.modules]], default=0)
    hi = max([k for k in list(Y.modules) + [k + 1 for k in X.modules]], default=-1)
    mods, diffs = {}, {}
    parts = {}
    for k in range(lo, hi + 2):
        parts[k] = (Y.module(k), X.module(k - 1))
        mods[k] = direct_sum(*parts[k]) if (parts[k][0].n or parts[k][1].n) else FGModule.zero(base)
        mods[k] = FGModule(mods[k].orders, mods[k].weights, base)
    for k in range(lo + 1, hi + 1):
        grid = [[Y.d(k), g.at(k - 1)], [None, -X.d(k - 1)]]
        _, _, M, den = _grid_map(list(parts[k]), list(parts[k - 1]), grid)
        diffs[k] = ModuleMap(mods[k], mods[k - 1], M, den, check=False)
    C = Complex(mods, diffs, base, check=False)
    inc, proj = {}, {}
    SX = shift(X, 1, signed=True)
    for k in range(lo, hi + 1):
        y, x = parts[k]
        if y.n:
            M = blocks([[Mat.identity(y.n)], [None]], [y.n, x.n], [y.n])
            inc[k] = ModuleMap(y, C.module(k), M, check=False)
        if x.n:
            M = blocks([[None, Mat.identity(x.n)]], [x.n], [y.n, x.n])
            proj[k] = ModuleMap(C.module(k), SX.module(k), M, check=False)
    return ConeData(C, ChainMap(Y, C, inc, check=False), ChainMap(C, SX, proj, check=False))


@dataclass
class FibreData:
    complex: Complex
    projection: ChainMap
    connecting: "object"


def fibre(g):
    """Homotopy fibre of ``g: X -> Y`` with its projection to ``X``.

    ``connecting(k)`` gives the boundary ``H_{k+1}(Y) -> H_k(fib)`` on homology.
    """
    X, Y = g.source, g.target
    _check_same_base(X, Y)
    base = X.base if X.modules else Y.base
    degs = list(X.modules) + [k - 1 for k in Y.modules]
    lo, hi = (min(degs), max(degs)) if degs else (0, -1)
    mods, diffs, parts = {}, {}, {}
    for k in range(lo - 1, hi + 2):
        parts[k] = (Y.module(k + 1), X.module(k))
        m = direct_sum(*parts[k]) if (parts[k][0].n or parts[k][1].n) else FGModule.zero(base)
        mods[k] = FGModule(m.orders, m.weights, base)
    for k in range(lo, hi + 1):
        grid = [[-Y.d(k + 1), -g.at(k)], [None, X.d(k)]]
        _, _, M, den = _grid_map(list(parts[k]), list(parts[k - 1]), grid)
        diffs[k] = ModuleMap(mods[k], mods[k - 1], M, den, check=False)
    F = Complex(mods, diffs, base, check=False)
    proj = {}
    for k in range(lo, hi + 1):
        y, x = parts[k]
        if x.n:
            M = blocks([[None, Mat.identity(x.n)]], [x.n], [y.n, x.n])
            proj[k] = ModuleMap(F.module(k), x, M, check=False)

    def connecting(k):
        """``H_{k+1}(Y) -> H_k(fib)``, ``[y] -> [(y, 0)]``."""
        y, x = parts.get(k, (Y.module(k + 1), X.module(k)))
        M = blocks([[Mat.identity(y.n)], [None]], [y.n, x.n], [y.n])
        return induced_matrix_map(Y.homology_data(k + 1), F.homology_data(k), M)

    return FibreData(F, ChainMap(F, X, proj, check=False), connecting)


def les_maps(g, k_range=None):
    """Consecutive maps of the long exact sequence of ``X -> Y -> cone(g)``."""
    cd = cone(g)
    C = cd.complex
    if k_range is None:
        degs = set(g.source.degrees(1)) | set(g.target.degrees(1)) | set(C.degrees(1))
        k_range = range(max(degs, default=0), min(degs, default=0) - 1, -1)
    seq = []
    for k in k_range:
        seq.append(g.on_homology(k))
        seq.append(cd.inclusion.on_homology(k))
        pk = cd.projection.at(k)
        seq.append(induced_matrix_map(C.homology_data(k), g.source.homology_data(k - 1), pk.matrix))
    return seq


def verify_long_exact(g, k_range=None):
    seq = les_maps(g, k_range)
    return all(is_exact(a, b) for a, b in zip(seq, seq[1:]))


@dataclass
class FreeModel:
    complex: Complex
    augmentation: ChainMap


def free_model(C):
    """Free complex over the torsion-free ground with a quasi-isomorphism to ``C``.

    ``P_k = F_k + G_{k-1}`` where ``F_k`` is free on the generators of ``C_k``
    and ``G_k`` on its torsion generators.
    """
    ground = C.base.ground()
    for f in C.diffs.values():
        if f.den != 1:
            raise NotWellDefinedError("free models need integral differentials")
    tors = {k: m.torsion_indices() for k, m in C.modules.items()}
    degs = sorted(set(C.modules) | {k + 1 for k in C.modules})
    F = {k: FGModule((0,) * C.module(k).n, C.module(k).weights, ground) for k in degs}
    G = {}
    for k in degs:
        idx = tors.get(k, [])
        G[k] = FGModule((0,) * len(idx), tuple(C.module(k).weights[i] for i in idx), ground)

    def Fk(k):
        return F.get(k) or FGModule.zero(ground)

    def Gk(k):
        return G.get(k) or FGModule.zero(ground)

    def R(k):
        m = C.module(k)
        idx = tors.get(k, [])
        M = Mat.zeros(m.n, len(idx))
        for a, i in enumerate(idx):
            M.rows[i][a] = m.orders[i]
        return M

    def divide_rows(prod, k):
        m = C.module(k)
        idx = tors.get(k, [])
        for i in range(m.n):
            if m.orders[i] == 0 and any(prod.rows[i]):
                raise NotWellDefinedError("lifted differential squares to a nonzero free part")
        rows = []
        for i in idx:
            d = m.orders[i]
            if any(x % d for x in prod.rows[i]):
                raise NotWellDefinedError("lifted differential is not divisible by the relations")
            rows.append([x // d for x in prod.rows[i]])
        return Mat._raw(rows, len(idx), prod.n)

    def dmat(k):
        return C.d(k).matrix

    lo, hi = (min(degs), max(degs)) if degs else (0, -1)
    mods = {k: direct_sum(Fk(k), Gk(k - 1)) for k in range(lo, hi + 1)}
    mods = {k: FGModule(m.orders, m.weights, ground) for k, m in mods.items()}
    diffs = {}
    for k in range(lo + 1, hi + 1):
        nf, ng = Fk(k).n, Gk(k - 1).n
        nf1, ng1 = Fk(k - 1).n, Gk(k - 2).n
        d_k = dmat(k) if (nf and nf1) else Mat.zeros(nf1, nf)
        g_k = divide_rows(dmat(k - 1) @ d_k, k - 2) if ng1 else Mat.zeros(0, nf)
        r = R(k - 1) if nf1 else Mat.zeros(nf1, ng)
        h = divide_rows(dmat(k - 1) @ R(k - 1), k - 2) if (ng1 and ng) else Mat.zeros(ng1, ng)
        M = blocks([[d_k, r], [-g_k, -h]], [nf1, ng1], [nf, ng])
        diffs[k] = ModuleMap(mods[k], mods[k - 1], M, check=False)
    P = Complex(mods, diffs, ground, check=False)
    aug = {}
    for k in range(lo, hi + 1):
        n = C.module(k).n
        if n:
            M = blocks([[Mat.identity(n), None]], [n], [n, Gk(k - 1).n])
            aug[k] = ModuleMap(P.module(k), C.module(k), M, check=False)
    return FreeModel(P, ChainMap(P, C, aug, check=False))


class TensorComplex(Complex):
    """Total complex of ``X (x) Y`` remembering its bigraded layout."""

    def __init__(self, X, Y):
        base = X.base.join(Y.base)
        layout = {}
        mods = {}
        for n in sorted({i + j for i in X.modules for j in Y.modules}):
            entries, parts, off = [], [], 0
            for i in sorted(X.modules):
                j = n - i
                if j not in Y.modules:
                    continue
                T, idx = tensor_modules(X.module(i), Y.module(j))
                if T.n == 0:
                    continue
                entries.append((i, j, off, T, idx))
                parts.append(T)
                off += T.n
            if parts:
                m = direct_sum(*parts)
                mods[n] = FGModule(m.orders, m.weights, base)
                layout[n] = entries
        self.layout = layout
        self.left, self.right = X, Y
        diffs = {}
        for n, entries in layout.items():
            if n - 1 not in layout:
                continue
            tgt_entries = {(i, j): (off, T, idx) for i, j, off, T, idx in layout[n - 1]}
            M = Mat.zeros(mods[n - 1].n, mods[n].n)
            den = 1
            blocks_ = []
            for i, j, off, T, idx in entries:
                if (i - 1, j) in tgt_entries:
                    toff, TT, tidx = tgt_entries[(i - 1, j)]
                    f = tensor_maps(X.d(i), ModuleMap.identity(Y.module(j)), (T, idx), (TT, tidx))
                    blocks_.append((toff, off, f, 1))
                if (i, j - 1) in tgt_entries:
                    toff, TT, tidx = tgt_entries[(i, j - 1)]
                    f = tensor_maps(ModuleMap.identity(X.module(i)), Y.d(j), (T, idx), (TT, tidx))
                    blocks_.append((toff, off, f, -1 if i % 2 else 1))
            for *_, f, _s in blocks_:
                den = lcm(den, f.den)
            for toff, off, f, s in blocks_:
                k = s * den // f.den
                for a, row in enumerate(f.matrix.rows):
                    tr = M.rows[toff + a]
                    for b, x in enumerate(row):
                        if x:
                            tr[off + b] += k * x
            diffs[n] = ModuleMap(mods[n], mods[n - 1], M, den, check=False)
        super().__init__(mods, diffs, base, check=False)

    def offset(self, n, i):
        for ii, j, off, T, idx in self.layout.get(n, []):
            if ii == i:
                return off, T, idx
        return None


def tensor(X, Y):
    """Underived tensor product of complexes."""
    return TensorComplex(X, Y)


def tensor_chain_maps(f, g, src=None, tgt=None):
    """``f (x) g : X (x) Y -> X' (x) Y'`` between tensor complexes."""
    src = src or TensorComplex(f.source, g.source)
    tgt = tgt or TensorComplex(f.target, g.target)
    comps = {}
    for n, entries in src.layout.items():
        if n not in tgt.layout:
            continue
        tmap = {(i, j): (off, T, idx) for i, j, off, T, idx in tgt.layout[n]}
        parts = []
        den = 1
        for i, j, off, T, idx in entries:
            if (i, j) not in tmap:
                continue
            fi, gj = f.at(i), g.at(j)
            if fi.is_zero() or gj.is_zero():
                continue
            toff, TT, tidx = tmap[(i, j)]
            h = tensor_maps(fi, gj, (T, idx), (TT, tidx))
            parts.append((toff, off, h))
            den = lcm(den, h.den)
        if not parts:
            continue
        M = Mat.zeros(tgt.module(n).n, src.module(n).n)
        for toff, off, h in parts:
            k = den // h.den
            for a, row in enumerate(h.matrix.rows):
                tr = M.rows[toff + a]
                for b, x in enumerate(row):
                    if x:
                        tr[off + b] += k * x
        comps[n] = ModuleMap(src.module(n), tgt.module(n), M, den, check=False)
    return ChainMap(src, tgt, comps, check=False)


def derived_tensor(X, Y):
    """``X (x)^L Y`` as ``X (x) P`` with ``P`` a free model of ``Y``."""
    if X.modules and Y.modules and X.base.ground() != Y.base.ground():
        raise BaseMismatchError("derived tensor needs a common ground ring")
    return TensorComplex(X, free_model(Y).complex)


@dataclass
class Truncation:
    complex: Complex
    map: ChainMap


def truncate_above(C, n):
    """Good truncation keeping degrees ``>= n``, with its inclusion into ``C``."""
    K, inc = kernel(C.d(n))
    sol = Solver(inc)
    mods = {k: m for k, m in C.modules.items() if k > n}
    if K.n:
        mods[n] = K
    diffs = {k: f for k, f in C.diffs.items() if k > n + 1}
    d1 = C.d(n + 1)
    if d1.source.n and K.n:
        cols = [sol.solve(d1.matrix.col(j)) for j in range(d1.source.n)]
        diffs[n + 1] = map_from_columns(d1.source, K, cols)
    T = Complex(mods, diffs, C.base, check=False)
    comps = {k: ModuleMap.identity(m) for k, m in C.modules.items() if k > n}
    if K.n:
        comps[n] = inc
    return Truncation(T, ChainMap(T, C, comps, check=False))


def truncate_below(C, n):
    """Good truncation keeping degrees ``<= n``, with the projection from ``C``."""
    Q, proj, sec = cokernel(C.d(n + 1))
    mods = {k: m for k, m in C.modules.items() if k < n}
    if Q.n:
        mods[n] = Q
    diffs = {k: f for k, f in C.diffs.items() if k < n}
    dn = C.d(n)
    if Q.n and dn.target.n:
        diffs[n] = ModuleMap(Q, dn.target, dn.matrix @ sec, dn.den, check=False)
    T = Complex(mods, diffs, C.base, check=False)
    comps = {k: ModuleMap.identity(m) for k, m in C.modules.items() if k < n}
    if Q.n:
        comps[n] = proj
    return Truncation(T, ChainMap(C, T, comps, check=False))


def truncate(C, n, mode):
    """``mode`` is ``"above"`` (degrees >= n) or ``"below"`` (degrees <= n)."""
    if mode == "above":
        return truncate_above(C, n)
    if mode == "below":
        return truncate_below(C, n)
    raise ValueError(f"unknown truncation mode {mode!r}")


def postnikov_sequence(C, n):
    """``tau_{>=n} C -> C -> tau_{<=n-1} C`` as two chain maps."""
    return truncate_above(C, n), truncate_below(C, n - 1)


def connectivity(C):
    """Least degree with nonzero homology, or ``None`` for acyclic complexes."""
    for k in C.degrees():
        if not C.homology(k).is_zero():
            return k
    return None


@dataclass
class Minimization:
    complex: Complex
    inclusion: ChainMap
    projection: ChainMap


def minimize(C):
    """Cancel unit entries of a free complex by Gaussian elimination.

    Returns a smaller free complex with chain maps ``i: C' -> C`` and
    ``p: C -> C'`` satisfying ``p i = 1`` and ``i p`` homotopic to ``1``.
    """
    if not C.is_free():
        raise ValueError("minimize needs a free complex")
    base = C.base
    degs = list(C.degrees())
    dims = {k: C.module(k).n for k in degs}
    weights = {k: list(C.module(k).weights) for k in degs}
    d = {k: [list(r) for r in C.d(k).matrix.rows] for k in degs}
    den = {k: C.d(k).den for k in degs}
    for k in degs:
        if den[k] != 1:
            raise NotWellDefinedError("minimize needs integral differentials")
    inc = {k: [[1 if i == j else 0 for j in range(dims[k])] for i in range(dims[k])] for k in degs}
    prj = {k: [[1 if i == j else 0 for j in range(dims[k])] for i in range(dims[k])] for k in degs}

    def mat(k):
        return d.get(k) if k in dims and k - 1 in dims else None

    changed = True
    while changed:
        changed = False
        for k in degs:
            M = mat(k)
            if not M:
                continue
            piv = None
            for i, row in enumerate(M):
                for j, x in enumerate(row):
                    if x in (1, -1):
                        piv = (i, j, x)
                        break
                if piv:
                    break
            if piv is None:
                continue
            i, j, a = piv
            rows_o = [r for r in range(dims[k - 1]) if r != i]
            cols_o = [c for c in range(dims[k]) if c != j]
            beta = [M[i][c] for c in cols_o]
            gamma = [M[r][j] for r in rows_o]
            # a^{-1} = a for a unit
            d[k] = [[M[r][c] - gamma[a_r] * a * beta[a_c] for a_c, c in enumerate(cols_o)]
                    for a_r, r in enumerate(rows_o)]
            if k + 1 in dims and d.get(k + 1) is not None:
                d[k + 1] = [d[k + 1][r] for r in range(dims[k]) if r != j]
            if k - 1 in dims and d.get(k - 1) is not None:
                d[k - 1] = [[row[c] for c in range(dims[k - 1]) if c != i] for row in d[k - 1]]
            I = inc[k]
            inc[k] = [[row[c] - row[j] * a * beta[a_c] for a_c, c in enumerate(cols_o)] for row in I]
            inc[k - 1] = [[row[c] for c in range(dims[k - 1]) if c != i] for row in inc[k - 1]]
            P = prj[k - 1]
            prj[k - 1] = [[P[r][c] - gamma[a_r] * a * P[i][c] for c in range(len(P[0]) if P else 0)]
                          for a_r, r in enumerate(rows_o)]
            prj[k] = [prj[k][r] for r in range(dims[k]) if r != j]
            weights[k] = [weights[k][c] for c in cols_o]
            weights[k - 1] = [weights[k - 1][r] for r in rows_o]
            dims[k] -= 1
            dims[k - 1] -= 1
            changed = True
            break
    mods = {k: FGModule((0,) * dims[k], weights[k], base) for k in degs if dims[k]}

    def mod(k):
        return mods.get(k) or FGModule.zero(base)

    diffs = {}
    for k in degs:
        if dims[k] and dims.get(k - 1):
            diffs[k] = ModuleMap(mod(k), mod(k - 1), Mat(d[k], dims[k - 1], dims[k]), check=False)
    Cm = Complex(mods, diffs, base, check=False)
    ic = {k: ModuleMap(mod(k), C.module(k), Mat(inc[k], C.module(k).n, dims[k]), check=False)
          for k in degs if dims[k]}
    pc = {k: ModuleMap(C.module(k), mod(k), Mat(prj[k], dims[k], C.module(k).n), check=False)
          for k in degs if dims[k]}
    return Minimization(Cm, ChainMap(Cm, C, ic, check=False), ChainMap(C, Cm, pc, check=False))


def complex_from_matrices(base, dims, diffs, weights=None):
    """Convenience: free or torsion-free complex from integer matrices.

    ``dims`` maps degree to a tuple of orders; ``diffs`` maps degree ``k`` to
    the rows of ``d_k``.
    """
    mods = {}
    for k, orders in dims.items():
        w = weights.get(k) if weights else None
        mods[k] = FGModule(tuple(base.normalize_order(o) if o else o for o in orders), w, base)

    def mod(k):
        return mods.get(k) or FGModule.zero(base)

    ds = {}
    for k, rows in diffs.items():
        ds[k] = ModuleMap(mod(k), mod(k - 1), Mat(rows, mod(k - 1).n, mod(k).n))
    return Complex(mods, ds, base)


def check_homogeneous(f):
    """Raise ``DegreeError`` unless the chain map preserves degrees."""
    if not isinstance(f, ChainMap):
        raise DegreeError("expected a degree-preserving chain map")
    return f
