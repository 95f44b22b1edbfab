"""Finitely generated graded modules over Z, Z/m and Z[1/S].

A module is stored as a direct sum of cyclic summands ``Z/d`` (``d = 0`` for a
free summand), one per generator, each generator carrying an integer weight.
Maps are integer matrices acting on generator coordinates, optionally divided
by a denominator that is a unit of the base ring.

Every computation runs on integer lattices.  Over ``Z[1/S]`` the module is
the localisation of the same lattice data, which is harmless because
localisation is exact: kernels, cokernels and homology are computed over Z and
then the primes of ``S`` are stripped from the orders.
"""

from dataclasses import dataclass
from functools import cached_property
from math import gcd

from .errors import NotWellDefinedError, ShapeError, UnsupportedBaseError
from .linalg import Mat, Smith, kernel_basis, lcm, solve, split_unit


def _prime_factors(n):
    n = abs(n)
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def _is_prime(p):
    return p >= 2 and _prime_factors(p) == [p]


@dataclass(frozen=True)
class BaseRing:
    """Coefficient base: ``Z``, ``Z/m`` or ``Z`` with finitely many primes inverted."""

    modulus: int = 0
    primes: tuple = ()

    def __post_init__(self):
        if self.modulus < 0:
            raise UnsupportedBaseError("modulus must be non-negative")
        ps = tuple(sorted(set(self.primes)))
        if any(not _is_prime(p) for p in ps):
            raise UnsupportedBaseError(f"inverted set must consist of primes, got {self.primes}")
        if self.modulus:
            m, _ = split_unit(self.modulus, ps)
            object.__setattr__(self, "modulus", m)
            ps = ()
        object.__setattr__(self, "primes", ps)

    @classmethod
    def integers(cls):
        return cls()

    @classmethod
    def mod(cls, m):
        if m < 2:
            raise UnsupportedBaseError("integers-mod-m needs m >= 2")
        return cls(modulus=m)

    @classmethod
    def localized(cls, primes):
        ps = tuple(primes)
        if not ps or len(set(ps)) != len(ps):
            raise UnsupportedBaseError("inverted prime set must be nonempty and duplicate-free")
        return cls(primes=ps)

    @property
    def kind(self):
        if self.modulus:
            return "integers-mod-m"
        if self.primes:
            return "integers-with-inverted-primes"
        return "integers"

    def __str__(self):
        if self.modulus:
            return f"Z/{self.modulus}"
        if self.primes:
            return "Z[1/" + ",".join(map(str, self.primes)) + "]"
        return "Z"

    def normalize_order(self, d):
        """Order of ``Z/d`` after base change; 1 means the summand vanishes."""
        d = abs(d)
        if self.modulus:
            d = gcd(d, self.modulus)
        if self.primes and d:
            d, _ = split_unit(d, self.primes)
        return d

    def is_unit(self, n):
        if self.modulus:
            return gcd(n, self.modulus) == 1
        core, _ = split_unit(n, self.primes)
        return core == 1

    def ground(self):
        """The torsion-free base the derived category lives over."""
        return BaseRing(primes=self.primes) if not self.modulus else BaseRing()

    def join(self, other):
        """Smallest base receiving both; used when tensoring."""
        primes = tuple(sorted(set(self.primes) | set(other.primes)))
        if self.modulus and other.modulus:
            m = gcd(self.modulus, other.modulus)
        else:
            m = self.modulus or other.modulus
        if m:
            m, _ = split_unit(m, primes)
            if m == 1:
                return BaseRing(modulus=1)
            return BaseRing(modulus=m)
        return BaseRing(primes=primes)

    def with_primes(self, extra):
        return self.join(BaseRing(primes=tuple(extra)))


ZZ = BaseRing()


class FGModule:
    """Direct sum of cyclic modules ``Z/orders[i]`` with generator weights.

    ``orders[i] == 0`` marks a free generator; orders are never 1.
    """

    __slots__ = ("base", "orders", "weights", "__dict__")

    def __init__(self, orders=(), weights=None, base=ZZ):
        orders = tuple(int(d) for d in orders)
        if weights is None:
            weights = (0,) * len(orders)
        weights = tuple(int(w) for w in weights)
        if len(weights) != len(orders):
            raise ShapeError("weights must match the number of generators")
        for d in orders:
            if d < 0 or d == 1 or base.normalize_order(d) != d:
                raise ShapeError(f"order {d} is not normalized for base {base}")
        self.base = base
        self.orders = orders
        self.weights = weights

    @classmethod
    def free(cls, n, base=ZZ, weights=None):
        if base.modulus:
            return cls((base.modulus,) * n, weights, base)
        return cls((0,) * n, weights, base)

    @classmethod
    def cyclic(cls, d, base=ZZ, weight=0):
        d = base.normalize_order(d)
        if d == 1:
            return cls((), (), base)
        return cls((d,), (weight,), base)

    @classmethod
    def zero(cls, base=ZZ):
        return cls((), (), base)

    @property
    def n(self):
        return len(self.orders)

    def __eq__(self, other):
        return (
            isinstance(other, FGModule)
            and self.base == other.base
            and self.orders == other.orders
            and self.weights == other.weights
        )

    def __hash__(self):
        return hash((self.base, self.orders, self.weights))

    def __repr__(self):
        return f"FGModule({self})"

    def __str__(self):
        if not self.orders:
            return "0"
        parts = []
        for w, (rank, tors) in sorted(self.invariants().items()):
            sfx = f"<{w}>" if w else ""
            parts += [f"Z/{d}{sfx}" for d in tors]
            if rank:
                free = "Z" if not self.base.primes else str(self.base)
                parts.append(f"{free}{sfx}" + (f"^{rank}" if rank > 1 else ""))
        return " + ".join(parts)

    @cached_property
    def _invariants(self):
        out = {}
        for w in sorted(set(self.weights)):
            ords = [d for d, ww in zip(self.orders, self.weights) if ww == w]
            rank = sum(1 for d in ords if d == 0)
            tors = [d for d in ords if d]
            if tors:
                diag = [x for x in Smith(Mat.diag(tors)).diag if x != 1]
            else:
                diag = []
            if rank or diag:
                out[w] = (rank, tuple(diag))
        return out

    def invariants(self):
        """Per weight: ``(rank, invariant factors)``; a complete isomorphism invariant."""
        return dict(self._invariants)

    def invariant_factors(self):
        """Flat list: torsion invariant factors followed by one 0 per free rank."""
        out = []
        for _, (rank, tors) in sorted(self._invariants.items()):
            out += list(tors) + [0] * rank
        return out

    def isomorphic(self, other):
        return self._invariants == other._invariants

    def is_zero(self):
        return not self.orders

    def rank(self):
        return sum(1 for d in self.orders if d == 0)

    def is_finite(self):
        return all(d for d in self.orders)

    def size(self):
        """Number of elements, or ``None`` when infinite."""
        if not self.is_finite():
            return None
        out = 1
        for d in self.orders:
            out *= d
        return out

    def exponent(self):
        """Least positive integer killing the module, 0 if none."""
        if not self.is_finite():
            return 0
        e = 1
        for d in self.orders:
            e = lcm(e, d)
        return e

    def reduce(self, v):
        return [x % d if d else x for x, d in zip(v, self.orders)]

    def is_zero_vector(self, v):
        return all((x % d == 0) if d else x == 0 for x, d in zip(v, self.orders))

    def torsion_indices(self):
        return [i for i, d in enumerate(self.orders) if d]

    def free_indices(self):
        return [i for i, d in enumerate(self.orders) if d == 0]

    def relation_matrix(self):
        """Columns ``d_i e_i`` for the torsion generators."""
        tors = self.torsion_indices()
        cols = []
        for i in tors:
            c = [0] * self.n
            c[i] = self.orders[i]
            cols.append(c)
        return Mat.from_columns(cols, self.n)

    def elements(self):
        """Iterate all elements of a finite module as coordinate tuples."""
        if not self.is_finite():
            raise ValueError("cannot enumerate an infinite module")

        def rec(i):
            if i == self.n:
                yield ()
                return
            for x in range(self.orders[i]):
                for rest in rec(i + 1):
                    yield (x,) + rest

        return rec(0)


def direct_sum(*mods):
    if not mods:
        return FGModule.zero()
    base = mods[0].base
    for m in mods[1:]:
        if m.base != base:
            base = base.join(m.base)
    orders = sum((m.orders for m in mods), ())
    weights = sum((m.weights for m in mods), ())
    return FGModule(orders, weights, base)


def _lattice_rel_cols(cols, n):
    return Mat.from_columns(cols, n) if cols else Mat.zeros(n, 0)


def present(weights, rel_cols, base=ZZ):
    """Module ``Z^n / (column span of rel_cols)`` in diagonal form.

    Returns ``(module, P, S)``: ``P`` maps old coordinates to new ones and
    ``S`` sends each new generator to a representative in old coordinates.
    Relations must be homogeneous for the weights.
    """
    weights = tuple(weights)
    n = len(weights)
    if rel_cols.m != n:
        raise ShapeError("relation matrix rows must match generator count")
    by_weight = {}
    for j in range(rel_cols.n):
        col = rel_cols.col(j)
        ws = {weights[i] for i, x in enumerate(col) if x}
        if len(ws) > 1:
            raise ShapeError("relation mixes weights")
        if ws:
            by_weight.setdefault(ws.pop(), []).append(col)
    orders, out_w, P_rows, S_cols = [], [], [], []
    for w in sorted(set(weights)):
        idx = [i for i in range(n) if weights[i] == w]
        cols = [[c[i] for i in idx] for c in by_weight.get(w, [])]
        if base.modulus:
            for k in range(len(idx)):
                c = [0] * len(idx)
                c[k] = base.modulus
                cols.append(c)
        R = _lattice_rel_cols(cols, len(idx))
        sm = Smith(R)
        for i in range(len(idx)):
            d = sm.diag[i] if i < len(sm.diag) else 0
            d = base.normalize_order(d)
            if d == 1:
                continue
            orders.append(d)
            out_w.append(w)
            row = [0] * n
            for k, j in enumerate(idx):
                row[j] = sm.U.rows[i][k]
            P_rows.append(row)
            col = [0] * n
            for k, j in enumerate(idx):
                col[j] = sm.Uinv.rows[k][i]
            S_cols.append(col)
    mod = FGModule(orders, out_w, base)
    P = Mat(P_rows, len(P_rows), n)
    S = Mat.from_columns(S_cols, n) if S_cols else Mat.zeros(n, 0)
    return mod, P, S


def module_from_presentation(base, rows, weights=None):
    """Module with generators the columns and relations the rows of ``rows``.

    ``rows`` is a list of relation vectors; the result is in normal form, so
    isomorphic presentations give identical modules.
    """
    if not isinstance(base, BaseRing):
        raise UnsupportedBaseError(f"unsupported base {base!r}")
    rows = [[int(x) for x in r] for r in rows]
    if weights is None:
        ncols = len(rows[0]) if rows else 0
        weights = (0,) * ncols
    n = len(weights)
    if any(len(r) != n for r in rows):
        raise ShapeError("weights must match the column count")
    rel = Mat(rows, len(rows), n).T() if rows else Mat.zeros(n, 0)
    mod, _, _ = present(weights, rel, base)
    return mod


class ModuleMap:
    """Homomorphism given by ``matrix / den`` on generator coordinates."""

    __slots__ = ("source", "target", "matrix", "den")

    def __init__(self, source, target, matrix, den=1, check=True):
        if not isinstance(matrix, Mat):
            matrix = Mat(matrix, target.n, source.n)
        if matrix.shape != (target.n, source.n):
            raise ShapeError(f"matrix shape {matrix.shape} does not fit {target.n}x{source.n}")
        if den <= 0:
            raise ValueError("denominator must be positive")
        if den != 1 and not target.base.is_unit(den):
            raise NotWellDefinedError(f"denominator {den} is not a unit of {target.base}")
        rows = []
        for i, r in enumerate(matrix.rows):
            d = target.orders[i]
            rows.append([x % d for x in r] if d else list(r))
        if den != 1 and target.is_finite():
            rows2 = []
            for i, r in enumerate(rows):
                d = target.orders[i]
                inv = pow(den, -1, d)
                rows2.append([(x * inv) % d for x in r])
            rows = rows2
            den = 1
        self.source = source
        self.target = target
        self.matrix = Mat._raw(rows, target.n, source.n)
        self.den = den
        if check:
            self._check()

    def _check(self):
        src, tgt = self.source, self.target
        for i in range(tgt.n):
            ti, wi = tgt.orders[i], tgt.weights[i]
            row = self.matrix.rows[i]
            for j in range(src.n):
                x = row[j]
                if not x:
                    continue
                if src.weights[j] != wi:
                    raise ShapeError("map does not preserve weights")
                sj = src.orders[j]
                if sj:
                    if ti == 0 or (sj * x) % ti:
                        raise NotWellDefinedError(
                            f"generator {j} of order {sj} cannot map to {x} in Z/{ti or 0}"
                        )

    @classmethod
    def zero(cls, source, target):
        return cls(source, target, Mat.zeros(target.n, source.n), check=False)

    @classmethod
    def identity(cls, module):
        return cls(module, module, Mat.identity(module.n), check=False)

    @classmethod
    def scalar(cls, module, c):
        return cls(module, module, Mat.identity(module.n).scale(c), check=False)

    def __repr__(self):
        d = f"/{self.den}" if self.den != 1 else ""
        return f"ModuleMap({self.source} -> {self.target}: {self.matrix.rows}{d})"

    def __matmul__(self, other):
        if other.target.n != self.source.n or other.target.orders != self.source.orders:
            raise ShapeError("composition of incompatible maps")
        return ModuleMap(other.source, self.target, self.matrix @ other.matrix, self.den * other.den, check=False)

    def _common(self, other):
        if self.source != other.source or self.target != other.target:
            raise ShapeError("maps have different source or target")
        den = lcm(self.den, other.den)
        return self.matrix.scale(den // self.den), other.matrix.scale(den // other.den), den

    def __add__(self, other):
        a, b, den = self._common(other)
        return ModuleMap(self.source, self.target, a + b, den, check=False)

    def __sub__(self, other):
        a, b, den = self._common(other)
        return ModuleMap(self.source, self.target, a - b, den, check=False)

    def __neg__(self):
        return ModuleMap(self.source, self.target, -self.matrix, self.den, check=False)

    def scale(self, c):
        return ModuleMap(self.source, self.target, self.matrix.scale(c), self.den, check=False)

    def is_zero(self):
        tgt = self.target
        for i, r in enumerate(self.matrix.rows):
            d = tgt.orders[i]
            for x in r:
                if (x % d if d else x):
                    return False
        return True

    def __eq__(self, other):
        if not isinstance(other, ModuleMap):
            return NotImplemented
        if self.source != other.source or self.target != other.target:
            return False
        return (self - other).is_zero()

    __hash__ = None

    def apply(self, v):
        """Image of a coordinate vector; returns ``(vector, den)``."""
        return self.target.reduce(self.matrix.apply(v)), self.den

    def is_injective(self):
        return kernel(self)[0].is_zero()

    def is_surjective(self):
        return cokernel(self)[0].is_zero()

    def is_isomorphism(self):
        return self.is_injective() and self.is_surjective()


def _weight_blocks(src, tgt):
    ws = sorted(set(src.weights) | set(tgt.weights))
    for w in ws:
        yield (
            w,
            [j for j in range(src.n) if src.weights[j] == w],
            [i for i in range(tgt.n) if tgt.weights[i] == w],
        )


def _sub(mod, idx):
    return FGModule(tuple(mod.orders[i] for i in idx), tuple(mod.weights[i] for i in idx), mod.base)


def _kernel_block(M, src, tgt):
    """Kernel lattice data for one weight block (all generators same weight)."""
    n = src.n
    tors_t = tgt.torsion_indices()
    Dt = Mat.zeros(tgt.n, len(tors_t))
    for k, i in enumerate(tors_t):
        Dt.rows[i][k] = -tgt.orders[i]
    A = M.hstack(Dt)
    KB = kernel_basis(A)
    B = KB.take_rows(list(range(n)))
    cols = []
    for j in src.torsion_indices():
        v = [0] * n
        v[j] = src.orders[j]
        res = solve(B, v)
        if res is None or res[1] != 1:
            raise NotWellDefinedError("relation of source does not lie in the kernel lattice")
        cols.append(res[0])
    Z = _lattice_rel_cols(cols, B.n)
    w = src.weights[0] if src.n else 0
    K, _, S = present((w,) * B.n, Z, src.base)
    return K, B @ S


def kernel(f):
    """Kernel of ``f`` with its inclusion map."""
    src, tgt = f.source, f.target
    parts = []
    for w, sidx, tidx in _weight_blocks(src, tgt):
        if not sidx:
            continue
        M = f.matrix.block(tidx, sidx)
        Kw, inc_w = _kernel_block(M, _sub(src, sidx), _sub(tgt, tidx))
        parts.append((Kw, sidx, inc_w))
    K = direct_sum(*[p[0] for p in parts]) if parts else FGModule.zero(src.base)
    K = FGModule(K.orders, K.weights, src.base)
    inc = Mat.zeros(src.n, K.n)
    c0 = 0
    for Kw, sidx, inc_w in parts:
        for a, j in enumerate(sidx):
            inc.rows[j][c0:c0 + Kw.n] = inc_w.rows[a]
        c0 += Kw.n
    return K, ModuleMap(K, src, inc, check=False)


def _cokernel_data(tgt, image_cols):
    """Present ``tgt / <image_cols>``; returns ``(Q, P, S)``."""
    rel = image_cols.hstack(tgt.relation_matrix())
    return present(tgt.weights, rel, tgt.base)


def cokernel(f):
    """Cokernel of ``f``: ``(Q, projection, section)``.

    ``section`` is a matrix whose columns are representatives in the target
    of the generators of ``Q``.
    """
    Q, P, S = _cokernel_data(f.target, f.matrix)
    return Q, ModuleMap(f.target, Q, P, check=False), S


def image(f):
    """Image of ``f``: ``(I, inclusion, corestriction)``."""
    K, inc = kernel(f)
    src = f.source
    I, P, S = _cokernel_data(src, inc.matrix)
    incl = ModuleMap(I, f.target, f.matrix @ S, f.den, check=False)
    core = ModuleMap(src, I, P, check=False)
    return I, incl, core


def submodule(module, gen_cols):
    """Submodule generated by coordinate columns: ``(A, inclusion)``."""
    weights = [next((module.weights[i] for i, x in enumerate(c) if x), 0) for c in gen_cols]
    F = FGModule.free(len(gen_cols), module.base, weights)
    M = Mat.from_columns(gen_cols, module.n) if gen_cols else Mat.zeros(module.n, 0)
    f = ModuleMap(F, module, M, check=False)
    A, inc, _ = image(f)
    return A, inc


class Solver:
    """Solve ``f(x) = b`` repeatedly for a fixed map ``f``."""

    def __init__(self, f):
        self.f = f
        tgt = f.target
        self.A = f.matrix.hstack(tgt.relation_matrix())
        self.smith = Smith(self.A)
        self.primes = tgt.base.primes
        self.n = f.source.n

    def solve(self, b):
        """Return ``(x, den)`` with ``f(x) = den * b``, or ``None``."""
        s = self.smith
        c = s.U.apply(b)
        A = self.A
        den = 1
        ys = []
        for i in range(A.m):
            di = s.diag[i] if i < len(s.diag) else 0
            if di == 0:
                if c[i]:
                    return None
                ys.append((0, 1))
                continue
            core, unit = split_unit(di, self.primes)
            if c[i] % core:
                return None
            ys.append((c[i] // core, unit))
            den = lcm(den, unit)
        y = [num * (den // unit) for num, unit in ys[: A.n]] + [0] * max(0, A.n - A.m)
        x = s.V.apply(y)[: self.n]
        # f = matrix / f.den, so matrix x = den * b means f(f.den * x) = den * b
        x = [v * self.f.den for v in x]
        return self.f.source.reduce(x), den


def lift(f, b):
    """Some ``x`` with ``f(x) = b``; returns ``(x, den)`` meaning ``f(x) = den * b``."""
    return Solver(f).solve(b)


def map_from_columns(source, target, cols_with_den):
    """Assemble a map from per-generator images ``(vector, den)``."""
    den = 1
    for _, d in cols_with_den:
        den = lcm(den, d)
    cols = [[x * (den // d) for x in v] for v, d in cols_with_den]
    M = Mat.from_columns(cols, target.n) if cols else Mat.zeros(target.n, 0)
    return ModuleMap(source, target, M, den)


def contains(inc, v):
    """Whether ``v`` lies in the image of ``inc`` (no denominator allowed over Z)."""
    res = Solver(inc).solve(v)
    return res is not None


def tensor_modules(A, B):
    """Underived tensor product with the index map ``(i, j) -> generator``."""
    base = A.base.join(B.base)
    orders, weights, index = [], [], {}
    for i, (a, wa) in enumerate(zip(A.orders, A.weights)):
        for j, (b, wb) in enumerate(zip(B.orders, B.weights)):
            d = base.normalize_order(gcd(a, b))
            if d == 1:
                continue
            index[(i, j)] = len(orders)
            orders.append(d)
            weights.append(wa + wb)
    return FGModule(orders, weights, base), index


def tensor_maps(f, g, T_src=None, T_tgt=None):
    """``f (x) g`` between underived tensor products."""
    S, si = T_src if T_src else tensor_modules(f.source, g.source)
    T, ti = T_tgt if T_tgt else tensor_modules(f.target, g.target)
    M = Mat.zeros(T.n, S.n)
    for (a, b), col in si.items():
        for (c, d), row in ti.items():
            x = f.matrix.rows[c][a] * g.matrix.rows[d][b]
            if x:
                M.rows[row][col] += x
    return ModuleMap(S, T, M, f.den * g.den, check=False)


def sum_map(maps_grid, sources, targets):
    """Block map between direct sums; ``None`` means zero."""
    den = 1
    for row in maps_grid:
        for m in row:
            if m is not None:
                den = lcm(den, m.den)
    S = direct_sum(*sources) if sources else FGModule.zero()
    T = direct_sum(*targets) if targets else FGModule.zero()
    M = Mat.zeros(T.n, S.n)
    r0 = 0
    for bi, t in enumerate(targets):
        c0 = 0
        for bj, s in enumerate(sources):
            m = maps_grid[bi][bj]
            if m is not None:
                k = den // m.den
                for i in range(t.n):
                    M.rows[r0 + i][c0:c0 + s.n] = [k * x for x in m.matrix.rows[i]]
            c0 += s.n
        r0 += t.n
    return ModuleMap(S, T, M, den, check=False)


def is_exact(g, h):
    """Exactness of ``A --g--> B --h--> C`` at ``B``."""
    if not (h @ g).is_zero():
        return False
    K, inc = kernel(h)
    sol = Solver(inc)
    cols = []
    for j in range(g.source.n):
        res = sol.solve(g.matrix.col(j))
        if res is None:
            return False
        cols.append(res)
    into = map_from_columns(g.source, K, cols)
    return cokernel(into)[0].is_zero()
