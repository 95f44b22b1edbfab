"""Towers indexed by the natural numbers and their pro-category.

A tower ``X_0 <- X_1 <- ...`` has transitions ``t_s : X_s -> X_{s-1}``.  It is
stored either as

* a *periodic* tower: levels ``X_0..X_N`` with transitions, a period ``P`` and
  a wrap map ``X_{N-P+1} -> X_N``; level ``s > N`` is the prefix level
  ``N - P + 1 + ((s - N - 1) mod P)``.  Questions are decided exactly.
* a *lazy* tower: levels and transitions produced on demand up to a horizon.
  Questions are answered inside that window and flagged as such.
* a *truncated* tower: a bare prefix, treated like a lazy tower of depth ``N``.

Levels are modules (``FGModule`` with ``ModuleMap`` transitions) or complexes
(``Complex`` with ``ChainMap`` transitions).
"""

from dataclasses import dataclass, field

import sympy

from .complexes import ChainMap, Complex, fibre, tensor, tensor_chain_maps, truncate_below
from .errors import DepthError, NotWellDefinedError, ShapeError, StructuralError, UndeterminedError
from .linalg import Mat, lcm
from .modules import FGModule, ModuleMap, Solver, cokernel, image, kernel, map_from_columns

DEFAULT_LAZY_HORIZON = 12


def _is_module(x):
    return isinstance(x, FGModule)


def _identity(x):
    return ModuleMap.identity(x) if _is_module(x) else ChainMap.identity(x)


def _zero_map(f):
    if isinstance(f, ModuleMap):
        return f.is_zero()
    return all(g.is_zero() for g in f.maps.values())


def maps_equal(a, b):
    if isinstance(a, ModuleMap):
        return a == b
    return _zero_map(a - b)


def _same_object(a, b):
    if isinstance(a, FGModule):
        return isinstance(b, FGModule) and a == b
    return a is b or (isinstance(b, Complex) and a.modules == b.modules)


class Tower:
    def __init__(self, levels, transitions, tail_period=None, tail_map=None, check=True):
        """``transitions[i]`` maps ``levels[i + 1] -> levels[i]``."""
        self.levels = list(levels)
        self.transitions = list(transitions)
        if not self.levels:
            raise ShapeError("a tower needs at least one level")
        if len(self.transitions) != len(self.levels) - 1:
            raise ShapeError("a prefix of N + 1 levels needs N transitions")
        self.N = len(self.levels) - 1
        self.P = tail_period
        self.tail_map = tail_map
        self._fn = None
        self._cache = {}
        self.horizon = None
        if tail_period is not None:
            if not 1 <= tail_period <= self.N + 1:
                raise ShapeError("tail period must lie between 1 and the prefix length")
            if tail_map is None:
                raise ShapeError("a periodic tail needs a wrap map")
        elif tail_map is not None:
            raise ShapeError("a wrap map needs a tail period")
        if check:
            problems = self.coherence_problems()
            if problems:
                raise NotWellDefinedError(problems[0])

    @classmethod
    def lazy(cls, level_fn, transition_fn, horizon=DEFAULT_LAZY_HORIZON):
        t = cls.__new__(cls)
        t.levels, t.transitions = [], []
        t.N, t.P, t.tail_map = None, None, None
        t._fn = (level_fn, transition_fn)
        t._cache = {}
        t.horizon = horizon
        return t

    @classmethod
    def constant(cls, X):
        return cls([X], [], 1, _identity(X))

    @classmethod
    def from_endomorphism(cls, X, f):
        """``X <- X <- ...`` with every transition ``f``."""
        return cls([X], [], 1, f)

    @property
    def is_lazy(self):
        return self._fn is not None

    @property
    def is_periodic(self):
        return self.P is not None

    @property
    def is_module_tower(self):
        return _is_module(self.level(0))

    def coherence_problems(self):
        out = []
        for s, t in enumerate(self.transitions, start=1):
            if not _same_object(t.source, self.levels[s]) or not _same_object(t.target, self.levels[s - 1]):
                out.append(f"transition at level {s} does not match levels {s} -> {s - 1}")
        if self.P is not None:
            src, tgt = self.levels[self.N - self.P + 1], self.levels[self.N]
            if not _same_object(self.tail_map.source, src) or not _same_object(self.tail_map.target, tgt):
                out.append(f"tail map at level {self.N + 1} does not match levels "
                           f"{self.N - self.P + 1} -> {self.N}")
        return out

    def fold(self, s):
        """Prefix index holding level ``s``."""
        if s < 0:
            raise IndexError("negative tower level")
        if self.is_lazy or s <= self.N:
            return s
        if self.P is None:
            raise DepthError(f"level {s} lies beyond a truncated tower of depth {self.N}", required=s)
        return self.N - self.P + 1 + ((s - self.N - 1) % self.P)

    def level(self, s):
        if self.is_lazy:
            if s > self.horizon:
                raise DepthError(f"level {s} is beyond the horizon {self.horizon}", required=s)
            key = ("L", s)
            if key not in self._cache:
                self._cache[key] = self._fn[0](s)
            return self._cache[key]
        return self.levels[self.fold(s)]

    def transition(self, s):
        """``X_s -> X_{s-1}`` for ``s >= 1``."""
        if s < 1:
            raise IndexError("transitions start at level 1")
        if self.is_lazy:
            if s > self.horizon:
                raise DepthError(f"level {s} is beyond the horizon {self.horizon}", required=s)
            key = ("T", s)
            if key not in self._cache:
                self._cache[key] = self._fn[1](s)
            return self._cache[key]
        if s <= self.N:
            return self.transitions[s - 1]
        j = self.fold(s)
        if j == self.N - self.P + 1:
            return self.tail_map
        return self.transitions[j - 1]

    def composite(self, s, t):
        """``X_s -> X_t`` for ``s >= t``."""
        if s < t:
            raise ValueError("composite runs down the tower")
        key = ("C", s, t)
        out = self._cache.get(key)
        if out is None:
            out = _identity(self.level(s)) if s == t else self.composite(s - 1, t) @ self.transition(s)
            self._cache[key] = out
        return out

    def loop(self):
        """Endomorphism ``X_{N+P} -> X_N`` of ``X_N`` for periodic towers."""
        return self.composite(self.N + self.P, self.N)

    def depth_limit(self):
        """Highest inspectable level; ``None`` for periodic towers."""
        if self.is_lazy:
            return self.horizon
        return None if self.is_periodic else self.N

    def unrolled(self, N2, P2):
        """The same tower presented with prefix ``0..N2`` and period ``P2``."""
        if not self.is_periodic:
            raise ValueError("only periodic towers can be unrolled")
        if P2 % self.P or N2 < self.N or N2 - P2 < self.N - self.P:
            raise ValueError("incompatible unrolling")
        levels = [self.level(s) for s in range(N2 + 1)]
        trans = [self.transition(s) for s in range(1, N2 + 1)]
        return Tower(levels, trans, P2, self.transition(N2 + 1), check=False)

    def map_levels(self, level_fn, map_fn):
        """Apply a functor levelwise; ``map_fn(t, s)`` gets the transition at ``s``."""
        if self.is_lazy:
            return Tower.lazy(lambda s: level_fn(self.level(s)),
                              lambda s: map_fn(self.transition(s), s), self.horizon)
        levels = [level_fn(x) for x in self.levels]
        trans = [map_fn(t, s) for s, t in enumerate(self.transitions, start=1)]
        tail = map_fn(self.tail_map, self.N + 1) if self.P else None
        return Tower(levels, trans, self.P, tail, check=False)

    def homology(self, k):
        """Tower of ``H_k`` with induced transitions."""
        key = ("H", k)
        if key not in self._cache:
            self._cache[key] = self.map_levels(lambda X: X.homology(k), lambda t, s: t.on_homology(k))
        return self._cache[key]

    def inspected_levels(self):
        if self.is_periodic:
            return range(self.N + self.P + 1)
        return range(self.depth_limit() + 1)

    def homology_degrees(self):
        degs = set()
        for s in self.inspected_levels():
            degs |= set(self.level(s).degrees())
        return sorted(degs)


# ---------------------------------------------------------------------------
# Submodules


@dataclass
class Sub:
    """Submodule given by an inclusion ``inc: A -> X``."""

    inc: ModuleMap

    @property
    def module(self):
        return self.inc.source

    @property
    def ambient(self):
        return self.inc.target

    def is_zero(self):
        return self.inc.source.is_zero()

    def contains(self, other):
        sol = Solver(self.inc)
        return all(sol.solve(other.inc.matrix.col(j)) is not None for j in range(other.inc.source.n))

    def __eq__(self, other):
        return self.contains(other) and other.contains(self)

    def image_under(self, f):
        return image_sub(f @ self.inc)


def full_sub(X):
    return Sub(ModuleMap.identity(X))


def zero_sub(X):
    return Sub(ModuleMap.zero(FGModule.zero(X.base), X))


def image_sub(f):
    return Sub(image(f)[1])


def kernel_sub(f):
    return Sub(kernel(f)[1])


def intersect(a, b):
    """Intersection of two submodules of one module."""
    X = a.ambient
    A, B = a.module, b.module
    den = lcm(a.inc.den, b.inc.den)
    S = FGModule(A.orders + B.orders, A.weights + B.weights, X.base)
    M = a.inc.matrix.scale(den // a.inc.den).hstack(-b.inc.matrix.scale(den // b.inc.den))
    K, inc = kernel(ModuleMap(S, X, M, den, check=False))
    left = ModuleMap(S, X, a.inc.matrix.hstack(Mat.zeros(X.n, B.n)), a.inc.den, check=False)
    return image_sub(left @ inc)


def preimage(f, sub):
    """``f^{-1}(sub)`` inside the source of ``f``."""
    _, proj, _ = cokernel(sub.inc)
    return kernel_sub(proj @ f)


def quotient(big, small):
    """``big / small`` as a module, with the projection from ``big.module``."""
    sol = Solver(big.inc)
    cols = [sol.solve(small.inc.matrix.col(j)) for j in range(small.module.n)]
    into = map_from_columns(small.module, big.module, cols)
    Q, proj, sec = cokernel(into)
    return Q, proj, sec


# ---------------------------------------------------------------------------
# Image chains and Mittag-Leffler


@dataclass
class ImageChain:
    level: int
    stable: object
    stabilizes_at: object = None
    value: object = None
    exact: bool = True
    reason: str = ""


def _charpoly_nonzero_part(L):
    """Characteristic polynomial of ``L`` with the factors of ``x`` removed."""
    x = sympy.Symbol("x")
    if L.m == 0:
        return sympy.Poly(1, x), x
    p = sympy.Poly(sympy.Matrix(L.rows).charpoly(x).as_expr(), x)
    while p.degree() > 0 and p.eval(0) == 0:
        p = sympy.Poly(sympy.quo(p.as_expr(), x), x)
    return p, x


def _poly_of_matrix(poly, x, M):
    n = M.rows
    out = sympy.zeros(n)
    for c in sympy.Poly(poly, x).all_coeffs():
        out = out * M + c * sympy.eye(n)
    return out


def _split_factors(q, x, base):
    """Product of irreducible factors with unit constant term, and of the rest."""
    unit, rest = sympy.Integer(1), sympy.Integer(1)
    for fac, mult in sympy.factor_list(q.as_expr())[1]:
        c = int(sympy.Poly(fac, x).eval(0))
        if base.is_unit(abs(c)):
            unit *= fac ** mult
        else:
            rest *= fac ** mult
    return unit, rest


def _rank_q(M):
    if M.m == 0 or M.n == 0:
        return 0
    return sympy.Matrix(M.rows).rank()


def _free_block(f):
    return f.matrix.block(f.target.free_indices(), f.source.free_indices())


class _LoopAnalysis:
    """The descending chain ``im L^m`` for an endomorphism ``L``."""

    MAX_ITER = 512

    def __init__(self, L, base):
        self.L = L
        self.base = base
        self.Lf = _free_block(L)
        n = self.Lf.m
        if n == 0:
            self.unit = True
        else:
            q, _ = _charpoly_nonzero_part(self.Lf)
            self.unit = base.is_unit(abs(int(q.eval(0))))
        self.stable = None
        if self.unit:
            cur = full_sub(L.source)
            for _ in range(self.MAX_ITER):
                nxt = cur.image_under(L)
                if nxt == cur:
                    break
                cur = nxt
            else:
                raise UndeterminedError("loop image chain did not settle")
            self.stable = cur

    def eventual_image(self):
        """Rational column space of ``Lf^n`` as a matrix."""
        P = Mat.identity(self.Lf.m)
        for _ in range(self.Lf.m):
            P = P @ self.Lf
        return P

    def chain_under(self, h):
        """Verdict on ``h(im L^m)``: ``(stable, value, reason)``."""
        if self.unit:
            return True, self.stable.image_under(h), "loop image chain stabilizes"
        hf = _free_block(h)
        V = self.eventual_image()
        if _rank_q(hf @ V) == _rank_q(V):
            return False, None, "transition is rationally injective on a non-unit eigenspace"
        q, x = _charpoly_nonzero_part(self.Lf)
        _, rest = _split_factors(q, x, self.base)
        M = sympy.Matrix(self.Lf.rows)
        U2 = (_poly_of_matrix(rest, x, M) ** M.rows).nullspace()
        H = sympy.Matrix(hf.rows)
        if any(not (H * u).is_zero_matrix for u in U2):
            return False, None, "transition does not kill the non-unit eigenspace"
        return True, None, "non-unit part is killed rationally"


def _loop(T):
    la = T._cache.get("loop")
    if la is None:
        la = _LoopAnalysis(T.loop(), T.level(T.N).base)
        T._cache["loop"] = la
    return la


def image_chain(T, s, window=None):
    """Analyse the chain ``im(X_{s+r} -> X_s)`` of a module tower."""
    if T.is_periodic:
        j = T.fold(s)
        if j != s:
            res = image_chain(T, j)
            return ImageChain(s, res.stable, res.stabilizes_at, res.value, True, res.reason)
        key = ("chain", s)
        if key in T._cache:
            return T._cache[key]
        la = _loop(T)
        stable, value, reason = la.chain_under(T.composite(T.N, s))
        at = None
        if stable and value is not None:
            bound = T.N + T.P * (la.MAX_ITER + 2)
            for r in range(bound):
                if image_sub(T.composite(s + r, s)) == value:
                    at = r
                    break
            else:
                raise UndeterminedError("image chain did not reach its stable value", level=s)
        res = ImageChain(s, stable, at, value, True, reason)
        T._cache[key] = res
        return res
    limit = T.depth_limit()
    if s > limit:
        raise DepthError(f"level {s} exceeds the tower depth {limit}", required=s)
    subs = [image_sub(T.composite(s + r, s)) for r in range(limit - s + 1)]
    w = window or 2
    if len(subs) >= w and all(subs[-1] == x for x in subs[-w:]):
        at = len(subs) - 1
        while at > 0 and subs[at - 1] == subs[-1]:
            at -= 1
        return ImageChain(s, True, at, subs[-1], False, "settled inside the window")
    return ImageChain(s, None, None, subs[-1], False, "still moving at the horizon")


def ml_levels(T, window=None):
    """Levels whose image chain can be judged: all prefix levels, or those with a full window."""
    if T.is_periodic:
        return range(T.N + 1)
    return range(max(0, T.depth_limit() - (window or 2) + 2))


def is_mittag_leffler(T, window=None):
    """Exact for periodic towers; lazy towers may answer ``None`` (undetermined)."""
    verdict = True
    for s in ml_levels(T, window):
        st = image_chain(T, s, window).stable
        if st is False:
            return False
        if st is None:
            verdict = None
    return verdict


@dataclass
class ProDescriptor:
    """A limit that is not finitely generated, described by its stable images."""

    stable_images: list
    note: str

    def __str__(self):
        return f"pro({self.note})"


@dataclass
class LimResult:
    ml_verdict: object
    lim: object
    lim1: str
    exact: bool = True
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.ml_verdict is True and self.lim1 != "zero":
            raise AssertionError("Mittag-Leffler towers have vanishing lim^1")


_LIM1 = {True: "zero", False: "nonzero", None: "undetermined"}


def lim_lim1(T, window=None):
    ml = is_mittag_leffler(T, window)
    lim1 = _LIM1[ml]
    if T.is_periodic:
        la = _loop(T)
        if ml:
            return LimResult(True, la.stable.module, lim1)
        X = T.level(T.N)
        if X.torsion_indices():
            return LimResult(False, ProDescriptor([], "non-Mittag-Leffler tower with torsion"), lim1)
        return LimResult(False, _unit_part_lim(la, X), lim1)
    limit = max(ml_levels(T, window))
    imgs = [image_chain(T, s, window).value for s in range(limit + 1)]
    if ml and limit >= 1:
        w = window or 2
        settled = True
        for s in range(max(1, limit - w + 1), limit + 1):
            restricted = T.transition(s) @ imgs[s].inc
            I, _, core = image(restricted)
            if not (core.is_isomorphism() and I.isomorphic(imgs[s - 1].module)):
                settled = False
        if settled:
            return LimResult(True, imgs[limit].module, lim1, exact=False,
                             notes=["stable images are constant through isomorphisms inside the window"])
    note = "stable images never become isomorphic" if ml else "window verdict"
    return LimResult(ml, ProDescriptor(imgs, note), lim1, exact=False)


def _unit_part_lim(la, X):
    """``lim`` of ``X <-L- X <-L- ...`` for free ``X``: lattice points of the unit part."""
    n = la.Lf.m
    if n == 0:
        return FGModule.zero(X.base)
    q, x = _charpoly_nonzero_part(la.Lf)
    unit, _ = _split_factors(q, x, la.base)
    g = _poly_of_matrix(unit, x, sympy.Matrix(la.Lf.rows))
    return FGModule.free(n - (g ** n).rank(), X.base)


# ---------------------------------------------------------------------------
# Reindexing


class Reindexing:
    """Monotone ``n_k`` given on ``0..K`` followed by an affine tail of slope ``a``."""

    def __init__(self, values, slope=1):
        self.values = [int(v) for v in values]
        if not self.values:
            raise ValueError("reindexing needs at least one value")
        if slope < 1:
            raise ValueError("reindexing slope must be positive")
        self.slope = int(slope)
        prev = 0
        for k, v in enumerate(self.values):
            if v < max(prev, k):
                raise ValueError(f"reindexing violates n_k >= max(n_(k-1), k) at k={k}")
            prev = v

    @classmethod
    def identity(cls):
        return cls([0], 1)

    @classmethod
    def affine(cls, a, b=0):
        return cls([b], a)

    def __call__(self, k):
        K = len(self.values) - 1
        if k <= K:
            return self.values[k]
        return self.values[K] + self.slope * (k - K)

    def compose(self, other):
        """``(self o other)(k) = self(other(k))``."""
        K = max(len(self.values), len(other.values))
        return Reindexing([self(other(k)) for k in range(K + 1)], self.slope * other.slope)

    def is_identity(self):
        return all(self(k) == k for k in range(len(self.values) + 1)) and self.slope == 1

    def offset_bound(self):
        """``None`` unless ``n_k - k`` is eventually constant."""
        return self(len(self.values)) - len(self.values) if self.slope == 1 else None


def _inverse_floor(n, top):
    """Largest ``k`` with ``n(k) <= top``."""
    if n(0) > top:
        return -1
    k = 0
    while n(k + 1) <= top:
        k += 1
    return k


def reindex(T, n):
    """The tower ``k -> X_{n_k}`` with composite transitions."""
    def lev(k):
        return T.level(n(k))

    def tr(k):
        return T.composite(n(k), n(k - 1))

    if n.is_identity():
        return T
    if T.is_lazy:
        return Tower.lazy(lev, tr, max(0, _inverse_floor(n, T.horizon)))
    if not T.is_periodic:
        top = _inverse_floor(n, T.N)
        if top < 0:
            raise DepthError("reindexing starts beyond the truncated tower", required=n(0))
        return Tower([lev(k) for k in range(top + 1)], [tr(k) for k in range(1, top + 1)], check=False)
    K = len(n.values) - 1
    k0 = K + 1
    while n(k0 - 1) < T.N - T.P + 1 or n(k0) <= T.N:
        k0 += 1
    Nn = k0 + T.P - 1
    levels = [lev(k) for k in range(Nn + 1)]
    trans = [tr(k) for k in range(1, Nn + 1)]
    return Tower(levels, trans, T.P, tr(Nn + 1), check=False)


# ---------------------------------------------------------------------------
# Pro-maps


class ProMap:
    """Levelwise maps ``phi_k : X_{n_k} -> Y_k`` commuting with transitions.

    Given periodic towers and level maps that repeat with the common period,
    the map is periodic and every decision is exact.  Otherwise decisions are
    made up to ``horizon``.
    """

    def __init__(self, source, target, reindexing=None, maps=None, check=True, horizon=None):
        self.source = source
        self.target = target
        self.reindexing = reindexing or Reindexing.identity()
        self.src_re = reindex(source, self.reindexing)
        fn = maps if callable(maps) else maps.__getitem__
        self._fn = fn
        self.shape = None
        self.maps = None
        shape = self._common_shape()
        if shape is not None:
            N, P = shape
            levels = [fn(k) for k in range(N + 1)]
            periodic = True
            for k in range(N + 1, N + P + 1):
                try:
                    extra = fn(k)
                except IndexError:
                    break
                if not maps_equal(extra, levels[N - P + 1 + ((k - N - 1) % P)]):
                    periodic = False
                    break
            if periodic:
                self.shape = shape
                self.maps = levels
        if self.shape is None:
            self.horizon = horizon if horizon is not None else self._default_horizon()
        else:
            self.horizon = horizon
        if check:
            bad = self.commutation_failures()
            if bad:
                raise NotWellDefinedError(f"pro-map does not commute with transitions at level {bad[0]}")

    def _common_shape(self):
        A, B = self.src_re, self.target
        if not (A.is_periodic and B.is_periodic):
            return None
        P = lcm(A.P, B.P)
        N = max(A.N, B.N, A.N - A.P + P, B.N - B.P + P)
        return N, P

    def _default_horizon(self):
        lims = [t.depth_limit() for t in (self.src_re, self.target)]
        lims = [x for x in lims if x is not None]
        if lims:
            return min(lims)
        N = max(self.src_re.N, self.target.N)
        P = lcm(self.src_re.P, self.target.P)
        return N + 3 * P + 4

    @property
    def is_periodic(self):
        return self.shape is not None

    def fold(self, k):
        N, P = self.shape
        return k if k <= N else N - P + 1 + ((k - N - 1) % P)

    def at(self, k):
        if self.shape is not None:
            return self.maps[self.fold(k)]
        return self._fn(k)

    def checked_levels(self):
        if self.shape is not None:
            N, P = self.shape
            return range(N + P + 1)
        return range(self.horizon + 1)

    def commutation_failures(self):
        out = []
        for k in self.checked_levels():
            if k and not maps_equal(self.target.transition(k) @ self.at(k),
                                    self.at(k - 1) @ self.src_re.transition(k)):
                out.append(k)
        return out

    def homology(self, k):
        return ProMap(self.source.homology(k), self.target.homology(k), self.reindexing,
                      lambda j: self.at(j).on_homology(k), check=False, horizon=self.horizon)

    def compose(self, other):
        """``self o other`` for ``other: W -> X`` and ``self: X -> Y``."""
        n = self.reindexing
        comp = other.reindexing.compose(n)
        return ProMap(other.source, self.target, comp, lambda k: self.at(k) @ other.at(n(k)),
                      check=False, horizon=_min_opt(self.horizon, other.horizon))

    @classmethod
    def identity(cls, T, horizon=None):
        return cls(T, T, Reindexing.identity(), lambda k: _identity(T.level(k)), check=False,
                   horizon=horizon)

    @classmethod
    def canonical(cls, T, n, horizon=None):
        """``reindex(T, n) -> T`` with components ``X_{n_k} -> X_k``."""
        R = reindex(T, n)
        return cls(R, T, Reindexing.identity(), lambda k: T.composite(n(k), k), check=False,
                   horizon=horizon)


def _min_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def kernel_tower(phi):
    A = phi.src_re
    cache = {}

    def data(k):
        if k not in cache:
            cache[k] = kernel(phi.at(k))
        return cache[k]

    def trans(k):
        (K, inc), (Kp, incp) = data(k), data(k - 1)
        f = A.transition(k) @ inc
        sol = Solver(incp)
        return map_from_columns(K, Kp, [sol.solve(f.matrix.col(j)) for j in range(K.n)])

    return _derived_tower(phi, lambda k: data(k)[0], trans)


def cokernel_tower(phi):
    B = phi.target
    cache = {}

    def data(k):
        if k not in cache:
            cache[k] = cokernel(phi.at(k))
        return cache[k]

    def trans(k):
        (Q, _, sec), (Qp, projp, _) = data(k), data(k - 1)
        f = B.transition(k)
        return ModuleMap(Q, Qp, (projp.matrix @ f.matrix) @ sec, f.den, check=False)

    return _derived_tower(phi, lambda k: data(k)[0], trans)


def _derived_tower(phi, lev, trans):
    if phi.shape is None:
        return Tower.lazy(lev, trans, phi.horizon)
    N, P = phi.shape
    return Tower([lev(k) for k in range(N + 1)], [trans(k) for k in range(1, N + 1)], P, trans(N + 1),
                 check=False)


@dataclass
class ProZero:
    verdict: object
    levels: dict
    failing_level: object = None
    reason: str = ""
    exact: bool = True


def pro_zero(T, horizon=None):
    """Find, for each ``k``, a level ``m >= k`` with ``X_m -> X_k`` zero."""
    found = {}
    if T.is_periodic:
        hz = horizon
        for k in range(T.N + 1):
            ch = image_chain(T, k)
            if ch.stable is False:
                return ProZero(False, found, k, "image chain never stabilizes")
            if ch.value is None:
                la = _loop(T)
                if _rank_q(_free_block(T.composite(T.N, k)) @ la.eventual_image()):
                    return ProZero(False, found, k, "stable image has positive rank")
                raise UndeterminedError("stable image is not evaluable", level=k)
            if not ch.value.is_zero():
                return ProZero(False, found, k, f"stable image at level {k} is {ch.value.module}")
            m = k + ch.stabilizes_at
            if hz is not None and m > hz:
                raise UndeterminedError(f"level {k} needs level {m}, beyond the horizon {hz}", level=k)
            found[k] = m
        return ProZero(True, found)
    hz = T.depth_limit() if horizon is None else min(horizon, T.depth_limit())
    top = hz // 2
    for k in range(top + 1):
        m = next((m for m in range(k, hz + 1) if _zero_map(T.composite(m, k))), None)
        if m is None:
            raise UndeterminedError(f"no vanishing transition from level {k} within the horizon {hz}",
                                    level=k)
        found[k] = m
    return ProZero(True, found, exact=False)


@dataclass
class ProIsoResult:
    verdict: bool
    witness: dict = None
    failing_level: object = None
    reason: str = ""
    exact: bool = True

    def __bool__(self):
        return bool(self.verdict)


def is_pro_isomorphism(phi, horizon=None):
    """Decide whether a module pro-map is a pro-isomorphism, with inverse witnesses.

    The witness at level ``k`` is ``(m, psi)`` with ``psi : Y_m -> X_{n_k}``
    such that ``phi_k psi`` and ``psi phi_m`` are the tower composites.
    """
    kz = pro_zero(kernel_tower(phi), horizon)
    if not kz.verdict:
        return ProIsoResult(False, None, kz.failing_level, "kernel tower is not pro-zero: " + kz.reason)
    cz = pro_zero(cokernel_tower(phi), horizon)
    if not cz.verdict:
        return ProIsoResult(False, None, cz.failing_level, "cokernel tower is not pro-zero: " + cz.reason)
    witness = {}
    for k in sorted(kz.levels):
        try:
            witness[k] = _witness_level(phi, kz.levels, cz.levels, k)
        except DepthError:
            if phi.is_periodic:
                raise
            break
    return ProIsoResult(True, witness, exact=kz.exact and cz.exact)


def _offset(levels, phi, k):
    if k in levels:
        return levels[k] - k
    if phi.is_periodic:
        j = phi.fold(k)
        return levels[j] - j
    raise DepthError(f"no witness data for level {k}", required=k)


def _witness_level(phi, klev, clev, k):
    A, B = phi.src_re, phi.target
    k1 = k + _offset(klev, phi, k)
    m = k1 + _offset(clev, phi, k1)
    t = B.composite(m, k1)
    sol = Solver(phi.at(k1))
    tx = A.composite(k1, k)
    cols = []
    for j in range(t.source.n):
        res = sol.solve(t.matrix.col(j))
        if res is None:
            raise StructuralError(f"cannot lift through level {k1}")
        x, den = res
        v, d2 = tx.apply(x)
        cols.append((v, den * d2 * t.den))
    psi = map_from_columns(B.level(m), A.level(k), cols)
    if not (phi.at(k) @ psi == B.composite(m, k)) or not (psi @ phi.at(m) == A.composite(m, k)):
        raise StructuralError(f"witness triangles fail at level {k}")
    return m, psi


def inverse_promap(phi, result):
    """A pro-map ``Y -> X`` inverse to a periodic pro-isomorphism ``phi``."""
    if not result.verdict:
        raise ValueError("only pro-isomorphisms have inverses")
    if not phi.is_periodic or phi.reindexing.offset_bound() is None:
        raise ValueError("inverse construction needs a periodic map with bounded reindexing offset")
    kz = pro_zero(kernel_tower(phi))
    cz = pro_zero(cokernel_tower(phi))
    c = 0
    N, P = phi.shape
    for k in range(N + 2 * P + 1):
        k1 = k + _offset(kz.levels, phi, k)
        c = max(c, k1 + _offset(cz.levels, phi, k1) - k)
    n = phi.reindexing
    X, Y = phi.source, phi.target

    def lvl(k):
        m, psi = _witness_level(phi, kz.levels, cz.levels, k)
        return X.composite(n(k), k) @ psi @ Y.composite(k + c, m)

    return ProMap(Y, X, Reindexing([c], 1), lvl, check=True)


def is_pro_contractible(T, horizon=None):
    """Every homology tower of a complex tower is pro-zero."""
    return all(pro_zero(T.homology(k), horizon).verdict for k in T.homology_degrees())


@dataclass
class WeakEquivalenceResult:
    verdict: bool
    per_degree: dict
    failing_degree: object = None

    def __bool__(self):
        return bool(self.verdict)


def is_pro_weak_equivalence(phi, horizon=None, degrees=None):
    """Pro-isomorphism on every homology tower."""
    if degrees is None:
        degrees = sorted(set(phi.source.homology_degrees()) | set(phi.target.homology_degrees()))
    per = {}
    for k in degrees:
        res = is_pro_isomorphism(phi.homology(k), horizon)
        per[k] = res
        if not res.verdict:
            return WeakEquivalenceResult(False, per, k)
    return WeakEquivalenceResult(True, per)


def is_fibre_sequence(i, g):
    """``F -i-> X -g-> B`` with ``g i = 0`` on chains is a fibre sequence.

    The comparison ``F -> fib(g)``, ``x -> (0, i x)``, must be a
    quasi-isomorphism.
    """
    F = i.source
    if not _zero_map(g @ i):
        raise StructuralError("fibre sequences need g o i = 0 on chains")
    fd = fibre(g)
    comp = {}
    for k in F.modules:
        top = g.target.module(k + 1).n
        M = Mat.zeros(top, F.module(k).n).vstack(i.at(k).matrix)
        comp[k] = ModuleMap(F.module(k), fd.complex.module(k), M, i.at(k).den, check=False)
    return ChainMap(F, fd.complex, comp).is_quasi_isomorphism()


@dataclass
class TwoOfThreeReport:
    base_equivalence: bool
    fibre_contractible: bool
    consistent: bool
    failing_side: str = ""


def two_of_three_contractible(fib, tot, base, maps, horizon=None):
    """``g`` is a pro-weak-equivalence exactly when the fibre tower is pro-contractible.

    ``maps = (i, g)`` are callables giving the chain maps ``fib_s -> tot_s``
    and ``tot_s -> base_s``.
    """
    i_fn, g_fn = maps
    tops = [T.N + T.P if T.is_periodic else T.depth_limit() for T in (fib, tot, base)]
    for s in range(min(tops) + 1):
        if not is_fibre_sequence(i_fn(s), g_fn(s)):
            raise StructuralError(f"level {s} is not a fibre sequence")
    phi = ProMap(tot, base, Reindexing.identity(), g_fn, check=False, horizon=horizon)
    weq = bool(is_pro_weak_equivalence(phi, horizon))
    contr = is_pro_contractible(fib, horizon)
    sides = [name for name, ok in (("base map", weq), ("fibre tower", contr)) if not ok]
    return TwoOfThreeReport(weq, contr, weq == contr, " and ".join(sides))


# ---------------------------------------------------------------------------
# Tensoring and Postnikov towers


def tensor_tower(T, E):
    """Levelwise ``X_s (x) E``."""
    idE = ChainMap.identity(E)
    cache = {}

    def lev(X):
        key = id(X)
        if key not in cache:
            cache[key] = (X, tensor(X, E))
        return cache[key][1]

    return T.map_levels(lev, lambda f, s: tensor_chain_maps(f, idE, lev(f.source), lev(f.target)))


def tensor_promap(phi, E):
    """``phi (x) E`` between the tensored towers."""
    S = tensor_tower(phi.source, E)
    T = tensor_tower(phi.target, E)
    Sr = reindex(S, phi.reindexing)
    idE = ChainMap.identity(E)
    return ProMap(S, T, phi.reindexing,
                  lambda k: tensor_chain_maps(phi.at(k), idE, Sr.level(k), T.level(k)),
                  check=False, horizon=phi.horizon)


def postnikov_tower(X):
    """``s -> tau_{<=s} X`` with the projections from ``X``; eventually constant."""
    sup = X.support
    top = max(0, sup[1]) if sup else 0
    truncs = [truncate_below(X, s) for s in range(top + 1)]
    levels = [t.complex for t in truncs]
    trans = [_truncation_transition(levels[s], levels[s - 1], X, s) for s in range(1, top + 1)]
    T = Tower(levels, trans, 1, ChainMap.identity(levels[top]), check=False)
    return T, [t.map for t in truncs]


def _truncation_transition(Ts, Ts1, X, s):
    """``tau_{<=s} X -> tau_{<=s-1} X``."""
    comps = {k: ModuleMap.identity(m) for k, m in Ts1.modules.items() if k < s - 1}
    if s - 1 in Ts1.modules:
        _, proj, _ = cokernel(X.d(s))
        comps[s - 1] = ModuleMap(Ts.module(s - 1), Ts1.module(s - 1), proj.matrix, check=False)
    return ChainMap(Ts, Ts1, comps, check=False)


def postnikov_projection(X):
    """Pro-map from the constant tower ``{X}`` to its Postnikov tower."""
    T, projs = postnikov_tower(X)
    top = len(projs) - 1
    return ProMap(Tower.constant(X), T, Reindexing.identity(), lambda k: projs[min(k, top)])
