"""Independent brute-force oracles.

Everything here works on explicit elements (tuples of residues) or on
textbook formulas, and never calls into the library's linear algebra.
"""

import itertools
from math import gcd

from sympy import Matrix
from sympy.matrices.normalforms import smith_normal_form
from sympy.polys.domains import ZZ as SZZ


# ---------------------------------------------------------------------------
# Finite abelian groups as sets of tuples


def elements(orders):
    return list(itertools.product(*[range(d) for d in orders]))


def apply(rows, x, tgt_orders):
    """Image of the coordinate vector ``x`` under an integer matrix, reduced into the target."""
    out = []
    for i, r in enumerate(rows):
        v = sum(a * b for a, b in zip(r, x))
        d = tgt_orders[i]
        out.append(v % d if d else v)
    return tuple(out)


def add(x, y, orders):
    return tuple((a + b) % d for a, b, d in zip(x, y, orders))


def scale(n, x, orders):
    return tuple((n * a) % d for a, d in zip(x, orders))


def span(gens, orders):
    """Subgroup generated by ``gens`` by closure."""
    zero = tuple(0 for _ in orders)
    seen = {zero}
    frontier = [zero]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = add(x, g, orders)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return seen


def generated(xs, orders):
    """Subgroup generated by the iterable ``xs``, adding only elements not already spanned."""
    S = {tuple(0 for _ in orders)}
    gens = []
    for x in xs:
        if x not in S:
            gens.append(x)
            S = span(gens, orders)
    return S


def _prime_powers_up_to(n):
    out = []
    for p in range(2, n + 1):
        if all(p % q for q in range(2, int(p ** 0.5) + 1)):
            q = p
            while q <= n:
                out.append(q)
                q *= p
    return out


def subquotient_signature(Z, B, orders, bound=None):
    """``n -> |(Z/B)[n]|`` for prime powers ``n``; determines ``Z/B`` up to isomorphism."""
    size = len(Z) // len(B)
    bound = bound or max(size, 2)
    sig = {}
    for n in _prime_powers_up_to(bound):
        cnt = sum(1 for z in Z if scale(n, z, orders) in B)
        sig[n] = cnt // len(B)
    return size, sig


def factors_signature(factors, bound):
    """The same signature computed from invariant factors of a finite group."""
    size = 1
    for d in factors:
        size *= d
    sig = {}
    for n in _prime_powers_up_to(bound):
        v = 1
        for d in factors:
            v *= gcd(n, d)
        sig[n] = v
    return size, sig


def module_signature(M, bound):
    inv = M.invariant_factors()
    if any(d == 0 for d in inv):
        raise ValueError("infinite module")
    return factors_signature(inv, bound)


# ---------------------------------------------------------------------------
# Complexes of finite groups


def finite_homology(mods, diffs, k):
    """``H_k`` of a complex of finite groups: ``mods[k]`` orders, ``diffs[k]`` rows of ``d_k``."""
    Ck = mods.get(k, ())
    if not Ck:
        return (), {(): None}, {()}
    low = mods.get(k - 1, ())
    Z = [x for x in elements(Ck) if k not in diffs or not low or all(v == 0 for v in apply(diffs[k], x, low))]
    up = mods.get(k + 1, ())
    if up and (k + 1) in diffs:
        B = span([apply(diffs[k + 1], e, Ck) for e in _unit_vectors(up)], Ck)
    else:
        B = {tuple(0 for _ in Ck)}
    return Ck, Z, B


def _unit_vectors(orders):
    n = len(orders)
    return [tuple(1 if i == j else 0 for i in range(n)) for j in range(n)]


def finite_homology_signature(mods, diffs, k, bound):
    Ck, Z, B = finite_homology(mods, diffs, k)
    if not Ck:
        return factors_signature([], bound)
    return subquotient_signature(Z, B, Ck, bound)


# ---------------------------------------------------------------------------
# Integer complexes through sympy


def snf_diagonal(rows, m, n):
    if m == 0 or n == 0:
        return []
    S = smith_normal_form(Matrix(rows), domain=SZZ)
    return [abs(S[i, i]) for i in range(min(m, n)) if S[i, i] != 0]


def free_homology(ranks, diffs, k):
    """``(rank, torsion)`` of ``H_k`` of a complex of free modules; ``diffs[k]`` is ``d_k``."""
    n = ranks.get(k, 0)
    out_rank = len(snf_diagonal(diffs[k], ranks.get(k - 1, 0), n)) if k in diffs else 0
    inc = snf_diagonal(diffs[k + 1], n, ranks.get(k + 1, 0)) if (k + 1) in diffs else []
    return n - out_rank - len(inc), sorted(d for d in inc if d > 1)


def mod_reduction_prediction(h_k, h_km1, m):
    """Invariant factors of ``H_k(C/m)`` from ``H_k(C)`` and ``H_(k-1)(C)`` by universal coefficients."""
    rank, tors = h_k
    rank1, tors1 = h_km1
    out = [m] * rank + [gcd(d, m) for d in tors] + [gcd(d, m) for d in tors1]
    return [d for d in out if d > 1]


def kunneth(hc, hd, n):
    """Invariant factors of ``H_n(C (x)^L D)`` over ``Z`` from the homology of each side.

    ``hc``/``hd`` map degree -> list of invariant factors (0 for a free summand).
    """
    out = []
    for i, A in hc.items():
        for j, B in hd.items():
            if i + j == n:
                out += [gcd(a, b) for a in A for b in B]
            if i + j == n - 1:
                out += [gcd(a, b) for a in A for b in B if a and b]
    return sorted(d for d in out if d != 1)


def same_factors(a, b):
    """Equality of two invariant-factor lists as groups (primary decomposition)."""
    return _primary(a) == _primary(b)


def _primary(fs):
    out = []
    free = 0
    for d in fs:
        if d == 0:
            free += 1
            continue
        n, p = d, 2
        while n > 1:
            if n % p == 0:
                q = 1
                while n % p == 0:
                    n //= p
                    q *= p
                out.append(q)
            p += 1
    return free, sorted(out)


# ---------------------------------------------------------------------------
# Towers of finite groups (levels in degree 0)


class FiniteTower:
    """Explicit levels ``G_s`` (orders) and transition matrices ``G_s -> G_(s-1)``.

    ``tail`` is the matrix of the period-1 tail ``G_N -> G_N``.
    """

    def __init__(self, levels, trans, tail):
        self.levels = levels
        self.trans = trans
        self.tail = tail
        self.N = len(levels) - 1

    def orders(self, s):
        return self.levels[min(s, self.N)]

    def matrix(self, s):
        return self.trans[s - 1] if s <= self.N else self.tail

    def step(self, s, x):
        return apply(self.matrix(s), x, self.orders(s - 1))

    def composite_image(self, s, t, X):
        """Image of the set ``X`` in ``G_t`` along ``G_s -> G_t``."""
        cur = set(X)
        for u in range(s, t, -1):
            cur = {self.step(u, x) for x in cur}
        return cur

    def image_in(self, s, t):
        """Image of ``G_s -> G_t``, spanned by the images of the standard generators."""
        return span(list(self.composite_image(s, t, _unit_vectors(self.orders(s)))), self.orders(t))

    def stable_image(self, s):
        """Intersection of the images ``G_(s+r) -> G_s``; stabilizes within the tail."""
        prev = None
        r = 0
        while True:
            cur = self.image_in(s + r, s)
            if cur == prev and s + r > self.N + 1:
                return cur
            prev = cur
            r += 1

    def loop_stable(self):
        """Stable image of the tail endomorphism, which is the limit of the tower."""
        return self.stable_image(self.N)

    def kernel(self, s):
        """Elements of ``G_s`` mapping to zero in ``G_(s-1)``; all of ``G_0`` at ``s = 0``."""
        G = elements(self.orders(s))
        if s == 0:
            return G
        zero = tuple(0 for _ in self.orders(s - 1))
        return [x for x in G if self.step(s, x) == zero]

    def cokernel_data(self, s):
        """``(ambient orders, image subgroup)`` presenting ``coker(G_s -> G_(s-1))``."""
        if s == 0:
            return (), {()}
        return self.orders(s - 1), {self.step(s, x) for x in elements(self.orders(s))}

    def page(self, s, k, r, bound=64):
        """Signature of ``E_r^{s,s+k}`` for ``k`` in ``{0, -1}`` by the exact-couple formulas."""
        if k == 0:
            D = self.image_in(s + r - 1, s)
            Z = [x for x in self.kernel(s) if x in D]
            return subquotient_signature(Z, {tuple(0 for _ in self.orders(s))}, self.orders(s), bound)
        if k == -1:
            amb, im = self.cokernel_data(s)
            if not amb:
                return factors_signature([], bound)
            # boundaries: kernel of G_(s-1) -> G_(s-r) pushed into the cokernel
            if s - r < 0:
                K = elements(amb)
            else:
                zero = tuple(0 for _ in self.orders(s - r))
                K = [x for x in elements(amb) if _push(self, s - 1, s - r, x) == zero]
            B = generated(list(im) + K, amb)
            return subquotient_signature(elements(amb), B, amb, bound)
        raise ValueError("module towers only have k in {0, -1}")

    def differential_image_size(self, s, r):
        """``|im d_r|`` for ``d_r : E_r^{s,s} -> E_r^{s+r,s+r-1}``."""
        D = self.image_in(s + r - 1, s)
        Z = [x for x in self.kernel(s) if x in D]
        amb, im = self.cokernel_data(s + r)
        if not amb:
            return 1
        zero_r = tuple(0 for _ in self.orders(s))
        # boundaries on the target page
        if s < 0:
            K = elements(amb)
        else:
            K = [x for x in elements(amb) if _push(self, s + r - 1, s, x) == zero_r]
        B = generated(list(im) + K, amb)
        classes = set()
        for z in Z:
            y = next(y for y in itertools.product(*[range(d) for d in self.orders(s + r - 1)])
                     if _push(self, s + r - 1, s, y) == z)
            classes.add(frozenset(add(y, b, amb) for b in B))
        return len(classes)


def _push(T, s, t, x):
    for u in range(s, t, -1):
        x = T.step(u, x)
    return x


# ---------------------------------------------------------------------------
# Free Boolean algebra


def boolean_value(e, valuation, partner):
    """Value of an expression tree under ``valuation`` on representative atoms.

    ``partner`` maps each atom to its complement atom; an atom outside the
    valuation takes the negated value of its partner.
    """
    kind = e.kind
    if kind == "top":
        return True
    if kind == "bottom":
        return False
    if kind == "atom":
        if e.name in valuation:
            return valuation[e.name]
        return not valuation[partner[e.name]]
    if kind == "comp":
        return not boolean_value(e.args[0], valuation, partner)
    vals = [boolean_value(a, valuation, partner) for a in e.args]
    return any(vals) if kind == "join" else all(vals)


def truth_table(e, reps, partner):
    return tuple(boolean_value(e, dict(zip(reps, bits)), partner)
                 for bits in itertools.product((False, True), repeat=len(reps)))


# ---------------------------------------------------------------------------
# Homomorphisms between finite groups by generator images


def homs(src, tgt):
    """Every additive map as a tuple of images of the standard generators."""
    choices = []
    for a in src:
        choices.append([y for y in elements(tgt) if all((a * v) % d == 0 for v, d in zip(y, tgt))])
    return list(itertools.product(*choices))


def hom_apply(images, x, tgt):
    out = [0] * len(tgt)
    for c, y in zip(x, images):
        for i, v in enumerate(y):
            out[i] += c * v
    return tuple(v % d for v, d in zip(out, tgt))


def cyclic_ring_actions(m, orders):
    """Unital actions of ``Z/m`` on a finite group, enumerated through the image of ``1``."""
    G = elements(orders)
    count = 0
    for e in homs(orders, orders):
        unital = all(hom_apply(e, x, orders) == x for x in G)
        well_defined = all(scale(m, hom_apply(e, x, orders), orders) == tuple(0 for _ in orders) for x in G)
        if unital and well_defined:
            count += 1
    return count


def cyclic_linearity(m, src, tgt):
    """Every additive ``src -> tgt`` commutes with the ``Z/m`` actions, checked on all elements."""
    G = elements(src)
    for f in homs(src, tgt):
        for r in range(m):
            for x in G:
                if hom_apply(f, scale(r, x, src), tgt) != scale(r, hom_apply(f, x, tgt), tgt):
                    return False
    return True


# ---------------------------------------------------------------------------
# Cones, Kunneth inputs and mod-p cone towers


def oracle_cone(so, sd, to, td, maps):
    """Cone ``Y_k (+) X_(k-1)`` with ``d = [[dY, f], [0, -dX]]`` built by hand."""
    degs = set(to) | {k + 1 for k in so}
    orders = {k: tuple(to.get(k, ())) + tuple(so.get(k - 1, ())) for k in degs}
    diffs = {}
    for k in degs:
        if (k - 1) not in degs:
            continue
        ty, tx = len(to.get(k, ())), len(so.get(k - 1, ()))
        by, bx = len(to.get(k - 1, ())), len(so.get(k - 2, ()))
        rows = [[0] * (ty + tx) for _ in range(by + bx)]
        for i in range(by):
            for j in range(ty):
                rows[i][j] = td[k][i][j] if k in td else 0
            for j in range(tx):
                rows[i][ty + j] = maps[k - 1][i][j] if (k - 1) in maps else 0
        for i in range(bx):
            for j in range(tx):
                rows[by + i][ty + j] = -sd[k - 1][i][j] if (k - 1) in sd else 0
        diffs[k] = rows
    return orders, diffs


def finite_factors(orders, diffs, k):
    """Invariant factors of a finite homology group recovered from its enumeration signature."""
    size, sig = finite_homology_signature(orders, diffs, k, 64)
    out = []
    for q in sorted(sig):
        p = min(d for d in range(2, q + 1) if q % d == 0)
        lower = sig.get(q // p, 1) if q != p else 1
        # number of cyclic p-primary summands of order >= q
        cnt = 0
        ratio = sig[q] // lower
        while ratio > 1:
            ratio //= p
            cnt += 1
        out += [(q, cnt)]
    # summands of exact order q: (#>= q) - (#>= q*p)
    res = []
    for q, cnt in out:
        p = min(d for d in range(2, q + 1) if q % d == 0)
        higher = dict(out).get(q * p, 0)
        res += [q] * (cnt - higher)
    assert product(res) == size
    return res


def product(xs):
    out = 1
    for x in xs:
        out *= x
    return out


def mod_p_cone_tower(p, levels):
    """Levels ``H_0 cone(Z --p^(n+1)--> Z)`` from explicit free cones via Smith normal form.

    The cone-to-cone maps are the identity on the bottom generator, so the
    transitions on ``H_0`` send generator to generator.
    """
    orders = []
    for n in range(levels):
        rank, tors = free_homology({0: 1, 1: 1}, {1: [[p ** (n + 1)]]}, 0)
        assert rank == 0 and free_homology({0: 1, 1: 1}, {1: [[p ** (n + 1)]]}, 1) == (0, [])
        orders.append(tuple(tors))
    return FiniteTower(orders, [[[1]] for _ in range(1, levels)], [[1]])
