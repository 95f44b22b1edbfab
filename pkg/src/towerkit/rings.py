"""Graded commutative rings presented by generators and relations in a degree window.

Each degree piece ``R_d`` is the free module on monomials of degree ``d``
modulo the relations multiplied by monomials, and is stored in diagonal
normal form.  Elements are coordinate vectors on that normal form.
"""

import re
from functools import cached_property
from itertools import product as iproduct

from .complexes import ChainMap, Complex
from .errors import DegreeError, ShapeError, UnsupportedBaseError
from .linalg import Mat
from .modules import BaseRing, ModuleMap, present, tensor_modules

def parse_polynomial(text, names):
    """Parse ``"2*x^2*y - 3*z + 4"`` into ``{exponent tuple: coefficient}``."""
    index = {n: i for i, n in enumerate(names)}
    poly = {}
    s = text.replace(" ", "")
    if not s:
        raise ValueError("empty polynomial")
    terms = re.findall(r"[+-]?[^+-]+", s)
    if "".join(terms) != s:
        raise ValueError(f"cannot parse polynomial {text!r}")
    for term in terms:
        sign = -1 if term.startswith("-") else 1
        term = term.lstrip("+-")
        coeff = 1
        exps = [0] * len(names)
        for factor in term.split("*"):
            if not factor:
                raise ValueError(f"cannot parse polynomial {text!r}")
            if factor.isdigit():
                coeff *= int(factor)
                continue
            name, _, power = factor.partition("^")
            if name not in index:
                raise ValueError(f"unknown generator {name!r} in {text!r}")
            exps[index[name]] += int(power) if power else 1
        key = tuple(exps)
        poly[key] = poly.get(key, 0) + sign * coeff
    return {k: v for k, v in poly.items() if v}


class GradedRing:
    """Commutative (or Koszul-signed) graded ring over a base, cut to a degree window.

    Generators must have nonzero degrees of a single sign so every degree
    piece is finitely generated.
    """

    def __init__(self, base, window=(0, 0), generators=(), relations=(), sign_rule="commutative"):
        if not isinstance(base, BaseRing):
            raise UnsupportedBaseError(f"unsupported base {base!r}")
        a, b = window
        if not a <= 0 <= b:
            raise ShapeError("the degree window must contain 0")
        if sign_rule not in ("commutative", "koszul"):
            raise ValueError(f"unknown sign rule {sign_rule!r}")
        self.base = base
        self.window = (int(a), int(b))
        self.names = [g[0] for g in generators]
        self.degrees = [int(g[1]) for g in generators]
        if len(set(self.names)) != len(self.names):
            raise ShapeError("generator names must be distinct")
        if any(d == 0 for d in self.degrees):
            raise DegreeError("generators must have nonzero degree")
        if self.degrees and not (all(d > 0 for d in self.degrees) or all(d < 0 for d in self.degrees)):
            raise DegreeError("generator degrees must share a sign")
        self.sign_rule = sign_rule
        self.relations = []
        for r in relations:
            poly = parse_polynomial(r, self.names) if isinstance(r, str) else {tuple(k): int(v) for k, v in r.items()}
            degs = {self.mono_degree(m) for m in poly}
            if len(degs) > 1:
                raise DegreeError(f"relation {r!r} is not homogeneous")
            if poly:
                self.relations.append((degs.pop(), poly))
        self._pieces = {}

    @classmethod
    def from_base(cls, base):
        return cls(base)

    def __repr__(self):
        gens = ", ".join(f"{n}:{d}" for n, d in zip(self.names, self.degrees))
        return f"GradedRing({self.base}; {gens}; window={self.window})"

    def mono_degree(self, m):
        return sum(e * d for e, d in zip(m, self.degrees))

    def in_window(self, d):
        return self.window[0] <= d <= self.window[1]

    def monomials(self, d):
        """Exponent tuples of total degree ``d``."""
        degs = [abs(g) for g in self.degrees]
        sign = 1 if not self.degrees or self.degrees[0] > 0 else -1
        target = d * sign
        if target < 0:
            return []
        out = []

        def rec(i, rem, acc):
            if i == len(degs):
                if rem == 0:
                    out.append(tuple(acc))
                return
            for e in range(rem // degs[i] + 1):
                rec(i + 1, rem - e * degs[i], acc + [e])

        rec(0, target, [])
        return sorted(out)

    def _odd(self, i):
        return self.sign_rule == "koszul" and self.degrees[i] % 2 != 0

    def mono_mul(self, m1, m2):
        """Product of monomials as ``(sign, monomial)``."""
        sign = 1
        if self.sign_rule == "koszul":
            # moving each odd factor of m2 past the odd factors of m1 with larger index
            for a, e2 in enumerate(m2):
                if e2 and self._odd(a):
                    crossed = sum(m1[b] for b in range(a + 1, len(m1)) if self._odd(b))
                    if (crossed * e2) % 2:
                        sign = -sign
        return sign, tuple(x + y for x, y in zip(m1, m2))

    def piece(self, d):
        """``(module, P, S, monomials)`` for ``R_d``."""
        if not self.in_window(d):
            raise DegreeError(f"degree {d} is outside the window {self.window}")
        hit = self._pieces.get(d)
        if hit is not None:
            return hit
        monos = self.monomials(d)
        idx = {m: i for i, m in enumerate(monos)}
        cols = []
        for e, poly in self.relations:
            for m in self.monomials(d - e):
                c = [0] * len(monos)
                for mono, coeff in poly.items():
                    s, prod = self.mono_mul(mono, m)
                    c[idx[prod]] += s * coeff
                cols.append(c)
        if self.sign_rule == "koszul":
            for m in monos:
                if any(e >= 2 and self._odd(i) for i, e in enumerate(m)):
                    c = [0] * len(monos)
                    c[idx[m]] = 2
                    cols.append(c)
        rel = Mat.from_columns(cols, len(monos)) if cols else Mat.zeros(len(monos), 0)
        mod, P, S = present((0,) * len(monos), rel, self.base)
        hit = (mod, P, S, monos)
        self._pieces[d] = hit
        return hit

    def module(self, d):
        return self.piece(d)[0]

    def window_degrees(self):
        return range(self.window[0], self.window[1] + 1)

    def element(self, d, coords):
        return RingElement(self, d, coords)

    def from_poly(self, poly, degree=None):
        if isinstance(poly, str):
            poly = parse_polynomial(poly, self.names)
        if isinstance(poly, int):
            poly = {(0,) * len(self.names): poly}
        degs = {self.mono_degree(m) for m in poly}
        if len(degs) > 1:
            raise DegreeError("element is not homogeneous")
        d = degs.pop() if degs else (degree or 0)
        mod, P, S, monos = self.piece(d)
        idx = {m: i for i, m in enumerate(monos)}
        v = [0] * len(monos)
        for m, c in poly.items():
            v[idx[m]] += c
        return RingElement(self, d, P.apply(v))

    def one(self):
        return self.from_poly(1)

    def zero(self, d=0):
        return RingElement(self, d, [0] * self.module(d).n)

    def generator(self, name):
        i = self.names.index(name)
        m = [0] * len(self.names)
        m[i] = 1
        return self.from_poly({tuple(m): 1})

    def mul(self, x, y):
        d = x.degree + y.degree
        if not self.in_window(d):
            raise DegreeError(f"product degree {d} leaves the window {self.window}")
        _, _, Sx, mx = self.piece(x.degree)
        _, _, Sy, my = self.piece(y.degree)
        px = Sx.apply(x.coords)
        py = Sy.apply(y.coords)
        poly = {}
        for a, ca in zip(mx, px):
            if not ca:
                continue
            for b, cb in zip(my, py):
                if not cb:
                    continue
                s, m = self.mono_mul(a, b)
                poly[m] = poly.get(m, 0) + s * ca * cb
        if not poly:
            return self.zero(d)
        return self.from_poly(poly, d)

    def multiplication_map(self, i, j):
        """``R_i (x) R_j -> R_{i+j}`` on the underived tensor product."""
        Ri, Rj = self.module(i), self.module(j)
        T, index = tensor_modules(Ri, Rj)
        tgt = self.module(i + j)
        M = Mat.zeros(tgt.n, T.n)
        for (a, b), col in index.items():
            ea = RingElement(self, i, [1 if t == a else 0 for t in range(Ri.n)])
            eb = RingElement(self, j, [1 if t == b else 0 for t in range(Rj.n)])
            prod = self.mul(ea, eb).coords
            for r, x in enumerate(prod):
                M.rows[r][col] = x
        return ModuleMap(T, tgt, M)

    def tensor_square_pieces(self, d):
        """Pairs ``(i, j)`` with ``i + j = d`` inside the window and nonzero ``R_i (x) R_j``."""
        out = []
        for i in self.window_degrees():
            j = d - i
            if self.in_window(j):
                T, _ = tensor_modules(self.module(i), self.module(j))
                if T.n:
                    out.append((i, j))
        return out

    def check_window_closed(self):
        """Raise unless every nonzero ``R_i (x) R_j`` lands in the window."""
        for i in self.window_degrees():
            for j in self.window_degrees():
                if not self.in_window(i + j):
                    T, _ = tensor_modules(self.module(i), self.module(j))
                    if T.n:
                        raise DegreeError(
                            f"window {self.window} is too small for the tensor square (degrees {i}, {j})")

    @cached_property
    def size(self):
        """Number of elements of the whole window, ``None`` if infinite."""
        total = 1
        for d in self.window_degrees():
            s = self.module(d).size()
            if s is None:
                return None
            total *= s
        return total

    def elements(self):
        """All elements of a finite ring as tuples of per-degree coordinates."""
        pieces = [(d, list(self.module(d).elements())) for d in self.window_degrees()]
        for combo in iproduct(*[p[1] for p in pieces]):
            yield {d: c for (d, _), c in zip(pieces, combo)}

    def check_axioms(self):
        """Associativity and graded commutativity on generators."""
        gens = [self.generator(n) for n in self.names if self.in_window(self.degrees[self.names.index(n)])]
        problems = []
        for x in gens:
            for y in gens:
                if not self.in_window(x.degree + y.degree):
                    continue
                sgn = -1 if (self.sign_rule == "koszul" and x.degree % 2 and y.degree % 2) else 1
                if self.mul(x, y) != self.mul(y, x).scale(sgn):
                    problems.append(f"{x} * {y} is not graded commutative")
                for z in gens:
                    if not self.in_window(x.degree + y.degree + z.degree):
                        continue
                    if self.mul(self.mul(x, y), z) != self.mul(x, self.mul(y, z)):
                        problems.append(f"({x} * {y}) * {z} is not associative")
        return problems

    def as_complex(self):
        """The window of ``R`` as a complex with ``R_d`` in degree ``d`` and zero differential."""
        return Complex({d: self.module(d) for d in self.window_degrees()}, {}, self.base, check=False)

    def action(self, f):
        """Multiplication by ``f`` as a chain map ``S^p R -> R`` on the degrees it stays inside the window."""
        R = self.as_complex()
        p = f.degree
        src = {d + p: self.module(d) for d in self.window_degrees() if self.in_window(d + p)}
        S = Complex(src, {}, self.base, check=False)
        maps = {}
        for k, m in S.modules.items():
            cols = []
            for j in range(m.n):
                e = RingElement(self, k - p, [1 if t == j else 0 for t in range(m.n)])
                cols.append(self.mul(f, e).coords)
            maps[k] = ModuleMap(m, R.module(k), Mat.from_columns(cols, R.module(k).n))
        return ChainMap(S, R, maps)

    def as_integer(self, e):
        """An integer acting like the degree-0 element ``e``."""
        if e.degree != 0:
            raise DegreeError("only degree-0 elements act as integers")
        mod, P, S, monos = self.piece(0)
        poly = S.apply(e.coords)
        unit = (0,) * len(self.names)
        if any(c for m, c in zip(monos, poly) if m != unit):
            raise DegreeError("degree-0 element is not a multiple of the unit")
        return poly[monos.index(unit)] if unit in monos else 0


class RingElement:
    __slots__ = ("ring", "degree", "coords")

    def __init__(self, ring, degree, coords):
        mod = ring.module(degree)
        coords = [int(c) for c in coords]
        if len(coords) != mod.n:
            raise ShapeError("coordinate vector does not match the degree piece")
        self.ring = ring
        self.degree = degree
        self.coords = mod.reduce(coords)

    def __repr__(self):
        return f"RingElement(deg={self.degree}, {self.to_poly()})"

    def __str__(self):
        poly = self.to_poly()
        if not poly:
            return "0"
        parts = []
        for m, c in sorted(poly.items()):
            mono = "*".join(f"{n}^{e}" if e > 1 else n for n, e in zip(self.ring.names, m) if e)
            parts.append(f"{c}*{mono}" if mono else str(c))
        return " + ".join(parts)

    def to_poly(self):
        _, _, S, monos = self.ring.piece(self.degree)
        return {m: c for m, c in zip(monos, S.apply(self.coords)) if c}

    def __eq__(self, other):
        return (isinstance(other, RingElement) and self.ring is other.ring
                and self.degree == other.degree and self.coords == other.coords)

    def __hash__(self):
        return hash((id(self.ring), self.degree, tuple(self.coords)))

    def __add__(self, other):
        if other.degree != self.degree:
            raise DegreeError("cannot add elements of different degrees")
        return RingElement(self.ring, self.degree, [a + b for a, b in zip(self.coords, other.coords)])

    def __neg__(self):
        return RingElement(self.ring, self.degree, [-a for a in self.coords])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, int):
            return self.scale(other)
        return self.ring.mul(self, other)

    def scale(self, c):
        return RingElement(self.ring, self.degree, [c * a for a in self.coords])

    def is_zero(self):
        return self.ring.module(self.degree).is_zero_vector(self.coords)

    def power(self, n):
        out = self.ring.one()
        for _ in range(n):
            out = out * self
        return out
