"""Solid rings, nilpotency certificates, nilpotent resolutions and their comparison."""

from dataclasses import dataclass, field
from itertools import product as iproduct
from math import gcd

from .adams import FibreTower, RingComplex, standard_adams_tower
from .complexes import ChainMap, Complex, TensorComplex, connectivity, free_model, tensor_chain_maps, truncate_below
from .errors import ConnectivityError, DegreeError, InputError, StructuralError, UndeterminedError
from .linalg import Mat
from .modules import FGModule, ModuleMap, Solver, cokernel, is_exact, tensor_modules
from .moore import Element, _map_from_cols, _rewrap, adic_tower, invert
from .rings import GradedRing, RingElement
from .towers import (
    ProMap,
    Reindexing,
    Sub,
    Tower,
    full_sub,
    image_sub,
    intersect,
    is_pro_weak_equivalence,
    kernel_sub,
    lim_lim1,
    maps_equal,
    preimage,
    quotient,
    tensor_promap,
)


# ---------------------------------------------------------------------------
# Multiplication and core of a windowed ring


def _require_window(R):
    for name, d in zip(R.names, R.degrees):
        if not R.in_window(d):
            raise DegreeError(f"window {R.window} is too small for the tensor square: {name} has degree {d}")


def _square_module(R, d):
    """``(R (x) R)_d`` as a sum over ``i + j = d`` inside the window."""
    pieces, orders, weights = [], [], []
    for i in R.window_degrees():
        j = d - i
        if R.in_window(j):
            T, index = tensor_modules(R.module(i), R.module(j))
            pieces.append((i, j, len(orders), T, index))
            orders += list(T.orders)
            weights += list(T.weights)
    return FGModule(tuple(orders), tuple(weights), R.base), pieces


def multiplication_map(R, d):
    """``(R (x) R)_d -> R_d``."""
    S, pieces = _square_module(R, d)
    tgt = R.module(d)
    M = Mat.zeros(tgt.n, S.n)
    for i, j, off, T, _ in pieces:
        mu = R.multiplication_map(i, j)
        for r in range(tgt.n):
            M.rows[r][off:off + T.n] = mu.matrix.rows[r]
    return ModuleMap(S, tgt, M, check=False)


def multiplication_is_iso(R):
    _require_window(R)
    return all(multiplication_map(R, d).is_isomorphism() for d in R.window_degrees())


def _coaction_difference(R, d):
    """``x -> x (x) 1 - 1 (x) x`` from ``R_d`` into ``(R (x) R)_d``."""
    S, pieces = _square_module(R, d)
    src = R.module(d)
    one = R.one().coords
    M = Mat.zeros(S.n, src.n)
    for i, j, off, T, index in pieces:
        for a in range(src.n):
            for b, c in enumerate(one):
                if not c:
                    continue
                if (i, j) == (d, 0) and (a, b) in index:
                    M.rows[off + index[(a, b)]][a] += c
                if (i, j) == (0, d) and (b, a) in index:
                    M.rows[off + index[(b, a)]][a] -= c
    return ModuleMap(src, S, M, check=False)


def _window_module(R):
    orders, weights = [], []
    for d in R.window_degrees():
        m = R.module(d)
        orders += list(m.orders)
        weights += [d] * m.n
    return FGModule(tuple(orders), tuple(weights), R.base)


def core(R):
    """Equalizer of the two coactions ``R -> R (x) R``, graded by degree."""
    _require_window(R)
    orders, weights = [], []
    for d in R.window_degrees():
        K = kernel_sub(_coaction_difference(R, d)).module
        orders += list(K.orders)
        weights += [d] * K.n
    return FGModule(tuple(orders), tuple(weights), R.base)


def quotient_ring(R, f):
    """``R / (f)`` for a homogeneous element, integer or polynomial string ``f``."""
    if isinstance(f, RingElement):
        f = f.to_poly()
    elif isinstance(f, int):
        f = {(0,) * len(R.names): f}
    rels = [dict(poly) for _, poly in R.relations]
    return GradedRing(R.base, R.window, list(zip(R.names, R.degrees)), rels + [f], R.sign_rule)


# ---------------------------------------------------------------------------
# Element-level model of a finite ring


def _hom_matrices(A, B):
    """All additive maps ``A -> B`` between finite modules."""
    choices = []
    for b in B.orders:
        for a in A.orders:
            step = b // gcd(a, b)
            choices.append(range(0, b, step))
    for combo in iproduct(*choices):
        yield Mat([list(combo[i * A.n:(i + 1) * A.n]) for i in range(B.n)], B.n, A.n)


def _reduce(M, orders):
    return Mat([[x % d for x in row] for row, d in zip(M.rows, orders)], M.m, M.n)


class FiniteRing:
    """The window of a finite ``GradedRing`` as an ungraded ring; products leaving the window vanish."""

    def __init__(self, R):
        if R.size is None:
            raise InputError("the ring is not finite")
        self.ring = R
        self.blocks = []
        orders = []
        for d in R.window_degrees():
            m = R.module(d)
            self.blocks.append((d, len(orders), m.n))
            orders += list(m.orders)
        self.orders = tuple(orders)
        self.n = len(orders)
        self.one = self.embed(R.one())
        self.table = {(a, b): self._basis_product(a, b) for a in range(self.n) for b in range(self.n)}
        self.gen_index = [i for i, d in enumerate(R.degrees) if R.in_window(d)]
        self.generators = [self.embed(R.generator(R.names[i])) for i in self.gen_index]
        self.expansions = [self._expansion(a) for a in range(self.n)]

    def _basis(self, a):
        for d, off, k in self.blocks:
            if off <= a < off + k:
                return RingElement(self.ring, d, [1 if t == a - off else 0 for t in range(k)])
        raise IndexError(a)

    def embed(self, x):
        v = [0] * self.n
        for d, off, k in self.blocks:
            if d == x.degree:
                v[off:off + k] = list(x.coords)
        return self.reduce(v)

    def reduce(self, v):
        return [x % d for x, d in zip(v, self.orders)]

    def _basis_product(self, a, b):
        x, y = self._basis(a), self._basis(b)
        if not self.ring.in_window(x.degree + y.degree):
            return [0] * self.n
        return self.embed(self.ring.mul(x, y))

    def _expansion(self, a):
        """Basis element ``a`` as ``[(exponents of in-window generators, coefficient)]``."""
        x = self._basis(a)
        _, _, S, monos = self.ring.piece(x.degree)
        out = []
        for m, c in zip(monos, S.apply(x.coords)):
            if c:
                out.append((tuple(m[i] for i in self.gen_index), c))
        return out

    def elements(self):
        for combo in iproduct(*[range(d) for d in self.orders]):
            yield list(combo)


def _mat_mul(A, B, orders):
    return _reduce(A @ B, orders)


def _monomial_matrix(gen_mats, mono, ident, orders):
    out = ident
    for g, e in zip(gen_mats, mono):
        for _ in range(e):
            out = _mat_mul(out, g, orders)
    return out


def _act(images, v, M):
    acc = Mat.zeros(M.n, M.n)
    for a, c in enumerate(v):
        if c:
            acc = acc + images[a].scale(c)
    return _reduce(acc, M.orders)


def _is_action(FR, M, images, gen_images, ident):
    orders = M.orders
    for a, d in enumerate(FR.orders):
        if not _reduce(images[a].scale(d), orders).is_zero():
            return False
    if not _act(images, FR.one, M) == ident:
        return False
    for gv, gm in zip(FR.generators, gen_images):
        if not _act(images, gv, M) == gm:
            return False
    for (a, b), prod in FR.table.items():
        if not _mat_mul(images[a], images[b], orders) == _act(images, prod, M):
            return False
    return True


def ring_actions(FR, M, limit=20000):
    """All ring homomorphisms ``FR -> End(M)`` as lists of basis images; ``None`` past ``limit`` candidates."""
    ends = list(_hom_matrices(M, M))
    g = len(FR.generators)
    if len(ends) ** g > limit:
        return None
    ident = _reduce(Mat.identity(M.n), M.orders)
    out = []
    for choice in iproduct(ends, repeat=g):
        images = []
        for expansion in FR.expansions:
            acc = Mat.zeros(M.n, M.n)
            for mono, c in expansion:
                acc = acc + _monomial_matrix(choice, mono, ident, M.orders).scale(c)
            images.append(_reduce(acc, M.orders))
        if _is_action(FR, M, images, choice, ident):
            out.append(images)
    return out


def _is_linear(FR, f, M, act_M, N, act_N):
    """``f(r m) = r f(m)`` for every basis element ``r``, hence for every element."""
    for a in range(FR.n):
        if not _reduce(f @ act_M[a], N.orders) == _reduce(act_N[a] @ f, N.orders):
            return False
    return True


def _invariant_factor_lists(n):
    """Lists ``d_1 | d_2 | ...`` with ``d_i > 1`` and product ``n``."""
    out = []

    def rec(rem, prev, acc):
        if rem == 1:
            out.append(tuple(acc))
            return
        for d in range(2, rem + 1):
            if rem % d == 0 and (prev is None or d % prev == 0):
                rec(rem // d, d, acc + [d])

    rec(n, None, [])
    return out


def sample_modules(max_order=8):
    """Every finite abelian group of order at most ``max_order``, once each."""
    return [FGModule(orders) for n in range(2, max_order + 1) for orders in _invariant_factor_lists(n)]


@dataclass
class SolidRingReport:
    ring: GradedRing
    multiplication_iso: bool
    core: FGModule
    core_is_ring: bool
    action_unique: object = None
    linear: object = None
    checked: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    candidate_counterexample: bool = False

    @property
    def consistent(self):
        """An invertible multiplication forces both consequences."""
        if not self.multiplication_iso:
            return True
        return self.action_unique is not False and self.linear is not False


def solid_consequences(R, samples=None, limit=20000, max_maps=4096):
    """Test uniqueness of actions and automatic linearity on sample modules by enumeration.

    ``action_unique`` asks for at most one action on every sample;
    ``linear`` asks every additive map between modules with actions to commute with them.
    """
    mu = multiplication_is_iso(R)
    c = core(R)
    report = SolidRingReport(R, mu, c, c.isomorphic(_window_module(R)))
    if R.size is None:
        return report
    FR = FiniteRing(R)
    samples = sample_modules() if samples is None else samples
    acts = {}
    for M in samples:
        a = ring_actions(FR, M, limit)
        if a is not None:
            acts[M] = a
    unique = True
    for M, a in acts.items():
        if len(a) > 1:
            unique = False
            report.violations.append(("several actions", str(M), len(a)))
    linear, n_maps = True, 0
    for M, aM in acts.items():
        for N, aN in acts.items():
            if not aM or not aN:
                continue
            count = 1
            for a, b in zip(M.orders * N.n, [o for o in N.orders for _ in M.orders]):
                count *= gcd(a, b)
            if count > max_maps:
                continue
            for f in _hom_matrices(M, N):
                n_maps += 1
                if not all(_is_linear(FR, f, M, x, N, y) for x in aM[:2] for y in aN[:2]):
                    linear = False
                    if len(report.violations) < 20:
                        report.violations.append(("non-linear map", str(M), str(N), f.rows))
                    break
    report.action_unique = unique
    report.linear = linear
    report.checked = {"modules": len(acts), "actions": sum(len(a) for a in acts.values()), "maps": n_maps}
    report.candidate_counterexample = (not mu) and unique and linear
    if mu and not (unique and linear):
        raise StructuralError("a ring with invertible multiplication violated a solid-ring consequence")
    return report


# ---------------------------------------------------------------------------
# Solid rings of the form Z[1/primes]/characteristic


@dataclass(frozen=True)
class SolidRing:
    """``Z[1/primes] / characteristic``; ``characteristic = 0`` means no quotient, 1 the zero ring."""

    characteristic: int = 0
    primes: tuple = ()

    def __str__(self):
        if self.characteristic == 1:
            return "0"
        s = "Z" + (f"[1/{','.join(map(str, self.primes))}]" if self.primes else "")
        return s + (f"/{self.characteristic}" if self.characteristic else "")

    @classmethod
    def from_graded(cls, R):
        if R.window != (0, 0) and any(R.module(d).n for d in R.window_degrees() if d):
            raise StructuralError("solid rings here are concentrated in degree 0")
        if not multiplication_is_iso(R):
            raise StructuralError(f"{R} is not solid: its multiplication is not an isomorphism")
        R0 = R.module(0)
        if R0.n > 1:
            raise StructuralError("solid rings here have a cyclic degree-0 part")
        char = 1 if R0.n == 0 else (R0.orders[0] if R0.orders[0] != R.base.modulus else R0.orders[0])
        return cls(char, tuple(R.base.primes))

    @classmethod
    def from_ring_complex(cls, E):
        H = E.complex.homology(0)
        if H.n > 1 or any(not E.complex.homology(k).is_zero() for k in E.complex.degrees() if k):
            raise StructuralError("the ring complex needs cyclic homology in degree 0 only")
        return cls(1 if H.n == 0 else H.orders[0], tuple(E.base.primes))

    def quotient(self, f):
        return SolidRing(gcd(self.characteristic, abs(int(f))) or 0, self.primes)

    def module_obstruction(self, Q):
        """``None`` when ``Q`` is a module over the ring, else a reason."""
        c = self.characteristic
        if c == 1:
            return None if Q.is_zero() else "only the zero module lives over the zero ring"
        for i, d in enumerate(Q.orders):
            if c and (d == 0 or c % d):
                return f"{c} does not kill generator {i} of order {d or 'infinite'}"
        for p in self.primes:
            if Q.base.is_unit(p):
                continue
            for i, d in enumerate(Q.orders):
                if d == 0 or d % p == 0:
                    return f"{p} does not act invertibly on generator {i}"
        return None

    def is_module(self, Q):
        return self.module_obstruction(Q) is None


def as_solid_ring(R):
    if isinstance(R, SolidRing):
        return R
    if isinstance(R, GradedRing):
        return SolidRing.from_graded(R)
    if isinstance(R, RingComplex):
        return SolidRing.from_ring_complex(R)
    if isinstance(R, int) and not isinstance(R, bool):
        return SolidRing(abs(R))
    raise InputError(f"cannot read a solid ring from {type(R).__name__}")


# ---------------------------------------------------------------------------
# Nilpotency certificates


@dataclass
class NilpotencyCertificate:
    """A descending chain ``M = M_0 > ... > M_r = 0`` whose subquotients are ring modules."""

    module: FGModule
    ring: SolidRing
    chain: list

    @property
    def length(self):
        return len(self.chain) - 1

    def problems(self):
        if not self.chain:
            return ["empty chain"]
        out = []
        if not self.chain[0] == full_sub(self.module):
            out.append("the chain does not start at the module")
        if not self.chain[-1].is_zero():
            out.append("the chain does not end at zero")
        for i, (a, b) in enumerate(zip(self.chain, self.chain[1:])):
            if not a.contains(b):
                out.append(f"step {i} is not descending")
                continue
            why = self.ring.module_obstruction(quotient(a, b)[0])
            if why:
                out.append(f"subquotient {i} is not a module: {why}")
        return out

    def verify(self):
        return not self.problems()

    def kills(self, f=None):
        """Whether ``f ** length`` annihilates the module; ``f`` defaults to the characteristic."""
        f = self.ring.characteristic if f is None else f
        return ModuleMap.scalar(self.module, pow(f, self.length)).is_zero()

    def describe(self):
        lines = [f"{self.module} over {self.ring}, length {self.length}"]
        lines += [f"  M_{i} = {s.module}" for i, s in enumerate(self.chain)]
        return "\n".join(lines)


@dataclass
class Refusal:
    reason: str
    obstruction: object = None
    undetermined: bool = False

    def __bool__(self):
        return False


def _prime_factor_count(e):
    k, p = 0, 2
    while e > 1:
        while e % p == 0:
            e //= p
            k += 1
        p += 1
    return k


def is_R_nilpotent(M, R, depth=None):
    """The filtration ``M > c M > c^2 M > ... > 0`` as a certificate, or a refusal.

    For ``R = Z[1/S]/c`` a module is built from ``R``-modules by extensions
    exactly when ``S`` acts invertibly and some power of ``c`` kills it.
    """
    R = as_solid_ring(R)
    if M.is_zero():
        return NilpotencyCertificate(M, R, [full_sub(M)])
    for p in R.primes:
        if not M.base.is_unit(p):
            for i, d in enumerate(M.orders):
                if d == 0 or d % p == 0:
                    return Refusal(f"{p} is not invertible on generator {i}", ("generator", i))
    c = R.characteristic
    if c == 0:
        return NilpotencyCertificate(M, R, [full_sub(M), Sub(ModuleMap.zero(FGModule.zero(M.base), M))])
    if c == 1:
        return Refusal("only the zero module is nilpotent over the zero ring")
    for i, d in enumerate(M.orders):
        if d == 0:
            return Refusal(f"{c} acts injectively on the free generator {i}", ("generator", i))
    if depth is None:
        depth = max(_prime_factor_count(M.exponent()), 1)
    chain = [full_sub(M)]
    power = 1
    for _ in range(depth):
        power *= c
        nxt = image_sub(ModuleMap.scalar(M, power))
        if nxt == chain[-1]:
            return Refusal(f"{c} acts invertibly on the nonzero submodule {nxt.module}", ("submodule", nxt))
        chain.append(nxt)
        if nxt.is_zero():
            return NilpotencyCertificate(M, R, chain)
    return Refusal(f"no filtration of length <= {depth}", None, undetermined=True)


def _as_sub_of(sub, inc):
    """A submodule inside the image of ``inc``, re-expressed inside ``inc.source``."""
    sol = Solver(inc)
    cols = []
    for j in range(sub.module.n):
        res = sol.solve(sub.inc.matrix.col(j))
        if res is None:
            raise StructuralError("submodule is not contained in the image")
        v, den = res
        cols.append((v, den * sub.inc.den))
    return Sub(_map_from_cols(sub.module, inc.source, cols))


def _dedupe(chain):
    out = []
    for s in chain:
        if not out or not s == out[-1]:
            out.append(s)
    return out


def nilpotent_closure(maps, certs):
    """Certificate for ``C`` in an exact ``A -a-> B -b-> C -c-> D -d-> E``.

    ``certs`` covers ``(A, B, D, E)``; the outer two may be ``None``.  The
    chain is ``c^-1(D_i cap ker d)`` followed by ``b(B_i)``.
    """
    a, b, c, d = maps
    cert_A, cert_B, cert_D, cert_E = certs
    for cert, mod in ((cert_A, a.source), (cert_B, b.source), (cert_D, c.target), (cert_E, d.target)):
        if cert is None:
            continue
        if not isinstance(cert, NilpotencyCertificate) or not cert.module == mod or not cert.verify():
            raise StructuralError("the neighbours need verified certificates")
    if cert_B is None or cert_D is None:
        raise StructuralError("the neighbours B and D need certificates")
    if cert_B.ring != cert_D.ring:
        raise StructuralError("certificates live over different rings")
    if not (is_exact(a, b) and is_exact(b, c) and is_exact(c, d)):
        raise StructuralError("the sequence is not exact")
    K = kernel_sub(d)
    upper = [preimage(c, intersect(Di, K)) for Di in cert_D.chain]
    lower = [image_sub(b @ Bi.inc) for Bi in cert_B.chain[1:]]
    cert = NilpotencyCertificate(b.target, cert_B.ring, _dedupe(upper + lower))
    bad = cert.problems()
    if bad:
        raise StructuralError(f"spliced certificate fails: {bad[0]}")
    return cert


def kernel_cokernel_certificates(cert, f):
    """Certificates for the kernel and cokernel of multiplication by ``f``, over ``R / (f)``."""
    M = cert.module
    mf = ModuleMap.scalar(M, f)
    R2 = cert.ring.quotient(f)
    K = kernel_sub(mf)
    Q, proj, _ = cokernel(mf)
    out = []
    for mod, chain in ((K.module, [_as_sub_of(intersect(Mi, K), K.inc) for Mi in cert.chain]),
                       (Q, [image_sub(proj @ Mi.inc) for Mi in cert.chain])):
        c2 = NilpotencyCertificate(mod, R2, _dedupe(chain))
        bad = c2.problems()
        if bad:
            raise StructuralError(f"derived certificate fails: {bad[0]}")
        out.append(c2)
    return tuple(out)


def transport(cert, iso):
    """Move a certificate along an isomorphism of modules."""
    return NilpotencyCertificate(iso.target, cert.ring, [image_sub(iso @ s.inc) for s in cert.chain])


def _recast(cert, module):
    """The same certificate over an equal module object."""
    if not cert.module == module:
        raise StructuralError("certificate module mismatch")
    chain = [Sub(ModuleMap(s.module, module, s.inc.matrix, s.inc.den, check=False)) for s in cert.chain]
    return NilpotencyCertificate(module, cert.ring, chain)


# ---------------------------------------------------------------------------
# Linear systems for chain maps


class _LinearSystem:
    """Unknown matrices subject to linear equations modulo given orders."""

    def __init__(self, base):
        self.base = base
        self.blocks = {}
        self.nvars = 0
        self.rows = []

    def block(self, name, m, n):
        self.blocks[name] = (self.nvars, m, n)
        self.nvars += m * n

    def add(self, terms, rhs, orders):
        """``sum L @ X_name @ R = rhs`` entrywise modulo ``orders`` (one per row)."""
        for i in range(rhs.m):
            for j in range(rhs.n):
                coeffs = {}
                for L, name, Rm in terms:
                    off, bm, bn = self.blocks[name]
                    for a in range(bm):
                        la = L.rows[i][a]
                        if not la:
                            continue
                        for b in range(bn):
                            rb = Rm.rows[b][j]
                            if rb:
                                k = off + a * bn + b
                                coeffs[k] = coeffs.get(k, 0) + la * rb
                self.rows.append((coeffs, rhs.rows[i][j], orders[i]))

    def solve(self):
        if not self.rows:
            return {name: (Mat.zeros(m, n), 1) for name, (_, m, n) in self.blocks.items()}
        A = Mat.zeros(len(self.rows), self.nvars)
        for r, (coeffs, _, _) in enumerate(self.rows):
            for k, v in coeffs.items():
                A.rows[r][k] = v
        tgt = FGModule(tuple(o for _, _, o in self.rows), base=self.base)
        src = FGModule.free(self.nvars, self.base)
        res = Solver(ModuleMap(src, tgt, A, check=False)).solve(tgt.reduce([b for _, b, _ in self.rows]))
        if res is None:
            return None
        x, den = res
        return {name: (Mat([[x[off + i * n + j] for j in range(n)] for i in range(m)], m, n), den)
                for name, (off, m, n) in self.blocks.items()}


def _integral(f):
    if f.den != 1:
        raise StructuralError("linear solving needs integral differentials")
    return f.matrix


def solve_chain_map(src, tgt, constraints=()):
    """A chain map ``phi: src -> tgt`` with ``post o phi o pre = value`` for each
    constraint ``(pre, post, value)`` (``None`` meaning identity), or ``None``."""
    if src.base != tgt.base:
        raise StructuralError("chain maps between different bases")
    sys = _LinearSystem(tgt.base)
    degs = sorted(set(src.modules) | set(tgt.modules))
    for k in degs:
        A, B = src.module(k), tgt.module(k)
        if A.n and B.n:
            sys.block(k, B.n, A.n)
            # generator j of order o lands in the o-torsion
            for j, o in enumerate(A.orders):
                if o:
                    col = Mat([[o if b == j else 0] for b in range(A.n)], A.n, 1)
                    sys.add([(Mat.identity(B.n), k, col)], Mat.zeros(B.n, 1), B.orders)
    for k in degs:
        A, B = src.module(k), tgt.module(k - 1)
        if not (A.n and B.n):
            continue
        terms = []
        if k in sys.blocks:
            terms.append((_integral(tgt.d(k)), k, Mat.identity(A.n)))
        if k - 1 in sys.blocks:
            terms.append((Mat.identity(B.n), k - 1, -_integral(src.d(k))))
        sys.add(terms, Mat.zeros(B.n, A.n), B.orders)
    for pre, post, value in constraints:
        for k in sorted(set(value.source.modules) | set(value.target.modules)):
            V = value.at(k)
            if not (V.source.n and V.target.n):
                continue
            P = pre.at(k) if pre is not None else ModuleMap.identity(src.module(k))
            Q = post.at(k) if post is not None else ModuleMap.identity(tgt.module(k))
            terms = [(Q.matrix.scale(V.den), k, P.matrix)] if k in sys.blocks else []
            sys.add(terms, V.matrix.scale(P.den * Q.den), V.target.orders)
    sol = sys.solve()
    if sol is None:
        return None
    comps = {k: ModuleMap(src.module(k), tgt.module(k), M, den, check=False) for k, (M, den) in sol.items()}
    phi = ChainMap(src, tgt, comps, check=False)
    if phi.commutation_failures():
        raise StructuralError("solved map is not a chain map")
    return phi


# ---------------------------------------------------------------------------
# E-nilpotence


@dataclass
class NilpotenceTrace:
    depth: object
    steps: list
    reason: str = ""

    @property
    def determined(self):
        return self.depth is not None


def _unit_into(E, Y):
    """``Y = S (x) Y -> E (x) Y``."""
    S = E.unit.source
    u = tensor_chain_maps(E.unit, ChainMap.identity(Y), TensorComplex(S, Y), TensorComplex(E.complex, Y))
    return _rewrap(u, source=Y)


def _free_replacement(Y):
    if Y.is_free():
        return Y
    if Y.base.modulus:
        return None
    return free_model(Y).complex


def is_E_module(E, Y):
    """Whether the unit ``P -> E (x) P`` splits by a chain map, ``P`` a free model of ``Y``.

    ``True`` means ``Y`` is a retract of ``E (x) Y``; ``None`` means no free model is available.
    """
    if not Y.modules or Y.is_acyclic():
        return True
    P = _free_replacement(Y)
    if P is None:
        return None
    u = _unit_into(E, P)
    return solve_chain_map(u.target, P, [(u, None, ChainMap.identity(P))]) is not None


def _prime_power_summands(M):
    out = []
    for d in M.orders:
        if d == 0:
            out.append((0, 1))
            continue
        q = 2
        while d > 1:
            if d % q == 0:
                a = 0
                while d % q == 0:
                    d //= q
                    a += 1
                out.append((q, a))
            q += 1
    return out


def _halving_depth(a):
    k = 0
    while (1 << k) < a:
        k += 1
    return k


def is_E_nilpotent(X, E, depth=4):
    """A build of ``X`` from ``E``-modules by retracts, finite sums and extensions, or an undetermined trace."""
    if not X.modules or X.is_acyclic():
        return NilpotenceTrace(0, [("zero", "acyclic")])
    if is_E_module(E, X):
        return NilpotenceTrace(0, [("E-module", "the unit into E (x) X splits")])
    if X.base.modulus:
        return NilpotenceTrace(None, [], "homology splitting needs a torsion-free ground")
    steps = [("split", "sum of shifted homology modules over a hereditary ground")]
    need = 0
    for k in X.degrees():
        for q, a in _prime_power_summands(X.homology(k)):
            if q == 0:
                if is_E_module(E, Complex.concentrated(FGModule.free(1, X.base), k)):
                    steps.append(("E-module", f"free summand in degree {k}"))
                    continue
                return NilpotenceTrace(None, steps, f"free summand in degree {k} is not an E-module")
            label = f"Z/{q}^{a} in degree {k}"
            if is_E_module(E, Complex.concentrated(FGModule((q ** a,), base=X.base), k)):
                steps.append(("E-module", label))
                continue
            if not is_E_module(E, Complex.concentrated(FGModule((q,), base=X.base), k)):
                return NilpotenceTrace(None, steps, f"Z/{q} in degree {k} is not an E-module")
            h = _halving_depth(a)
            steps.append(("extensions", f"{label} from Z/{q} in {h} rounds"))
            need = max(need, h)
    if need > depth:
        return NilpotenceTrace(None, steps, f"needs depth {need} > {depth}")
    return NilpotenceTrace(need, steps)


# ---------------------------------------------------------------------------
# Truncated resolutions


def _max_degree(C):
    ks = [k for k, m in C.modules.items() if m.n]
    return max(ks) if ks else 0


def _trunc(C, n):
    """``P^n C`` with the projection from ``C``; ``C`` itself when nothing lies above ``n``."""
    if _max_degree(C) <= n:
        return C, ChainMap.identity(C)
    t = truncate_below(C, n)
    return t.complex, t.map


def _trunc_transition(f, n, src, tgt, tgt_proj):
    """``P^n Y_n -> P^(n-1) Y_(n-1)`` induced by ``f: Y_n -> Y_(n-1)``."""
    comps = {}
    for k, m in f.maps.items():
        if k > n - 1 or not src.module(k).n or not tgt.module(k).n:
            continue
        if k == n - 1:
            p = tgt_proj.at(k)
            comps[k] = ModuleMap(src.module(k), tgt.module(k), p.matrix @ m.matrix, p.den * m.den, check=False)
        else:
            comps[k] = ModuleMap(src.module(k), tgt.module(k), m.matrix, m.den, check=False)
    return ChainMap(src, tgt, comps, check=True)


def _truncate_tower(Y, units, depth):
    cache = {}

    def level(n):
        if n not in cache:
            cache[n] = _trunc(Y.level(n), n)
        return cache[n]

    def trans(n):
        src, _ = level(n)
        tgt, proj = level(n - 1)
        return _trunc_transition(Y.transition(n), n, src, tgt, proj)

    def unit(n):
        C, proj = level(n)
        return proj @ _rewrap(units(n), target=Y.level(n))

    if Y.is_periodic:
        b = max(_max_degree(Y.level(s)) for s in range(Y.N + Y.P + 1))
        L = max(Y.N, b + Y.P)
        levels = [level(n)[0] for n in range(L + 1)]
        trans_list = [trans(n) for n in range(1, L + 1)]
        T = Tower(levels, trans_list, Y.P, Y.transition(L + 1), check=False)
        return T, lambda n: unit(T.fold(n))
    top = Y.depth_limit() if depth is None else min(depth, Y.depth_limit())
    if Y.is_lazy:
        return Tower.lazy(lambda n: level(n)[0], trans, top), unit
    return Tower([level(n)[0] for n in range(top + 1)], [trans(n) for n in range(1, top + 1)], check=False), unit


def _certify_tower(Y, R):
    """Certificates for every ``H_k`` of every level, spliced along the fibre sequences."""
    ft = FibreTower(Y)
    top = Y.N + Y.P if Y.is_periodic else Y.depth_limit()
    certs, fcerts = {}, {}
    zero = FGModule.zero(Y.level(0).base)

    def fibre_cert(n, k):
        if (n, k) not in fcerts:
            c = is_R_nilpotent(ft.HF(n, k), R)
            if not c:
                raise StructuralError(f"fibre homology at level {n}, degree {k} is not {R}-nilpotent: {c.reason}")
            fcerts[(n, k)] = c
        return fcerts[(n, k)]

    def level_cert(n, k):
        if n < 0:
            return NilpotencyCertificate(zero, R, [full_sub(zero)])
        if (n, k) not in certs:
            if n == 0:
                c = is_R_nilpotent(ft.HX(0, k), R)
                if not c:
                    raise StructuralError(f"level 0 homology in degree {k} is not {R}-nilpotent: {c.reason}")
            else:
                a, b = ft.d(n, k), ft.l(n, k)
                cm, d = ft.composite(n, n - 1, k), ft.d(n, k - 1)
                c = nilpotent_closure((a, b, cm, d), (_recast(level_cert(n - 1, k + 1), a.source), fibre_cert(n, k),
                                                       _recast(level_cert(n - 1, k), cm.target), fibre_cert(n, k - 1)))
            certs[(n, k)] = c
        return certs[(n, k)]

    degs = ft.degrees()
    for n in range(top + 1):
        for k in degs:
            level_cert(n, k)
    return certs


@dataclass
class ResolutionTower:
    kind: str
    source: Complex
    ring: SolidRing
    tower: Tower
    untruncated: Tower
    units: object
    certificates: dict

    def unit(self, n):
        return self.units(n)

    def all_certified(self):
        return all(c.verify() for c in self.certificates.values())


def truncated_resolutions(X, spec, N=8):
    """``{P^n Y_n}`` with units ``X -> P^n Y_n`` and nilpotency certificates.

    ``spec`` is a ``RingComplex`` (Adams tower), an element or list of
    degree-0 elements (adic tower), or ``{"invert": S}`` (constant ``X[S^-1]``).
    """
    conn = connectivity(X) if X.modules else None
    if conn is not None and conn < 0:
        raise ConnectivityError(f"X has homology in degree {conn} < 0")
    if isinstance(spec, RingComplex):
        at = standard_adams_tower(spec, X, N)
        Y, units, R, kind = at.under, at.unit_maps, SolidRing.from_ring_complex(spec), "adams"
    elif isinstance(spec, dict) and "invert" in spec:
        inv = invert(X, spec["invert"])
        Y = Tower.constant(inv.complex)
        iota = inv.iota
        units, kind = (lambda n: iota), "inverted"
        R = SolidRing(1) if inv.base.modulus == 1 else SolidRing(0, tuple(inv.base.primes))
    else:
        fs = [Element.coerce(f) for f in (spec if isinstance(spec, (list, tuple)) else [spec])]
        if any(f.degree for f in fs):
            raise InputError("adic resolutions need degree-0 elements")
        char = 0
        for f in fs:
            char = gcd(char, abs(f.scalar))
        at = adic_tower(X, fs, N)
        Y, units, R, kind = at.tower, at.projections, SolidRing(char, tuple(X.base.primes)), "moore"
    T, unit = _truncate_tower(Y, units, N)
    return ResolutionTower(kind, X, R, T, Y, unit, _certify_tower(T, R))


# ---------------------------------------------------------------------------
# Comparison of resolutions


@dataclass
class ResolutionComparison:
    first: ResolutionTower
    second: ResolutionTower
    witness: object
    offset: object
    weak_equivalence: object
    lims_agree: object
    under_source: bool
    e_side: object
    verdict: object
    reason: str = ""


def _level_map(A, B, uA, uB, k, c, prev):
    src, tgt = A.level(k + c), B.level(k)
    constraints = [(uA(k + c), None, uB(k))]
    if prev is not None:
        constraints.append((None, B.transition(k), prev @ A.composite(k + c, k - 1 + c)))
    return solve_chain_map(src, tgt, constraints)


def _horizon(A, B, c):
    lims = [d - off for d, off in ((A.depth_limit(), c), (B.depth_limit(), 0)) if d is not None]
    if lims:
        return min(lims)
    return max(A.N + 2 * A.P, B.N + 2 * B.P) + c + 2


def compare_resolutions(T1, T2, E=None, max_offset=3, horizon=None):
    """Search a pro-map ``T1 -> T2`` under the source and test it for a pro-weak-equivalence.

    Level maps are solved one level at a time for offsets ``0..max_offset``;
    ``verdict`` is ``None`` when no witness exists within the horizon.
    """
    A, B = T1.tower, T2.tower
    found = None
    for c in range(max_offset + 1):
        K = _horizon(A, B, c) if horizon is None else horizon
        if K < 0:
            break
        maps = {}
        for k in range(K + 1):
            phi = _level_map(A, B, T1.unit, T2.unit, k, c, maps.get(k - 1))
            if phi is None:
                break
            maps[k] = phi
        else:
            found = (c, K, maps)
            break
    if found is None:
        return ResolutionComparison(T1, T2, None, None, None, None, False, None, None,
                                    "no witness within the horizon")
    c, K, maps = found

    def at(k):
        if k not in maps:
            raise IndexError(k)
        return maps[k]

    phi = ProMap(A, B, Reindexing.affine(1, c), at, check=True, horizon=K)
    under = all(maps_equal(maps[k] @ T1.unit(k + c), T2.unit(k)) for k in range(K + 1))
    try:
        weq = is_pro_weak_equivalence(phi, K)
    except UndeterminedError as exc:
        weq, verdict, reason = None, None, str(exc)
    else:
        verdict = bool(weq)
        reason = "" if verdict else f"not a pro-isomorphism in degree {weq.failing_degree}"
    e_side = None
    if E is not None and verdict:
        try:
            e_side = bool(is_pro_weak_equivalence(tensor_promap(phi, E.complex), K))
        except UndeterminedError:
            e_side = None
    return ResolutionComparison(T1, T2, phi, c, weq, _lims_agree(A, B), under, e_side, verdict, reason)


def _lims_agree(A, B):
    """``True``/``False`` when both limits are modules, ``None`` when a side is only a pro-object."""
    out = True
    for k in sorted(set(A.homology_degrees()) | set(B.homology_degrees())):
        la, lb = lim_lim1(A.homology(k)), lim_lim1(B.homology(k))
        if isinstance(la.lim, FGModule) and isinstance(lb.lim, FGModule):
            if not la.lim.isomorphic(lb.lim):
                return False
        else:
            out = None
        if "undetermined" in (la.lim1, lb.lim1):
            out = None
        elif la.lim1 != lb.lim1:
            return False
    return out
