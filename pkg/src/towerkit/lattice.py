"""Symbolic calculus of Bousfield classes with a registry of known facts.

Expressions are trees over named atoms, the top class ``S`` and the bottom
class ``0``.  Normal forms are joins of meets (meets are multisets of atoms).
Meet-idempotence is applied only to atoms tagged distributive; complements
are available only for atoms with a registered partner.
"""

import re
from dataclasses import dataclass, field
from itertools import product as iproduct

from .errors import InputError

TOP, BOTTOM = "S", "0"


@dataclass(frozen=True)
class BousfieldExpr:
    kind: str  # "top", "bottom", "atom", "join", "meet", "comp"
    name: str = ""
    args: tuple = ()

    def __str__(self):
        if self.kind == "top":
            return TOP
        if self.kind == "bottom":
            return BOTTOM
        if self.kind == "atom":
            return self.name
        if self.kind == "comp":
            return f"c({self.args[0]})"
        if self.kind == "meet":
            return " ^ ".join(_wrap(a, "meet") for a in self.args)
        return " v ".join(_wrap(a, "join") for a in self.args)

    def atoms(self):
        if self.kind == "atom":
            return {self.name}
        out = set()
        for a in self.args:
            out |= a.atoms()
        return out

    def __and__(self, other):
        return meet(self, other)

    def __or__(self, other):
        return join(self, other)


def _wrap(e, parent):
    if e.kind == "join" and parent == "meet":
        return f"({e})"
    return str(e)


def _key(e):
    return (str(e), e.kind)


TOP_E = BousfieldExpr("top")
BOTTOM_E = BousfieldExpr("bottom")


def atom(name):
    if name == TOP:
        return TOP_E
    if name == BOTTOM:
        return BOTTOM_E
    return BousfieldExpr("atom", name)


def comp(e):
    return BousfieldExpr("comp", "", (e,))


def _flat(kind, args):
    out = []
    for a in args:
        if isinstance(a, str):
            a = atom(a)
        if a.kind == kind:
            out.extend(a.args)
        else:
            out.append(a)
    return out


def join(*args):
    """Flattened, sorted, duplicate-free join."""
    items = sorted(set(_flat("join", args)), key=_key)
    if not items:
        return BOTTOM_E
    if len(items) == 1:
        return items[0]
    return BousfieldExpr("join", "", tuple(items))


def meet(*args):
    """Flattened, sorted meet; duplicates are kept."""
    items = sorted(_flat("meet", args), key=_key)
    if not items:
        return TOP_E
    if len(items) == 1:
        return items[0]
    return BousfieldExpr("meet", "", tuple(items))


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\[[^\]]*\])?|0)|(?P<op>[()^]))")


def parse(text):
    """Expressions with ``v`` (join), ``^`` (meet), ``c(...)`` (complement) and atom names."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise InputError(f"cannot parse expression at {text[pos:]!r}")
        tokens.append(m.group("name") or m.group("op"))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    tokens.append(None)
    i = 0

    def peek():
        return tokens[i]

    def take(expected=None):
        nonlocal i
        t = tokens[i]
        if expected is not None and t != expected:
            raise InputError(f"expected {expected!r}, found {t!r}")
        i += 1
        return t

    def p_join():
        parts = [p_meet()]
        while peek() == "v":
            take()
            parts.append(p_meet())
        return join(*parts) if len(parts) > 1 else parts[0]

    def p_meet():
        parts = [p_unit()]
        while peek() == "^":
            take()
            parts.append(p_unit())
        return meet(*parts) if len(parts) > 1 else parts[0]

    def p_unit():
        t = peek()
        if t == "(":
            take()
            e = p_join()
            take(")")
            return e
        if t == "c" and tokens[i + 1] == "(":
            take()
            take("(")
            e = p_join()
            take(")")
            return comp(e)
        if t is None or t in (")", "^", "v"):
            raise InputError(f"unexpected {t!r} in expression")
        take()
        return atom(t)

    e = p_join()
    if peek() is not None:
        raise InputError(f"trailing input {peek()!r}")
    return e


# ---------------------------------------------------------------------------
# Registry


@dataclass
class FactRegistry:
    """Append-only facts: distributive tags, complement pairs, inequalities and equalities."""

    dl: set = field(default_factory=set)
    complements: dict = field(default_factory=dict)
    leq_facts: list = field(default_factory=list)
    eq_facts: list = field(default_factory=list)

    def tag(self, *names):
        self.dl.update(names)

    def add_complement(self, a, b):
        if a in (TOP, BOTTOM) or b in (TOP, BOTTOM):
            raise InputError("constants have fixed complements")
        for x, y in ((a, b), (b, a)):
            old = self.complements.get(x)
            if old is not None and old != y:
                raise InputError(f"{x} already has the complement {old}")
        self.complements[a] = b
        self.complements[b] = a
        self.dl.update((a, b))

    def add_leq(self, a, b):
        self.leq_facts.append((_coerce(a), _coerce(b)))

    def add_eq(self, a, b):
        self.eq_facts.append((_coerce(a), _coerce(b)))

    def complement_of(self, name):
        if name == TOP:
            return BOTTOM
        if name == BOTTOM:
            return TOP
        return self.complements.get(name)

    def inequalities(self):
        """Every registered inequality, equalities counted both ways."""
        out = list(self.leq_facts)
        for a, b in self.eq_facts:
            out += [(a, b), (b, a)]
        return out

    def to_dict(self):
        pairs = sorted({tuple(sorted(p)) for p in self.complements.items()})
        return {
            "dl": sorted(self.dl),
            "complements": [list(p) for p in pairs],
            "leq": [[str(a), str(b)] for a, b in self.leq_facts],
            "eq": [[str(a), str(b)] for a, b in self.eq_facts],
        }

    @classmethod
    def from_dict(cls, d):
        reg = cls()
        allowed = {"dl", "complements", "leq", "eq", "profiles"}
        extra = set(d) - allowed
        if extra:
            raise InputError(f"unknown registry keys {sorted(extra)}")
        reg.tag(*d.get("dl", []))
        for pair in d.get("complements", []):
            if len(pair) != 2:
                raise InputError("complement entries are pairs")
            reg.add_complement(*pair)
        for a, b in d.get("leq", []):
            reg.add_leq(parse(a), parse(b))
        for a, b in d.get("eq", []):
            reg.add_eq(parse(a), parse(b))
        for prof in d.get("profiles", []):
            assumption_A1_chain(prof, reg)
        return reg


def _coerce(e):
    return parse(e) if isinstance(e, str) else e


# ---------------------------------------------------------------------------
# Normal forms: a join is a frozenset of terms, a term a sorted tuple of leaves


def _leaf_key(leaf):
    return str(leaf)


def _clean_term(term, reg):
    """Drop the unit, apply idempotence for tagged atoms; ``None`` when the term is 0."""
    leaves = [x for x in term if not (x.kind == "top")]
    if any(x.kind == "bottom" for x in leaves):
        return None
    names = {x.name for x in leaves if x.kind == "atom"}
    for n in names:
        c = reg.complements.get(n)
        if c is not None and c in names:
            return None
    out, seen = [], set()
    for x in sorted(leaves, key=_leaf_key):
        if x.kind == "atom" and x.name in reg.dl:
            if x.name in seen:
                continue
            seen.add(x.name)
        out.append(x)
    return tuple(out)


def _is_submultiset(small, big):
    rest = list(big)
    for x in small:
        if x in rest:
            rest.remove(x)
        else:
            return False
    return True


def _clean_join(terms, reg):
    terms = {t for t in terms if t is not None}
    if () in terms:
        return {()}
    singles = {t[0].name for t in terms if len(t) == 1 and t[0].kind == "atom"}
    for n in singles:
        if reg.complements.get(n) in singles:
            return {()}
    # first absorption: t v (t ^ w) = t
    return {t for t in terms if not any(u != t and _is_submultiset(u, t) for u in terms)}


def _terms(e, reg):
    if e.kind == "top":
        return {()}
    if e.kind == "bottom":
        return set()
    if e.kind == "atom":
        return {(e,)}
    if e.kind == "join":
        out = set()
        for a in e.args:
            out |= _terms(a, reg)
        return _clean_join(out, reg)
    if e.kind == "meet":
        acc = {()}
        for a in e.args:
            ta = _terms(a, reg)
            acc = _clean_join({_clean_term(x + y, reg) for x in acc for y in ta}, reg)
        return acc
    inner = normalize(e.args[0], reg)
    c = complement(inner, reg)
    if isinstance(c, NoComplement):
        return {(comp(inner),)}
    return _terms(c, reg)


def _from_terms(terms):
    return join(*[meet(*t) for t in sorted(terms, key=lambda t: [str(x) for x in t])])


def _boolean_variables(e, reg):
    """Representative atoms when every atom of ``e`` is complemented, else ``None``."""
    names = e.atoms()
    if any(reg.complements.get(n) is None for n in names):
        return None
    reps = sorted({min(n, reg.complements[n]) for n in names})
    return reps if len(reps) <= 8 else None


def evaluate(e, valuation, reg):
    """Truth value in the Boolean algebra generated by complemented atoms."""
    if e.kind == "top":
        return True
    if e.kind == "bottom":
        return False
    if e.kind == "atom":
        if e.name in valuation:
            return valuation[e.name]
        return not valuation[reg.complements[e.name]]
    if e.kind == "comp":
        return not evaluate(e.args[0], valuation, reg)
    vals = [evaluate(a, valuation, reg) for a in e.args]
    return any(vals) if e.kind == "join" else all(vals)


def _prime_implicants(reps, truth):
    """All prime implicants of the function with true assignments ``truth``."""
    n = len(reps)
    implicants = set()
    for cube in iproduct((None, True, False), repeat=n):
        free = [i for i in range(n) if cube[i] is None]
        covered = True
        for bits in iproduct((True, False), repeat=len(free)):
            v = list(cube)
            for i, b in zip(free, bits):
                v[i] = b
            if tuple(v) not in truth:
                covered = False
                break
        if covered:
            implicants.add(cube)
    primes = []
    for cube in sorted(implicants, key=str):
        wider = (cube[:i] + (None,) + cube[i + 1:] for i in range(n) if cube[i] is not None)
        if not any(w in implicants for w in wider):
            primes.append(cube)
    return primes


def _boolean_normal_form(e, reps, reg):
    truth = set()
    for bits in iproduct((True, False), repeat=len(reps)):
        if evaluate(e, dict(zip(reps, bits)), reg):
            truth.add(bits)
    terms = []
    for cube in _prime_implicants(reps, truth):
        terms.append(tuple(atom(r if b else reg.complements[r]) for r, b in zip(reps, cube) if b is not None))
    return _from_terms(terms)


def normalize(e, reg=None):
    """Join of meets under the laws valid for the registry.

    Always: first absorption, join idempotence, meet-over-join distribution,
    unit and zero laws.  Meet idempotence only for tagged atoms.  When every
    atom is complemented the result is the canonical join of prime implicants.
    """
    reg = reg or FactRegistry()
    e = _coerce(e)
    reps = _boolean_variables(e, reg)
    if reps is not None:
        return _boolean_normal_form(e, reps, reg)
    return _from_terms(_terms(e, reg))


# ---------------------------------------------------------------------------
# Complements


@dataclass(frozen=True)
class NoComplement:
    atom: str

    def __str__(self):
        return f"no complement: {self.atom} has no registered complement"

    def __bool__(self):
        return False


def complement(e, reg=None):
    """De Morgan recursion over registered atom complements; ``NoComplement`` otherwise."""
    reg = reg or FactRegistry()
    e = _coerce(e)
    if e.kind == "top":
        return BOTTOM_E
    if e.kind == "bottom":
        return TOP_E
    if e.kind == "atom":
        c = reg.complements.get(e.name)
        return atom(c) if c is not None else NoComplement(e.name)
    if e.kind == "comp":
        inner = normalize(e.args[0], reg)
        c = complement(inner, reg)
        return inner if not isinstance(c, NoComplement) else c
    parts = []
    for a in e.args:
        c = complement(a, reg)
        if isinstance(c, NoComplement):
            return c
        parts.append(c)
    return normalize(meet(*parts) if e.kind == "join" else join(*parts), reg)


# ---------------------------------------------------------------------------
# Order


@dataclass
class LeqResult:
    verdict: str  # "true" or "unknown"
    steps: list = field(default_factory=list)

    def __bool__(self):
        return self.verdict == "true"


def _split_facts(reg):
    """Facts as ``(lhs term, rhs term set)``; a join on the left splits into its terms."""
    out = []
    for a, b in reg.inequalities():
        rhs = _terms(b, reg)
        for t in _terms(a, reg):
            out.append((t, frozenset(rhs)))
    return out


def _term_str(t):
    return str(meet(*t)) if t else TOP


def _join_str(ts):
    return str(_from_terms(ts))


def _term_leq_term(a, b, reg):
    """``a <= b`` from ``b`` being a sub-multiset of ``a`` (modulo tagged duplicates)."""
    if _is_submultiset(b, a):
        return True
    dl_a = {x for x in a if x.kind == "atom" and x.name in reg.dl}
    rest = list(a)
    for x in b:
        if x in rest:
            rest.remove(x)
        elif x not in dl_a:
            return False
    return True


class _Prover:
    def __init__(self, reg, max_nodes=2000, max_depth=10):
        self.reg = reg
        self.facts = _split_facts(reg)
        self.max_nodes = max_nodes
        self.max_depth = max_depth
        self.max_len = 4 + max((len(lhs) + max((len(r) for r in rhs), default=0) for lhs, rhs in self.facts),
                               default=0)
        self.nodes = 0

    def join_leq(self, A, B, steps, seen):
        """Every term of ``A`` is below the join ``B``."""
        for t in sorted(A, key=lambda t: [str(x) for x in t]):
            if not self.term_leq(t, B, steps, seen):
                return False
        return True

    def term_leq(self, t, B, steps, seen):
        if any(_term_leq_term(t, u, self.reg) for u in B):
            return True
        if () in B:
            return True
        key = (t, frozenset(B))
        if key in seen or self.nodes > self.max_nodes or len(seen) >= self.max_depth or len(t) > self.max_len:
            return False
        seen = seen | {key}
        self.nodes += 1
        for lhs, rhs in self.facts:
            for keep in (False, True):
                new = self._substitute(t, lhs, rhs, keep)
                if new is None:
                    continue
                mark = len(steps)
                steps.append(f"{_term_str(t)} <= {_join_str(new)} using {_term_str(lhs)} <= {_join_str(rhs)}")
                if self.join_leq(new, B, steps, seen):
                    return True
                del steps[mark:]
        return False

    def _substitute(self, t, lhs, rhs, keep):
        """``t = lhs ^ w <= rhs ^ w``; with ``keep`` and ``lhs`` idempotent, ``t = t ^ lhs <= t ^ rhs``."""
        if not _is_submultiset(lhs, t) or not lhs:
            return None
        if keep:
            if not all(x.kind == "atom" and x.name in self.reg.dl for x in lhs):
                return None
            w = list(t)
        else:
            w = list(t)
            for x in lhs:
                w.remove(x)
        out = {_clean_term(tuple(w) + r, self.reg) for r in rhs}
        out = _clean_join(out, self.reg)
        if out == {t}:
            return None
        return out


def leq(a, b, reg=None):
    """Sound, incomplete test of ``a <= b``: ``"true"`` with a derivation, or ``"unknown"``.

    Uses the lattice bounds, sub-multisets (``E ^ F <= E``), monotone
    substitution along registered facts and transitivity.
    """
    reg = reg or FactRegistry()
    A = _terms(_coerce(a), reg)
    B = _terms(_coerce(b), reg)
    steps = []
    if not A or () in B:
        return LeqResult("true", ["lattice bound"])
    if _prove_boolean(a, b, reg):
        return LeqResult("true", ["Boolean evaluation over complemented atoms"])
    if _Prover(reg).join_leq(A, B, steps, frozenset()):
        return LeqResult("true", steps)
    return LeqResult("unknown", [])


def _prove_boolean(a, b, reg):
    e = join(_coerce(a), _coerce(b))
    reps = _boolean_variables(e, reg)
    if reps is None:
        return False
    a, b = _coerce(a), _coerce(b)
    for bits in iproduct((True, False), repeat=len(reps)):
        v = dict(zip(reps, bits))
        if evaluate(a, v, reg) and not evaluate(b, v, reg):
            return False
    return True


def equal(a, b, reg=None):
    """``"true"`` when both inequalities are derivable, else ``"unknown"``."""
    x, y = leq(a, b, reg), leq(b, a, reg)
    return LeqResult("true", x.steps + y.steps) if x and y else LeqResult("unknown", [])


# ---------------------------------------------------------------------------
# Ring-spectrum profiles


def moore_atom(f):
    return f"M[{f}]"


def inverted_atom(f):
    return f"S[1/{f}]"


def assumption_A1_chain(profile, reg=None, ring="E"):
    """Register ``H <= E <= M(I) ^ S[1/J]`` and the Moore complement pairs.

    ``profile`` has generator lists ``I`` (elements whose Moore classes bound
    the ring from above) and ``J`` (inverted elements).  With both empty only
    ``E <= S`` is recorded.
    """
    reg = reg if reg is not None else FactRegistry()
    if not isinstance(profile, dict):
        raise InputError("a profile is a mapping with keys I and J")
    extra = set(profile) - {"I", "J", "ring", "kmw"}
    if extra:
        raise InputError(f"unknown profile keys {sorted(extra)}")
    I, J = profile.get("I", []), profile.get("J", [])
    if not isinstance(I, (list, tuple)) or not isinstance(J, (list, tuple)):
        raise InputError("profile generator lists must be lists")
    for g in list(I) + list(J):
        if not re.fullmatch(r"[A-Za-z0-9_]+", str(g)):
            raise InputError(f"malformed generator {g!r}")
    if set(map(str, I)) & set(map(str, J)):
        raise InputError("a generator cannot be both killed and inverted")
    ring = profile.get("ring", ring)
    E = atom(ring)
    reg.tag(ring)
    if not I and not J:
        reg.add_leq(E, TOP_E)
        return reg
    H = atom(f"H_pi0{ring}")
    reg.tag(H.name)
    for f in I:
        reg.add_complement(moore_atom(f), inverted_atom(f))
    for g in J:
        reg.tag(inverted_atom(g))
    upper = meet(*[atom(moore_atom(f)) for f in I], *[atom(inverted_atom(g)) for g in J])
    S0 = atom(f"S_pi0{ring}")
    reg.add_eq(S0, upper)
    reg.add_leq(H, E)
    reg.add_leq(E, S0)
    if profile.get("kmw"):
        reg.add_leq(meet(atom("H_KMW"), S0), H)
    return reg


__all__ = [
    "BousfieldExpr",
    "FactRegistry",
    "LeqResult",
    "NoComplement",
    "assumption_A1_chain",
    "atom",
    "comp",
    "complement",
    "equal",
    "evaluate",
    "join",
    "leq",
    "meet",
    "normalize",
    "parse",
]
