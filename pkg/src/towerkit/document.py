"""Structured key-value documents describing bases, modules, complexes, rings and towers.

Documents are JSON objects; every integer is written as a decimal string.
Top-level keys:

``base``
    ``"Z"``, ``"Z/m"`` or ``"Z[1/p,q]"``.
``modules``
    name -> ``{"orders": [...], "weights": [...]}`` (``"0"`` marks a free generator).
``complexes``
    name -> ``{"modules": {degree: module}, "differentials": {degree: matrix}}``;
    the matrix in degree ``k`` is ``d_k : C_k -> C_(k-1)``.
``rings``
    name -> ``{"window": [a, b], "generators": [[name, degree]], "relations": [...]}``.
``ring_complexes``
    name -> ``{"kind": "mod", "m": "3"}``, ``{"kind": "unit"}`` or ``{"kind": "module", "order": "4"}``.
``towers``
    name -> ``{"kind": "module" | "complex", "prefix": [...], "transitions": [...],
    "tail_period": "1", "tail_map": ...}``; levels are inline objects or names.
``registry``
    lattice facts, see ``FactRegistry.from_dict``.
``task``
    free-form inputs for a subcommand (object names, elements, options).
"""

import json
import re
from dataclasses import dataclass, field

from .adams import RingComplex, mod_ring, module_ring, unit_ring
from .complexes import ChainMap, Complex
from .errors import InputError, TowerkitError
from .lattice import FactRegistry
from .linalg import Mat
from .modules import BaseRing, FGModule, ModuleMap
from .rings import GradedRing
from .towers import Tower

_INT = re.compile(r"-?[0-9]+")


def parse_int(x, where):
    if isinstance(x, bool) or not isinstance(x, str) or not _INT.fullmatch(x.strip()):
        raise InputError(f"{where}: integers are written as decimal strings, got {x!r}")
    return int(x)


def parse_base(text):
    if not isinstance(text, str):
        raise InputError(f"base must be a string, got {text!r}")
    t = text.replace(" ", "")
    if t == "Z":
        return BaseRing.integers()
    m = re.fullmatch(r"Z/([0-9]+)", t)
    if m:
        n = int(m.group(1))
        if n < 2:
            raise InputError(f"base {text!r}: the modulus must be at least 2")
        return BaseRing.mod(n)
    m = re.fullmatch(r"Z\[1/([0-9]+(?:,[0-9]+)*)\]", t)
    if m:
        return BaseRing.localized(sorted({int(p) for p in m.group(1).split(",")}))
    raise InputError(f"unknown base {text!r}")


def format_base(base):
    return str(base)


def parse_matrix(rows, m, n, where):
    if not isinstance(rows, list) or len(rows) != m:
        raise InputError(f"{where}: expected {m} rows")
    out = []
    for i, r in enumerate(rows):
        if not isinstance(r, list) or len(r) != n:
            raise InputError(f"{where}: row {i} needs {n} entries")
        out.append([parse_int(x, f"{where}[{i}]") for x in r])
    return Mat(out, m, n)


def _matrix_rows(M):
    return [[str(x) for x in row] for row in M.rows]


@dataclass
class Document:
    base: BaseRing
    modules: dict = field(default_factory=dict)
    complexes: dict = field(default_factory=dict)
    rings: dict = field(default_factory=dict)
    ring_complexes: dict = field(default_factory=dict)
    towers: dict = field(default_factory=dict)
    registry: object = None
    task: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def complex(self, name):
        if isinstance(name, dict):
            return _parse_complex(name, self.base, "inline complex", self)
        if name in self.complexes:
            return self.complexes[name]
        if name in self.modules:
            return Complex.concentrated(self.modules[name], 0)
        raise InputError(f"no complex or module named {name!r}")

    def ring_complex(self, name):
        if isinstance(name, dict):
            return _parse_ring_complex(name, self.base, "inline ring")
        if name not in self.ring_complexes:
            raise InputError(f"no ring complex named {name!r}")
        return self.ring_complexes[name]

    def tower(self, name):
        if name not in self.towers:
            raise InputError(f"no tower named {name!r}")
        return self.towers[name]


_TOP_KEYS = {"base", "modules", "complexes", "rings", "ring_complexes", "towers", "registry", "task"}


def _parse_module(spec, base, where):
    if isinstance(spec, list):
        spec = {"orders": spec}
    if not isinstance(spec, dict) or "orders" not in spec:
        raise InputError(f"{where}: a module needs orders")
    orders = [parse_int(x, f"{where}.orders") for x in spec["orders"]]
    weights = [parse_int(x, f"{where}.weights") for x in spec.get("weights", ["0"] * len(orders))]
    if len(weights) != len(orders):
        raise InputError(f"{where}: weights and orders differ in length")
    for i, d in enumerate(orders):
        if d < 0 or d == 1 or base.normalize_order(d) != d:
            raise InputError(f"{where}: order {d} of generator {i} is not in normal form over {base}")
    return FGModule(tuple(orders), tuple(weights), base)


def _parse_complex(spec, base, where, doc=None):
    if not isinstance(spec, dict) or "modules" not in spec:
        raise InputError(f"{where}: a complex needs modules")
    mods = {}
    for k, m in spec["modules"].items():
        deg = parse_int(k, f"{where}.modules")
        if isinstance(m, str) and doc is not None and m in doc.modules:
            mods[deg] = doc.modules[m]
        else:
            mods[deg] = _parse_module(m, base, f"{where}.modules[{k}]")
    diffs = {}
    for k, rows in spec.get("differentials", {}).items():
        deg = parse_int(k, f"{where}.differentials")
        src = mods.get(deg, FGModule.zero(base))
        tgt = mods.get(deg - 1, FGModule.zero(base))
        M = parse_matrix(rows, tgt.n, src.n, f"{where}.differentials[{k}]")
        try:
            diffs[deg] = ModuleMap(src, tgt, M)
        except TowerkitError as exc:
            raise InputError(f"{where}.differentials[{k}]: {exc}") from exc
    return Complex(mods, diffs, base, check=False)


def _parse_ring(spec, base, where):
    if not isinstance(spec, dict):
        raise InputError(f"{where}: a ring is a mapping")
    window = [parse_int(x, f"{where}.window") for x in spec.get("window", ["0", "0"])]
    gens = [(g[0], parse_int(g[1], f"{where}.generators")) for g in spec.get("generators", [])]
    try:
        return GradedRing(base, tuple(window), gens, spec.get("relations", []), spec.get("sign_rule", "commutative"))
    except (TowerkitError, ValueError) as exc:
        raise InputError(f"{where}: {exc}") from exc


def _parse_ring_complex(spec, base, where):
    if not isinstance(spec, dict):
        raise InputError(f"{where}: a ring complex is a mapping")
    kind = spec.get("kind")
    if kind == "mod":
        m = parse_int(spec.get("m"), f"{where}.m")
        if m < 2:
            raise InputError(f"{where}: the modulus must be at least 2")
        return mod_ring(m, base)
    if kind == "unit":
        return unit_ring(base)
    if kind == "module":
        d = parse_int(spec.get("order"), f"{where}.order")
        return module_ring(FGModule.cyclic(d, base))
    raise InputError(f"{where}: unknown ring complex kind {kind!r}")


def _level(spec, base, kind, where, doc):
    if kind == "module":
        if isinstance(spec, str):
            if spec not in doc.modules:
                raise InputError(f"{where}: no module named {spec!r}")
            return doc.modules[spec]
        return _parse_module(spec, base, where)
    if isinstance(spec, str):
        return doc.complex(spec)
    return _parse_complex(spec, base, where, doc)


def _level_map(spec, src, tgt, kind, where):
    if kind == "module":
        return ModuleMap(src, tgt, parse_matrix(spec, tgt.n, src.n, where), check=False)
    if not isinstance(spec, dict):
        raise InputError(f"{where}: a chain map is a mapping degree -> matrix")
    comps = {}
    for k, rows in spec.items():
        deg = parse_int(k, where)
        A, B = src.module(deg), tgt.module(deg)
        comps[deg] = ModuleMap(A, B, parse_matrix(rows, B.n, A.n, f"{where}[{k}]"), check=False)
    return ChainMap(src, tgt, comps, check=False)


def _map_problems(f, kind):
    try:
        if kind == "module":
            f._check()
            return []
        for g in f.maps.values():
            g._check()
    except TowerkitError as exc:
        return [str(exc)]
    return [f"fails to commute with d in degree {k}" for k in f.commutation_failures()]


def _parse_tower(spec, base, where, doc, diagnostics):
    if not isinstance(spec, dict):
        raise InputError(f"{where}: a tower is a mapping")
    kind = spec.get("kind", "module")
    if kind not in ("module", "complex"):
        raise InputError(f"{where}: unknown tower kind {kind!r}")
    prefix = spec.get("prefix")
    if not isinstance(prefix, list) or not prefix:
        raise InputError(f"{where}: a tower needs a nonempty prefix")
    levels = [_level(x, base, kind, f"{where}.prefix[{i}]", doc) for i, x in enumerate(prefix)]
    trans_spec = spec.get("transitions", [])
    if len(trans_spec) != len(levels) - 1:
        raise InputError(f"{where}: {len(levels)} levels need {len(levels) - 1} transitions")
    trans = []
    for s, t in enumerate(trans_spec, start=1):
        f = _level_map(t, levels[s], levels[s - 1], kind, f"{where}: transition at level {s}")
        for p in _map_problems(f, kind):
            diagnostics.append(f"{where}: transition at level {s}: {p}")
        trans.append(f)
    P = spec.get("tail_period")
    tail = None
    if P is not None:
        P = parse_int(P, f"{where}.tail_period")
        N = len(levels) - 1
        if not 1 <= P <= N + 1:
            raise InputError(f"{where}: tail period {P} must lie between 1 and {N + 1}")
        if "tail_map" not in spec:
            raise InputError(f"{where}: a periodic tail needs tail_map")
        tail = _level_map(spec["tail_map"], levels[N - P + 1], levels[N], kind, f"{where}: tail map at level {N + 1}")
        for p in _map_problems(tail, kind):
            diagnostics.append(f"{where}: tail map at level {N + 1}: {p}")
    elif "tail_map" in spec:
        raise InputError(f"{where}: tail_map given without tail_period")
    return Tower(levels, trans, P, tail, check=False)


def loads(text):
    """Parse a document; structural problems raise ``InputError``, invariant violations are collected."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"not a JSON document: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError("a document is a JSON object")
    extra = set(data) - _TOP_KEYS
    if extra:
        raise InputError(f"unknown top-level keys {sorted(extra)}")
    base = parse_base(data.get("base", "Z"))
    doc = Document(base)
    for name, spec in data.get("modules", {}).items():
        doc.modules[name] = _parse_module(spec, base, f"modules.{name}")
    for name, spec in data.get("complexes", {}).items():
        doc.complexes[name] = _parse_complex(spec, base, f"complexes.{name}", doc)
    for name, spec in data.get("rings", {}).items():
        doc.rings[name] = _parse_ring(spec, base, f"rings.{name}")
    for name, spec in data.get("ring_complexes", {}).items():
        try:
            doc.ring_complexes[name] = _parse_ring_complex(spec, base, f"ring_complexes.{name}")
        except TowerkitError as exc:
            raise InputError(f"ring_complexes.{name}: {exc}") from exc
    for name, spec in data.get("towers", {}).items():
        doc.towers[name] = _parse_tower(spec, base, f"towers.{name}", doc, doc.diagnostics)
    if "registry" in data:
        try:
            doc.registry = FactRegistry.from_dict(data["registry"])
        except (TowerkitError, TypeError, ValueError) as exc:
            raise InputError(f"registry: {exc}") from exc
    task = data.get("task", {})
    if not isinstance(task, dict):
        raise InputError("task must be a mapping")
    doc.task = task
    return doc


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def validate(doc):
    """Every invariant violation found in a parsed document, each naming its degree or level."""
    out = list(doc.diagnostics)
    for name, C in doc.complexes.items():
        out.extend(f"complexes.{name}: d^2 is not zero in degree {k}" for k in C.d_squared_failures())
    for name, T in doc.towers.items():
        out.extend(f"towers.{name}: {p}" for p in T.coherence_problems())
        if not T.is_module_tower:
            for s, C in enumerate(T.levels):
                out.extend(f"towers.{name}: level {s}: d^2 is not zero in degree {k}"
                           for k in C.d_squared_failures())
    for name, R in doc.rings.items():
        try:
            out.extend(f"rings.{name}: {p}" for p in R.check_axioms())
        except TowerkitError as exc:
            out.append(f"rings.{name}: {exc}")
    return out


# ---------------------------------------------------------------------------
# Writing


def module_dict(M):
    d = {"orders": [str(x) for x in M.orders]}
    if any(M.weights):
        d["weights"] = [str(w) for w in M.weights]
    return d


def complex_dict(C):
    return {
        "modules": {str(k): module_dict(m) for k, m in sorted(C.modules.items())},
        "differentials": {str(k): _matrix_rows(f.matrix) for k, f in sorted(C.diffs.items()) if not f.is_zero()},
    }


def dumps(obj):
    """Deterministic JSON text."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


__all__ = [
    "Document",
    "RingComplex",
    "complex_dict",
    "dumps",
    "load",
    "loads",
    "module_dict",
    "parse_base",
    "parse_int",
    "validate",
]
