"""Command-line front end.

Exit codes: 0 computed, 2 undetermined within the horizon, 1 input error.
Tabular output is TSV; verdicts are ``key: value`` text blocks.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import adams, document, lattice, moore, nilpotent
from .errors import DepthError, InputError, TowerkitError, UndeterminedError
from .modules import image
from .towers import Tower

THREADS_VAR = "TOWERKIT_THREADS"

EXIT_OK, EXIT_INPUT, EXIT_UNDETERMINED = 0, 1, 2

MAX_HORIZON = 64
MAX_RMAX = 32
MAX_WINDOW = 64


class Undetermined(Exception):
    """A verdict that needs more levels than the horizon allows."""


@dataclass
class JobSpec:
    subcommand: str
    input: str
    horizon: int = None
    rmax: int = None
    window: int = None
    degrees: tuple = None
    out: str = None
    extra: tuple = ()


def threads():
    raw = os.environ.get(THREADS_VAR, "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"{THREADS_VAR} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"{THREADS_VAR} must be a positive integer, got {raw!r}")
    return n


def parse_degrees(text):
    """``"a:b"`` (inclusive) or ``"k"``."""
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise InputError(f"--degrees expects k or a:b, got {text!r}") from None
    if lo > hi:
        raise InputError(f"--degrees range {text!r} is empty")
    return tuple(range(lo, hi + 1))


def _bounded(name, value, top):
    if value is not None and not 0 <= value <= top:
        raise InputError(f"--{name} must lie between 0 and {top}")
    return value


def factors(M):
    """Invariant factors joined by commas, ``0`` standing for a free summand and ``-`` for the zero group."""
    inv = M.invariant_factors()
    return ",".join(str(x) for x in inv) if inv else "-"


def _tsv(header, rows):
    lines = ["\t".join(header)]
    lines += ["\t".join(str(x) for x in r) for r in rows]
    return "\n".join(lines) + "\n"


def _block(pairs):
    return "".join(f"{k}: {_fmt(v)}\n" for k, v in pairs)


def _lim_text(lim):
    """A finitely generated limit by invariant factors, otherwise its pro-description."""
    if lim is None:
        return None
    return factors(lim) if hasattr(lim, "invariant_factors") else str(lim)


def _fmt(v):
    if v is None:
        return "undetermined"
    if v is True:
        return "true"
    if v is False:
        return "false"
    return str(v)


def _task(doc, key, default=None, required=True):
    if key in doc.task:
        return doc.task[key]
    if default is not None or not required:
        return default
    raise InputError(f"task.{key} is required")


def _int_opt(doc, key, flag, default):
    if flag is not None:
        return flag
    if key in doc.task:
        return document.parse_int(doc.task[key], f"task.{key}")
    return default


def _elements(doc, key="elements"):
    raw = _task(doc, key)
    if not isinstance(raw, list):
        raw = [raw]
    return [document.parse_int(x, f"task.{key}") for x in raw]


# ---------------------------------------------------------------------------
# Subcommands


def cmd_validate(job, doc):
    problems = document.validate(doc)
    text = "".join(p + "\n" for p in problems)
    return (EXIT_INPUT if problems else EXIT_OK), text


def _spectral_tower(doc, job):
    """The tower whose spectral sequence is requested: a named tower or a standard Adams tower."""
    if "tower" in doc.task:
        return doc.tower(doc.task["tower"])
    if "ring" in doc.task:
        X = doc.complex(_task(doc, "X"))
        E = doc.ring_complex(doc.task["ring"])
        N = _int_opt(doc, "levels", job.horizon, 8)
        return adams.standard_adams_tower(E, X, N)
    raise InputError("task needs either tower or ring and X")


def _cell_rows(page_list, ft):
    rows = []
    for page in page_list:
        for (s, t) in sorted(page.cells):
            c = page.cells[(s, t)]
            d = page.differentials[(s, t)]
            rank = len(image(d)[0].invariant_factors())
            rows.append((page.r, s, t, factors(c.module), rank))
    return rows


def cmd_pages(job, doc):
    T = _spectral_tower(doc, job)
    s_max = _int_opt(doc, "s_max", job.window, 8)
    r_max = _int_opt(doc, "r_max", job.rmax, 3)
    ft = adams.as_fibre_tower(T)
    k_range = job.degrees if job.degrees is not None else ft.degrees()
    try:
        page_list = adams.pages(T, r_max=r_max, s_max=s_max, k_range=k_range)
    except DepthError as exc:
        raise Undetermined(str(exc)) from exc
    return EXIT_OK, _tsv(["r", "s", "t", "invariant-factors", "differential-rank"], _cell_rows(page_list, ft))


def cmd_converge(job, doc):
    T = _spectral_tower(doc, job)
    ft = adams.as_fibre_tower(T)
    k_range = list(job.degrees if job.degrees is not None else ft.degrees())
    s_max = _int_opt(doc, "s_max", None, None)

    def one(k):
        return adams.convergence_report(T, [k], s_max=s_max, window=job.window).degrees[k]

    try:
        with ThreadPoolExecutor(max_workers=threads()) as pool:
            reports = list(pool.map(one, k_range))
    except DepthError as exc:
        raise Undetermined(str(exc)) from exc
    out = [_block([("exact", ft.tower.is_periodic)])]
    undetermined = False
    for k, rep in zip(k_range, reports):
        out.append(f"[degree {k}]\n")
        pairs = [("agree", rep.agree), ("lim", _lim_text(rep.lim)),
                 ("lim1 of tower", rep.lim1_of_tower), ("lim1 of tower above", rep.lim1_of_tower_above)]
        pairs += [(name, v) for name, v in sorted(rep.verdicts.items())]
        pairs += [(f"note {i}", n) for i, n in enumerate(rep.notes)]
        out.append(_block(pairs))
        if any(v is None for v in rep.verdicts.values()):
            undetermined = True
    text = "".join(out)
    if undetermined:
        return EXIT_UNDETERMINED, text
    return EXIT_OK, text


def cmd_complete(job, doc):
    X = doc.complex(_task(doc, "X"))
    fs = _elements(doc)
    N = _int_opt(doc, "levels", job.horizon, 6)
    res = moore.derived_completion(X, fs, N)
    tower = res.adic.tower
    degrees = job.degrees if job.degrees is not None else tuple(sorted(res.per_degree))
    rows = []
    for s in range(N + 1):
        for k in degrees:
            rows.append((s, k, factors(tower.level(s).homology(k))))
    text = _tsv(["level", "k", "invariant-factors"], rows)
    pairs = []
    for k in degrees:
        r = res.per_degree.get(k)
        if r is None:
            continue
        pairs += [(f"lim H_{k}", _lim_text(r.lim)), (f"lim1 H_{k}", r.lim1)]
    pairs.append(("localization", res.localization.holds))
    text += "\n" + _block(pairs)
    determined = all(r.lim1 != "undetermined" for r in res.per_degree.values())
    return (EXIT_OK if determined else EXIT_UNDETERMINED), text


def cmd_invert(job, doc):
    X = doc.complex(_task(doc, "X"))
    fs = _elements(doc)
    inv = moore.invert(X, fs)
    degrees = job.degrees if job.degrees is not None else tuple(sorted(set(X.degrees()) | set(inv.complex.degrees())))
    rows = [(k, factors(X.homology(k)), factors(inv.complex.homology(k))) for k in degrees]
    text = _tsv(["k", "source", "inverted"], rows)
    text += "\n" + _block([("base", inv.base), ("acts invertibly", inv.acts_invertibly())])
    return EXIT_OK, text


def cmd_fracture(job, doc):
    X = doc.complex(_task(doc, "X"))
    f = _elements(doc, "element")
    if len(f) != 1:
        raise InputError("task.element names one element")
    N = _int_opt(doc, "levels", job.horizon, 6)
    sq = moore.fracture_square(X, f[0], N)
    rows = []
    for k in sorted(sq.corners):
        A, B, D = sq.corners[k]
        rows.append((k, factors(A), factors(B), factors(D)))
    text = _tsv(["k", "completion", "inverted", "inverted-completion"], rows)
    text += "\n" + _block([("commutes", sq.commutes), ("middle exact", sq.middle_exact),
                           ("connecting", sq.connecting_ok), ("verdict", sq.verdict)])
    if sq.report:
        text += sq.report.rstrip("\n") + "\n"
    return (EXIT_UNDETERMINED if sq.verdict is None else EXIT_OK), text


def _registry(doc):
    if doc.registry is None:
        return lattice.FactRegistry()
    return doc.registry


def cmd_lattice(job, doc):
    if not job.extra:
        raise InputError("lattice needs an operation: normalize, complement, leq or equal")
    op, exprs = job.extra[0], job.extra[1:]
    need = {"normalize": 1, "complement": 1, "leq": 2, "equal": 2}
    if op not in need:
        raise InputError(f"unknown lattice operation {op!r}")
    if len(exprs) != need[op]:
        raise InputError(f"{op} takes {need[op]} expression(s)")
    reg = _registry(doc)
    try:
        parsed = [lattice.parse(e) for e in exprs]
    except (TowerkitError, ValueError) as exc:
        raise InputError(f"cannot parse expression: {exc}") from exc
    if op == "normalize":
        return EXIT_OK, f"{lattice.normalize(parsed[0], reg)}\n"
    if op == "complement":
        c = lattice.complement(parsed[0], reg)
        if not c:
            return EXIT_UNDETERMINED, f"unknown: no complement recorded for {c.atom}\n"
        return EXIT_OK, f"{lattice.normalize(c, reg)}\n"
    res = lattice.leq(*parsed, reg) if op == "leq" else lattice.equal(*parsed, reg)
    text = f"{res.verdict}\n" + "".join(f"  {s}\n" for s in res.steps)
    return (EXIT_OK if res.verdict == "true" else EXIT_UNDETERMINED), text


def _resolution_spec(doc, spec, where):
    if not isinstance(spec, dict):
        raise InputError(f"task.{where} must be a mapping")
    if "ring" in spec:
        return doc.ring_complex(spec["ring"])
    if "elements" in spec:
        return [document.parse_int(x, f"task.{where}.elements") for x in spec["elements"]]
    if "invert" in spec:
        return {"invert": [document.parse_int(x, f"task.{where}.invert") for x in spec["invert"]]}
    raise InputError(f"task.{where} needs ring, elements or invert")


def _map_text(f):
    if isinstance(f, Tower):
        return str(f)
    if hasattr(f, "maps"):
        return "; ".join(f"{k}: {f.maps[k].matrix.rows}" for k in sorted(f.maps)) or "0"
    return str(f.matrix.rows)


def cmd_compare(job, doc):
    X = doc.complex(_task(doc, "X"))
    N = _int_opt(doc, "levels", None, 6)
    first = nilpotent.truncated_resolutions(X, _resolution_spec(doc, _task(doc, "first"), "first"), N)
    second = nilpotent.truncated_resolutions(X, _resolution_spec(doc, _task(doc, "second"), "second"), N)
    E = doc.ring_complex(doc.task["E"]) if "E" in doc.task else None
    cmp = nilpotent.compare_resolutions(first, second, E, horizon=job.horizon)
    pairs = [("first", first.kind), ("second", second.kind), ("offset", cmp.offset),
             ("under source", cmp.under_source), ("limits agree", cmp.lims_agree),
             ("verdict", cmp.verdict)]
    if E is not None:
        pairs.insert(-1, ("E-side", cmp.e_side))
    if cmp.reason:
        pairs.append(("reason", cmp.reason))
    lines = [_block(pairs)]
    for label, R in (("first", first), ("second", second)):
        lines.append(f"[{label} certificates]\n")
        for key in sorted(R.certificates):
            cert = R.certificates[key]
            lines.append(f"{key}: {'ok' if cert.verify() else 'FAILED'}\n")
            lines.append("".join("  " + ln + "\n" for ln in cert.describe().splitlines()))
    if cmp.witness is not None:
        lines.append("[witness]\n")
        for k in range(cmp.witness.horizon + 1):
            lines.append(f"level {k}: {_map_text(cmp.witness.at(k))}\n")
    return (EXIT_UNDETERMINED if cmp.verdict is None else EXIT_OK), "".join(lines)


COMMANDS = {
    "validate": cmd_validate,
    "pages": cmd_pages,
    "converge": cmd_converge,
    "complete": cmd_complete,
    "invert": cmd_invert,
    "fracture": cmd_fracture,
    "lattice": cmd_lattice,
    "compare-resolutions": cmd_compare,
}


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1), keeping 2 for undetermined verdicts."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="towerkit", description="Exact computations with towers of chain complexes.")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("input", help="document path")
        if name == "lattice":
            sp.add_argument("extra", nargs="*", help="operation followed by expressions")
        sp.add_argument("--horizon", type=int)
        sp.add_argument("--rmax", type=int)
        sp.add_argument("--window", type=int)
        sp.add_argument("--degrees")
        sp.add_argument("--out")
    return p


def job_from_args(ns):
    return JobSpec(
        subcommand=ns.subcommand,
        input=ns.input,
        horizon=_bounded("horizon", ns.horizon, MAX_HORIZON),
        rmax=_bounded("rmax", ns.rmax, MAX_RMAX),
        window=_bounded("window", ns.window, MAX_WINDOW),
        degrees=parse_degrees(ns.degrees) if ns.degrees else None,
        out=ns.out,
        extra=tuple(getattr(ns, "extra", ()) or ()),
    )


def run(job):
    """Run one job; returns ``(exit code, report text, diagnostic or None)``."""
    try:
        threads()
        doc = document.load(job.input)
        code, text = COMMANDS[job.subcommand](job, doc)
    except InputError as exc:
        return EXIT_INPUT, "", str(exc)
    except (Undetermined, UndeterminedError, DepthError) as exc:
        return EXIT_UNDETERMINED, "", f"undetermined: {exc}"
    except TowerkitError as exc:
        return EXIT_INPUT, "", f"{type(exc).__name__}: {exc}"
    diag = None
    if code == EXIT_INPUT and job.subcommand == "validate":
        diag = f"{text.count(chr(10))} problem(s) found"
    return code, text, diag


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        job = job_from_args(ns)
    except InputError as exc:
        print(f"towerkit: {exc}", file=sys.stderr)
        return EXIT_INPUT
    code, text, diag = run(job)
    if text:
        if job.out:
            try:
                with open(job.out, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
            except OSError as exc:
                print(f"towerkit: cannot write {job.out}: {exc}", file=sys.stderr)
                return EXIT_INPUT
        else:
            sys.stdout.write(text)
    if diag:
        print(f"towerkit: {diag.splitlines()[0]}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
