"""Exact integer matrices and the handful of lattice routines built on them.

The Smith-form and product kernels come from the compiled extension when it
is importable and from ``_kernel_py`` otherwise; ``use_backend`` switches at
runtime.  Compiled calls that overflow 64-bit words transparently rerun on
Python ints.
"""

from math import gcd

from . import _kernel_py

try:
    from . import _kernel as _available
except ImportError:
    _available = None

_compiled = _available


def backend():
    return "compiled" if _compiled is not None else "python"


def use_backend(name):
    """Select ``"compiled"`` or ``"python"``; returns the previous choice."""
    global _compiled
    prev = backend()
    if name == "python":
        _compiled = None
    elif name == "compiled":
        if _available is None:
            raise ImportError("the compiled kernel is not built")
        _compiled = _available
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev


def _smith_rows(rows, ncols):
    if _compiled is not None:
        try:
            return _compiled.smith(rows, ncols)
        except OverflowError:
            pass
    return _kernel_py.smith(rows, ncols)


def _matmul_rows(a, b, cols):
    if _compiled is not None:
        try:
            return _compiled.matmul(a, b, cols)
        except OverflowError:
            pass
    return _kernel_py.matmul(a, b, cols)


class Mat:
    """An ``m x n`` integer matrix stored as a list of rows.

    The shape is stored explicitly so empty matrices keep their dimensions.
    Instances are treated as immutable once built.
    """

    __slots__ = ("rows", "m", "n")

    def __init__(self, rows, m=None, n=None):
        rows = [[int(x) for x in r] for r in rows]
        self.m = len(rows) if m is None else m
        if n is None:
            n = len(rows[0]) if rows else 0
        self.n = n
        if len(rows) != self.m or any(len(r) != n for r in rows):
            raise ValueError("ragged matrix")
        self.rows = rows

    @classmethod
    def _raw(cls, rows, m, n):
        obj = cls.__new__(cls)
        obj.rows = rows
        obj.m = m
        obj.n = n
        return obj

    @classmethod
    def zeros(cls, m, n):
        return cls._raw([[0] * n for _ in range(m)], m, n)

    @classmethod
    def identity(cls, n):
        return cls._raw([[1 if i == j else 0 for j in range(n)] for i in range(n)], n, n)

    @classmethod
    def diag(cls, entries, m=None, n=None):
        m = len(entries) if m is None else m
        n = len(entries) if n is None else n
        out = cls.zeros(m, n)
        for i, x in enumerate(entries):
            out.rows[i][i] = x
        return out

    @classmethod
    def from_columns(cls, cols, m):
        n = len(cols)
        return cls._raw([[cols[j][i] for j in range(n)] for i in range(m)], m, n)

    def __repr__(self):
        return f"Mat({self.rows!r}, m={self.m}, n={self.n})"

    def __eq__(self, other):
        return isinstance(other, Mat) and self.m == other.m and self.n == other.n and self.rows == other.rows

    def __hash__(self):
        return hash((self.m, self.n, tuple(map(tuple, self.rows))))

    @property
    def shape(self):
        return (self.m, self.n)

    def col(self, j):
        return [r[j] for r in self.rows]

    def columns(self):
        return [self.col(j) for j in range(self.n)]

    def T(self):
        return Mat._raw([[self.rows[i][j] for i in range(self.m)] for j in range(self.n)], self.n, self.m)

    def __matmul__(self, other):
        if self.n != other.m:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        if self.m == 0 or other.n == 0:
            return Mat.zeros(self.m, other.n)
        if self.n == 0:
            return Mat.zeros(self.m, other.n)
        return Mat._raw(_matmul_rows(self.rows, other.rows, other.n), self.m, other.n)

    def apply(self, v):
        return [sum(x * y for x, y in zip(r, v) if x) for r in self.rows]

    def __add__(self, other):
        if self.shape != other.shape:
            raise ValueError("shape mismatch in addition")
        return Mat._raw([[x + y for x, y in zip(r, s)] for r, s in zip(self.rows, other.rows)], self.m, self.n)

    def __sub__(self, other):
        if self.shape != other.shape:
            raise ValueError("shape mismatch in subtraction")
        return Mat._raw([[x - y for x, y in zip(r, s)] for r, s in zip(self.rows, other.rows)], self.m, self.n)

    def __neg__(self):
        return Mat._raw([[-x for x in r] for r in self.rows], self.m, self.n)

    def scale(self, c):
        return Mat._raw([[c * x for x in r] for r in self.rows], self.m, self.n)

    def is_zero(self):
        return all(x == 0 for r in self.rows for x in r)

    def take_rows(self, idx):
        return Mat._raw([list(self.rows[i]) for i in idx], len(idx), self.n)

    def take_cols(self, idx):
        return Mat._raw([[r[j] for j in idx] for r in self.rows], self.m, len(idx))

    def block(self, ridx, cidx):
        return Mat._raw([[self.rows[i][j] for j in cidx] for i in ridx], len(ridx), len(cidx))

    def hstack(self, other):
        if self.m != other.m:
            raise ValueError("row mismatch in hstack")
        return Mat._raw([r + s for r, s in zip(self.rows, other.rows)], self.m, self.n + other.n)

    def vstack(self, other):
        if self.n != other.n:
            raise ValueError("column mismatch in vstack")
        return Mat._raw([list(r) for r in self.rows] + [list(r) for r in other.rows], self.m + other.m, self.n)

    def kron(self, other):
        rows = []
        for r in self.rows:
            for s in other.rows:
                rows.append([x * y for x in r for y in s])
        return Mat._raw(rows, self.m * other.m, self.n * other.n)

    def tolist(self):
        return [list(r) for r in self.rows]


def block_diag(*mats):
    m = sum(a.m for a in mats)
    n = sum(a.n for a in mats)
    out = Mat.zeros(m, n)
    r0 = c0 = 0
    for a in mats:
        for i in range(a.m):
            out.rows[r0 + i][c0:c0 + a.n] = a.rows[i]
        r0 += a.m
        c0 += a.n
    return out


def blocks(grid, row_sizes, col_sizes):
    """Assemble a block matrix; ``None`` entries stand for zero blocks."""
    out = Mat.zeros(sum(row_sizes), sum(col_sizes))
    r0 = 0
    for bi, rs in enumerate(row_sizes):
        c0 = 0
        for bj, cs in enumerate(col_sizes):
            b = grid[bi][bj]
            if b is not None:
                if b.shape != (rs, cs):
                    raise ValueError(f"block ({bi},{bj}) has shape {b.shape}, expected {(rs, cs)}")
                for i in range(rs):
                    out.rows[r0 + i][c0:c0 + cs] = b.rows[i]
            c0 += cs
        r0 += rs
    return out


class Smith:
    """Smith decomposition ``U * A * V = D`` of a matrix ``A``."""

    __slots__ = ("diag", "U", "Uinv", "V", "rank", "m", "n")

    def __init__(self, a):
        self.m, self.n = a.m, a.n
        d, U, Ui, V = _smith_rows(a.rows, a.n)
        self.diag = list(d)
        self.U = Mat._raw(U, a.m, a.m)
        self.Uinv = Mat._raw(Ui, a.m, a.m)
        self.V = Mat._raw(V, a.n, a.n)
        self.rank = sum(1 for x in self.diag if x)


def smith(a):
    return Smith(a)


def invariant_factors(a):
    """Nonzero invariant factors of ``a`` (entries equal to one included)."""
    return [x for x in Smith(a).diag if x]


def kernel_basis(a):
    """Columns of an integer basis for ``{x : a x = 0}`` as an ``n x k`` matrix."""
    s = Smith(a)
    return s.V.take_cols(list(range(s.rank, a.n)))


def split_unit(d, primes):
    """Write ``d = core * unit`` with ``unit`` a product of the given primes."""
    d = abs(d)
    unit = 1
    for p in primes:
        while d and d % p == 0:
            d //= p
            unit *= p
    return d, unit


def solve(a, b, primes=()):
    """Solve ``a x = b`` over the integers with ``primes`` inverted.

    Returns ``(x, den)`` with integer ``x`` and ``den`` a product of the
    inverted primes such that ``a x = den * b``, or ``None`` when no solution
    exists.
    """
    s = Smith(a)
    c = s.U.apply(b)
    ys = []
    den = 1
    for i in range(a.m):
        di = s.diag[i] if i < len(s.diag) else 0
        if di == 0:
            if c[i] != 0:
                return None
            ys.append((0, 1))
            continue
        core, unit = split_unit(di, primes)
        if c[i] % core:
            return None
        ys.append((c[i] // core, unit))
        den = den * unit // gcd(den, unit)
    y = [num * (den // unit) for num, unit in ys[: a.n]] + [0] * max(0, a.n - a.m)
    return s.V.apply(y), den


def lcm(a, b):
    if a == 0 or b == 0:
        return 0
    return abs(a * b) // gcd(a, b)


def det(a):
    """Determinant of a square integer matrix by fraction-free elimination."""
    n = a.m
    if a.n != n:
        raise ValueError("determinant of a non-square matrix")
    if n == 0:
        return 1
    M = [list(r) for r in a.rows]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if M[i][k]), None)
            if swap is None:
                return 0
            M[k], M[swap] = M[swap], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]
