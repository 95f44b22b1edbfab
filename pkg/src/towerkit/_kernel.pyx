# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integer kernels on 64-bit words.

Every multiply and add is overflow-checked; on overflow the functions raise
``OverflowError`` and the caller retries with the Python-int kernel.
"""

from libc.stdlib cimport malloc, free

cdef extern from *:
    """
    static int tk_mul(long long a, long long b, long long *r) {
        return __builtin_mul_overflow(a, b, r);
    }
    static int tk_add(long long a, long long b, long long *r) {
        return __builtin_add_overflow(a, b, r);
    }
    """
    int tk_mul(long long a, long long b, long long *r) nogil
    int tk_add(long long a, long long b, long long *r) nogil


cdef inline long long floordiv(long long a, long long b) nogil:
    cdef long long q = a / b
    if (a % b != 0) and ((a < 0) != (b < 0)):
        q -= 1
    return q


cdef inline long long absll(long long a) nogil:
    return -a if a < 0 else a


cdef class _Buf:
    cdef long long *d
    cdef Py_ssize_t r, c

    def __cinit__(self, Py_ssize_t r, Py_ssize_t c):
        self.r = r
        self.c = c
        self.d = <long long *> malloc(max(r * c, 1) * sizeof(long long))
        if self.d == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.d)

    cdef void eye(self):
        cdef Py_ssize_t i
        for i in range(self.r * self.c):
            self.d[i] = 0
        for i in range(min(self.r, self.c)):
            self.d[i * self.c + i] = 1

    cdef list tolist(self):
        return [[self.d[i * self.c + j] for j in range(self.c)] for i in range(self.r)]


cdef int _addrow(_Buf M, Py_ssize_t dst, Py_ssize_t src, long long c) nogil:
    # M[dst] += c * M[src]
    cdef Py_ssize_t k
    cdef long long t
    for k in range(M.c):
        if M.d[src * M.c + k] != 0:
            if tk_mul(c, M.d[src * M.c + k], &t):
                return 1
            if tk_add(M.d[dst * M.c + k], t, &M.d[dst * M.c + k]):
                return 1
    return 0


cdef int _addcol(_Buf M, Py_ssize_t dst, Py_ssize_t src, long long c) nogil:
    # M[:, dst] += c * M[:, src]
    cdef Py_ssize_t k
    cdef long long t
    for k in range(M.r):
        if M.d[k * M.c + src] != 0:
            if tk_mul(c, M.d[k * M.c + src], &t):
                return 1
            if tk_add(M.d[k * M.c + dst], t, &M.d[k * M.c + dst]):
                return 1
    return 0


cdef void _swaprow(_Buf M, Py_ssize_t i, Py_ssize_t j) nogil:
    cdef Py_ssize_t k
    cdef long long t
    for k in range(M.c):
        t = M.d[i * M.c + k]
        M.d[i * M.c + k] = M.d[j * M.c + k]
        M.d[j * M.c + k] = t


cdef void _swapcol(_Buf M, Py_ssize_t i, Py_ssize_t j) nogil:
    cdef Py_ssize_t k
    cdef long long t
    for k in range(M.r):
        t = M.d[k * M.c + i]
        M.d[k * M.c + i] = M.d[k * M.c + j]
        M.d[k * M.c + j] = t


def smith(a, Py_ssize_t n):
    """Same contract as the Python kernel's ``smith``."""
    cdef Py_ssize_t m = len(a)
    cdef _Buf A = _Buf(m, n)
    cdef _Buf U = _Buf(m, m)
    cdef _Buf Ui = _Buf(m, m)
    cdef _Buf V = _Buf(n, n)
    cdef Py_ssize_t i, j, t, bi, bj, bad
    cdef long long p, v, best, q
    cdef bint clean
    for i in range(m):
        row = a[i]
        for j in range(n):
            v = row[j]
            if v == (-9223372036854775807 - 1):
                raise OverflowError("entry too large")
            A.d[i * n + j] = v
    U.eye()
    Ui.eye()
    V.eye()
    t = 0
    while t < min(m, n):
        best = 0
        bi = -1
        bj = -1
        for i in range(t, m):
            for j in range(t, n):
                v = absll(A.d[i * n + j])
                if v != 0 and (best == 0 or v < best):
                    best = v
                    bi = i
                    bj = j
        if bi < 0:
            break
        if bi != t:
            _swaprow(A, bi, t); _swaprow(U, bi, t); _swapcol(Ui, bi, t)
        if bj != t:
            _swapcol(A, bj, t); _swapcol(V, bj, t)
        while True:
            p = A.d[t * n + t]
            clean = True
            for i in range(t + 1, m):
                v = A.d[i * n + t]
                if v != 0:
                    q = -floordiv(v, p)
                    if _addrow(A, i, t, q) or _addrow(U, i, t, q) or _addcol(Ui, t, i, -q):
                        raise OverflowError("smith overflow")
                    if A.d[i * n + t] != 0:
                        clean = False
            for j in range(t + 1, n):
                v = A.d[t * n + j]
                if v != 0:
                    q = -floordiv(v, p)
                    if _addcol(A, j, t, q) or _addcol(V, j, t, q):
                        raise OverflowError("smith overflow")
                    if A.d[t * n + j] != 0:
                        clean = False
            if not clean:
                best = absll(p)
                bi = t
                bj = t
                for i in range(t + 1, m):
                    v = absll(A.d[i * n + t])
                    if v != 0 and v < best:
                        best = v; bi = i; bj = t
                for j in range(t + 1, n):
                    v = absll(A.d[t * n + j])
                    if v != 0 and v < best:
                        best = v; bi = t; bj = j
                if bi != t:
                    _swaprow(A, bi, t); _swaprow(U, bi, t); _swapcol(Ui, bi, t)
                if bj != t:
                    _swapcol(A, bj, t); _swapcol(V, bj, t)
                continue
            bad = -1
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if A.d[i * n + j] % p != 0:
                        bad = i
                        break
                if bad >= 0:
                    break
            if bad < 0:
                break
            if _addrow(A, t, bad, 1) or _addrow(U, t, bad, 1) or _addcol(Ui, bad, t, -1):
                raise OverflowError("smith overflow")
        if A.d[t * n + t] < 0:
            for j in range(n):
                A.d[t * n + j] = -A.d[t * n + j]
            for j in range(m):
                U.d[t * m + j] = -U.d[t * m + j]
                Ui.d[j * m + t] = -Ui.d[j * m + t]
        t += 1
    diag = [A.d[i * n + i] for i in range(min(m, n))]
    return diag, U.tolist(), Ui.tolist(), V.tolist()


def matmul(a, b, Py_ssize_t cols):
    """Same contract as the Python kernel's ``matmul``."""
    cdef Py_ssize_t m = len(a)
    cdef Py_ssize_t inner = len(b)
    cdef _Buf A = _Buf(m, inner)
    cdef _Buf B = _Buf(inner, cols)
    cdef _Buf C = _Buf(m, cols)
    cdef Py_ssize_t i, j, k
    cdef long long acc, t, x
    for i in range(m):
        row = a[i]
        for k in range(inner):
            A.d[i * inner + k] = row[k]
    for k in range(inner):
        row = b[k]
        for j in range(cols):
            B.d[k * cols + j] = row[j]
    for i in range(m):
        for j in range(cols):
            acc = 0
            for k in range(inner):
                x = A.d[i * inner + k]
                if x != 0:
                    if tk_mul(x, B.d[k * cols + j], &t) or tk_add(acc, t, &acc):
                        raise OverflowError("matmul overflow")
            C.d[i * cols + j] = acc
    return C.tolist()
