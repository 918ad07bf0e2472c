# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simplex-lattice scan. Same contract as ``_grid_py.grid_extrema``."""
import numpy as np

ctypedef long long i64


cdef inline i64 _dot(const i64* a, const i64* k, Py_ssize_t n) noexcept nogil:
    cdef i64 s = 0
    cdef Py_ssize_t j
    for j in range(n):
        s += a[j] * k[j]
    return s


cdef bint _feasible(const i64* k, Py_ssize_t n,
                    const i64* a_eq, const i64* b_eq, Py_ssize_t m_eq,
                    const i64* a_ub, const i64* b_ub, Py_ssize_t m_ub,
                    const i64* bil, Py_ssize_t m_bil) noexcept nogil:
    cdef Py_ssize_t r
    cdef const i64* f
    for r in range(m_eq):
        if _dot(a_eq + r * n, k, n) != b_eq[r]:
            return False
    for r in range(m_ub):
        if _dot(a_ub + r * n, k, n) > b_ub[r]:
            return False
    for r in range(m_bil):
        f = bil + 4 * r * n
        if _dot(f, k, n) * _dot(f + n, k, n) > _dot(f + 2 * n, k, n) * _dot(f + 3 * n, k, n):
            return False
    return True


def grid_extrema(i64 M, a_eq, b_eq, a_ub, b_ub, bil, num, den, Py_ssize_t elim):
    cdef i64[:, ::1] aeq = np.ascontiguousarray(a_eq, dtype=np.int64)
    cdef i64[::1] beq = np.ascontiguousarray(b_eq, dtype=np.int64)
    cdef i64[:, ::1] aub = np.ascontiguousarray(a_ub, dtype=np.int64)
    cdef i64[::1] bub = np.ascontiguousarray(b_ub, dtype=np.int64)
    cdef i64[:, :, ::1] bl = np.ascontiguousarray(bil, dtype=np.int64)
    cdef i64[::1] nm = np.ascontiguousarray(num, dtype=np.int64)
    cdef i64[::1] dn = np.ascontiguousarray(den, dtype=np.int64)
    cdef Py_ssize_t n = nm.shape[0]
    cdef Py_ssize_t m_eq = aeq.shape[0], m_ub = aub.shape[0], m_bil = bl.shape[0]
    # one spare slot keeps the pointers valid for empty arrays
    cdef i64[::1] pad = np.zeros(4 * n + 1, dtype=np.int64)
    cdef const i64* p_aeq = &aeq[0, 0] if m_eq else &pad[0]
    cdef const i64* p_beq = &beq[0] if m_eq else &pad[0]
    cdef const i64* p_aub = &aub[0, 0] if m_ub else &pad[0]
    cdef const i64* p_bub = &bub[0] if m_ub else &pad[0]
    cdef const i64* p_bil = &bl[0, 0, 0] if m_bil else &pad[0]
    cdef const i64* p_num = &nm[0]
    cdef const i64* p_den = &dn[0]
    cdef i64[::1] kbuf = np.zeros(n, dtype=np.int64)
    cdef i64[::1] klo = np.zeros(n, dtype=np.int64)
    cdef i64[::1] khi = np.zeros(n, dtype=np.int64)
    cdef i64* k = &kbuf[0]
    cdef i64 s = 0, rem, rhs, diff = 0, nv, dv, count = 0
    cdef i64 lo_n = 0, lo_d = 0, hi_n = 0, hi_d = 0
    cdef Py_ssize_t i, j
    cdef Py_ssize_t free = n - 2 if elim >= 0 else n - 1
    cdef bint hit
    if free < 0:
        free = 0
    if elim >= 0:
        diff = aeq[elim, n - 2] - aeq[elim, n - 1]
        if diff == 0:
            raise ValueError("elimination row needs different coefficients on the last two cells")
    with nogil:
        while True:
            rem = M - s
            hit = True
            if elim >= 0:
                rhs = p_beq[elim] - p_aeq[elim * n + n - 1] * rem
                for j in range(free):
                    rhs -= p_aeq[elim * n + j] * k[j]
                if rhs % diff != 0 or rhs // diff < 0 or rhs // diff > rem:
                    hit = False
                else:
                    k[n - 2] = rhs // diff
                    k[n - 1] = rem - k[n - 2]
            else:
                k[n - 1] = rem
            if hit and _feasible(k, n, p_aeq, p_beq, m_eq, p_aub, p_bub, m_ub, p_bil, m_bil):
                dv = _dot(p_den, k, n)
                if dv > 0:
                    nv = _dot(p_num, k, n)
                    if count == 0 or nv * lo_d < lo_n * dv:
                        lo_n = nv
                        lo_d = dv
                        for j in range(n):
                            klo[j] = k[j]
                    if count == 0 or nv * hi_d > hi_n * dv:
                        hi_n = nv
                        hi_d = dv
                        for j in range(n):
                            khi[j] = k[j]
                    count += 1
            i = free - 1
            while i >= 0:
                if s < M:
                    k[i] += 1
                    s += 1
                    break
                s -= k[i]
                k[i] = 0
                i -= 1
            if i < 0:
                break
    return count, lo_n, lo_d, hi_n, hi_d, np.asarray(klo), np.asarray(khi)
