"""Pure numpy simplex-lattice scan, used when the compiled module is missing.

Lattice points are integer vectors k >= 0 with sum(k) == M, standing for
q = k / M. All constraint data arrives pre-scaled to integers so every
comparison is exact:

    a_eq @ k == b_eq,   a_ub @ k <= b_ub,
    (bil[r,0] @ k) * (bil[r,1] @ k) <= (bil[r,2] @ k) * (bil[r,3] @ k).

The objective is the ratio (num @ k) / (den @ k) over points with a
positive denominator. When ``elim`` is a row index of ``a_eq`` whose last
two coefficients differ, the last two coordinates are solved from that row
and the sum, so only n - 2 coordinates are scanned.
"""
from __future__ import annotations

import itertools

import numpy as np


def _mesh(rem: int, width: int) -> np.ndarray:
    """All (x, y) (or (x,)) with non-negative entries summing to at most rem."""
    if width == 0:
        return np.zeros((1, 0), dtype=np.int64)
    if width == 1:
        return np.arange(rem + 1, dtype=np.int64)[:, None]
    x, y = np.triu_indices(rem + 1)
    # pairs with x <= y map to (x, y - x), which covers every sum <= rem
    return np.stack([x, y - x], axis=1).astype(np.int64)


def _prefixes(width: int, M: int):
    if width == 0:
        yield ()
        return
    for head in itertools.product(range(M + 1), repeat=width):
        if sum(head) <= M:
            yield head


def grid_extrema(M, a_eq, b_eq, a_ub, b_ub, bil, num, den, elim):
    n = len(num)
    if elim >= 0 and a_eq[elim, n - 2] == a_eq[elim, n - 1]:
        raise ValueError("elimination row needs different coefficients on the last two cells")
    free = max(n - 2 if elim >= 0 else n - 1, 0)
    tail = min(free, 2)
    count = 0
    lo = hi = None
    klo = np.zeros(n, dtype=np.int64)
    khi = np.zeros(n, dtype=np.int64)
    for head in _prefixes(free - tail, M):
        used = sum(head)
        block = _mesh(M - used, tail)
        pts = np.empty((len(block), n), dtype=np.int64)
        pts[:, : free - tail] = head
        pts[:, free - tail : free] = block
        rem = M - used - block.sum(axis=1)
        if elim >= 0:
            diff = a_eq[elim, n - 2] - a_eq[elim, n - 1]
            rhs = b_eq[elim] - a_eq[elim, n - 1] * rem - pts[:, :free] @ a_eq[elim, :free]
            x = rhs // diff
            ok = (rhs % diff == 0) & (x >= 0) & (x <= rem)
            pts, rem, x = pts[ok], rem[ok], x[ok]
            pts[:, n - 2] = x
            pts[:, n - 1] = rem - x
        else:
            pts[:, n - 1] = rem
        if len(pts) == 0:
            continue
        keep = np.ones(len(pts), dtype=bool)
        if len(a_eq):
            keep &= np.all(pts @ a_eq.T == b_eq, axis=1)
        if len(a_ub):
            keep &= np.all(pts @ a_ub.T <= b_ub, axis=1)
        for r in range(len(bil)):
            f = pts @ bil[r].T
            keep &= f[:, 0] * f[:, 1] <= f[:, 2] * f[:, 3]
        pts = pts[keep]
        dv = pts @ den
        pts = pts[dv > 0]
        if len(pts) == 0:
            continue
        dv = pts @ den
        nv = pts @ num
        count += len(pts)
        # exact ratio order by cross multiplication against the running best
        i = _argbest(nv, dv, -1)
        j = _argbest(nv, dv, 1)
        if lo is None or nv[i] * lo[1] < lo[0] * dv[i]:
            lo = (int(nv[i]), int(dv[i]))
            klo = pts[i].copy()
        if hi is None or nv[j] * hi[1] > hi[0] * dv[j]:
            hi = (int(nv[j]), int(dv[j]))
            khi = pts[j].copy()
    if lo is None:
        return 0, 0, 0, 0, 0, klo, khi
    return count, lo[0], lo[1], hi[0], hi[1], klo, khi


def _argbest(nv: np.ndarray, dv: np.ndarray, sign: int) -> int:
    # float ratio picks a candidate, then exact cross products settle near-ties
    r = nv / dv
    best = int(np.argmax(r) if sign > 0 else np.argmin(r))
    while True:
        better = np.flatnonzero(sign * (nv * dv[best] - nv[best] * dv) > 0)
        if len(better) == 0:
            return best
        best = int(better[0])
