"""Real Hessenberg eigenvalues by Francis double-shift QR.

Small dense eigensolver backing Ritz extraction and slow-multiplier
readouts.  Works entirely in real arithmetic: conjugate pairs come from
2x2 real Schur blocks, so they are exactly conjugate.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NoConvergence

_EPS = float(np.finfo(np.float64).eps)

#: Francis sweeps on one stuck block before an exceptional shift.
_EXCEPTIONAL_EVERY = 10


def sort_descending(values) -> list[complex]:
    """Deterministic ordering: by descending modulus, then descending
    imaginary part, then descending real part."""
    return sorted(values, key=lambda z: (-abs(z), -z.imag, -z.real))


def _eig2x2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]] with exact conjugate symmetry."""
    half = 0.5 * (a + d)
    q = (0.5 * (a - d)) ** 2 + b * c
    if q >= 0.0:
        r = math.sqrt(q)
        lam1 = half + r if half >= 0.0 else half - r
        det = a * d - b * c
        lam2 = det / lam1 if lam1 != 0.0 else half - math.copysign(r, half)
        return complex(lam1), complex(lam2)
    im = math.sqrt(-q)
    return complex(half, im), complex(half, -im)


def _house(x: np.ndarray):
    """Householder vector/coefficient mapping x to a multiple of e1."""
    sigma = float(np.linalg.norm(x))
    if sigma == 0.0:
        return x, 0.0
    v = x.copy()
    v[0] += math.copysign(sigma, x[0]) if x[0] != 0.0 else sigma
    vnorm2 = float(v @ v)
    if vnorm2 == 0.0:
        return v, 0.0
    return v, 2.0 / vnorm2


def _francis_sweep(h: np.ndarray, lo: int, hi: int, s: float, t: float) -> None:
    """One implicit double-shift bulge chase on the unreduced block
    ``h[lo:hi, lo:hi]`` with shift polynomial x^2 - s*x + t."""
    x = h[lo, lo] * h[lo, lo] + h[lo, lo + 1] * h[lo + 1, lo] - s * h[lo, lo] + t
    y = h[lo + 1, lo] * (h[lo, lo] + h[lo + 1, lo + 1] - s)
    z = h[lo + 2, lo + 1] * h[lo + 1, lo]
    for k in range(lo, hi - 2):
        v, beta = _house(np.array([x, y, z]))
        rows = slice(k, k + 3)
        if beta != 0.0:
            block = h[rows, max(lo, k - 1):hi]
            block -= np.outer(beta * v, v @ block)
            block = h[lo:min(k + 4, hi), rows]
            block -= np.outer(block @ v, beta * v)
        if k > lo:
            h[k + 1, k - 1] = 0.0
            h[k + 2, k - 1] = 0.0
        x = h[k + 1, k]
        y = h[k + 2, k]
        z = h[k + 3, k] if k + 3 <= hi - 1 else 0.0
    # final 2-vector rotation at the bottom of the block
    k = hi - 2
    v, beta = _house(np.array([x, y]))
    if beta != 0.0:
        rows = slice(k, k + 2)
        block = h[rows, max(lo, k - 1):hi]
        block -= np.outer(beta * v, v @ block)
        block = h[lo:hi, rows]
        block -= np.outer(block @ v, beta * v)
    if k > lo:
        h[k + 1, k - 1] = 0.0


def hessenberg_eigenvalues(h, max_sweeps: int | None = None) -> list[complex]:
    """All eigenvalues of a real upper-Hessenberg matrix.

    Shifted QR with implicit double shifts and 2x2 real-Schur blocks for
    conjugate pairs.  Raises :class:`NoConvergence` (carrying the partial
    spectrum) after ``max_sweeps`` total sweeps, default ``100 * m``.
    """
    h = np.array(h, dtype=np.float64, copy=True)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    m = h.shape[0]
    if m > 2 and np.any(np.tril(h, -2) != 0.0):
        raise ValueError("matrix is not upper Hessenberg")
    if max_sweeps is None:
        max_sweeps = 100 * m
    eigs: list[complex] = []
    hi = m
    sweeps = 0
    stuck = 0
    while hi > 0:
        # deflate negligible subdiagonals in the active window
        for k in range(1, hi):
            if abs(h[k, k - 1]) <= _EPS * (abs(h[k - 1, k - 1]) + abs(h[k, k])):
                h[k, k - 1] = 0.0
        lo = hi - 1
        while lo > 0 and h[lo, lo - 1] != 0.0:
            lo -= 1
        size = hi - lo
        if size == 1:
            eigs.append(complex(h[lo, lo]))
            hi -= 1
            stuck = 0
        elif size == 2:
            eigs.extend(_eig2x2(h[lo, lo], h[lo, lo + 1], h[lo + 1, lo], h[lo + 1, lo + 1]))
            hi -= 2
            stuck = 0
        else:
            if sweeps >= max_sweeps:
                raise NoConvergence(
                    f"QR iteration did not deflate within {max_sweeps} sweeps",
                    partial=sort_descending(eigs),
                )
            sweeps += 1
            stuck += 1
            if stuck % _EXCEPTIONAL_EVERY == 0:
                # ad hoc exceptional shift to break symmetry-induced stalls
                w = abs(h[hi - 1, hi - 2]) + abs(h[hi - 2, hi - 3])
                s = 1.5 * w
                t = w * w
            else:
                s = h[hi - 2, hi - 2] + h[hi - 1, hi - 1]
                t = (
                    h[hi - 2, hi - 2] * h[hi - 1, hi - 1]
                    - h[hi - 2, hi - 1] * h[hi - 1, hi - 2]
                )
            _francis_sweep(h, lo, hi, s, t)
    return sort_descending(eigs)


def hessenberg_reduce(a) -> np.ndarray:
    """Orthogonal similarity reduction of a dense matrix to Hessenberg form."""
    h = np.array(a, dtype=np.float64, copy=True)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    n = h.shape[0]
    for k in range(n - 2):
        v, beta = _house(h[k + 1:, k].copy())
        if beta == 0.0:
            h[k + 2:, k] = 0.0
            continue
        h[k + 1:, k:] -= np.outer(beta * v, v @ h[k + 1:, k:])
        h[:, k + 1:] -= np.outer(h[:, k + 1:] @ v, beta * v)
        h[k + 2:, k] = 0.0
    return h


def dense_eigenvalues(a, max_sweeps: int | None = None) -> list[complex]:
    """Eigenvalues of a small dense real matrix: reduce, then QR iterate."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 1:
        return [complex(a[0, 0])]
    return hessenberg_eigenvalues(hessenberg_reduce(a), max_sweeps=max_sweeps)
