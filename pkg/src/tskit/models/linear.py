"""Affine test map with a prescribed spectrum."""

from __future__ import annotations

import numpy as np

from ..core import Parameters, Timestepper, as_state


def _orthogonal_from_seed(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    # fix the sign convention so the matrix is reproducible across platforms
    return q * np.sign(np.diag(r))


class LinearMapModel(Timestepper):
    """u -> A u + b with A assembled from a prescribed eigenvalue list.

    ``eigenvalues`` are real 1x1 blocks; ``complex_pairs`` are (r, theta)
    blocks contributing the conjugate pair r*exp(+-i*theta).  The block
    diagonal is optionally conjugated by a seeded orthogonal matrix so the
    map has no special axis alignment.

    With ``lambda_index`` set, the continuation parameter replaces the
    real eigenvalue at that index at evaluation time, giving a one
    parameter family A(lambda).
    """

    def __init__(
        self,
        eigenvalues=(),
        complex_pairs=(),
        offset=None,
        rotate_seed: int | None = None,
        lambda_index: int | None = None,
        period: float | None = 1.0,
    ):
        self._real_eigs = [float(e) for e in eigenvalues]
        self._pairs = [(float(r), float(th)) for (r, th) in complex_pairs]
        dim = len(self._real_eigs) + 2 * len(self._pairs)
        if dim < 1:
            raise ValueError("at least one eigenvalue block is required")
        super().__init__(dim, period=period, name="LinearMap")
        self.offset = np.zeros(dim) if offset is None else as_state(offset)
        if self.offset.size != dim:
            raise ValueError(f"offset has dim {self.offset.size}, spectrum gives {dim}")
        self._rot = None if rotate_seed is None else _orthogonal_from_seed(dim, rotate_seed)
        self.lambda_index = lambda_index
        if lambda_index is not None and not 0 <= lambda_index < len(self._real_eigs):
            raise ValueError(f"lambda_index {lambda_index} outside real eigenvalue list")
        self._cache_lam = None
        self._cache_matrix = None

    def _assemble(self, lam: float | None) -> np.ndarray:
        reals = list(self._real_eigs)
        if self.lambda_index is not None and lam is not None:
            reals[self.lambda_index] = lam
        a = np.zeros((self.dim, self.dim))
        k = 0
        for e in reals:
            a[k, k] = e
            k += 1
        for r, th in self._pairs:
            c, s = r * np.cos(th), r * np.sin(th)
            a[k : k + 2, k : k + 2] = [[c, -s], [s, c]]
            k += 2
        if self._rot is not None:
            a = self._rot @ a @ self._rot.T
        return a

    def matrix(self, p: Parameters | None = None) -> np.ndarray:
        """The assembled A for the given parameters (cached per lambda)."""
        lam = None
        if self.lambda_index is not None:
            lam = (p or Parameters()).get("lambda", self._real_eigs[self.lambda_index])
        if self._cache_matrix is None or lam != self._cache_lam:
            self._cache_matrix = self._assemble(lam)
            self._cache_lam = lam
        return self._cache_matrix

    def spectrum(self, p: Parameters | None = None) -> np.ndarray:
        """Prescribed eigenvalues as a complex array (unsorted)."""
        reals = list(self._real_eigs)
        if self.lambda_index is not None:
            lam = (p or Parameters()).get("lambda", reals[self.lambda_index])
            reals[self.lambda_index] = lam
        eigs = [complex(e) for e in reals]
        for r, th in self._pairs:
            eigs.append(r * np.exp(1j * th))
            eigs.append(r * np.exp(-1j * th))
        return np.asarray(eigs)

    def fixed_point(self, p: Parameters | None = None) -> np.ndarray:
        """(I - A)^-1 b; exists iff 1 is not in the spectrum."""
        a = self.matrix(p)
        return np.linalg.solve(np.eye(self.dim) - a, self.offset)

    def _advance(self, u, p):
        return self.matrix(p) @ u + self.offset


class QuadraticMapModel(Timestepper):
    """Scalar-per-component map u -> u^2 + lambda.

    The canonical fold fixture: fixed points u = (1 +- sqrt(1-4*lambda))/2
    collide at (u, lambda) = (1/2, 1/4).
    """

    def __init__(self, lam0: float = 0.0, dim: int = 1):
        super().__init__(dim, period=1.0, name="QuadraticMap")
        self.lam0 = float(lam0)

    def _advance(self, u, p):
        lam = p.get("lambda", self.lam0)
        return u * u + lam

    def fixed_points(self, lam: float):
        """Both analytic fixed points (lower, upper) for lambda <= 1/4."""
        root = np.sqrt(1.0 - 4.0 * lam)
        return (1.0 - root) / 2.0, (1.0 + root) / 2.0
