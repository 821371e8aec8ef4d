"""Matrix-free Arnoldi: dominant Floquet multipliers from map calls alone.

Builds a Krylov basis for the map Jacobian at a fixed point using
forward-difference Jacobian actions, projects onto it, and reads the
dominant eigenvalues (Ritz values) off the small Hessenberg matrix.
Validates the slow-multiplier estimates the RPM solver produces for free.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import EpsilonPolicy, Parameters, Timestepper, as_state, jacobian_vector_product
from .errors import NotAFixedPoint
from .hessenberg import hessenberg_eigenvalues

#: Default ceiling on Krylov steps; override for exhaustive small problems.
DEFAULT_K_MAX = 30

#: Residual norms above these bounds warn / refuse eigenvalue analysis.
FIXED_POINT_WARN = 1e-4
FIXED_POINT_FAIL = 1e-2

#: Relative subdiagonal size that counts as Krylov breakdown.
BREAKDOWN_TOL = 1e-12

#: Multipliers inside the unit circle by at least this margin are stable.
STABILITY_MARGIN = 1e-8


@dataclass
class ArnoldiFactorization:
    """Krylov basis V (N x (k+1)) and Hessenberg projection Hbar ((k+1) x k)."""

    v: np.ndarray
    hbar: np.ndarray
    k: int
    breakdown: bool
    map_calls: int

    @property
    def h_square(self) -> np.ndarray:
        """Leading k x k block whose eigenvalues are the Ritz values."""
        return self.hbar[: self.k, : self.k]

    def orthonormality_defect(self) -> float:
        g = self.v.T @ self.v - np.eye(self.v.shape[1])
        return float(np.max(np.abs(g)))


@dataclass
class RitzPair:
    """One eigenvalue estimate with its residual bound and cluster tag."""

    mu: complex
    residual: float
    cluster: int


@dataclass
class FloquetResult:
    """Ritz pairs sorted by descending modulus, plus the stability verdict."""

    pairs: list[RitzPair]
    stable: bool
    factorization: ArnoldiFactorization
    margin: float = STABILITY_MARGIN

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    def __iter__(self):
        return iter(self.pairs)

    @property
    def multipliers(self) -> np.ndarray:
        return np.array([p.mu for p in self.pairs])


def arnoldi_factorize(
    stepper: Timestepper,
    u_star,
    p: Parameters | None = None,
    k: int = 10,
    start=None,
    eps: EpsilonPolicy | None = None,
    k_max: int = DEFAULT_K_MAX,
    check_fixed_point: bool = True,
) -> ArnoldiFactorization:
    """k steps of Arnoldi on the FD Jacobian action at ``u_star``.

    Modified Gram-Schmidt with one full reorthogonalization pass per step;
    each step costs exactly one map call on top of the one call for the
    base image.  Breakdown (the Krylov space became invariant) truncates
    cleanly with the flag set.  ``check_fixed_point=False`` skips the
    residual gate for callers that analyze the local Jacobian away from a
    fixed point (subspace seeding, not stability claims).
    """
    u_star = as_state(u_star)
    n = u_star.size
    if not 1 <= k <= min(n, k_max):
        raise ValueError(f"need 1 <= k <= min(N, k_max) = {min(n, k_max)}, got {k}")
    calls0 = stepper.call_count
    phi_u = stepper.apply(u_star, p)
    res = float(np.linalg.norm(u_star - phi_u))
    if check_fixed_point:
        if res > FIXED_POINT_FAIL:
            raise NotAFixedPoint(
                f"residual {res:.3g} at the analysis point (hard limit 1e-2)"
            )
        if res > FIXED_POINT_WARN:
            warnings.warn(
                f"eigenvalue analysis at residual {res:.3g} > {FIXED_POINT_WARN:g}; "
                "multipliers describe an approximate fixed point",
                stacklevel=2,
            )
    if start is None:
        start = np.ones(n)
    start = as_state(start)
    nrm = np.linalg.norm(start)
    if nrm == 0.0:
        raise ValueError("start vector must be nonzero")

    v = np.zeros((n, k + 1))
    hbar = np.zeros((k + 1, k))
    v[:, 0] = start / nrm
    breakdown = False
    steps = 0
    for j in range(k):
        w = jacobian_vector_product(stepper, u_star, phi_u, v[:, j], p, eps)
        for i in range(j + 1):
            hbar[i, j] = v[:, i] @ w
            w -= hbar[i, j] * v[:, i]
        # full reorthogonalization pass; cheap next to a map call
        corr = v[:, : j + 1].T @ w
        w -= v[:, : j + 1] @ corr
        hbar[: j + 1, j] += corr
        beta = float(np.linalg.norm(w))
        hbar[j + 1, j] = beta
        steps = j + 1
        if beta < BREAKDOWN_TOL * max(np.linalg.norm(hbar[: j + 2, : j + 1]), 1e-300):
            breakdown = True
            break
        v[:, j + 1] = w / beta
    return ArnoldiFactorization(
        v=v[:, : steps + 1],
        hbar=hbar[: steps + 1, : steps],
        k=steps,
        breakdown=breakdown,
        map_calls=stepper.call_count - calls0,
    )


def _ritz_vector(h: np.ndarray, mu: complex) -> np.ndarray:
    """Unit eigenvector of the small H for eigenvalue ``mu``.

    Shifted inverse iteration: with mu accurate to roundoff, two passes
    from a fixed start resolve the direction for simple eigenvalues.
    """
    m = h.shape[0]
    shift = mu + 1e-12 * max(1.0, abs(mu))
    a = h.astype(complex) - shift * np.eye(m)
    y = np.full(m, 1.0 + 0.0j) / np.sqrt(m)
    for _ in range(2):
        try:
            y = np.linalg.solve(a, y)
        except np.linalg.LinAlgError:
            a = a + (1e-10 * max(1.0, abs(mu))) * np.eye(m)
            y = np.linalg.solve(a, y)
        y /= np.linalg.norm(y)
    return y


def _cluster_tags(mus: list[complex]) -> list[int]:
    """Group near-coincident multipliers (descending-modulus order)."""
    tags = []
    tag = -1
    prev = None
    for mu in mus:
        if prev is None or abs(mu - prev) > 1e-8 * max(1.0, abs(mu)):
            tag += 1
        tags.append(tag)
        prev = mu
    return tags


def arnoldi_slow_basis(
    stepper: Timestepper,
    u_star,
    p: Parameters | None = None,
    k: int = 12,
    threshold: float = 0.5,
    m_max: int = 10,
    start=None,
    eps: EpsilonPolicy | None = None,
    k_max: int = DEFAULT_K_MAX,
):
    """Slow-subspace basis from an Arnoldi factorization (k + 1 map calls).

    Extracts the invariant subspace of the projected Hessenberg block for
    all Ritz values above ``threshold`` (up to ``m_max`` directions,
    conjugate pairs kept whole) and returns a ready slow basis with its
    projected Jacobian, at no extra map cost beyond the factorization.
    For strongly non-normal maps this is the robust way to seed the
    fixed-point solver: short difference histories misestimate slow
    multipliers there, while a deep orthonormal Krylov space does not.
    """
    from .rpm import SlowBasis, _real_invariant_groups

    fac = arnoldi_factorize(stepper, u_star, p, k, start, eps, k_max, check_fixed_point=False)
    h = fac.h_square
    w, v = np.linalg.eig(h)
    order = np.argsort(-np.abs(w))
    selected = [int(i) for i in order if abs(w[i]) > threshold]
    groups = _real_invariant_groups(w, v, selected)
    cols = []
    for g in groups:
        if len(cols) + len(g) > m_max:
            break
        cols.extend(g)
    if not cols:
        return SlowBasis.empty(u_star.shape[0] if hasattr(u_star, "shape") else len(u_star))
    b = np.column_stack(cols)
    q, r = np.linalg.qr(b)
    q = q * np.sign(np.diag(r))
    z = fac.v[:, : fac.k] @ q
    h_small = q.T @ h @ q
    return SlowBasis(z, h_small, h_stale=False)


def floquet_multipliers(
    stepper: Timestepper,
    u_star,
    p: Parameters | None = None,
    k: int = 10,
    start=None,
    eps: EpsilonPolicy | None = None,
    k_max: int = DEFAULT_K_MAX,
    margin: float = STABILITY_MARGIN,
) -> FloquetResult:
    """Leading Floquet multipliers of the cycle map at a fixed point.

    Ritz values of the projected Hessenberg block, sorted by descending
    modulus, with the standard ``|h[k+1,k]| * |last eigenvector entry|``
    residual bound per pair.  The fixed point is stable when every
    returned multiplier lies inside the unit circle by ``margin``.
    """
    fac = arnoldi_factorize(stepper, u_star, p, k, start, eps, k_max)
    h = fac.h_square
    mus = hessenberg_eigenvalues(h)
    beta = float(fac.hbar[fac.k, fac.k - 1]) if fac.k >= 1 else 0.0
    pairs = []
    for mu, tag in zip(mus, _cluster_tags(mus)):
        if fac.k == 1:
            resid = abs(beta)
        else:
            s = _ritz_vector(h, mu)
            resid = abs(beta) * abs(s[-1])
        pairs.append(RitzPair(mu=mu, residual=resid, cluster=tag))
    stable = all(abs(pr.mu) < 1.0 - margin for pr in pairs)
    return FloquetResult(pairs=pairs, stable=stable, factorization=fac, margin=margin)
