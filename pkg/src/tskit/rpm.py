"""Recursive Projection Method: stabilized, accelerated fixed-point solving.

Plain successive substitution converges at the rate of the slowest map
multiplier and fails outright for unstable ones.  The RPM iteration splits
the state space into an adaptively identified low-dimensional slow
subspace P (where it performs approximate Newton steps using a projected
Jacobian estimated from map calls) and its orthogonal complement Q (where
plain map application already contracts quickly).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import EpsilonPolicy, Parameters, Timestepper, as_state, jacobian_vector_product
from .errors import BasisFull

#: Condition estimate of (I - H) above which the slow Newton step is
#: declared singular (a real multiplier is crossing 1).
SINGULAR_NEWTON_COND = 1e12

#: Residual growth over its running minimum that declares divergence.
DIVERGENCE_FACTOR = 1e6


class ConvergenceStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    SINGULAR_SLOW_NEWTON = "singular_slow_newton"
    DIVERGED = "diverged"


@dataclass
class RpmOptions:
    tolerance: float = 1e-6
    max_iterations: int = 500
    m_max: int = 10
    grow_threshold: float = 0.5
    drop_threshold: float = 0.01
    history: int = 4
    warmup: int = 3
    h_refresh_interval: int = 5
    eps: EpsilonPolicy = field(default_factory=EpsilonPolicy)

    def __post_init__(self):
        if not 0.0 < self.drop_threshold < self.grow_threshold < 1.0:
            raise ValueError("need 0 < drop_threshold < grow_threshold < 1")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.history < 2:
            raise ValueError("growth testing needs history >= 2")


class SlowBasis:
    """Orthonormal slow-subspace basis Z with the projected Jacobian H.

    ``m = 0`` is valid and means pure Picard iteration.  ``h_stale``
    records that H no longer matches Z (after growth) or has aged past the
    refresh interval.
    """

    def __init__(self, z: np.ndarray, h: np.ndarray | None = None, h_stale: bool = True):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2:
            raise ValueError(f"basis must be an N x m matrix, got shape {z.shape}")
        self.z = z
        self.h = np.zeros((z.shape[1], z.shape[1])) if h is None else np.asarray(h, float)
        if self.h.shape != (z.shape[1], z.shape[1]):
            raise ValueError("H shape does not match basis width")
        self.h_stale = h_stale

    @classmethod
    def empty(cls, n: int) -> "SlowBasis":
        return cls(np.zeros((n, 0)), np.zeros((0, 0)), h_stale=False)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def m(self) -> int:
        return self.z.shape[1]

    def copy(self) -> "SlowBasis":
        return SlowBasis(self.z.copy(), self.h.copy(), self.h_stale)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto P = span(Z)."""
        if self.m == 0:
            return np.zeros_like(x)
        return self.z @ (self.z.T @ x)

    def q_project(self, x: np.ndarray) -> np.ndarray:
        """Projection onto the orthogonal complement Q."""
        return x - self.project(x)

    def orthonormality_defect(self) -> float:
        if self.m == 0:
            return 0.0
        g = self.z.T @ self.z - np.eye(self.m)
        return float(np.max(np.abs(g)))


@dataclass
class FixedPointResult:
    u: np.ndarray
    residual_norm: float
    iterations: int
    map_calls: int
    basis: SlowBasis
    status: ConvergenceStatus
    basis_full: bool = False
    residual_history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is ConvergenceStatus.CONVERGED

    def slow_multipliers(self) -> list[complex]:
        """Eigenvalues of the final projected Jacobian H (the slow Floquet
        multiplier estimates), sorted by descending modulus."""
        from .hessenberg import dense_eigenvalues

        if self.basis.m == 0:
            return []
        return dense_eigenvalues(self.basis.h)


def slow_jacobian(
    stepper: Timestepper,
    u: np.ndarray,
    phi_u: np.ndarray,
    z: np.ndarray,
    p: Parameters | None = None,
    eps: EpsilonPolicy | None = None,
) -> np.ndarray:
    """Projected Jacobian H = Z^T Phi_U Z, column by column.

    Exactly ``m`` map calls; ``phi_u`` is the precomputed base image.
    """
    m = z.shape[1]
    h = np.empty((m, m))
    for j in range(m):
        h[:, j] = z.T @ jacobian_vector_product(stepper, u, phi_u, z[:, j], p, eps)
    return h


def _real_invariant_groups(w, v, selected):
    """Real bases of the invariant subspaces for the selected eigenvalues:
    one single-column group per real eigenvalue, one two-column group per
    conjugate pair (listed once)."""
    groups = []
    seen_conj = set()
    for i in selected:
        if i in seen_conj:
            continue
        if abs(w[i].imag) > 1e-12 * abs(w[i]):
            j = int(np.argmin(np.abs(w - w[i].conjugate())))
            seen_conj.add(j)
            groups.append([v[:, i].real, v[:, i].imag])
        else:
            groups.append([v[:, i].real])
    return groups


def _growth_directions(diffs, opts: RpmOptions):
    """Candidate slow directions from the recent difference history.

    The differences form a Krylov-like sequence (each is approximately the
    map Jacobian applied to the previous one), so QR-ing the older vectors
    and projecting their successors gives a small matrix whose eigenvalues
    estimate the multipliers still alive in Q.  All directions whose
    estimate exceeds the growth threshold are returned as one block: the
    block spans a near-invariant subspace even when adjacent multipliers
    are too close for single power-iteration directions to separate (the
    non-normal ladder case, where one impure direction would poison the
    projected Jacobian).  Returns (dominant modulus, direction block or
    None).
    """
    h = min(opts.history, len(diffs))
    d = np.column_stack(diffs[-h:])
    scale = np.linalg.norm(d[:, -1])
    if scale == 0.0:
        return 0.0, None
    d = d / scale
    for cols in range(min(h - 1, d.shape[0]), 0, -1):
        dold = d[:, -cols - 1 : -1]
        dnew = d[:, -cols:]
        qd, r = np.linalg.qr(dold)
        rd = np.abs(np.diag(r))
        if rd.min() <= 1e-13 * max(rd.max(), 1e-300):
            continue  # stale directions are linearly dependent; shorten
        b = np.linalg.solve(r.T, (qd.T @ dnew).T).T
        w, v = np.linalg.eig(b)
        order = np.argsort(-np.abs(w))
        mod = float(np.abs(w[order[0]]))
        if mod <= opts.grow_threshold:
            return mod, None
        selected = [int(i) for i in order if abs(w[i]) > opts.grow_threshold]
        groups = _real_invariant_groups(w, v, selected)
        return mod, [[qd @ c for c in g] for g in groups]
    return 0.0, None


def _orthonormal_against(z: np.ndarray, dirs) -> np.ndarray:
    """Orthonormalize candidate directions against Z and each other."""
    cols = []
    for w in dirs:
        w = w.astype(np.float64, copy=True)
        for _ in range(2):  # twice is enough
            if z.shape[1]:
                w -= z @ (z.T @ w)
            for c in cols:
                w -= c * (c @ w)
        norm = np.linalg.norm(w)
        if norm > 1e-10:
            cols.append(w / norm)
    return np.column_stack(cols) if cols else np.zeros((z.shape[0], 0))


def adapt_basis(diff_history, basis: SlowBasis, opts: RpmOptions) -> tuple[SlowBasis, bool]:
    """Grow and shrink the slow basis from recent Q-projected differences.

    Growth appends the dominant direction (or complex-pair plane) when the
    difference sequence contracts slower than ``grow_threshold``; shrink
    removes basis directions whose Ritz value magnitude in a fresh H fell
    below ``drop_threshold``.  Returns (basis, changed); raises
    :class:`BasisFull` when growth is demanded at ``m_max``.
    """
    changed = False
    if len(diff_history) >= 2:
        mod, groups = _growth_directions(diff_history, opts)
        if groups is not None:
            room = min(opts.m_max, basis.n) - basis.m
            if room < len(groups[0]):
                raise BasisFull(
                    f"growth demanded at ceiling m = {min(opts.m_max, basis.n)} "
                    f"(dominant ratio {mod:.3g})"
                )
            dirs = []
            for g in groups:  # whole groups only: never split a complex pair
                if len(dirs) + len(g) > room:
                    break
                dirs.extend(g)
            new_cols = _orthonormal_against(basis.z, dirs)
            if new_cols.shape[1]:
                z = np.column_stack([basis.z, new_cols])
                # one full re-orthonormalization pass keeps the defect at
                # roundoff even after many growth events
                q, r = np.linalg.qr(z)
                basis = SlowBasis(q * np.sign(np.diag(r)), h_stale=True)
                changed = True
    if not basis.h_stale and basis.m > 0:
        basis, shrunk = _shrink(basis, opts)
        changed = changed or shrunk
    return basis, changed


def _shrink(basis: SlowBasis, opts: RpmOptions) -> tuple[SlowBasis, bool]:
    """Deflate directions whose Ritz value dropped below the threshold."""
    w, v = np.linalg.eig(basis.h)
    keep = np.abs(w) >= opts.drop_threshold
    if keep.all():
        return basis, False
    if not keep.any():
        return SlowBasis.empty(basis.n), True
    groups = _real_invariant_groups(w, v, [int(i) for i in np.flatnonzero(keep)])
    b = np.column_stack([c for g in groups for c in g])
    q, r = np.linalg.qr(b)
    q = q * np.sign(np.diag(r))
    z = basis.z @ q
    h = q.T @ basis.h @ q
    return SlowBasis(z, h, h_stale=False), True


def rpm_solve(
    stepper: Timestepper,
    u0,
    p: Parameters | None = None,
    opts: RpmOptions | None = None,
    warm_basis: SlowBasis | None = None,
) -> FixedPointResult:
    """Locate a fixed point of the cycle map by projected Newton-Picard.

    Each outer iteration costs one map call, plus ``m`` calls whenever the
    projected Jacobian H is refreshed (on basis changes and every
    ``h_refresh_interval`` iterations).  A warm-start basis, e.g. from a
    previous solve at nearby parameters or from :func:`picard_warmup`,
    skips the growth transient; its H is re-estimated at entry.
    """
    if opts is None:
        opts = RpmOptions()
    u = as_state(u0).copy()
    if warm_basis is not None:
        if warm_basis.n != u.size:
            raise ValueError("warm basis dimension does not match the state")
        basis = warm_basis.copy()
        basis.h_stale = basis.m > 0
    else:
        basis = SlowBasis.empty(u.size)
    calls0 = stepper.call_count
    history: list[np.ndarray] = []
    res_history: list[float] = []
    res_min = np.inf
    resnorm = np.inf
    status = ConvergenceStatus.MAX_ITERATIONS
    basis_full = False
    last_refresh = 0
    it = 0
    for it in range(1, opts.max_iterations + 1):
        f = stepper.apply(u, p)
        r = f - u
        resnorm = float(np.linalg.norm(r))
        res_history.append(resnorm)
        if resnorm <= opts.tolerance:
            status = ConvergenceStatus.CONVERGED
            break
        if resnorm > DIVERGENCE_FACTOR * res_min:
            status = ConvergenceStatus.DIVERGED
            break
        res_min = min(res_min, resnorm)
        # Newton fires only once the residual is slow-dominated: after a
        # Newton correction its nonlinear remainder lives mostly in Q, and
        # plain map application must flush it first, otherwise the
        # remainder re-enters the slow solve amplified by (I - H)^-1 and
        # the iteration can self-excite on strongly nonlinear maps.
        newton_now = False
        if basis.m > 0:
            pr = float(np.linalg.norm(basis.z.T @ r))
            qr = float(np.linalg.norm(r - basis.z @ (basis.z.T @ r)))
            newton_now = pr >= qr
        if newton_now and (basis.h_stale or it - last_refresh >= opts.h_refresh_interval):
            basis.h = slow_jacobian(stepper, u, f, basis.z, p, opts.eps)
            basis.h_stale = False
            last_refresh = it
        if not newton_now:
            u_new = f
        else:
            a = np.eye(basis.m) - basis.h
            if np.linalg.cond(a) > SINGULAR_NEWTON_COND:
                status = ConvergenceStatus.SINGULAR_SLOW_NEWTON
                break
            dc = np.linalg.solve(a, basis.z.T @ r)
            u_new = basis.z @ (basis.z.T @ u + dc) + basis.q_project(f)
        history.append(basis.q_project(u_new - u))
        if len(history) > opts.history:
            history.pop(0)
        if it > opts.warmup and not basis_full:
            try:
                basis, changed = adapt_basis(history, basis, opts)
            except BasisFull:
                basis_full = True
                changed = False
            if changed:
                history.clear()
        u = u_new
    return FixedPointResult(
        u=u,
        residual_norm=resnorm,
        iterations=it,
        map_calls=stepper.call_count - calls0,
        basis=basis,
        status=status,
        basis_full=basis_full,
        residual_history=res_history,
    )


def picard_warmup(
    stepper: Timestepper,
    u0,
    p: Parameters | None = None,
    n_cycles: int = 0,
    opts: RpmOptions | None = None,
):
    """Plain map iteration that identifies the slow basis as a byproduct.

    Runs exactly ``n_cycles`` map calls and feeds the iterate differences
    through the same growth test as :func:`rpm_solve`, so a long transient
    integration doubles as slow-subspace identification (H left stale: the
    warm solve estimates it where it is needed).  Returns
    ``(state, basis, last_change_norm)``.
    """
    if opts is None:
        opts = RpmOptions()
    u = as_state(u0).copy()
    basis = SlowBasis.empty(u.size)
    history: list[np.ndarray] = []
    change = np.inf
    full = False
    for it in range(1, n_cycles + 1):
        f = stepper.apply(u, p)
        change = float(np.linalg.norm(f - u))
        history.append(basis.q_project(f - u))
        if len(history) > opts.history:
            history.pop(0)
        if it > opts.warmup and len(history) >= 2 and not full:
            try:
                grown, changed = adapt_basis(history, basis, opts)
            except BasisFull:
                full = True
                changed = False
                grown = basis
            if changed:
                history.clear()
            basis = grown
        u = f
    return u, basis, change
