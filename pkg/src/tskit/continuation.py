"""Pseudo-arclength continuation of fixed-point branches.

Follows (u*, lambda) solution pairs of u = Phi(u; lambda) under a scaled
arclength parameterization, so branches trace straight through folds where
a multiplier crosses 1 and plain parameter stepping would fail.  The
corrector reuses the RPM split: Picard relaxation on the fast complement,
a small bordered Newton system on (slow coefficients, lambda).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EpsilonPolicy, Parameters, Timestepper, as_state
from .errors import (
    BasisFull,
    CorrectorFailed,
    DegenerateTangent,
    InitialSolveFailed,
    StepUnderflow,
)
from .hessenberg import dense_eigenvalues
from .rpm import RpmOptions, SlowBasis, adapt_basis, rpm_solve, slow_jacobian


@dataclass
class ContinuationOptions:
    ds0: float = 0.01
    ds_min: float = 1e-8
    ds_max: float = 0.05
    shrink_factor: float = 0.5
    grow_factor: float = 1.3
    grow_when_iters_leq: int = 3
    max_points: int = 200
    corrector_tol: float = 1e-8
    max_corrector_iters: int = 30
    theta: float = 0.5
    fold_det_tol: float = 1e-8
    fold_bracket_tol: float = 1e-6
    fold_max_bisections: int = 80
    stability_margin: float = 1e-8
    use_arnoldi_multipliers: bool = False
    arnoldi_k: int = 4
    rpm: RpmOptions = field(default_factory=RpmOptions)
    eps: EpsilonPolicy = field(default_factory=EpsilonPolicy)

    def __post_init__(self):
        if not 0.0 < self.ds_min <= self.ds0 <= self.ds_max:
            raise ValueError("need 0 < ds_min <= ds0 <= ds_max")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie strictly between 0 and 1")


@dataclass
class Tangent:
    u: np.ndarray
    lam: float

    def dot(self, du: np.ndarray, dlam: float, theta: float) -> float:
        """Scaled-metric inner product with an increment (du, dlam)."""
        return theta * float(self.u @ du) + (1.0 - theta) * self.lam * dlam


@dataclass
class BranchPoint:
    u: np.ndarray
    lam: float
    s: float
    multipliers: list
    residual_norm: float
    stable: bool
    fold_flag: bool = False
    basis: SlowBasis | None = None
    det_slow: float = 1.0
    corrector_iters: int = 0


@dataclass
class FoldRecord:
    lam: float
    u: np.ndarray
    index_lo: int
    index_hi: int
    det_residual: float
    bracket: float


def metric_norm(du: np.ndarray, dlam: float, theta: float) -> float:
    return float(np.sqrt(theta * float(du @ du) + (1.0 - theta) * dlam * dlam))


def predict(
    prev: BranchPoint,
    prev2: BranchPoint | None,
    ds: float,
    theta: float = 0.5,
):
    """Secant-tangent predictor; at branch start the tangent is +lambda.

    Returns (u_pred, lam_pred, tangent) with the tangent normalized in the
    scaled metric, so the prediction sits at scaled distance ds from prev.
    """
    if prev2 is None:
        t = Tangent(u=np.zeros_like(prev.u), lam=1.0 / np.sqrt(1.0 - theta))
    else:
        du = prev.u - prev2.u
        dlam = prev.lam - prev2.lam
        nrm = metric_norm(du, dlam, theta)
        if nrm < 1e-14:
            raise DegenerateTangent("consecutive branch points coincide")
        t = Tangent(u=du / nrm, lam=dlam / nrm)
    return prev.u + ds * t.u, prev.lam + ds * t.lam, t


def _multiplier_readout(basis: SlowBasis, margin: float):
    if basis.m == 0:
        return [], True, 1.0
    mults = dense_eigenvalues(basis.h)
    det = float(np.linalg.det(np.eye(basis.m) - basis.h))
    stable = all(abs(mu) < 1.0 - margin for mu in mults)
    return mults, stable, det


def _attach_arnoldi(stepper, point: BranchPoint, params: Parameters, opts) -> BranchPoint:
    """Per-point Arnoldi readout (the expensive, basis-independent variant).

    Overrides the free H-based multipliers with k Ritz values and rebuilds
    the criticality indicator as prod(1 - mu) over them, so crossings are
    visible even on branches the corrector converges to without ever
    exciting the slow directions.
    """
    from .arnoldi import floquet_multipliers

    k = min(opts.arnoldi_k, point.u.size)
    pl = params.with_continuation_value(point.lam)
    fl = floquet_multipliers(stepper, point.u, pl, k=k, margin=opts.stability_margin)
    point.multipliers = list(fl.multipliers)
    point.stable = fl.stable
    point.det_slow = float(np.real(np.prod([1.0 - mu for mu in fl.multipliers])))
    return point


def correct(
    stepper: Timestepper,
    prediction,
    tangent: Tangent,
    prev: BranchPoint,
    ds: float,
    opts: ContinuationOptions,
    params: Parameters,
    basis: SlowBasis | None = None,
) -> BranchPoint:
    """Newton-Picard corrector on the bordered (slow + arclength) system.

    Per iteration: one map call for the residual and Picard relaxation of
    the fast complement, m calls to re-estimate the slow Jacobian, one
    call for the lambda derivative; the (m+1)-dimensional bordered solve
    updates the slow coefficients and lambda together.  The slow basis
    adapts from corrector differences, so approaching a fold grows the
    direction whose multiplier nears 1 before the fold is reached.
    """
    u_pred, lam_pred = prediction
    u = as_state(u_pred).copy()
    lam = float(lam_pred)
    if not np.all(np.isfinite(u)) or not np.isfinite(lam):
        raise CorrectorFailed("prediction is not finite")
    basis = basis.copy() if basis is not None else SlowBasis.empty(u.size)
    # any inherited H belongs to another branch point; re-estimate here
    basis.h_stale = basis.m > 0
    theta = opts.theta
    history: list[np.ndarray] = []
    basis_full = False
    for itc in range(1, opts.max_corrector_iters + 1):
        pl = params.with_continuation_value(lam)
        f = stepper.apply(u, pl)
        r = f - u
        rn = float(np.linalg.norm(r))
        constraint = (
            tangent.dot(u - prev.u, lam - prev.lam, theta) - ds
        )
        if rn <= opts.corrector_tol and abs(constraint) <= 1e-8:
            if basis.m > 0 and basis.h_stale:
                basis.h = slow_jacobian(stepper, u, f, basis.z, pl, opts.eps)
                basis.h_stale = False
            mults, stab, det = _multiplier_readout(basis, opts.stability_margin)
            return BranchPoint(
                u=u,
                lam=lam,
                s=prev.s + metric_norm(u - prev.u, lam - prev.lam, theta),
                multipliers=mults,
                residual_norm=rn,
                stable=stab,
                basis=basis,
                det_slow=det,
                corrector_iters=itc,
            )
        if basis.m > 0:
            basis.h = slow_jacobian(stepper, u, f, basis.z, pl, opts.eps)
            basis.h_stale = False
        eps_lam = opts.eps.eps0 * (1.0 + abs(lam))
        f_lam = stepper.apply(u, params.with_continuation_value(lam + eps_lam))
        dphi_dlam = (f_lam - f) / eps_lam
        m = basis.m
        if m > 0:
            a = np.zeros((m + 1, m + 1))
            a[:m, :m] = basis.h - np.eye(m)
            a[:m, m] = basis.z.T @ dphi_dlam
            a[m, :m] = theta * (basis.z.T @ tangent.u)
            a[m, m] = (1.0 - theta) * tangent.lam
            rhs = np.concatenate([-(basis.z.T @ r), [-constraint]])
            try:
                delta = np.linalg.solve(a, rhs)
            except np.linalg.LinAlgError as exc:
                raise CorrectorFailed(f"bordered system singular: {exc}") from exc
            u_new = basis.z @ (basis.z.T @ u + delta[:m]) + basis.q_project(f)
            lam_new = lam + float(delta[m])
        else:
            denom = (1.0 - theta) * tangent.lam
            if abs(denom) < 1e-14:
                raise CorrectorFailed(
                    "empty slow basis with a state-dominated tangent; cannot border"
                )
            u_new = f
            lam_new = lam - constraint / denom
        if not np.all(np.isfinite(u_new)) or not np.isfinite(lam_new):
            raise CorrectorFailed("corrector iterate became non-finite")
        history.append(basis.q_project(u_new - u))
        if len(history) > opts.rpm.history:
            history.pop(0)
        if len(history) >= 2 and not basis_full:
            try:
                basis, changed = adapt_basis(history, basis, opts.rpm)
            except BasisFull:
                basis_full = True
                changed = False
            if changed:
                history.clear()
        u = u_new
        lam = lam_new
    raise CorrectorFailed(
        f"no convergence in {opts.max_corrector_iters} corrector iterations "
        f"(residual {rn:.3g})"
    )


def trace_branch(
    stepper: Timestepper,
    start_u,
    start_lam: float,
    lam_range,
    opts: ContinuationOptions | None = None,
    params: Parameters | None = None,
) -> list[BranchPoint]:
    """Trace the fixed-point branch from (start_u, start_lam) by
    predict/correct with adaptive step length.

    Seeds with one RPM solve, warm-starts each corrector with the previous
    point's slow basis, and stops when lambda leaves ``lam_range`` (the
    exiting point is kept), the point budget runs out, or the step
    underflows (:class:`StepUnderflow`, carrying the points so far).
    """
    if opts is None:
        opts = ContinuationOptions()
    if params is None:
        params = Parameters(values={"lambda": float(start_lam)})
    lam_lo, lam_hi = (float(lam_range[0]), float(lam_range[1]))
    if lam_lo > lam_hi:
        lam_lo, lam_hi = lam_hi, lam_lo
    p0 = params.with_continuation_value(float(start_lam))
    seed = rpm_solve(stepper, start_u, p0, opts.rpm)
    if not seed.converged:
        raise InitialSolveFailed(
            f"seed solve at lambda = {start_lam:g} ended with {seed.status.value}"
        )
    basis = seed.basis
    if basis.m > 0 and basis.h_stale:
        f = stepper.apply(seed.u, p0)
        basis.h = slow_jacobian(stepper, seed.u, f, basis.z, p0, opts.eps)
        basis.h_stale = False
    mults, stab, det = _multiplier_readout(basis, opts.stability_margin)
    points = [
        BranchPoint(
            u=seed.u,
            lam=float(start_lam),
            s=0.0,
            multipliers=mults,
            residual_norm=seed.residual_norm,
            stable=stab,
            basis=basis,
            det_slow=det,
        )
    ]
    if opts.use_arnoldi_multipliers:
        _attach_arnoldi(stepper, points[0], params, opts)
    if lam_hi == lam_lo:
        return points
    ds = opts.ds0
    prev2 = None
    prev = points[0]
    while len(points) < opts.max_points:
        prediction_made = False
        try:
            u_pred, lam_pred, tangent = predict(prev, prev2, ds, opts.theta)
            prediction_made = True
            pt = correct(
                stepper, (u_pred, lam_pred), tangent, prev, ds, opts, params, prev.basis
            )
        except CorrectorFailed:
            if not prediction_made:
                raise
            ds *= opts.shrink_factor
            if ds < opts.ds_min:
                exc = StepUnderflow(f"step length fell below {opts.ds_min:g}")
                exc.points = points
                raise exc
            continue
        if opts.use_arnoldi_multipliers:
            _attach_arnoldi(stepper, pt, params, opts)
        points.append(pt)
        prev2, prev = prev, pt
        if pt.corrector_iters <= opts.grow_when_iters_leq:
            ds = min(ds * opts.grow_factor, opts.ds_max)
        if not lam_lo <= pt.lam <= lam_hi:
            break
    return points


def detect_fold(
    stepper: Timestepper,
    branch: list[BranchPoint],
    opts: ContinuationOptions | None = None,
    params: Parameters | None = None,
) -> list[FoldRecord]:
    """Locate turning points: sign changes of det(I - H) along the branch.

    Each sign change (a real multiplier crossing 1) is refined by
    bisection in arclength using the corrector until |det| falls below
    ``fold_det_tol`` or the bracket shrinks below ``fold_bracket_tol``.
    Marks the bracketing branch points' fold flags; returns the records.
    """
    if opts is None:
        opts = ContinuationOptions()
    if params is None:
        params = Parameters(values={"lambda": 0.0})
    records = []
    for i in range(len(branch) - 1):
        a, b = branch[i], branch[i + 1]
        if a.det_slow * b.det_slow >= 0.0:
            continue
        branch[i].fold_flag = True
        branch[i + 1].fold_flag = True
        rec = _refine_fold(stepper, a, b, opts, params, i)
        records.append(rec)
    return records


def _refine_fold(
    stepper: Timestepper,
    a: BranchPoint,
    b: BranchPoint,
    opts: ContinuationOptions,
    params: Parameters,
    index: int,
) -> FoldRecord:
    theta = opts.theta
    best = a if abs(a.det_slow) <= abs(b.det_slow) else b
    for _ in range(opts.fold_max_bisections):
        gap = metric_norm(b.u - a.u, b.lam - a.lam, theta)
        if abs(best.det_slow) <= opts.fold_det_tol or gap <= opts.fold_bracket_tol:
            break
        du = b.u - a.u
        dlam = b.lam - a.lam
        tangent = Tangent(u=du / gap, lam=dlam / gap)
        ds = 0.5 * gap
        try:
            mid = correct(
                stepper,
                (a.u + ds * tangent.u, a.lam + ds * tangent.lam),
                tangent,
                a,
                ds,
                opts,
                params,
                a.basis,
            )
        except CorrectorFailed:
            break
        if opts.use_arnoldi_multipliers:
            _attach_arnoldi(stepper, mid, params, opts)
        if abs(mid.det_slow) < abs(best.det_slow):
            best = mid
        if mid.det_slow * a.det_slow > 0.0:
            a = mid
        else:
            b = mid
    return FoldRecord(
        lam=best.lam,
        u=best.u,
        index_lo=index,
        index_hi=index + 1,
        det_residual=abs(best.det_slow),
        bracket=metric_norm(b.u - a.u, b.lam - a.lam, theta),
    )
