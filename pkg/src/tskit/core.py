"""Black-box timestepper contract and matrix-free derivative estimation.

A timestepper maps a state vector forward over one operating cycle.  Every
solver in this package consumes only that map: residuals, Jacobian actions
and dense Jacobians are all estimated from nearby map evaluations, never
from model internals.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, DimensionTooLarge, NonFiniteOutput, ZeroDirection

#: Default forward-difference base step: square root of machine precision.
DEFAULT_EPS0 = float(np.sqrt(np.finfo(np.float64).eps))

#: Size guard for dense Jacobian assembly.
DENSE_JACOBIAN_MAX_DIM = 200


def as_state(values) -> np.ndarray:
    """Coerce ``values`` to a contiguous 1-D float64 state vector."""
    u = np.ascontiguousarray(values, dtype=np.float64)
    if u.ndim != 1 or u.size < 1:
        raise DimensionMismatch(f"state must be a 1-D vector, got shape {u.shape}")
    return u


@dataclass(frozen=True)
class Parameters:
    """Named real-valued model parameters with one continuation slot.

    ``continuation`` names the entry treated as the free parameter by the
    continuation module; it must resolve to exactly one entry of ``values``
    whenever continuation machinery reads it.
    """

    values: dict = field(default_factory=dict)
    continuation: str = "lambda"

    def get(self, name: str, default: float | None = None) -> float:
        if name in self.values:
            return float(self.values[name])
        if default is None:
            raise KeyError(f"parameter {name!r} not set and no default given")
        return float(default)

    @property
    def continuation_value(self) -> float:
        if self.continuation not in self.values:
            raise KeyError(
                f"continuation parameter {self.continuation!r} missing from {sorted(self.values)}"
            )
        return float(self.values[self.continuation])

    def with_value(self, name: str, value: float) -> "Parameters":
        new = dict(self.values)
        new[name] = float(value)
        return replace(self, values=new)

    def with_continuation_value(self, value: float) -> "Parameters":
        return self.with_value(self.continuation, value)


@dataclass(frozen=True)
class EpsilonPolicy:
    """Forward-difference step selection for Jacobian-vector estimates.

    ``eps0`` is the base step; with ``scale_with_state`` the effective step
    is ``eps0 * (1 + ||u||)`` so that perturbations stay meaningful for
    states of any magnitude.
    """

    eps0: float = DEFAULT_EPS0
    scale_with_state: bool = True

    def __post_init__(self):
        if not self.eps0 > 0.0:
            raise ValueError(f"eps0 must be positive, got {self.eps0}")

    def effective(self, state_norm: float) -> float:
        if self.scale_with_state:
            return self.eps0 * (1.0 + state_norm)
        return self.eps0


class Timestepper:
    """Deterministic black-box map ``(state, parameters) -> state``.

    Subclasses implement :meth:`_advance`.  Every map evaluation goes
    through :meth:`apply`, which validates dimensions/finiteness and
    increments the evaluation counter exactly once; the counter is the
    canonical cost measure for everything built on top.

    The map must be a pure function: identical inputs yield bitwise
    identical outputs, so evaluations for independent inputs may run
    concurrently.  The counter is guarded by a lock for that case.
    """

    def __init__(self, dim: int, period: float | None = None, name: str = ""):
        if dim < 1:
            raise DimensionMismatch(f"state dimension must be >= 1, got {dim}")
        self.dim = int(dim)
        self.period = period
        self.name = name or type(self).__name__
        self._calls = 0
        self._lock = threading.Lock()

    # -- contract -------------------------------------------------------

    def _advance(self, u: np.ndarray, p: Parameters) -> np.ndarray:
        raise NotImplementedError

    @property
    def call_count(self) -> int:
        return self._calls

    def apply(self, u: np.ndarray, p: Parameters | None = None) -> np.ndarray:
        """One counted map evaluation with input/output validation."""
        u = as_state(u)
        if u.size != self.dim:
            raise DimensionMismatch(f"{self.name}: expected dim {self.dim}, got {u.size}")
        if not np.all(np.isfinite(u)):
            raise NonFiniteOutput(f"{self.name}: input state contains NaN/Inf")
        if p is None:
            p = Parameters()
        with self._lock:
            self._calls += 1
        out = as_state(self._advance(u, p))
        if out.size != self.dim:
            raise DimensionMismatch(
                f"{self.name}: map returned dim {out.size}, expected {self.dim}"
            )
        if not np.all(np.isfinite(out)):
            raise NonFiniteOutput(f"{self.name}: map output contains NaN/Inf")
        return out


class CallableTimestepper(Timestepper):
    """Wrap a plain ``fn(u, p) -> u_next`` as a timestepper."""

    def __init__(self, fn, dim: int, period: float | None = None, name: str = ""):
        super().__init__(dim, period, name or getattr(fn, "__name__", "callable"))
        self._fn = fn

    def _advance(self, u, p):
        return self._fn(u, p)


# -- operations ----------------------------------------------------------


def evaluate_map(stepper: Timestepper, u, p: Parameters | None = None) -> np.ndarray:
    """Advance ``u`` one cycle.  Exactly one map call."""
    return stepper.apply(u, p)


def residual(stepper: Timestepper, u, p: Parameters | None = None):
    """Fixed-point residual ``u - Phi(u)`` and its 2-norm.  One map call."""
    u = as_state(u)
    r = u - stepper.apply(u, p)
    return r, float(np.linalg.norm(r))


def jacobian_vector_product(
    stepper: Timestepper,
    u,
    phi_u,
    v,
    p: Parameters | None = None,
    eps: EpsilonPolicy | None = None,
) -> np.ndarray:
    """Forward-difference estimate of ``Phi_U(u) @ v``.

    The caller supplies ``phi_u = Phi(u)`` so the estimate costs exactly
    one map call.  The direction is normalized before perturbing and the
    result is rescaled by ``||v||``, so the estimate is linear in ``v``
    by construction.
    """
    u = as_state(u)
    phi_u = as_state(phi_u)
    v = as_state(v)
    vnorm = float(np.linalg.norm(v))
    if vnorm == 0.0:
        raise ZeroDirection("jacobian_vector_product along the zero vector")
    if eps is None:
        eps = EpsilonPolicy()
    h = eps.effective(float(np.linalg.norm(u)))
    phi_pert = stepper.apply(u + (h / vnorm) * v, p)
    return (phi_pert - phi_u) * (vnorm / h)


def dense_jacobian_bruteforce(
    stepper: Timestepper,
    u,
    p: Parameters | None = None,
    eps: EpsilonPolicy | None = None,
) -> np.ndarray:
    """Column-by-column finite-difference Jacobian.  ``N + 1`` map calls.

    Test oracle and small-problem fallback; refuses to run above
    ``DENSE_JACOBIAN_MAX_DIM`` to guard against accidental huge sweeps.
    """
    u = as_state(u)
    n = u.size
    if n > DENSE_JACOBIAN_MAX_DIM:
        raise DimensionTooLarge(
            f"dense Jacobian for dim {n} exceeds guard {DENSE_JACOBIAN_MAX_DIM}"
        )
    phi_u = stepper.apply(u, p)
    jac = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        jac[:, j] = jacobian_vector_product(stepper, u, phi_u, e, p, eps)
        e[j] = 0.0
    return jac
