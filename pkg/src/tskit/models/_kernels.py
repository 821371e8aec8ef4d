"""Hot inner loops for the built-in models: numba kernels + numpy fallbacks.

Backend selection happens once at import time from the ``TSKIT_NUMBA``
environment variable:

* ``auto`` (default) - compile with numba when importable, else numpy
* ``1`` - require numba (ImportError propagates)
* ``0`` - force the pure-numpy path

Both paths implement identical arithmetic; ``benchmarks/bench_kernels.py``
times them against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np


def resolve_backend(env_value: str | None, numba_importable: bool) -> str:
    """Pure decision rule for the kernel backend ("numba" or "numpy")."""
    flag = (env_value or "auto").strip().lower()
    if flag in ("0", "off", "false", "numpy"):
        return "numpy"
    if flag in ("1", "on", "true", "numba"):
        if not numba_importable:
            raise ImportError("TSKIT_NUMBA=1 but numba is not importable")
        return "numba"
    if flag != "auto":
        raise ValueError(f"unrecognized TSKIT_NUMBA value {env_value!r}")
    return "numba" if numba_importable else "numpy"


def _try_import_numba():
    try:
        import numba

        return numba
    except ImportError:
        return None


_numba = _try_import_numba()
BACKEND = resolve_backend(os.environ.get("TSKIT_NUMBA"), _numba is not None)


def active_backend() -> str:
    return BACKEND


# -- adsorption column: one flow phase ------------------------------------
#
# State per cell: gas concentration c and adsorbed loading q.  First-order
# upwind advection with an inlet ghost cell, Langmuir equilibrium loading
# and linear-driving-force exchange, integrated with Heun (explicit
# trapezoidal) substeps.  Returns the advected state plus the exact
# discrete inlet/outlet mass fluxes so cycle mass balances close to
# roundoff.


def column_phase_numpy(c, q, v, c_in, dz, dt, n_sub, q_sat, k_langmuir, k_ldf, beta):
    """Vectorized twin of the numba phase kernel."""
    c = c.copy()
    q = q.copy()
    inflow = 0.0
    outflow = 0.0
    upstream = v >= 0.0
    speed = v if upstream else -v

    def rhs(c, q):
        qstar = (q_sat * k_langmuir) * c / (1.0 + k_langmuir * c)
        dq = k_ldf * (qstar - q)
        grad = np.empty_like(c)
        if upstream:
            grad[0] = c[0] - c_in
            grad[1:] = c[1:] - c[:-1]
        else:
            grad[-1] = c[-1] - c_in
            grad[:-1] = c[:-1] - c[1:]
        dc = -(speed / dz) * grad - beta * dq
        return dc, dq

    for _ in range(n_sub):
        c_edge0 = c[-1] if upstream else c[0]
        dc1, dq1 = rhs(c, q)
        cm = c + dt * dc1
        qm = q + dt * dq1
        c_edge1 = cm[-1] if upstream else cm[0]
        dc2, dq2 = rhs(cm, qm)
        c = c + (0.5 * dt) * (dc1 + dc2)
        q = q + (0.5 * dt) * (dq1 + dq2)
        inflow += speed * dt * c_in
        outflow += speed * (0.5 * dt) * (c_edge0 + c_edge1)
    return c, q, inflow, outflow


def _column_phase_loops(c0, q0, v, c_in, dz, dt, n_sub, q_sat, k_langmuir, k_ldf, beta):
    nz = c0.shape[0]
    c = c0.copy()
    q = q0.copy()
    cm = np.empty(nz)
    qm = np.empty(nz)
    dc1 = np.empty(nz)
    dq1 = np.empty(nz)
    dc2 = np.empty(nz)
    dq2 = np.empty(nz)
    inflow = 0.0
    outflow = 0.0
    upstream = v >= 0.0
    speed = v if upstream else -v
    for _ in range(n_sub):
        for i in range(nz):
            qstar = (q_sat * k_langmuir) * c[i] / (1.0 + k_langmuir * c[i])
            dq1[i] = k_ldf * (qstar - q[i])
            if upstream:
                left = c_in if i == 0 else c[i - 1]
                grad = c[i] - left
            else:
                right = c_in if i == nz - 1 else c[i + 1]
                grad = c[i] - right
            dc1[i] = -(speed / dz) * grad - beta * dq1[i]
        for i in range(nz):
            cm[i] = c[i] + dt * dc1[i]
            qm[i] = q[i] + dt * dq1[i]
        c_edge0 = c[nz - 1] if upstream else c[0]
        c_edge1 = cm[nz - 1] if upstream else cm[0]
        for i in range(nz):
            qstar = (q_sat * k_langmuir) * cm[i] / (1.0 + k_langmuir * cm[i])
            dq2[i] = k_ldf * (qstar - qm[i])
            if upstream:
                left = c_in if i == 0 else cm[i - 1]
                grad = cm[i] - left
            else:
                right = c_in if i == nz - 1 else cm[i + 1]
                grad = cm[i] - right
            dc2[i] = -(speed / dz) * grad - beta * dq2[i]
        for i in range(nz):
            c[i] = c[i] + (0.5 * dt) * (dc1[i] + dc2[i])
            q[i] = q[i] + (0.5 * dt) * (dq1[i] + dq2[i])
        inflow += speed * dt * c_in
        outflow += speed * (0.5 * dt) * (c_edge0 + c_edge1)
    return c, q, inflow, outflow


# -- forced linear oscillator: one forcing period --------------------------
#
# x'' + 2*zeta*w0*x' + w0^2*x = f*cos(wf*t), integrated with fixed-step
# RK4 from t = 0 over one period.


def _oscillator_period_loops(x, xdot, zeta, w0, f_amp, wf, t_end, n_steps):
    h = t_end / n_steps
    a = -(w0 * w0)
    b = -2.0 * zeta * w0
    t = 0.0
    for _ in range(n_steps):
        k1x = xdot
        k1v = a * x + b * xdot + f_amp * math.cos(wf * t)
        x2 = x + 0.5 * h * k1x
        v2 = xdot + 0.5 * h * k1v
        k2x = v2
        k2v = a * x2 + b * v2 + f_amp * math.cos(wf * (t + 0.5 * h))
        x3 = x + 0.5 * h * k2x
        v3 = xdot + 0.5 * h * k2v
        k3x = v3
        k3v = a * x3 + b * v3 + f_amp * math.cos(wf * (t + 0.5 * h))
        x4 = x + h * k3x
        v4 = xdot + h * k3v
        k4x = v4
        k4v = a * x4 + b * v4 + f_amp * math.cos(wf * (t + h))
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        xdot = xdot + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        t = t + h
    return x, xdot


oscillator_period_numpy = _oscillator_period_loops

if BACKEND == "numba":
    column_phase = _numba.njit(cache=True)(_column_phase_loops)
    oscillator_period = _numba.njit(cache=True)(_oscillator_period_loops)
else:
    column_phase = column_phase_numpy
    oscillator_period = oscillator_period_numpy
