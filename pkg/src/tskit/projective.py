"""Coarse projective integration of the cycle-to-cycle envelope dynamics.

The end-of-cycle states of a rapidly cycling process trace a slow envelope
whose governing equation is not available in closed form.  Each round here
integrates a few inner cycles, estimates the envelope slope from the last
states by a chord, then leaps many cycles with one explicit outer Euler
step at zero map-call cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Parameters, Timestepper, as_state
from .errors import UnstableEnvelope

#: Round-over-round chord growth that counts as outer instability ...
CHORD_GROWTH_LIMIT = 10.0
#: ... when sustained for this many consecutive rounds.
CHORD_GROWTH_ROUNDS = 3


@dataclass
class ProjectiveSchedule:
    """Inner/outer step plan: k_inner cycles integrated, m_jump leapt."""

    k_inner: int = 3
    m_jump: int = 9
    max_rounds: int = 1000
    tolerance: float = 1e-6
    adaptive: bool = False
    chord_points: int = 2

    def __post_init__(self):
        if self.k_inner < 2:
            raise ValueError("a chord needs at least two inner end-of-cycle states")
        if self.m_jump < 0:
            raise ValueError("m_jump must be >= 0 (0 degenerates to direct simulation)")
        if self.chord_points < 2:
            raise ValueError("chord_points must be >= 2")


@dataclass
class TrajectoryEntry:
    cycle: int
    state: np.ndarray
    kind: str  # "inner" | "jump"


@dataclass
class EnvelopeTrajectory:
    entries: list[TrajectoryEntry] = field(default_factory=list)
    map_calls: int = 0
    cycles_covered: int = 0
    rounds: int = 0
    converged: bool = False

    @property
    def final_state(self) -> np.ndarray:
        return self.entries[-1].state

    @property
    def speedup(self) -> float:
        """Cycles covered per map call spent."""
        return self.cycles_covered / max(self.map_calls, 1)


def chord_estimate(u_prev, u_last) -> np.ndarray:
    """Per-cycle slow derivative estimate from the last two inner states."""
    return as_state(u_last) - as_state(u_prev)


def chord_estimate_lsq(states) -> np.ndarray:
    """Least-squares per-cycle slope over the last h end-of-cycle states.

    With h = 2 this reduces exactly to :func:`chord_estimate`.
    """
    states = [as_state(s) for s in states]
    h = len(states)
    if h < 2:
        raise ValueError("need at least two states for a slope")
    if h == 2:
        return states[1] - states[0]
    t = np.arange(h) - (h - 1) / 2.0
    y = np.column_stack(states)
    return (y @ t) / float(t @ t)


def projective_step(u_k, d, m: int) -> np.ndarray:
    """Outer Euler leap: u + M * d, covering M cycles with zero map calls."""
    if m < 0:
        raise ValueError("jump length must be >= 0")
    return as_state(u_k) + m * as_state(d)


def adaptive_jump_cap(mu_hat: float, k_inner: int) -> int | None:
    """Outer-Euler stability cap on the jump length.

    For a scalar mode with per-cycle multiplier mu the round map amplifies
    by mu^k + M*mu^(k-1)*(mu-1); keeping the leap inside M <= 2/(1-mu) - k
    bounds that by one.  Returns None when mu_hat >= 1 (no cap available).
    """
    if not mu_hat < 1.0:
        return None
    return max(0, math.floor(2.0 / (1.0 - mu_hat)) - k_inner)


def projective_run(
    stepper: Timestepper,
    u0,
    p: Parameters | None = None,
    sched: ProjectiveSchedule | None = None,
) -> EnvelopeTrajectory:
    """Rounds of [k_inner cycles -> chord -> leap m_jump cycles].

    With ``adaptive`` set, each round re-estimates the slow per-cycle
    multiplier from its own inner differences and caps the leap by the
    outer-Euler stability bound.  Stops when the cycle-to-cycle change
    drops below tolerance or the round budget runs out; raises
    :class:`UnstableEnvelope` when the chord keeps amplifying.
    """
    if sched is None:
        sched = ProjectiveSchedule()
    u = as_state(u0).copy()
    traj = EnvelopeTrajectory()
    traj.entries.append(TrajectoryEntry(cycle=0, state=u.copy(), kind="inner"))
    cycle = 0
    prev_chord_norm = None
    growth_streak = 0
    for _ in range(sched.max_rounds):
        tail = [u]
        for _ in range(sched.k_inner):
            u = stepper.apply(u, p)
            traj.map_calls += 1
            cycle += 1
            traj.entries.append(TrajectoryEntry(cycle=cycle, state=u.copy(), kind="inner"))
            tail.append(u)
            if len(tail) > max(sched.chord_points, 3):
                tail.pop(0)
        traj.rounds += 1
        change = float(np.linalg.norm(tail[-1] - tail[-2]))
        if change <= sched.tolerance:
            traj.converged = True
            break
        d = chord_estimate_lsq(tail[-sched.chord_points :])
        chord_norm = float(np.linalg.norm(d))
        if prev_chord_norm is not None and chord_norm > CHORD_GROWTH_LIMIT * prev_chord_norm:
            growth_streak += 1
            if growth_streak >= CHORD_GROWTH_ROUNDS:
                raise UnstableEnvelope(
                    f"chord norm grew more than {CHORD_GROWTH_LIMIT:g}x for "
                    f"{growth_streak} consecutive rounds (now {chord_norm:.3g})"
                )
        else:
            growth_streak = 0
        prev_chord_norm = chord_norm
        m = sched.m_jump
        if sched.adaptive:
            dprev = float(np.linalg.norm(tail[-2] - tail[-3])) if len(tail) >= 3 else 0.0
            if dprev > 0.0:
                mu_hat = float(np.linalg.norm(tail[-1] - tail[-2])) / dprev
                cap = adaptive_jump_cap(mu_hat, sched.k_inner)
                if cap is not None:
                    m = min(m, cap)
        if m > 0:
            u = projective_step(u, d, m)
            cycle += m
            traj.entries.append(TrajectoryEntry(cycle=cycle, state=u.copy(), kind="jump"))
    traj.cycles_covered = cycle
    return traj
