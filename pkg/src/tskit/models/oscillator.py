"""Periodically forced damped linear oscillator, sampled once per period."""

from __future__ import annotations

import numpy as np

from ..core import Parameters, Timestepper
from . import _kernels


class ForcedOscillatorModel(Timestepper):
    """Stroboscopic map of x'' + 2*zeta*w0*x' + w0^2*x = f*cos(wf*t).

    One map call integrates exactly one forcing period 2*pi/wf with
    fixed-step RK4 starting at phase t = 0, so fixed points of the map are
    periodic solutions of the flow and the map Jacobian is the monodromy
    matrix exp(M*T) of the unforced system.

    The forcing amplitude may be overridden per call through the "f_amp"
    parameter entry (continuation knob); since the ODE is linear this moves
    the fixed point but not the Floquet multipliers.
    """

    def __init__(
        self,
        zeta: float = 0.1,
        omega0: float = 1.0,
        f_amp: float = 1.0,
        forcing_omega: float = 1.0,
        n_steps: int = 400,
    ):
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        period = 2.0 * np.pi / forcing_omega
        super().__init__(2, period=period, name="ForcedOscillator")
        self.zeta = float(zeta)
        self.omega0 = float(omega0)
        self.f_amp = float(f_amp)
        self.forcing_omega = float(forcing_omega)
        self.n_steps = int(n_steps)

    def _advance(self, u, p):
        f_amp = p.get("f_amp", self.f_amp)
        x, v = _kernels.oscillator_period(
            u[0], u[1], self.zeta, self.omega0, f_amp, self.forcing_omega,
            self.period, self.n_steps,
        )
        return np.array([x, v])

    def forced_periodic_state(self, p: Parameters | None = None) -> np.ndarray:
        """The analytic periodic solution sampled at t = 0.

        Particular solution x_p(t) = Re[H(i*wf) * f * exp(i*wf*t)] with the
        usual transfer function; its (x, x') at t = 0 is the fixed point of
        the stroboscopic map.
        """
        f_amp = (p or Parameters()).get("f_amp", self.f_amp)
        wf = self.forcing_omega
        h = 1.0 / (self.omega0**2 - wf**2 + 2j * self.zeta * self.omega0 * wf)
        amp = h * f_amp
        return np.array([amp.real, (1j * wf * amp).real])
