"""Beeler-Reuter ventricular action potential model in split form.

All formulas and constants follow the original publication (G.W. Beeler and
H. Reuter, "Reconstruction of the action potential of ventricular myocardial
fibres", J. Physiol. 268, 1977, pp. 177-210): the twelve gating rate
functions of Table 1, the four membrane currents i_K1, i_x1, i_Na, i_s and
the intracellular calcium balance.  Calcium is carried in mol/L, voltage in
mV, time in ms, currents in uA/cm^2 with a 1 uF/cm^2 membrane.

State layout (last component is the membrane potential, as the trajectory
tooling assumes):

    index  0  1  2  3  4  5   6   7
           m  h  j  d  f  x1  Ca  V

Each gate obeys ``dW/dt = alpha(V) (1 - W) - beta(V) W``, which in split
form ``dW/dt = a W + b`` gives the exact diagonal ``a = -(alpha + beta)``
(that is ``-1/tau``) and remainder ``b = alpha`` (that is ``W_inf / tau``).
Calcium and voltage are not stabilized; their whole right-hand side sits
in ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .splitsys import ModelEvaluationError, SplitSystem

# Resting potential of the published model; the total ionic current at this
# voltage (gates relaxed, calcium at rest) is below 2e-3 uA/cm^2.
V_REST = -84.57

# State vector indices.
IDX_M, IDX_H, IDX_J, IDX_D, IDX_F, IDX_X1, IDX_CA, IDX_V = range(8)
N_STATE = 8
N_GATES = 6

GATE_NAMES = ("m", "h", "j", "d", "f", "x1")

# Validity band for the gating variables.  Gates are probabilities: the
# exact flow keeps them strictly inside (0, 1).  Discretizations overshoot
# the upstroke benignly (measured at most 1.21 over the whole stable
# benchmark grid, never below +4e-12), whereas parasitic oscillations of a
# step size just past a scheme's stability boundary swing gates clearly
# negative (to -0.23 and beyond) while the membrane potential stays
# bounded.  The band below separates the two regimes by an order of
# magnitude on either side, so a run that leaves it is classified as
# diverged rather than as a valid solution.
GATE_BOUND_LO = -0.1
GATE_BOUND_HI = 1.5


def _gate_validity_box() -> np.ndarray:
    box = np.empty((N_STATE, 2))
    box[:, 0] = -np.inf
    box[:, 1] = np.inf
    box[:N_GATES, 0] = GATE_BOUND_LO
    box[:N_GATES, 1] = GATE_BOUND_HI
    return box


@dataclass(frozen=True)
class BRParams:
    """Adjustable constants; defaults are the published values."""

    g_na: float = 4.0        # fast sodium conductance, mmho/cm^2
    e_na: float = 50.0       # sodium reversal potential, mV
    g_nac: float = 0.003     # sodium background conductance
    g_s: float = 0.09        # slow inward (calcium) conductance
    c_m: float = 1.0         # membrane capacitance, uF/cm^2
    ca_rest: float = 1.0e-7  # diastolic calcium concentration, mol/L
    ca_rate: float = 0.07    # calcium restitution rate, 1/ms
    ca_scale: float = 1.0e-7 # uptake per unit slow current, mol/L per uA/cm^2


@dataclass(frozen=True)
class StimulusProfile:
    """Smooth transmembrane stimulus with compact support.

    The current is ``A * (1 - s^2)^exponent`` for ``s = (t - t_start)/width``
    inside ``|s| < 1`` and zero outside, with ``A`` normalized so the total
    delivered charge equals ``charge``.  The pulse vanishes to order
    ``exponent`` at both ends of its support, so with the default exponent 5
    the current is C^4 in time: one full classical order above the order-4
    schemes, which keeps the forcing from limiting their convergence.
    """

    t_start: float = 20.0   # pulse center, ms
    width: float = 1.0      # half width, ms
    charge: float = 50.0    # integral of the current over the pulse
    exponent: int = 5

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("stimulus width must be positive")
        if self.exponent < 1:
            raise ValueError("stimulus exponent must be at least 1")

    @property
    def normalization(self) -> float:
        """``1 / integral_{-1}^{1} (1 - s^2)^n ds``; 693/512 for n = 5."""
        n = self.exponent
        return math.factorial(2 * n + 1) / (
            2.0 ** (2 * n + 1) * math.factorial(n) ** 2
        )

    @property
    def amplitude(self) -> float:
        """Peak current, ``charge * normalization / width``."""
        return self.charge * self.normalization / self.width

    def current(self, t: float) -> float:
        """Stimulus current at time ``t`` (scalar hot path)."""
        s = (t - self.t_start) / self.width
        if not -1.0 < s < 1.0:
            return 0.0
        return self.amplitude * (1.0 - s * s) ** self.exponent

    def waveform(self, t) -> np.ndarray:
        """Vectorized :meth:`current` for plotting and quadrature."""
        t = np.asarray(t, dtype=float)
        s = (t - self.t_start) / self.width
        inside = np.abs(s) < 1.0
        out = np.zeros_like(s)
        out[inside] = self.amplitude * (1.0 - s[inside] ** 2) ** self.exponent
        return out


def _xdivexpm1(x: float) -> float:
    """``x / (exp(x) - 1)`` with the removable singularity at 0 filled in.

    expm1 keeps full precision near zero, so no series fallback is needed;
    only x == 0.0 itself requires the limit value 1.
    """
    if x == 0.0:
        return 1.0
    return x / math.expm1(x)


def gate_rates(v: float) -> tuple[float, ...]:
    """The twelve published rate constants at membrane potential ``v``.

    Returns ``(am, bm, ah, bh, aj, bj, ad, bd, af, bf, ax1, bx1)`` in 1/ms.
    alpha_m is the only rate with a removable singularity (at V = -47 mV).
    """
    e = math.exp
    am = 10.0 * _xdivexpm1(-0.1 * (v + 47.0))
    bm = 40.0 * e(-0.056 * (v + 72.0))
    ah = 0.126 * e(-0.25 * (v + 77.0))
    bh = 1.7 / (e(-0.082 * (v + 22.5)) + 1.0)
    aj = 0.055 * e(-0.25 * (v + 78.0)) / (e(-0.2 * (v + 78.0)) + 1.0)
    bj = 0.3 / (e(-0.1 * (v + 32.0)) + 1.0)
    ad = 0.095 * e(-0.01 * (v - 5.0)) / (e(-0.072 * (v - 5.0)) + 1.0)
    bd = 0.07 * e(-0.017 * (v + 44.0)) / (e(0.05 * (v + 44.0)) + 1.0)
    af = 0.012 * e(-0.008 * (v + 28.0)) / (e(0.15 * (v + 28.0)) + 1.0)
    bf = 0.0065 * e(-0.02 * (v + 30.0)) / (e(-0.2 * (v + 30.0)) + 1.0)
    ax1 = 0.0005 * e(0.083 * (v + 50.0)) / (e(0.057 * (v + 50.0)) + 1.0)
    bx1 = 0.0013 * e(-0.06 * (v + 20.0)) / (e(-0.04 * (v + 20.0)) + 1.0)
    return am, bm, ah, bh, aj, bj, ad, bd, af, bf, ax1, bx1


def ionic_currents(y, params: BRParams = BRParams()) -> tuple[float, float, float, float]:
    """The four membrane currents ``(i_k1, i_x1, i_na, i_s)`` at state ``y``."""
    m, h, j, d, f, x1, ca, v = (float(c) for c in y)
    e = math.exp
    i_k1 = 0.35 * (
        4.0 * (e(0.04 * (v + 85.0)) - 1.0)
        / (e(0.08 * (v + 53.0)) + e(0.04 * (v + 53.0)))
        + 5.0 * _xdivexpm1(-0.04 * (v + 23.0))
    )
    i_x1 = x1 * 0.8 * (e(0.04 * (v + 77.0)) - 1.0) / e(0.04 * (v + 35.0))
    i_na = (params.g_na * m * m * m * h * j + params.g_nac) * (v - params.e_na)
    e_s = -82.3 - 13.0287 * math.log(ca)
    i_s = params.g_s * d * f * (v - e_s)
    return i_k1, i_x1, i_na, i_s


def beeler_reuter_system(
    params: BRParams | None = None,
    stimulus: StimulusProfile | None = None,
    t_end: float = 396.0,
    y0: np.ndarray | None = None,
) -> SplitSystem:
    """Build the split system for one paced Beeler-Reuter cell."""
    params = params or BRParams()
    stimulus = stimulus or StimulusProfile()
    if y0 is None:
        y0 = br_resting_state(params)

    g_na = params.g_na
    e_na = params.e_na
    g_nac = params.g_nac
    g_s = params.g_s
    inv_cm = 1.0 / params.c_m
    ca_rest = params.ca_rest
    ca_rate = params.ca_rate
    ca_scale = params.ca_scale
    stim_current = stimulus.current
    e = math.exp
    log = math.log

    def eval_ab(t: float, y) -> tuple[np.ndarray, np.ndarray]:
        m, h, j, d, f, x1, ca, v = y.tolist() if isinstance(y, np.ndarray) else y
        try:
            am, bm, ah, bh, aj, bj, ad, bd, af, bf, ax1, bx1 = gate_rates(v)
            i_k1 = 0.35 * (
                4.0 * (e(0.04 * (v + 85.0)) - 1.0)
                / (e(0.08 * (v + 53.0)) + e(0.04 * (v + 53.0)))
                + 5.0 * _xdivexpm1(-0.04 * (v + 23.0))
            )
            i_x1 = x1 * 0.8 * (e(0.04 * (v + 77.0)) - 1.0) / e(0.04 * (v + 35.0))
            i_na = (g_na * m * m * m * h * j + g_nac) * (v - e_na)
            e_s = -82.3 - 13.0287 * log(ca)
            i_s = g_s * d * f * (v - e_s)
        except (OverflowError, ValueError) as exc:
            raise ModelEvaluationError(
                f"rate evaluation failed at t={t!r}, V={v!r}: {exc}"
            ) from exc
        a = np.array(
            [
                -(am + bm),
                -(ah + bh),
                -(aj + bj),
                -(ad + bd),
                -(af + bf),
                -(ax1 + bx1),
            ]
        )
        b = np.array(
            [
                am,
                ah,
                aj,
                ad,
                af,
                ax1,
                -ca_scale * i_s + ca_rate * (ca_rest - ca),
                (stim_current(t) - (i_k1 + i_x1 + i_na + i_s)) * inv_cm,
            ]
        )
        return a, b

    return SplitSystem(
        dim=N_STATE,
        stabilized=N_GATES,
        eval_a=lambda t, y: eval_ab(t, y)[0],
        eval_b=lambda t, y: eval_ab(t, y)[1],
        eval_ab=eval_ab,
        y0=y0,
        t_end=t_end,
        component_bounds=_gate_validity_box(),
        name="beeler-reuter",
    )


def br_resting_state(params: BRParams | None = None, v: float = V_REST) -> np.ndarray:
    """Published resting state: gates at steady state for ``v``, calcium at
    its diastolic value.  The residual right-hand side there is below 2e-3,
    so an unstimulated cell stays put to within a fraction of a millivolt."""
    params = params or BRParams()
    am, bm, ah, bh, aj, bj, ad, bd, af, bf, ax1, bx1 = gate_rates(v)
    return np.array(
        [
            am / (am + bm),
            ah / (ah + bh),
            aj / (aj + bj),
            ad / (ad + bd),
            af / (af + bf),
            ax1 / (ax1 + bx1),
            params.ca_rest,
            v,
        ]
    )
