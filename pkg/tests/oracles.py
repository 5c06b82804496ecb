"""Independent oracles for the test suite.

Everything here is computed with mpmath extended precision or from
table-driven formulas transcribed separately from the library code, so
agreement between library and oracle is meaningful evidence rather than
the same expression evaluated twice.
"""

import mpmath as mp
import numpy as np

ORACLE_DPS = 50


def _mpf(x) -> mp.mpf:
    # repr round-trips the double exactly; mp.mpf(float) would too, but
    # going through repr makes the intent explicit.
    return mp.mpf(repr(float(x)))


def phi_oracle(j: int, z: float, terms: int = 30, dps: int = ORACLE_DPS) -> mp.mpf:
    """phi_j(z) in extended precision.

    Inside the unit disk a 30-term Taylor sum of
    ``phi_j(z) = sum_i z^i / (i + j)!`` is exact to far below the working
    precision; outside, the upward recurrence
    ``phi_{i+1}(z) = (phi_i(z) - 1/i!)/z`` from ``exp`` is stable because
    extended precision absorbs any cancellation.
    """
    with mp.workdps(dps):
        zz = _mpf(z)
        if abs(zz) <= 1:
            acc = mp.mpf(0)
            for i in reversed(range(terms)):
                acc = acc * zz + 1 / mp.factorial(i + j)
            return acc
        val = mp.exp(zz)
        for i in range(1, j + 1):
            val = (val - 1 / mp.factorial(i - 1)) / zz
        return val


# Published rate-constant table for the 1977 ventricular membrane model
# (Beeler & Reuter, J. Physiol. 268).  Each rate is the generic fraction
#
#   rate(V) = (C1 exp(C2 (V + C3)) + C4 (V + C5)) / (exp(C6 (V + C3)) + C7)
#
# with the row of constants below; this table-driven form is deliberately
# different in shape from the library's hand-inlined expressions.
RATE_TABLE = {
    #          C1       C2      C3     C4   C5    C6      C7
    "am": (0.0, 0.0, 47.0, -1.0, 47.0, -0.1, -1.0),
    "bm": (40.0, -0.056, 72.0, 0.0, 0.0, 0.0, 0.0),
    "ah": (0.126, -0.25, 77.0, 0.0, 0.0, 0.0, 0.0),
    "bh": (1.7, 0.0, 22.5, 0.0, 0.0, -0.082, 1.0),
    "aj": (0.055, -0.25, 78.0, 0.0, 0.0, -0.2, 1.0),
    "bj": (0.3, 0.0, 32.0, 0.0, 0.0, -0.1, 1.0),
    "ad": (0.095, -0.01, -5.0, 0.0, 0.0, -0.072, 1.0),
    "bd": (0.07, -0.017, 44.0, 0.0, 0.0, 0.05, 1.0),
    "af": (0.012, -0.008, 28.0, 0.0, 0.0, 0.15, 1.0),
    "bf": (0.0065, -0.02, 30.0, 0.0, 0.0, -0.2, 1.0),
    "ax1": (0.0005, 0.083, 50.0, 0.0, 0.0, 0.057, 1.0),
    "bx1": (0.0013, -0.06, 20.0, 0.0, 0.0, -0.04, 1.0),
}

RATE_NAMES = ("am", "bm", "ah", "bh", "aj", "bj", "ad", "bd", "af", "bf", "ax1", "bx1")


def rate_oracle(name: str, v: float, dps: int = 40) -> float:
    """One membrane rate constant from the published C1..C7 table."""
    c1, c2, c3, c4, c5, c6, c7 = (_mpf(c) for c in RATE_TABLE[name])
    with mp.workdps(dps):
        vv = _mpf(v)
        num = c1 * mp.exp(c2 * (vv + c3)) + c4 * (vv + c5)
        den = mp.exp(c6 * (vv + c3)) + c7
        if den == 0:
            # Removable singularity (alpha_m at V = -47): l'Hopital gives
            # C4 / C6 because the numerator vanishes with (V + C3).
            return float(c4 / c6)
        return float(num / den)


def currents_oracle(y, dps: int = 40) -> dict:
    """Ionic currents from a direct transcription of the published formulas.

    No expm1 rearrangements: plain exponentials, valid away from the
    i_K1 singularity at V = -23 mV.  ``y`` is the full state
    ``(m, h, j, d, f, x1, Ca, V)``.
    """
    with mp.workdps(dps):
        m, hh, jj, d, f, x1, ca, v = (_mpf(c) for c in y)
        i_k1 = _mpf(0.35) * (
            4 * (mp.exp(_mpf(0.04) * (v + 85)) - 1)
            / (mp.exp(_mpf(0.08) * (v + 53)) + mp.exp(_mpf(0.04) * (v + 53)))
            + _mpf(0.2) * (v + 23) / (1 - mp.exp(_mpf(-0.04) * (v + 23)))
        )
        i_x1 = x1 * _mpf(0.8) * (mp.exp(_mpf(0.04) * (v + 77)) - 1) / mp.exp(
            _mpf(0.04) * (v + 35)
        )
        i_na = (4 * m**3 * hh * jj + _mpf(0.003)) * (v - 50)
        e_s = _mpf(-82.3) - _mpf(13.0287) * mp.log(ca)
        i_s = _mpf(0.09) * d * f * (v - e_s)
        return {
            "i_k1": float(i_k1),
            "i_x1": float(i_x1),
            "i_na": float(i_na),
            "i_s": float(i_s),
            "total": float(i_k1 + i_x1 + i_na + i_s),
        }


def eab_reference_step(k, h, a_diag, y, c_history, dps: int = 40) -> np.ndarray:
    """Exact variation-of-constants step with an interpolated remainder.

    Componentwise quadrature of

        y_i(h) = exp(a_i h) y_i(0) + int_0^h exp(a_i (h - s)) P_i(s) ds

    where ``P_i`` is the degree-(k-1) Lagrange interpolant of the remainder
    values ``c_history`` (most recent first) at nodes ``s = 0, -h, ...,
    -(k-1) h``.  This is the integral an exponential multistep scheme of
    order ``k`` discretizes exactly, so a single library step must match to
    quadrature accuracy.
    """
    with mp.workdps(dps):
        hh = _mpf(h)
        nodes = [-j * hh for j in range(k)]
        dim = len(y)
        out = np.empty(dim)
        for i in range(dim):
            ai = _mpf(a_diag[i])
            yi = _mpf(y[i])
            vals = [_mpf(c[i]) for c in c_history]

            def interp(s):
                acc = mp.mpf(0)
                for jn in range(k):
                    lj = mp.mpf(1)
                    for xn in range(k):
                        if xn != jn:
                            lj *= (s - nodes[xn]) / (nodes[jn] - nodes[xn])
                    acc += vals[jn] * lj
                return acc

            integral = mp.quad(lambda s: mp.exp(ai * (hh - s)) * interp(s), [0, hh])
            out[i] = float(mp.exp(ai * hh) * yi + integral)
        return out


def affine_exact(a: float, b: float, y0: float, t: float) -> float:
    """Exact solution of the scalar constant-coefficient problem
    ``y' = a y + b`` at time ``t``, in extended precision."""
    with mp.workdps(40):
        aa, bb, yy = _mpf(a), _mpf(b), _mpf(y0)
        if aa == 0:
            return float(yy + bb * _mpf(t))
        tt = _mpf(t)
        return float(mp.exp(aa * tt) * (yy + bb / aa) - bb / aa)
