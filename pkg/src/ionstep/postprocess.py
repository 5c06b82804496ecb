"""Trajectory post-processing: dense output, error norms, biomarkers.

Mesh solutions are compared through a piecewise-cubic interpolant built on
packages of three consecutive intervals (so the step count must be a
multiple of three).  Within a package the four nodal values define one
cubic; the interpolant is continuous but not C^1 across package boundaries,
which is fine for fourth-order-accurate dense output.

Action-potential biomarkers (activation time, recovery time, duration) are
threshold crossings of the membrane potential refined on a local cubic
through the four nodes around the crossing interval: bisection down to a
1e-12 relative bracket followed by a short Newton polish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .splitsys import Trajectory

THRESHOLD_WEIGHT = 0.8  # v_th = 0.8 v_rest + 0.2 v_peak
_BISECT_REL_TOL = 1e-12
_POLISH_STEPS = 3


class BiomarkerUndefined(RuntimeError):
    """The trajectory has no usable threshold crossing (diverged run, no
    action potential, or repeated crossings)."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


def _basis(u):
    """Cubic Lagrange basis on equispaced points u = 0, 1, 2, 3."""
    um1 = u - 1.0
    um2 = u - 2.0
    um3 = u - 3.0
    l0 = -(um1 * um2 * um3) / 6.0
    l1 = (u * um2 * um3) / 2.0
    l2 = -(u * um1 * um3) / 2.0
    l3 = (u * um1 * um2) / 6.0
    return l0, l1, l2, l3


def _basis_deriv(u):
    usq = 3.0 * u * u
    l0 = -(usq - 12.0 * u + 11.0) / 6.0
    l1 = (usq - 10.0 * u + 6.0) / 2.0
    l2 = -(usq - 8.0 * u + 3.0) / 2.0
    l3 = (usq - 6.0 * u + 2.0) / 6.0
    return l0, l1, l2, l3


class PiecewiseCubic:
    """Piecewise-cubic interpolant of nodal values on a uniform mesh.

    ``values`` has one row per node (shape ``(m + 1,)`` or ``(m + 1, d)``)
    and ``m`` must be a positive multiple of three.  Evaluation maps ``t``
    into its three-interval package and applies the Lagrange basis there;
    queries are clamped to ``[0, t_end]`` package-wise, so extrapolation is
    never produced.
    """

    def __init__(self, t_end: float, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        m = values.shape[0] - 1
        if m < 3 or m % 3 != 0:
            raise ValueError(f"step count must be a positive multiple of 3, got {m}")
        if not (t_end > 0.0):
            raise ValueError("t_end must be positive")
        self.t_end = float(t_end)
        self.values = values
        self.m = m
        self.h = self.t_end / m

    def _package(self, t):
        x = np.asarray(t, dtype=float) / self.h
        s = np.clip(np.floor(x / 3.0), 0.0, self.m // 3 - 1)
        u = x - 3.0 * s
        base = (3.0 * s).astype(int)
        return base, u

    def __call__(self, t):
        base, u = self._package(t)
        l0, l1, l2, l3 = _basis(u)
        v = self.values
        if v.ndim == 2 and np.ndim(u) > 0:
            l0, l1, l2, l3 = (np.expand_dims(w, -1) for w in (l0, l1, l2, l3))
        out = l0 * v[base] + l1 * v[base + 1] + l2 * v[base + 2] + l3 * v[base + 3]
        return out

    def derivative(self, t):
        base, u = self._package(t)
        l0, l1, l2, l3 = _basis_deriv(u)
        v = self.values
        if v.ndim == 2 and np.ndim(u) > 0:
            l0, l1, l2, l3 = (np.expand_dims(w, -1) for w in (l0, l1, l2, l3))
        out = l0 * v[base] + l1 * v[base + 1] + l2 * v[base + 2] + l3 * v[base + 3]
        return out / self.h


def interpolate(traj: Trajectory, component: int | None = None) -> PiecewiseCubic:
    """Piecewise-cubic interpolant of a trajectory (one component or all)."""
    values = traj.states if component is None else traj.states[:, component]
    return PiecewiseCubic(traj.mesh.t_end, values)


def linf_relative_error(traj: Trajectory, ref: Trajectory) -> float:
    """Relative max-norm distance between membrane-potential interpolants.

    Both interpolants are compared on the reference nodes, where the
    reference interpolant reduces to its nodal values; the reference mesh
    must therefore be a refinement of ``traj``'s (same duration, step count
    an integer multiple).  Returns NaN when the test trajectory contains
    non-finite states.
    """
    if abs(traj.mesh.t_end - ref.mesh.t_end) > 1e-12 * ref.mesh.t_end:
        raise ValueError("trajectories cover different time spans")
    if ref.mesh.m % traj.mesh.m != 0:
        raise ValueError(
            f"reference mesh ({ref.mesh.m}) does not refine test mesh ({traj.mesh.m})"
        )
    if not np.isfinite(traj.v).all():
        return math.nan
    dense = PiecewiseCubic(traj.mesh.t_end, traj.v)
    diff = dense(ref.mesh.nodes) - ref.v
    return float(np.max(np.abs(diff)) / np.max(np.abs(ref.v)))


@dataclass(frozen=True)
class BiomarkerSet:
    """Threshold biomarkers of a single action potential."""

    t_activate: float
    t_recover: float
    duration: float
    v_rest: float
    v_peak: float
    v_threshold: float


def _refine_crossing(
    values: np.ndarray, h: float, n: int, v_th: float, upward: bool, t_end: float
) -> float:
    """Crossing time of the threshold within interval ``[t_n, t_{n+1}]`` on
    a cubic through the four surrounding nodes."""
    m = values.shape[0] - 1
    lo = min(max(n - 1, 0), m - 3)
    w = values[lo : lo + 4]
    t_lo = lo * h

    def g(t):
        l0, l1, l2, l3 = _basis((t - t_lo) / h)
        return l0 * w[0] + l1 * w[1] + l2 * w[2] + l3 * w[3] - v_th

    def gprime(t):
        l0, l1, l2, l3 = _basis_deriv((t - t_lo) / h)
        return (l0 * w[0] + l1 * w[1] + l2 * w[2] + l3 * w[3]) / h

    a, b = n * h, (n + 1) * h
    ga, gb = g(a), g(b)
    sign = 1.0 if upward else -1.0
    # Nodal inequalities guarantee the bracket up to roundoff; a crossing
    # sitting exactly on a node short-circuits here.
    if sign * ga >= 0.0:
        return a
    if sign * gb <= 0.0:
        return b
    tol = _BISECT_REL_TOL * t_end
    lo_t, hi_t = a, b
    while hi_t - lo_t > tol:
        mid = 0.5 * (lo_t + hi_t)
        gm = g(mid)
        if gm == 0.0:
            lo_t = hi_t = mid
            break
        if sign * gm < 0.0:
            lo_t = mid
        else:
            hi_t = mid
    t = 0.5 * (lo_t + hi_t)
    for _ in range(_POLISH_STEPS):
        slope = gprime(t)
        if slope == 0.0:
            break
        step = g(t) / slope
        t_new = t - step
        if not a <= t_new <= b:
            break
        t = t_new
    return t


def _quadratic_roots(qa: float, qb: float, qc: float) -> list[float]:
    """Real roots of ``qa u^2 + qb u + qc``; degenerate coefficients are
    handled by np.roots stripping leading zeros."""
    if qa == 0.0 and qb == 0.0:
        return []
    roots = np.atleast_1d(np.roots([qa, qb, qc]))
    return [float(r.real) for r in roots if abs(complex(r).imag) < 1e-9]


def _local_cubic_max(v: np.ndarray, n0: int, m: int) -> float:
    """Maximum of the interpolated signal near the nodal maximum ``n0``.

    The nodal maximum of a smooth peak is only O(h^2) accurate and the
    error depends on where the mesh happens to fall relative to the peak,
    so it cannot serve a threshold that must track the scheme's order.
    Instead the cubic through 4 consecutive nodes is maximized on the two
    stencils that center the intervals adjacent to ``n0`` (its derivative
    is a quadratic with closed-form roots), recovering interpolation-order
    accuracy.
    """
    best = float(v[n0])
    if m < 3:
        return best
    for lo in (n0 - 2, n0 - 1):
        lo = min(max(lo, 0), m - 3)
        v0, v1, v2, v3 = (float(v[lo + i]) for i in range(4))
        qa = 0.5 * (-v0 + 3.0 * v1 - 3.0 * v2 + v3)
        qb = 2.0 * v0 - 5.0 * v1 + 4.0 * v2 - v3
        qc = -11.0 * v0 / 6.0 + 3.0 * v1 - 1.5 * v2 + v3 / 3.0
        for u in _quadratic_roots(qa, qb, qc):
            if 0.0 <= u <= 3.0:
                val = float(np.dot(_basis(u), (v0, v1, v2, v3)))
                if val > best:
                    best = val
    return best


def extract_biomarkers(traj: Trajectory, threshold_weight: float = THRESHOLD_WEIGHT) -> BiomarkerSet:
    """Activation/recovery times and duration of a single action potential.

    The threshold is ``w * v_rest + (1 - w) * v_peak`` with the resting
    value taken at ``t = 0`` and the peak taken as the maximum of the
    local cubic interpolant around the nodal maximum.  The trajectory must
    cross the threshold upward exactly once and downward exactly once;
    anything else (including a diverged run) raises
    :class:`BiomarkerUndefined`.
    """
    v = traj.v
    if not np.isfinite(v).all():
        raise BiomarkerUndefined("trajectory contains non-finite values")
    v_rest = float(v[0])
    v_peak = _local_cubic_max(v, int(np.argmax(v)), traj.mesh.m)
    v_th = threshold_weight * v_rest + (1.0 - threshold_weight) * v_peak

    up = np.nonzero((v[:-1] <= v_th) & (v[1:] > v_th))[0]
    down = np.nonzero((v[:-1] >= v_th) & (v[1:] < v_th))[0]
    if up.size == 0:
        raise BiomarkerUndefined("no activation crossing")
    if up.size > 1:
        raise BiomarkerUndefined(f"{up.size} activation crossings")
    if down.size == 0:
        raise BiomarkerUndefined("no recovery crossing")
    if down.size > 1:
        raise BiomarkerUndefined(f"{down.size} recovery crossings")

    h = traj.mesh.h
    t_end = traj.mesh.t_end
    t_a = _refine_crossing(v, h, int(up[0]), v_th, True, t_end)
    t_r = _refine_crossing(v, h, int(down[0]), v_th, False, t_end)
    return BiomarkerSet(
        t_activate=t_a,
        t_recover=t_r,
        duration=t_r - t_a,
        v_rest=v_rest,
        v_peak=v_peak,
        v_threshold=v_th,
    )


def biomarker_errors(test: BiomarkerSet, ref: BiomarkerSet) -> dict[str, float]:
    """Relative biomarker errors ``{'e_ta', 'e_tr', 'e_apd'}`` against a
    reference set.  A zero reference value makes the corresponding error
    undefined and raises :class:`BiomarkerUndefined`."""
    pairs = {
        "e_ta": (test.t_activate, ref.t_activate),
        "e_tr": (test.t_recover, ref.t_recover),
        "e_apd": (test.duration, ref.duration),
    }
    out = {}
    for name, (val, refval) in pairs.items():
        if refval == 0.0:
            raise BiomarkerUndefined(f"reference value for {name} is zero")
        out[name] = abs(val - refval) / abs(refval)
    return out
