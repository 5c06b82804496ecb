"""Split ODE systems, uniform meshes and trajectory containers.

A split system writes ``dy/dt = a(t, y) * y + b(t, y)`` where the diagonal
coefficient ``a`` acts on the first ``stabilized`` components only (for a
membrane model: the gating variables) and ``b`` carries everything else.
Integrators that stabilize the diagonal part exactly consume ``a`` and ``b``
separately; classical schemes see only the assembled right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

ArrayFn = Callable[[float, np.ndarray], np.ndarray]
PairFn = Callable[[float, np.ndarray], tuple[np.ndarray, np.ndarray]]


class ModelEvaluationError(RuntimeError):
    """Raised when a model right-hand side cannot be evaluated (overflow,
    domain error).  Integrators treat it as divergence of the current step."""


@dataclass(frozen=True)
class SplitSystem:
    """Right-hand side split into a stabilized diagonal part and a remainder.

    ``eval_a(t, y)`` returns the diagonal coefficients for the first
    ``stabilized`` components, shape ``(stabilized,)``; ``eval_b(t, y)``
    returns the full remainder, shape ``(dim,)``.  Both must be pure:
    the same ``(t, y)`` always yields the same output, so evaluations may
    be shared or repeated freely.  ``eval_ab``, when provided, returns the
    pair in one call; models whose two halves share expensive intermediate
    quantities should supply it.

    ``component_bounds`` (shape ``(dim, 2)``, optional) declares a validity
    box per component; a state that leaves it is treated as divergence by
    the integrators.  Models use this for quantities with a physical range
    (gating variables are probabilities), where a numerically bounded but
    grossly non-physical solution must still count as failed.
    """

    dim: int
    stabilized: int
    eval_a: ArrayFn
    eval_b: ArrayFn
    y0: np.ndarray
    t_end: float
    eval_ab: Optional[PairFn] = None
    component_bounds: Optional[np.ndarray] = None
    name: str = "system"

    def __post_init__(self):
        if not 1 <= self.stabilized <= self.dim:
            raise ValueError(
                f"stabilized block size {self.stabilized} outside 1..{self.dim}"
            )
        y0 = np.asarray(self.y0, dtype=float)
        if y0.shape != (self.dim,):
            raise ValueError(f"initial state must have shape ({self.dim},)")
        y0 = y0.copy()
        y0.flags.writeable = False
        object.__setattr__(self, "y0", y0)
        if not self.t_end > 0:
            raise ValueError("time horizon must be positive")
        if self.component_bounds is not None:
            box = np.asarray(self.component_bounds, dtype=float)
            if box.shape != (self.dim, 2):
                raise ValueError(
                    f"component_bounds must have shape ({self.dim}, 2)"
                )
            if np.any(box[:, 0] >= box[:, 1]):
                raise ValueError("component_bounds rows must be (lower, upper)")
            box = box.copy()
            box.flags.writeable = False
            object.__setattr__(self, "component_bounds", box)

    def ab(self, t: float, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Both split parts at ``(t, y)``, using the fused evaluator if any."""
        if self.eval_ab is not None:
            return self.eval_ab(t, y)
        return self.eval_a(t, y), self.eval_b(t, y)

    def full_rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        """Assembled right-hand side ``a(t,y)*y + b(t,y)`` (diagonal part
        padded with zeros beyond the stabilized block)."""
        a, b = self.ab(t, y)
        f = b.copy()
        f[: self.stabilized] += a * y[: self.stabilized]
        return f

    def stabilized_remainder(
        self, t: float, y: np.ndarray, alpha: np.ndarray
    ) -> np.ndarray:
        """Remainder ``(a(t,y) - alpha) * y + b(t,y)`` after freezing the
        diagonal at ``alpha`` (shape ``(stabilized,)``).

        With ``alpha = a(t, y)`` this reduces to ``b(t, y)``; with
        ``alpha = 0`` it reduces to the full right-hand side.
        """
        a, b = self.ab(t, y)
        c = b.copy()
        c[: self.stabilized] += (a - alpha) * y[: self.stabilized]
        return c


@dataclass(frozen=True)
class TimeMesh:
    """Uniform mesh ``t_n = n * h`` on ``[0, t_end]`` with ``m`` steps."""

    t_end: float
    m: int
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("mesh needs at least one step")
        if not self.t_end > 0:
            raise ValueError("mesh horizon must be positive")
        nodes = np.linspace(0.0, self.t_end, self.m + 1)
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @property
    def h(self) -> float:
        return self.t_end / self.m


@dataclass(frozen=True)
class Trajectory:
    """States on every node of a uniform mesh; row ``n`` belongs to ``t_n``.

    The state array is frozen after construction.  By convention the last
    component is the membrane potential of ionic models; :attr:`v` exposes
    it for post-processing.
    """

    mesh: TimeMesh
    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] != self.mesh.m + 1:
            raise ValueError(
                f"state array must have {self.mesh.m + 1} rows, got {states.shape}"
            )
        states.flags.writeable = False
        object.__setattr__(self, "states", states)

    @property
    def v(self) -> np.ndarray:
        """Last state component on every node (membrane potential)."""
        return self.states[:, -1]
