"""ionstep: stabilized multistep integrators for stiff ionic models.

The package provides exponential Adams-Bashforth and Rush-Larsen style
multistep schemes (orders 1-4) for split systems ``dy/dt = a(t,y) y +
b(t,y)``, a set of classical comparison schemes, the Beeler-Reuter
ventricular model in split form, trajectory post-processing (dense output,
error norms, action-potential biomarkers), and a benchmark driver
(``ionstep-bench``).
"""

from .phi import phi_eval, phi_eval_batch, phi_table
from .splitsys import (
    ModelEvaluationError,
    SplitSystem,
    TimeMesh,
    Trajectory,
)
from .beeler_reuter import (
    BRParams,
    StimulusProfile,
    V_REST,
    beeler_reuter_system,
    br_resting_state,
    gate_rates,
    ionic_currents,
)
from .schemes import (
    ALL_SCHEME_KEYS,
    HistoryEntry,
    MultistepHistory,
    NewtonConfig,
    NewtonDivergedError,
    SchemeSpec,
    StatusReport,
    classical_step,
    eab_coefficients,
    eab_step,
    integrate,
    newton_solve,
    rk4_step,
    rl_coefficients,
    rl_step,
)
from .postprocess import (
    BiomarkerSet,
    BiomarkerUndefined,
    PiecewiseCubic,
    biomarker_errors,
    extract_biomarkers,
    interpolate,
    linf_relative_error,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_SCHEME_KEYS",
    "BRParams",
    "BiomarkerSet",
    "BiomarkerUndefined",
    "HistoryEntry",
    "ModelEvaluationError",
    "MultistepHistory",
    "NewtonConfig",
    "NewtonDivergedError",
    "PiecewiseCubic",
    "SchemeSpec",
    "SplitSystem",
    "StatusReport",
    "StimulusProfile",
    "TimeMesh",
    "Trajectory",
    "V_REST",
    "beeler_reuter_system",
    "biomarker_errors",
    "br_resting_state",
    "classical_step",
    "eab_coefficients",
    "eab_step",
    "extract_biomarkers",
    "gate_rates",
    "integrate",
    "interpolate",
    "ionic_currents",
    "linf_relative_error",
    "newton_solve",
    "phi_eval",
    "phi_eval_batch",
    "phi_table",
    "rk4_step",
    "rl_coefficients",
    "rl_step",
    "__version__",
]
