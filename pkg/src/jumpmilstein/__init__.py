"""Jump-adapted quasi-Milstein schemes for jump-diffusions with discontinuous drift."""

from .coefficients import (AssumptionViolation, DomainError, JumpDiffusionModel, LinearGrowthCertificate,
                           PiecewiseSmoothFn, d, evaluate, one_sided_limits, validate_assumption1)
from .experiments import (ErrorReport, ExperimentSpec, GBMJumpOracle, compare_schemes, fit_occupation,
                          fit_order, moment_diagnostic, occupation_time, strong_error)
from .randomness import (AdaptedGrid, JumpTimes, PathRandomness, build_grid, draw_brownian,
                         draw_jump_times, make_path_randomness, restrict, underline_t)
from .schemes import (EULER, MILSTEIN, TRANSFORMED, SamplePath, SchemeSpec, apply_jump, interpolate,
                      simulate, step_quasi_milstein)
from .transform import (InversionError, TransformedModel, TransformG, bump, build_transform,
                        transform_model)

__version__ = "0.1.0"
