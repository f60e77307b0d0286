"""Slingshot stepsize schedules for gradient descent-ascent."""

from .problems import (
    BilinearProblem,
    Point,
    Problem,
    QuadraticProblem,
    SmoothProblem,
    UnsupportedOperation,
    closest_saddle,
    hamiltonian,
    hamiltonian_grad,
)
from .schedules import (
    StepPairSchedule,
    arcsine_random,
    classical,
    slingshot_bilinear,
    slingshot_cc,
    slingshot_quadratic,
    validate_slingshot_family,
)
from .solvers import Trace, check_rate_bound, run_baseline, run_gda

__version__ = "0.1.0"
