"""helmlab: a numerical laboratory for exterior generalized Helmholtz
operators L = div_b(a grad_b .) + c, their regularized resolvents, dyadic
weighted norms, multiplier identities, and limiting-absorption sweeps."""

from .coefficients import (
    AssumptionReport,
    CoefficientSet,
    assumption_report,
    derived_metric_scalars,
    make_coefficients,
    radial_A_psi,
    tangential_field,
)
from .geometry import Grid, build_grid, sphere_quadrature, starshaped_check
from .kernels import HAVE_COMPILED, backend_name
from .operator import DiscreteOperator, assemble, sponge_profile
from .solver import SolveResult, solve
from .radial import RadialProblem, reduce_and_solve
from .norms import (
    GradientField,
    NormReport,
    dyadic_norm,
    magnetic_gradient,
    norm_report,
    sommerfeld_deficiency,
)
from .identities import (
    MorawetzBreakdown,
    WeightPair,
    hardy_check,
    identity_new1,
    lemma_inequality_suite,
    morawetz_residual,
    weights_std,
)
from .lap import (
    LapSweepResult,
    eigenvalue_probe,
    lap_sweep,
    radiation_report,
    uniqueness_probe,
)

__version__ = "0.1.0"
