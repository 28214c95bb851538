"""anisochill: a numerical laboratory for singular, anisotropic nonlocal
Cahn-Hilliard dynamics and their local anisotropic limit.

The package is organized around six building blocks:

* :mod:`anisochill.kernels` -- kernel families, assumption checks, second
  moments and their extrapolated limit matrix;
* :mod:`anisochill.fields` -- uniform-grid fields, discrete Neumann
  calculus, the mean-zero solver and the dual norm;
* :mod:`anisochill.nonlocal_form` -- assembled pair weights realizing the
  nonlocal energy, bilinear form and operator;
* :mod:`anisochill.potential` -- the logarithmic double well, its convex
  split and Lipschitz regularization;
* :mod:`anisochill.stepper` -- the implicit minimizing-movement time
  discretization with per-step energy audits;
* :mod:`anisochill.local_ref` -- the anisotropic local reference solver;
* :mod:`anisochill.harness` -- experiments (moment tables, energy
  convergence, trajectories, the eps sweep, interpolation-constant
  probes) and the ``anisochill`` command line tool.
"""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    ConfigError,
    ConvergenceFailure,
    NumericsError,
    StepFailure,
)
from .fields import (
    Grid,
    ScalarField,
    VectorField,
    hminus1_norm,
    load_field,
    mean,
    neumann_divergence,
    neumann_solve,
    save_field,
    transport_divergence,
)
from .kernels import (
    KernelFamily,
    KernelSpec,
    Mollifier,
    MomentReport,
    check_assumptions,
    eval_kernel,
    limit_matrix,
    second_moment,
)
from .local_ref import (
    LocalForm,
    LocalModel,
    local_anisotropy_from_moments,
    local_energy,
    local_simulate,
    local_step,
)
from .nonlocal_form import NonlocalForm, assemble, bilinear, energy, gamma_energy_table
from .nonlocal_form import apply as apply_form
from .potential import (
    PotentialSpec,
    f0_lambda,
    f0_prime,
    f_lambda,
    f_lambda_energy,
    f_value,
    g_lambda,
)
from .stepper import (
    SchemeConfig,
    SchemeState,
    SolverKind,
    StepReport,
    mobility_constant,
    mobility_linear,
    n_operator_probe,
    objective,
    objective_gradient,
    simulate,
    step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
