"""Numerical laboratory for the holonomy of small loops.

Exact holonomy by a Lie-group integrator, gauge-free Taylor expansions of
curvature, selector-modified expansions on sub-Riemannian model spaces and
dilation sweeps that measure convergence orders.
"""

from .errors import (CapabilityError, ChartDomainError, ConfigError, HolonomyLabError,
                     InputError, InsufficientDataError, LogDomainError, PreconditionError,
                     SeriesRadiusWarning)
from .expansion import (ExpansionFunctional, ExpansionTerm, MultiIndex, euclidean_F3,
                        heisenberg_q_functional, homogeneous_component, model_F5,
                        selector_modify, selector_residual, taylor_functional)
from .experiment import (ConvergenceReport, SweepConfig, emit_report, fit_order, load_config,
                         run_sweep)
from .freelie import free_lie_layer_dim, free_nilpotent_rank
from .gauge import (CurvatureField, GaugeConnection, MatrixPolynomial, abelian_constant_curvature,
                    covariant_derivative, curvature_at, gauge_transform, random_gauge,
                    random_polynomial_connection, su2_example, zero_connection)
from .holonomy import HolonomyResult, holonomy, radial_transport_path
from .liegroup import (AlgebraPath, MatrixLieAlgebra, dexpinv_apply, mat_exp, mat_log,
                       picard_bound, picard_defect, picard_epsilon, solve_transport, su2)
from .loops import (DilationStructure, circle, dilate_loop, figure_eight, length, lissajous,
                    moment_integral, moment_table, polygon)
from .models import (ModelSpace, horizontal_lift, make_euclidean, make_heisenberg, make_hopf,
                     make_normal_coordinates, resolve_model)

__version__ = "0.1.0"
