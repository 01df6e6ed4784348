"""Dual connections, curvature diagnostics and α-parallel priors on statistical manifolds."""
from .curvature import CurvatureAtPoint, constant_curvature_fit, riemann
from .diagnostics import DiagnosticReport, Sampling, recover_recurrent_one_form, run_suite
from .expr import DomainError, ParseError, ScalarField, diff, eval_jet2, parse
from .families import (
    RiemannianSpec,
    alpha_conformal,
    euclidean,
    exponential_family_from_potential,
    normal_family,
    random_spec,
    recurrent_from,
    sphere_chart,
)
from .manifold import (
    ManifoldSpec,
    dumps_manifold,
    geometry_at,
    load_manifold,
    loads_manifold,
    sample_points,
    validate,
)
from .prior import NotEquiaffineError, parallel_volume, path_independence_probe
from .tensor import Tensor

__version__ = "0.1.0"
