"""flatcw: Chern-Weil type invariants of families of flat connections on flat tori."""

from .errors import *  # noqa: F401,F403
from .errors import __all__ as _errors_all
from .lie import (ALGEBRAS, InvariantPolynomial, LieAlgebraBasis, POLYNOMIAL_PRESETS, adjoint,
                  algebra_by_name, bracket, build_trace_polynomial, gl, polynomial_eval,
                  preset_polynomial, su2, su2_inner_product, u)
from .forms import (GridForm, PeriodVector, TorusGrid, exterior_derivative, integrate,
                    is_closed, closure_residual, load_form, period_vector, poly_wedge, save_form,
                    wedge)
from .connection import (Connection, GaugeField, cartan_flat, covariant_derivative, curvature,
                         flatness_residual, gauge_transform, pure_gauge, winding_gauge,
                         winding_numbers)

__version__ = "0.1.0"

__all__ = list(_errors_all) + [
    "ALGEBRAS", "InvariantPolynomial", "LieAlgebraBasis", "POLYNOMIAL_PRESETS", "adjoint",
    "algebra_by_name", "bracket", "build_trace_polynomial", "gl", "polynomial_eval",
    "preset_polynomial", "su2", "su2_inner_product", "u",
    "GridForm", "PeriodVector", "TorusGrid", "exterior_derivative", "integrate", "is_closed",
    "closure_residual", "load_form", "period_vector", "poly_wedge", "save_form", "wedge",
    "Connection", "GaugeField", "cartan_flat", "covariant_derivative", "curvature",
    "flatness_residual", "gauge_transform", "pure_gauge", "winding_gauge", "winding_numbers",
]
