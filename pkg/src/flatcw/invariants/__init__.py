"""Secondary characteristic forms of families of flat connections."""

from .core import *  # noqa: F401,F403
from .core import __all__ as _core_all
from .families import (CartanLoop, ConcatenatedLoop, Cone, ConnectionFamily, ConstantLoop, CustomFamily,
                       GaugedFamily, GaugedLoop, GaugeLoop, Loop, Perturbed, Reparametrized, StraightLine,
                       Tabulated, bump_perturbation, cubic_reparametrization, quaternion_gauge_loop,
                       winding_gauge_loop)
from .quadrature import ParameterDomain, definite_integral, gauss_legendre, trapezoid_periodic

__all__ = list(_core_all) + [
    "CartanLoop", "ConcatenatedLoop", "Cone", "ConnectionFamily", "ConstantLoop", "CustomFamily",
    "GaugedFamily", "GaugedLoop", "GaugeLoop", "Loop", "Perturbed", "Reparametrized", "StraightLine",
    "Tabulated", "bump_perturbation", "cubic_reparametrization", "quaternion_gauge_loop",
    "winding_gauge_loop", "ParameterDomain", "definite_integral", "gauss_legendre", "trapezoid_periodic",
]
