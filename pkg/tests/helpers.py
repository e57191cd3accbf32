"""Shared families for the invariant tests."""

import numpy as np

from flatcw import TorusGrid, preset_polynomial, su2, u
from flatcw.connection import cartan_flat, gauge_transform, winding_gauge
from flatcw.invariants import CartanLoop, Cone, GaugedLoop, ParameterDomain, StraightLine, winding_gauge_loop

FOUR_PI_B3 = np.array([0, 0, 4 * np.pi])


def su2_line(N=16, w=(1, 0, 0)):
    """Straight line between two flat su(2) connections on T^3 with a non-constant difference."""
    g, a = TorusGrid(3, N), su2()
    v = np.array([0.2, -0.5, 0.3])
    A0 = cartan_flat(g, a, [0.6 * v, -0.4 * v, 1.1 * v])
    base = cartan_flat(g, a, [[0.3, 0.1, 0], [0.6, 0.2, 0], [-0.3, -0.1, 0]])
    A1 = gauge_transform(winding_gauge(g, a, list(w), FOUR_PI_B3), base)
    return StraightLine(A0, A1)


def diag(x, y):
    return np.array([x, y, 0, 0.0])


CARTAN_THETAS = [diag(0.7, -0.3), diag(0.2, 0.5), diag(-0.4, 0.1), diag(0.3, 0.9)]
Y = np.array([0, 0, 0, -1.0])
Z = np.array([1, 1, 0, 0.0])
H1 = np.pi * np.array([1, 1, 0, 1.0])
H2 = np.pi * np.array([1, 1, 1, 0.0])


def u2_apex(N=8):
    g, a = TorusGrid(4, N), u(2)
    return gauge_transform(winding_gauge(g, a, [0, 1, 0, 1], H2),
                           cartan_flat(g, a, [diag(0.1, 0.3) * i for i in range(1, 5)]))


def cartan_loop(N=8, thetas=CARTAN_THETAS, central=(0.5, -0.3, 0.2, 0.4)):
    return CartanLoop(TorusGrid(4, N), u(2), thetas, Y, central=list(central), Z=Z)


def gauged_cone(N=8, w=(1, 0, 0, 1)):
    """Cone over a gauged Cartan loop of flat u(2) connections on T^4; Lambda_2 is pointwise nonzero."""
    g = TorusGrid(4, N)
    loop = GaugedLoop(cartan_loop(N), winding_gauge_loop(g, u(2), list(w), H1))
    return Cone(u2_apex(N), loop)


def cone_domain():
    return ParameterDomain.cylinder(4, 8)


def p2p1(integral=True):
    return preset_polynomial("u2_p2p1", u(2), integral=integral)
