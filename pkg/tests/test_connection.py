import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatcw import (Connection, GaugeField, GridForm, InvalidDirection, InvalidGaugeField, NonCommutingError,
                    TorusGrid, su2, u)
from flatcw.connection import (FLAT_TOL, adjoint_form, cartan_flat, covariant_derivative, curvature,
                               flatness_residual, gauge_transform, pure_gauge, random_connection,
                               random_gauge_field, random_tangent, winding_gauge, winding_numbers)
from flatcw.forms import wedge

TWO_PI = 2 * np.pi
seeds = st.integers(0, 2**32 - 1)
B1, B2, B3 = np.eye(3)


def test_curvature_example():
    g = TorusGrid(2, 16)
    x, _ = g.coords()
    s = np.sin(TWO_PI * x)
    A = Connection.from_components(g, su2(), {0: B1, 1: B2[:, None, None] * s})
    F = curvature(A)
    expect = TWO_PI * np.cos(TWO_PI * x) * B2[:, None, None] + s * B3[:, None, None]
    assert np.abs(F.data[0] - expect).max() <= 1e-10


def test_constant_curvature_is_bracket():
    g = TorusGrid(3, 8)
    A = Connection.from_components(g, su2(), {0: B1, 1: B2})
    F = curvature(A)
    assert np.abs(F.component((0, 1)) - B3[:, None, None, None]).max() <= 1e-15
    assert np.abs(F.component((0, 2))).max() == 0 and np.abs(F.component((1, 2))).max() == 0


@pytest.mark.parametrize("alg", [su2(), u(2)], ids=lambda a: a.name)
def test_bianchi(alg, rng):
    g = TorusGrid(3, 16)
    A = random_connection(g, alg, rng, max_mode=1)
    assert covariant_derivative(A, curvature(A)).max_norm() <= 1e-9


@settings(max_examples=10)
@given(seed=seeds)
def test_curvature_variation(seed):
    rng = np.random.default_rng(seed)
    g = TorusGrid(3, 8)
    A = random_connection(g, su2(), rng, max_mode=1)
    xi = random_tangent(g, su2(), rng, max_mode=1)
    t = 1e-4
    fd = (curvature(A + xi * t) - curvature(A - xi * t)) * (1 / (2 * t))
    assert (fd - covariant_derivative(A, xi)).max_norm() <= 1e-6


@pytest.mark.parametrize("alg", [su2(), u(2)], ids=lambda a: a.name)
def test_gauge_covariance_of_curvature(alg, rng):
    g = TorusGrid(3, 32)
    A = random_connection(g, alg, rng, max_mode=1)
    phi = random_gauge_field(g, alg, rng)
    lhs = curvature(gauge_transform(phi, A))
    assert (lhs - adjoint_form(phi, curvature(A))).max_norm() <= 1e-8


def test_gauge_composition(rng):
    g = TorusGrid(2, 32)
    alg = u(2)
    A = random_connection(g, alg, rng, max_mode=1)
    phi, psi = random_gauge_field(g, alg, rng), random_gauge_field(g, alg, rng)
    two = gauge_transform(phi, gauge_transform(psi, A))
    one = gauge_transform(phi @ psi, A)
    assert (two.form - one.form).max_norm() <= 1e-8
    ident = gauge_transform(GaugeField.identity(g, alg), A)
    assert (ident.form - A.form).max_norm() <= 1e-14


def test_pure_gauge_is_flat(rng):
    g = TorusGrid(3, 32)
    A = pure_gauge(random_gauge_field(g, su2(), rng))
    assert A.form.max_norm() > 0.1
    assert flatness_residual(A) <= FLAT_TOL


def test_flatness_residual_detects_curvature():
    g = TorusGrid(2, 8)
    A = Connection.from_components(g, su2(), {0: B1, 1: B2})
    assert flatness_residual(A) == pytest.approx(1.0)


def test_cartan_flat():
    g = TorusGrid(3, 8)
    alg = u(2)
    A = cartan_flat(g, alg, [np.array([0.3, -0.1, 0, 0]), np.array([1.0, 2.0, 0, 0]), np.zeros(4)])
    assert flatness_residual(A) == 0.0
    with pytest.raises(NonCommutingError) as info:
        cartan_flat(TorusGrid(2, 8), su2(), [B1, B2])
    assert info.value.pair == (0, 1)


def test_winding_gauge():
    g = TorusGrid(3, 32)
    alg = u(2)
    H = TWO_PI * np.array([1.0, 0, 0, 0])
    phi = winding_gauge(g, alg, [2, -1, 0], H)
    assert np.allclose(winding_numbers(phi, H), [2, -1, 0], atol=1e-10)
    A = pure_gauge(phi)
    assert flatness_residual(A) <= FLAT_TOL
    # a constant winding pure gauge is -w_i H dx^i
    assert np.allclose(A.form.component((0,))[..., 0, 0, 0], -2 * H, atol=1e-10)
    with pytest.raises(InvalidDirection):
        winding_gauge(g, alg, [1, 0, 0], np.array([1.0, 0, 0, 0]))


def test_invalid_gauge_fields():
    g = TorusGrid(1, 8)
    with pytest.raises(InvalidGaugeField):
        GaugeField(g, su2(), np.tile(2 * np.eye(2), (8, 1, 1)))
    mats = np.tile(np.eye(2, dtype=complex), (8, 1, 1))
    mats[3] = np.array([[0, 1], [1, 0]])
    with pytest.raises(InvalidGaugeField):
        GaugeField(g, su2(), mats).validate()


def test_adjoint_form_on_two_forms(rng):
    g = TorusGrid(2, 8)
    alg = su2()
    phi = random_gauge_field(g, alg, rng)
    a = random_tangent(g, alg, rng, max_mode=1)
    b = random_tangent(g, alg, rng, max_mode=1)
    lhs = adjoint_form(phi, wedge(a, b, "bracket"))
    rhs = wedge(adjoint_form(phi, a), adjoint_form(phi, b), "bracket")
    assert (lhs - rhs).max_norm() <= 1e-12
    assert isinstance(lhs, GridForm) and lhs.degree == 2
