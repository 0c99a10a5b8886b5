import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from ancientflow.geometry import (
    d1,
    d2,
    profile_fields,
    radial_speed,
    rotational_weights,
    sphere_area,
    theta_grid,
    umbilical_fields,
)


def ellipsoid_profile(N, a=1.0, axis=1.2):
    th = theta_grid(N)
    return 1.0 / np.sqrt(np.cos(th) ** 2 / axis**2 + np.sin(th) ** 2 / a**2)


def ellipsoid_curvatures(theta, a=1.0, axis=1.2):
    """Principal curvatures of the ellipsoid of revolution at polar angle ``theta``."""
    phi = np.arctan2(axis * np.sin(theta), a * np.cos(theta))
    q = a**2 * np.cos(phi) ** 2 + axis**2 * np.sin(phi) ** 2
    return a * axis / q**1.5, axis / (a * np.sqrt(q))


def fitted_order(hs, errs):
    return np.polyfit(np.log(hs), np.log(errs), 1)[0]


@pytest.mark.parametrize("order", [2, 4])
def test_difference_stencils_converge(order):
    e1, e2, hs = [], [], []
    for N in (32, 64, 128):
        th = theta_grid(N)
        h = th[1] - th[0]
        f = np.exp(np.cos(th))
        e1.append(np.max(np.abs(d1(f, h, order) + np.sin(th) * f)))
        e2.append(np.max(np.abs(d2(f, h, order) - (np.sin(th) ** 2 - np.cos(th)) * f)))
        hs.append(h)
    assert fitted_order(hs, e1) > order - 0.3
    assert fitted_order(hs, e2) > order - 0.3


def test_sphere_area():
    assert sphere_area(0) == pytest.approx(2.0)
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert sphere_area(3) == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("order", [2, 4])
def test_weights_integrate_constants_exactly(n, order):
    w = rotational_weights(64, n, order)
    exact = quad(lambda t: math.sin(t) ** (n - 1), 0, math.pi, epsabs=1e-15)[0]
    assert np.sum(w) == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("n", [2, 3])
def test_simpson_weights_fourth_order(n):
    f = lambda t: np.exp(np.cos(t)) * np.cos(3 * t) ** 2
    exact = quad(lambda t: f(t) * math.sin(t) ** (n - 1), 0, math.pi, epsabs=1e-14)[0]
    errs, hs = [], []
    for N in (16, 32, 64):
        errs.append(abs(np.sum(rotational_weights(N, n, 4) * f(theta_grid(N))) - exact))
        hs.append(math.pi / N)
    assert fitted_order(hs, errs) > 3.7


def test_weights_reject_odd_grid_and_bad_order():
    with pytest.raises(ValueError):
        rotational_weights(33, 2, 4)
    with pytest.raises(ValueError):
        rotational_weights(32, 2, 3)
    assert not rotational_weights(32, 2).flags.writeable


@pytest.mark.parametrize("c,r", [(0, 1.3), (1, 0.9), (1, math.pi / 2), (-1, 0.7)])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_round_profiles_are_umbilic(c, r, n):
    F = profile_fields(np.full(65, r), c, n)
    s = {0: r, 1: math.sin(r), -1: math.sinh(r)}[c]
    cs = {0: 1.0, 1: math.cos(r), -1: math.cosh(r)}[c]
    assert np.allclose(F.k1, cs / s, atol=1e-12)
    if n > 1:
        assert np.allclose(F.k2, cs / s, atol=1e-12)
        assert np.max(np.abs(F.ring_sq)) <= 1e-24 + 1e-12 * np.max(F.hsq)
    assert F.volume == pytest.approx(sphere_area(n) * s**n, rel=1e-13)
    U = umbilical_fields(r, c, n)
    assert U.volume == pytest.approx(F.volume, rel=1e-13)


def test_ellipsoid_curvatures_fourth_order():
    errs, hs = [], []
    for N in (64, 128, 256):
        F = profile_fields(ellipsoid_profile(N), 0, 2)
        k1, k2 = ellipsoid_curvatures(F.theta)
        errs.append(max(np.max(np.abs(F.k1 - k1)), np.max(np.abs(F.k2 - k2))))
        hs.append(F.dtheta)
    assert errs[-1] < 1e-7
    assert fitted_order(hs, errs) > 3.5


def test_ellipsoid_integrals_against_quadrature():
    a, axis = 1.0, 1.2

    def integrand(phi, g):
        r, z = a * np.sin(phi), axis * np.cos(phi)
        ds = math.hypot(a * np.cos(phi), axis * np.sin(phi))
        q = a**2 * np.cos(phi) ** 2 + axis**2 * np.sin(phi) ** 2
        k1, k2 = a * axis / q**1.5, axis / (a * math.sqrt(q))
        return 2 * math.pi * r * ds * g(k1, k2)

    area = quad(integrand, 0, math.pi, args=(lambda k1, k2: 1.0,), epsabs=1e-14)[0]
    I = quad(integrand, 0, math.pi, args=(lambda k1, k2: 0.5 * (k1 - k2) ** 2,), epsabs=1e-14)[0]
    F = profile_fields(ellipsoid_profile(512, a, axis), 0, 2)
    assert F.volume == pytest.approx(area, rel=1e-10)
    assert F.integrate(F.ring_sq) == pytest.approx(I, rel=1e-8)


@pytest.mark.parametrize("n", [2, 3])
def test_laplacian_of_first_harmonic(n):
    r = 1.7
    F = profile_fields(np.full(129, r), 0, n)
    f = np.cos(F.theta)
    assert np.max(np.abs(F.laplacian(f) + n / r**2 * f)) < 1e-6
    assert np.max(np.abs(F.derivative_s(f) + np.sin(F.theta) / r)) < 1e-7


def test_codazzi_holds_for_the_direct_mixed_term():
    # h_{1a,a} evaluated directly agrees with the derivative of k2; the node
    # next to a pole loses one order through the 1/theta factor
    errs, med, hs = [], [], []
    for N in (128, 256, 512):
        F = profile_fields(ellipsoid_profile(N), 0, 2)
        inner = slice(1, -1)
        mixed = (F.k1 - F.k2) * F.dlogR / F.W
        k2s = F.derivative_s(F.k2)
        diff = np.abs(mixed[inner] - k2s[inner])
        errs.append(np.max(diff))
        med.append(np.median(diff))
        hs.append(F.dtheta)
    assert errs[-1] < 1e-6
    assert fitted_order(hs, errs) > 2.8
    assert fitted_order(hs, med) > 3.7


@given(st.floats(0.3, 3.0), st.floats(0.5, 2.0))
def test_gradient_identity(a, axis):
    F = profile_fields(ellipsoid_profile(64, a, axis), 0, 3)
    lhs = F.grad_ring_sq
    rhs = F.grad_h_sq - F.grad_H_sq / 3
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(F.grad_h_sq))


@pytest.mark.parametrize("c", [0, 1])
def test_radial_speed_normal_part(c):
    u = ellipsoid_profile(128, 1.0, 1.2) * (0.8 if c else 1.0)
    F = profile_fields(u, c, 2)
    s = np.sin(u) if c else u
    assert np.allclose(radial_speed(u, c, 2), -F.H * F.W / s, rtol=1e-12, atol=1e-12)


def test_umbilical_fields():
    U = umbilical_fields(0.5, 1, 3)
    lam = 1 / math.tan(0.5)
    assert U.H[0] == pytest.approx(3 * lam)
    assert U.hsq[0] == pytest.approx(3 * lam * lam)
    assert U.laplacian(U.H)[0] == 0.0
