"""Discrete geometry of rotationally symmetric hypersurfaces.

The ambient space form of curvature ``c`` is written in geodesic polar
coordinates about a centre ``o``,

    g = d rho^2 + sn(rho)^2 (d theta^2 + sin^2 theta g_{S^{n-1}}),

and the hypersurface is the radial graph ``rho = u(theta)``, ``0 <= theta <= pi``,
invariant under rotations fixing the axis ``theta in {0, pi}``.  For ``n = 1``
the same formulas describe a closed curve symmetric under reflection in the
axis.  With ``s = sn(u)``, ``s' = cs(u)`` and ``W = sqrt(s^2 + u_theta^2)``:

* profile curvature     ``k1 = (s^2 s' + 2 s' u_theta^2 - s u_thetatheta) / W^3``
* rotational curvature  ``k2 = (s' - u_theta cot(theta) / s) / W``  (multiplicity n-1)
* line element          ``ds = W d theta``, orbit radius ``R = s sin(theta)``.

Samples live on the uniform grid ``theta_j = j pi / N``.  Derivatives are
centred differences of order 2 or 4 with even reflection across the poles;
at the poles ``u_theta cot(theta) -> u_thetatheta`` and the same limit is used in
the Laplacian.  Both ``|∇h|^2`` and ``|∇h̊|^2`` are assembled in the frame
``(e_s, e_a)``: the components ``h_{11,1} = k1_s``, ``h_{aa,1} = k2_s`` and the
rotational component ``h_{1a,a} = (k1 - k2) R_s / R``, which is evaluated
directly rather than through the Codazzi equation so the gradient estimates
remain a non-trivial discrete check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exact import cs, sn

__all__ = [
    "PRODUCTION_GRID",
    "theta_grid",
    "d1",
    "d2",
    "sphere_area",
    "rotational_weights",
    "CurvatureFields",
    "profile_fields",
    "umbilical_fields",
    "radial_speed",
]


def theta_grid(N: int) -> np.ndarray:
    return np.linspace(0.0, math.pi, N + 1)


ORDERS = (2, 4)
# resolution at which static quadrature and gradient checks are reported
PRODUCTION_GRID = 512


def _pad_even(f: np.ndarray, g: int) -> np.ndarray:
    return np.concatenate([f[g:0:-1], f, f[-2 : -2 - g : -1]])


def _check_order(order: int) -> int:
    if order not in ORDERS:
        raise ValueError(f"stencil order must be one of {ORDERS}, got {order}")
    return order


def d1(f: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    """Centred first difference of an even-symmetric node field."""
    if _check_order(order) == 2:
        fe = _pad_even(f, 1)
        return (fe[2:] - fe[:-2]) / (2.0 * h)
    fe = _pad_even(f, 2)
    return (-fe[4:] + 8.0 * fe[3:-1] - 8.0 * fe[1:-3] + fe[:-4]) / (12.0 * h)


def d2(f: np.ndarray, h: float, order: int = 4) -> np.ndarray:
    if _check_order(order) == 2:
        fe = _pad_even(f, 1)
        return (fe[2:] - 2.0 * f + fe[:-2]) / (h * h)
    fe = _pad_even(f, 2)
    return (-fe[4:] + 16.0 * fe[3:-1] - 30.0 * f + 16.0 * fe[1:-3] - fe[:-4]) / (12.0 * h * h)


def sphere_area(m: int) -> float:
    """Volume of the unit sphere S^m (``|S^0| = 2``)."""
    return 2.0 * math.pi ** ((m + 1) / 2) / math.gamma((m + 1) / 2)


@lru_cache(maxsize=64)
def _weights_cached(N: int, m: int, order: int) -> np.ndarray:
    # integrate the piecewise-linear (order 2) or piecewise-quadratic (order 4)
    # interpolant of F against sin^m exactly, panel by panel
    x, w = np.polynomial.legendre.leggauss(16)
    theta = theta_grid(N)
    h = theta[1] - theta[0]
    out = np.zeros(N + 1)
    if order == 2:
        left = theta[:-1]
        pts = left[:, None] + 0.5 * h * (x[None, :] + 1.0)
        wt = 0.5 * h * w[None, :] * np.sin(pts) ** m
        frac = (pts - left[:, None]) / h
        out[:-1] += np.sum(wt * (1.0 - frac), axis=1)
        out[1:] += np.sum(wt * frac, axis=1)
    else:
        left = theta[:-1:2]
        pts = left[:, None] + h * (x[None, :] + 1.0)
        wt = h * w[None, :] * np.sin(pts) ** m
        z = (pts - left[:, None]) / h
        out[:-1:2] += np.sum(wt * 0.5 * (z - 1.0) * (z - 2.0), axis=1)
        out[1::2] += np.sum(wt * z * (2.0 - z), axis=1)
        out[2::2] += np.sum(wt * 0.5 * z * (z - 1.0), axis=1)
    out.setflags(write=False)
    return out


def rotational_weights(N: int, n: int, order: int = 4) -> np.ndarray:
    """Weights ``w_j`` with ``sum_j w_j F(theta_j) ~ int_0^pi F sin^{n-1} d theta``.

    The weight ``sin^{n-1}`` is integrated exactly against a piecewise
    polynomial interpolant of ``F`` (product trapezoid for order 2, product
    Simpson for order 4, which needs even ``N``).  Any ``F`` constant in
    ``theta`` integrates to rounding error.
    """
    _check_order(order)
    if order == 4 and N % 2:
        raise ValueError("order-4 quadrature needs an even number of intervals")
    return _weights_cached(int(N), int(n) - 1, int(order))


@dataclass(frozen=True)
class CurvatureFields:
    """Per-node curvature data plus the operators needed by the monitors.

    ``dmu`` holds quadrature weights of the volume measure (they sum to the
    volume).  In umbilical mode every array has length one.
    """

    c: int
    n: int
    k1: np.ndarray
    k2: np.ndarray
    H: np.ndarray
    hsq: np.ndarray
    ring_sq: np.ndarray
    grad_h_sq: np.ndarray
    grad_H_sq: np.ndarray
    grad_ring_sq: np.ndarray
    dmu: np.ndarray
    theta: np.ndarray | None = None
    u: np.ndarray | None = None
    W: np.ndarray | None = None
    dlogR: np.ndarray | None = None  # R_theta / R, pole entries unused
    dtheta: float | None = None
    order: int = 4

    @property
    def Hsq(self) -> np.ndarray:
        return self.H**2

    @property
    def volume(self) -> float:
        return float(np.sum(self.dmu))

    def integrate(self, f) -> float:
        return float(np.sum(np.asarray(f, dtype=float) * self.dmu))

    def derivative_s(self, f: np.ndarray) -> np.ndarray:
        """Arc-length derivative ``f_theta / W`` of an even node field."""
        if self.theta is None:
            return np.zeros_like(f)
        return d1(f, self.dtheta, self.order) / self.W

    def grad_sq(self, f: np.ndarray) -> np.ndarray:
        return self.derivative_s(f) ** 2

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Laplace-Beltrami of a rotationally symmetric node field."""
        if self.theta is None:
            return np.zeros_like(np.asarray(f, dtype=float))
        h = self.dtheta
        f = np.asarray(f, dtype=float)
        ft = d1(f, h, self.order)
        ftt = d2(f, h, self.order)
        W = self.W
        Wt = d1(W, h, self.order)
        out = ftt / W**2 - ft * Wt / W**3
        if self.n > 1:
            rot = self.dlogR * ft
            rot[0] = ftt[0]
            rot[-1] = ftt[-1]
            out = out + (self.n - 1) * rot / W**2
        return out


def profile_fields(u: np.ndarray, c: int, n: int, order: int = 4) -> CurvatureFields:
    u = np.asarray(u, dtype=float)
    N = u.size - 1
    theta = theta_grid(N)
    h = theta[1] - theta[0]
    s = sn(c, u)
    sp = cs(c, u)
    ut = d1(u, h, order)
    utt = d2(u, h, order)
    W = np.sqrt(s * s + ut * ut)
    k1 = (s * s * sp + 2.0 * sp * ut * ut - s * utt) / W**3

    sin_t = np.sin(theta)
    cot_t = np.zeros_like(theta)
    cot_t[1:-1] = np.cos(theta[1:-1]) / sin_t[1:-1]
    ut_cot = ut * cot_t
    ut_cot[0] = utt[0]
    ut_cot[-1] = utt[-1]
    dlogR = sp * ut / s + cot_t

    if n > 1:
        k2 = (sp - ut_cot / s) / W
    else:
        k2 = np.zeros_like(k1)
    H = k1 + (n - 1) * k2
    hsq = k1 * k1 + (n - 1) * k2 * k2
    ring_sq = (n - 1) / n * (k1 - k2) ** 2

    k1s = d1(k1, h, order) / W
    if n > 1:
        k2s = d1(k2, h, order) / W
        mixed = (k1 - k2) * dlogR / W
        mixed[0] = 0.0
        mixed[-1] = 0.0
    else:
        k2s = np.zeros_like(k1)
        mixed = np.zeros_like(k1)
    Hs = d1(H, h, order) / W
    r1s = d1(k1 - H / n, h, order) / W
    r2s = d1(k2 - H / n, h, order) / W
    grad_h_sq = k1s**2 + (n - 1) * (k2s**2 + 2.0 * mixed**2)
    grad_ring_sq = r1s**2 + (n - 1) * (r2s**2 + 2.0 * mixed**2)

    dmu = sphere_area(n - 1) * rotational_weights(N, n, order) * s ** (n - 1) * W
    return CurvatureFields(
        c=c,
        n=n,
        k1=k1,
        k2=k2,
        H=H,
        hsq=hsq,
        ring_sq=ring_sq,
        grad_h_sq=grad_h_sq,
        grad_H_sq=Hs**2,
        grad_ring_sq=grad_ring_sq,
        dmu=dmu,
        theta=theta,
        u=u,
        W=W,
        dlogR=dlogR,
        dtheta=h,
        order=order,
    )


def radial_speed(u: np.ndarray, c: int, n: int, order: int = 4) -> np.ndarray:
    """``u_t = -H W / s``: the radial speed whose normal part is ``-H``."""
    N = u.size - 1
    theta = theta_grid(N)
    h = theta[1] - theta[0]
    s = sn(c, u)
    sp = cs(c, u)
    ut = d1(u, h, order)
    utt = d2(u, h, order)
    W2 = s * s + ut * ut
    H = (s * s * sp + 2.0 * sp * ut * ut - s * utt) / W2
    if n > 1:
        ut_cot = np.empty_like(u)
        ut_cot[1:-1] = ut[1:-1] * np.cos(theta[1:-1]) / np.sin(theta[1:-1])
        ut_cot[0] = utt[0]
        ut_cot[-1] = utt[-1]
        H = H + (n - 1) * (sp - ut_cot / s)
    # H above is already multiplied by W
    return -H / s


def umbilical_fields(r: float, c: int, n: int) -> CurvatureFields:
    lam = float(cs(c, r) / sn(c, r))
    one = np.ones(1)
    zero = np.zeros(1)
    vol = sphere_area(n) * float(sn(c, r)) ** n
    return CurvatureFields(
        c=c,
        n=n,
        k1=lam * one,
        k2=lam * one,
        H=n * lam * one,
        hsq=n * lam * lam * one,
        ring_sq=zero.copy(),
        grad_h_sq=zero.copy(),
        grad_H_sq=zero.copy(),
        grad_ring_sq=zero.copy(),
        dmu=vol * one,
    )
