"""Scalar auxiliary functions and pinching constants.

Ratio functionals ``f`` monitored along the flow, the rational function ``G``
whose supremum controls the codimension >= 2 sphere case, the profile
``phi(x) = x (1 - n^2/x)^(2+eps)`` used in hyperbolic space together with its
reparametrization ``psi`` and log-supremum ``theta``, and the threshold table.

Constants that are rational are returned as ``Fraction``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError
from .tensor_core import xi_constants

__all__ = [
    "SphereCodim1Profile",
    "GParams",
    "PhiParams",
    "ThresholdTable",
    "f_ratio",
    "G",
    "G_quadratic_coeffs",
    "G_sup_y",
    "G_sup_y_vertex",
    "G_cubic_coeffs",
    "certify_G_negative",
    "phi",
    "phi_prime",
    "phi_double_prime",
    "phi_log_derivative_identity",
    "phi_combination_bound",
    "psi",
    "psi_sup",
    "psi_argmax",
    "theta",
    "theta_prime",
    "theta_double_prime",
    "thresholds",
    "RATIO_KINDS",
]


@dataclass(frozen=True)
class SphereCodim1Profile:
    """Constants for the hypersurface-in-sphere ratio ``|h̊|^2 / (gamma|H|^2 + a)``."""

    n: int
    a: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise DomainError("profile needs n >= 2")
        if not 0.0 < self.a < self.n:
            raise DomainError(f"need 0 < a < n, got a={self.a}")

    @property
    def gamma(self) -> Fraction:
        return Fraction(2 * (self.n - 1), self.n * (self.n + 2))

    @property
    def k(self) -> Fraction:
        g = self.gamma
        return min(g, 2 * g - Fraction(1, self.n))

    @property
    def delta(self) -> float:
        return self.n - self.a


@dataclass(frozen=True)
class GParams:
    b: float
    xi: float

    def __post_init__(self) -> None:
        if self.b <= 0 or self.xi <= 0:
            raise DomainError("b and xi must be positive")

    @property
    def admissible(self) -> bool:
        """``1/2 <= xi < 1/b - 1``."""
        return 0.5 <= self.xi < 1.0 / self.b - 1.0


@dataclass(frozen=True)
class PhiParams:
    n: int
    eps: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError("n must be positive")
        if self.eps <= 0:
            raise DomainError("eps must be positive")


# ---------------------------------------------------------------------------
# ratio functionals

RATIO_KINDS = ("sphere_codim1", "sphere_shifted", "sphere_ring", "hyperbolic", "scale_invariant")


def _ratio_denominator(Hsq, kind: str, *, n: int, a=None, b=None, eps=None):
    Hsq = np.asarray(Hsq, dtype=float)
    if kind == "sphere_codim1":
        gamma = 2.0 * (n - 1) / (n * (n + 2))
        return gamma * Hsq + a
    if kind == "sphere_shifted":
        return Hsq + 2.0 * b * n**2
    if kind == "sphere_ring":
        return Hsq + (5.0 / 3.0) * n**2
    if kind == "hyperbolic":
        return phi(Hsq, PhiParams(n, eps))
    if kind == "scale_invariant":
        return Hsq
    raise ValueError(f"unknown ratio kind {kind!r}; expected one of {RATIO_KINDS}")


def f_ratio(ring_sq, Hsq, kind: str, *, n: int, a=None, b=None, eps=None):
    """Ratio ``|h̊|^2 / D(|H|^2)`` for the chosen profile.

    ``sphere_codim1``: ``D = gamma|H|^2 + a`` with ``gamma = 2(n-1)/(n(n+2))``;
    ``sphere_shifted``: ``D = |H|^2 + 2 b n^2``; ``sphere_ring``: ``D = |H|^2 + (5/3) n^2``;
    ``hyperbolic``: ``D = phi(|H|^2)``, defined only for ``|H|^2 > n^2``;
    ``scale_invariant``: ``D = |H|^2``.
    """
    den = _ratio_denominator(Hsq, kind, n=n, a=a, b=b, eps=eps)
    if np.any(den <= 0):
        raise DomainError(f"non-positive denominator in {kind} ratio")
    out = np.asarray(ring_sq, dtype=float) / den
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# the function G


def G(x, y, params: GParams):
    b, xi = params.b, params.xi
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (
        (2 * b * (4.0 / 3.0 * x + b) + x * (y - 1)) / (x + 2 * b)
        - (x * y + y**2 / xi) / (x / 3.0 + b)
        + 2 * y
        - 1
    )


def G_quadratic_coeffs(x, params: GParams):
    """``(c0, c1, c2)`` with ``G(x, y) = c0 + c1 y - c2 y^2``."""
    b, xi = params.b, params.xi
    x = np.asarray(x, dtype=float)
    c0 = (2 * b * (4.0 / 3.0 * x + b) - x) / (x + 2 * b) - 1
    c1 = b * (7 * x + 12 * b) / ((x + 2 * b) * (x + 3 * b))
    c2 = 3.0 / (xi * (x + 3 * b))
    return c0, c1, c2


def G_sup_y_vertex(x, params: GParams):
    """``sup_y G(x, y)`` as ``c0 + xi/(12(x+3b)) [b(7x+12b)/(x+2b)]^2``."""
    b, xi = params.b, params.xi
    x = np.asarray(x, dtype=float)
    c0 = (2 * b * (4.0 / 3.0 * x + b) - x) / (x + 2 * b) - 1
    return c0 + xi / (12 * (x + 3 * b)) * (b * (7 * x + 12 * b) / (x + 2 * b)) ** 2


def G_cubic_coeffs(params: GParams) -> tuple[float, float, float, float]:
    """Coefficients of ``1, x, x^2, x^3`` in the numerator of ``sup_y G``."""
    b, xi = params.b, params.xi
    return (
        144 * b**3 * (b * xi + b - 1),
        24 * b**2 * (7 * b * xi + 13 * b - 11),
        b * (49 * b * xi + 184 * b - 144),
        8 * (4 * b - 3),
    )


def G_sup_y(x, params: GParams):
    """Closed-form supremum over real ``y`` of ``G(x, y)``, for ``x >= 0``."""
    b = params.b
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("G_sup_y is defined for x >= 0")
    a0, a1, a2, a3 = G_cubic_coeffs(params)
    num = a0 + x * (a1 + x * (a2 + x * a3))
    out = num / (12 * (x + 2 * b) ** 2 * (x + 3 * b))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GCertificate:
    params: GParams
    admissible: bool
    coeffs: tuple[float, float, float, float]
    coeffs_negative: bool
    grid_max: float
    tail_from: float
    certified: bool


def certify_G_negative(params: GParams, x_grid=None) -> GCertificate:
    """Check ``sup_{x,y >= 0} G < 0`` for one parameter pair.

    The numerator of ``sup_y G`` is a cubic in ``x`` and the denominator is
    positive, so four negative coefficients give the sign on all of
    ``[0, inf)``; the grid maximum is reported as an independent sample.
    Beyond the last grid point the sign is carried by the negative leading
    coefficient.
    """
    if x_grid is None:
        x_grid = np.concatenate([[0.0], np.logspace(-6, 6, 2001)])
    x_grid = np.asarray(x_grid, dtype=float)
    coeffs = G_cubic_coeffs(params)
    neg = all(c < 0 for c in coeffs)
    gmax = float(np.max(G_sup_y(x_grid, params)))
    return GCertificate(
        params=params,
        admissible=params.admissible,
        coeffs=coeffs,
        coeffs_negative=neg,
        grid_max=gmax,
        tail_from=float(x_grid[-1]),
        certified=neg and gmax < 0 and coeffs[3] < 0,
    )


# ---------------------------------------------------------------------------
# phi, psi, theta


def _phi_domain(x, params: PhiParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x <= params.n**2):
        raise DomainError(f"phi is defined for x > n^2 = {params.n ** 2}")
    return x


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def phi(x, params: PhiParams):
    x = _phi_domain(x, params)
    n2 = params.n**2
    return _scalar(x * (1 - n2 / x) ** (2 + params.eps))


def phi_prime(x, params: PhiParams):
    x = _phi_domain(x, params)
    n2, e = params.n**2, params.eps
    return _scalar((x + n2 * (1 + e)) / x * (1 - n2 / x) ** (1 + e))


def phi_double_prime(x, params: PhiParams):
    x = _phi_domain(x, params)
    n2, e = params.n**2, params.eps
    return _scalar(n2**2 * (1 + e) * (2 + e) / x**3 * (1 - n2 / x) ** e)


def phi_log_derivative_identity(x, params: PhiParams):
    """Both sides of ``1 - x phi'/phi = -(2+eps) n^2/(x - n^2)``."""
    x = _phi_domain(x, params)
    n2, e = params.n**2, params.eps
    lhs = 1 - x * phi_prime(x, params) / phi(x, params)
    rhs = -(2 + e) * n2 / (x - n2)
    return _scalar(lhs), _scalar(rhs)


def phi_combination_bound(x, params: PhiParams):
    """``4 - (phi'(x) + 2 x phi''(x))``; positive on the whole domain."""
    x = _phi_domain(x, params)
    return _scalar(4 - (phi_prime(x, params) + 2 * x * phi_double_prime(x, params)))


def _eps(eps: float) -> float:
    if not eps > 0:
        raise DomainError("eps must be positive")
    return float(eps)


def psi(y, eps: float):
    """``phi' + 2x phi''`` rewritten in ``y = n^2/x``, on ``0 < y < 1``."""
    e = _eps(eps)
    y = np.asarray(y, dtype=float)
    if np.any((y <= 0) | (y >= 1)):
        raise DomainError("psi is defined on 0 < y < 1")
    return _scalar(((1 + e) * (3 + 2 * e) * y**2 + e * y + 1) * (1 - y) ** e)


def psi_argmax(eps: float) -> float:
    e = _eps(eps)
    return 3.0 / (3.0 + 2.0 * e)


def psi_sup(eps: float) -> float:
    e = _eps(eps)
    return 2 * (7 * e + 6) / (2 * e + 3) * (2 * e / (2 * e + 3)) ** e


def theta(eps: float) -> float:
    e = _eps(eps)
    return math.log(2 * (7 * e + 6) / (2 * e + 3)) + e * math.log(2 * e / (2 * e + 3))


def theta_prime(eps: float) -> float:
    e = _eps(eps)
    return 3 * (7 * e + 9) / ((2 * e + 3) * (7 * e + 6)) + math.log(2 * e / (2 * e + 3))


def theta_double_prime(eps: float) -> float:
    e = _eps(eps)
    return 27 * (7 * e**2 + 17 * e + 12) / (e * (2 * e + 3) ** 2 * (7 * e + 6) ** 2)


# ---------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class ThresholdTable:
    n: int
    p: int
    ambient: str
    # sphere ambient
    hsq_bound: Fraction | None = None
    mixed_pairs: tuple[tuple[Fraction, Fraction], ...] = ()
    codim1_gamma: Fraction | None = None
    codim1_k: Fraction | None = None
    xi: Fraction | None = None
    codim2_bound: Fraction | None = None
    codim3_ring_bound: Fraction | None = None
    # hyperbolic ambient
    hyperbolic_k: Fraction | None = None

    def as_dict(self) -> dict:
        def conv(v):
            if isinstance(v, Fraction):
                return str(v)
            if isinstance(v, tuple):
                return [conv(x) for x in v]
            return v

        return {
            k: conv(getattr(self, k))
            for k in (
                "n",
                "p",
                "ambient",
                "hsq_bound",
                "mixed_pairs",
                "codim1_gamma",
                "codim1_k",
                "xi",
                "codim2_bound",
                "codim3_ring_bound",
                "hyperbolic_k",
            )
        }


def thresholds(n: int, p: int, ambient: str = "sphere") -> ThresholdTable:
    """Pinching constants for dimension ``n``, codimension ``p``.

    ``sphere``: the |h|^2 bound ``n / (1 + sgn(p-1)/2)``, the ``(kappa, alpha)``
    pairs, and the constants of the codimension-specific arguments.
    ``hyperbolic``: the coefficient ``k`` of the asymptotic pinching.
    """
    if p < 1:
        raise DomainError("p must be >= 1")
    if n < 1:
        raise DomainError("n must be >= 1")
    if n < 2:
        warnings.warn("n = 1 is outside the range of the pinching results", stacklevel=2)
    if ambient == "hyperbolic":
        if p >= 2 and n >= 7:
            k = Fraction(1, 3 * n)
        else:
            k = Fraction(n - 1, 2 * n * (n + 2))
        return ThresholdTable(n=n, p=p, ambient=ambient, hyperbolic_k=k)
    if ambient != "sphere":
        raise DomainError(f"unknown ambient {ambient!r}")

    sgn = 0 if p == 1 else 1
    hsq = Fraction(n) / (1 + Fraction(sgn, 2))
    if p == 1:
        kappa = min(Fraction(3, n + 2), Fraction(4 * (n - 1), n * (n + 2)))
        pairs = ((kappa, Fraction(n)),)
        gamma = Fraction(2 * (n - 1), n * (n + 2))
        return ThresholdTable(
            n=n,
            p=p,
            ambient=ambient,
            hsq_bound=hsq,
            mixed_pairs=pairs,
            codim1_gamma=gamma,
            codim1_k=min(gamma, 2 * gamma - Fraction(1, n)),
        )
    xi, _ = xi_constants(p)
    if p == 2:
        pairs = ((Fraction(4, 3 * n), Fraction(2 * n, 3)),)
        ring = None
    else:
        pairs = ((Fraction(4, 3 * n), Fraction(3 * n, 5)), (Fraction(1, n), Fraction(2 * n, 3)))
        ring = Fraction(2 * n, 3)
    return ThresholdTable(
        n=n,
        p=p,
        ambient=ambient,
        hsq_bound=hsq,
        mixed_pairs=pairs,
        xi=xi,
        codim2_bound=Fraction(n) / (xi + 1),
        codim3_ring_bound=ring,
    )
