"""Closed-form umbilical ancient solutions in the three space forms.

A geodesic sphere of radius ``r`` in the space form of curvature ``c`` has
principal curvature ``cot r``, ``1/r`` or ``coth r`` and moves inward with
``dr/dt = -n lambda(r)``.  Separating this ODE gives the hyperbolic family
``r = arccosh e^{-nt}``, the sphere-cap law ``cos r = C e^{nt}`` and the
Euclidean law ``r = sqrt(-2nt)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .pinching import PhiParams, phi, thresholds
from .tensor_core import FundamentalForm

__all__ = [
    "UmbilicalSolution",
    "principal_curvature",
    "hyperbolic_sphere",
    "hyperbolic_sphere_rate",
    "sphere_cap",
    "sphere_cap_rate",
    "euclidean_sphere",
    "euclidean_sphere_rate",
    "umbilical_form",
    "WitnessRecord",
    "pinching_witness",
    "clifford_hsq",
    "VERONESE_HSQ",
    "sn",
    "cs",
]

# static minimal examples that make the sphere thresholds sharp
VERONESE_HSQ = 4.0 / 3.0


def clifford_hsq(n: int) -> float:
    """|h|^2 of the Clifford minimal hypersurfaces in S^{n+1}."""
    return float(n)


def sn(c: int, r):
    if c > 0:
        return np.sin(r)
    if c < 0:
        return np.sinh(r)
    return np.asarray(r, dtype=float) * 1.0


def cs(c: int, r):
    """Derivative of ``sn``."""
    if c > 0:
        return np.cos(r)
    if c < 0:
        return np.cosh(r)
    return np.ones_like(np.asarray(r, dtype=float))


def _check_c(c: int) -> int:
    if c not in (-1, 0, 1):
        raise DomainError(f"ambient curvature must be -1, 0 or 1, got {c}")
    return c


def _check_radius(r, c: int) -> None:
    r = np.asarray(r)
    if np.any(r <= 0):
        raise DomainError("radius must be positive")
    if c > 0 and np.any(r >= math.pi):
        raise DomainError("geodesic spheres in S^{n+1} need r < pi")


def principal_curvature(r, c: int):
    """``cot r``, ``1/r`` or ``coth r``."""
    _check_c(c)
    _check_radius(r, c)
    out = cs(c, r) / sn(c, r)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class UmbilicalSolution:
    """One exact family; ``C`` is only used by the sphere-cap family."""

    c: int
    n: int
    C: float = 0.5

    def __post_init__(self) -> None:
        _check_c(self.c)
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.c > 0 and not 0.0 < self.C < 1.0:
            raise DomainError("sphere-cap constant C must lie in (0, 1)")

    @property
    def T(self) -> float:
        """End of the existence interval."""
        if self.c > 0:
            return -math.log(self.C) / self.n
        return 0.0

    def radius(self, t):
        if self.c < 0:
            return hyperbolic_sphere(t, self.n)[0]
        if self.c > 0:
            return sphere_cap(t, self.n, self.C)
        return euclidean_sphere(t, self.n)

    def rate(self, t):
        """Analytic ``dr/dt``."""
        if self.c < 0:
            return hyperbolic_sphere_rate(t, self.n)
        if self.c > 0:
            return sphere_cap_rate(t, self.n, self.C)
        return euclidean_sphere_rate(t, self.n)

    def Hnorm(self, t):
        return self.n * principal_curvature(self.radius(t), self.c)

    def ode_residual(self, t):
        """``|dr/dt + |H|(r)|`` with the analytic derivative."""
        return np.abs(self.rate(t) + self.Hnorm(t))


def _negative_time(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t >= 0):
        raise DomainError("family is defined for t < 0")
    return t


def hyperbolic_sphere(t, n: int):
    """``(r, |H|)`` with ``r = arccosh e^{-nt}``, ``|H| = n e^{-nt}/sqrt(e^{-2nt} - 1)``."""
    t = _negative_time(t)
    u = np.exp(-n * t)
    r = np.arccosh(u)
    H = n * u / np.sqrt(np.expm1(-2 * n * t))
    if r.ndim == 0:
        return float(r), float(H)
    return r, H


def hyperbolic_sphere_rate(t, n: int):
    t = _negative_time(t)
    u = np.exp(-n * t)
    return -n * u / np.sqrt(np.expm1(-2 * n * t))


def sphere_cap(t, n: int, C: float):
    """Radius with ``cos r(t) = C e^{nt}``."""
    t = np.asarray(t, dtype=float)
    v = C * np.exp(n * t)
    if np.any(v >= 1) or np.any(v <= 0):
        raise DomainError("sphere cap needs 0 < C e^{nt} < 1")
    r = np.arccos(v)
    return float(r) if r.ndim == 0 else r


def sphere_cap_rate(t, n: int, C: float):
    t = np.asarray(t, dtype=float)
    v = C * np.exp(n * t)
    if np.any(v >= 1) or np.any(v <= 0):
        raise DomainError("sphere cap needs 0 < C e^{nt} < 1")
    return -n * v / np.sqrt(1 - v * v)


def euclidean_sphere(t, n: int):
    """``r = sqrt(-2nt)``."""
    t = _negative_time(t)
    r = np.sqrt(-2 * n * t)
    return float(r) if r.ndim == 0 else r


def euclidean_sphere_rate(t, n: int):
    t = _negative_time(t)
    return -n / np.sqrt(-2 * n * t)


def umbilical_form(r: float, c: int, n: int) -> FundamentalForm:
    """Codimension-one form ``lambda(r) I`` of a geodesic sphere."""
    lam = principal_curvature(r, c)
    return FundamentalForm(lam * np.eye(n)[None])


@dataclass(frozen=True)
class WitnessRecord:
    t: float
    profile: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs < self.rhs


def pinching_witness(solution: UmbilicalSolution, t: float, profile: str = "hyperbolic", eps: float = 1.0, p: int = 1) -> WitnessRecord:
    """Evaluate a pinching hypothesis along an exact solution.

    ``hyperbolic``: ``|h̊|^2 <= k|H|^2 (1 - n^2/|H|^2)^(2+eps)``;
    ``sphere``: ``|h|^2 < n / (1 + sgn(p-1)/2)``.
    """
    r = float(solution.radius(t))
    n = solution.n
    h = umbilical_form(r, solution.c, n)
    ring = h.ringsq
    if profile == "hyperbolic":
        if solution.c >= 0:
            raise DomainError("hyperbolic witness is for the hyperbolic family")
        k = float(thresholds(n, p, "hyperbolic").hyperbolic_k)
        Hsq = h.Hsq
        rhs = k * phi(Hsq, PhiParams(n, eps))
        return WitnessRecord(t=float(t), profile=profile, lhs=ring, rhs=rhs)
    if profile == "sphere":
        if solution.c <= 0:
            raise DomainError("sphere witness is for the sphere family")
        bound = float(thresholds(n, p, "sphere").hsq_bound)
        return WitnessRecord(t=float(t), profile=profile, lhs=h.hsq, rhs=bound)
    raise DomainError(f"unknown witness profile {profile!r}")
