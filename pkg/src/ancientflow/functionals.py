"""Integral quantities over discrete rotational hypersurfaces.

Volume, the traceless energies ``I = ∫|h̊|^2`` and ``W = ∫|h̊|^n``, the
moments ``J_r = ∫ U_+^{r/2}`` of ``U = |h̊|^2 - |H|^2/n^2``, Gauss-Bonnet
residuals for surfaces, a Sobolev-type inequality check and the explicit
constants of the integral pinching arguments.

The Sobolev constant ``B`` is never known exactly, so every inequality that
involves it reports a slack for the supplied ``B`` instead of asserting a
truth value.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError
from .geometry import PRODUCTION_GRID

__all__ = [
    "CHI",
    "PRODUCTION_GRID",
    "FunctionalRecord",
    "IntegralConstants",
    "integrals",
    "gauss_bonnet_residual",
    "gauss_bonnet_combination_residual",
    "sobolev_check",
    "sobolev_minimal_B",
    "sobolev_sweep",
    "DecayReport",
    "decay_monitor_2d",
    "MomentReport",
    "u_moment_monitor",
    "DivergenceCheck",
    "divergence_check",
    "default_moment_orders",
    "write_csv_report",
]

# Euler characteristic of every supported closed rotational surface
CHI = 2


def default_moment_orders(n: int) -> tuple[float, ...]:
    """``r`` values tracked for ``J_r``: ``n`` and ``n^2/(n-2)`` when ``n >= 3``."""
    if n >= 3:
        return (float(n), n * n / (n - 2))
    if n == 2:
        return (2.0,)
    return ()


def _rkey(r: float) -> str:
    return f"{r:.6g}"


@dataclass(frozen=True)
class FunctionalRecord:
    t: float
    vol: float
    I: float
    W: float
    H2: float
    J: Mapping[str, float] = field(default_factory=dict)
    gb_residual: float | None = None
    chi: int = CHI

    def as_dict(self) -> dict:
        d = asdict(self)
        d["J"] = dict(sorted(self.J.items()))
        return d


def _U(F, n: int) -> np.ndarray:
    return F.ring_sq - F.Hsq / n**2


def integrals(state, orders: Sequence[float] | None = None) -> FunctionalRecord:
    F = state.fields
    n = state.n
    orders = default_moment_orders(n) if orders is None else tuple(orders)
    Up = np.maximum(_U(F, n), 0.0)
    J = {_rkey(r): F.integrate(Up ** (r / 2.0)) for r in orders}
    gb = gauss_bonnet_residual(state) if n == 2 else None
    return FunctionalRecord(
        t=state.t,
        vol=F.volume,
        I=F.integrate(F.ring_sq),
        W=F.integrate(F.ring_sq ** (n / 2.0)),
        H2=F.integrate(F.Hsq),
        J=J,
        gb_residual=gb,
    )


def gauss_bonnet_residual(state) -> float:
    """``|∫(|H|^2/4 - |h̊|^2/2 + c) dμ - 2π χ|`` for a closed surface."""
    if state.n != 2:
        raise DomainError("Gauss-Bonnet residual needs n = 2")
    F = state.fields
    total = F.integrate(0.25 * F.Hsq - 0.5 * F.ring_sq + state.c)
    return abs(total - 2.0 * math.pi * CHI)


def gauss_bonnet_combination_residual(state) -> float:
    """``|∫(3/2|h̊|^2 - |H|^2/4) dμ - (I - 2πχ + c vol)|``."""
    if state.n != 2:
        raise DomainError("needs n = 2")
    F = state.fields
    lhs = F.integrate(1.5 * F.ring_sq - 0.25 * F.Hsq)
    rhs = F.integrate(F.ring_sq) - 2.0 * math.pi * CHI + state.c * F.volume
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# Sobolev-type inequality


def _euclidean_H(state) -> np.ndarray:
    if state.c < 0:
        raise DomainError("no Euclidean realization for hyperbolic ambient")
    F = state.fields
    if state.c > 0:
        # unit sphere in R^{n+2}: add the position-vector part
        return np.sqrt(F.Hsq + state.n**2)
    return np.abs(F.H)


def _sobolev_parts(state, f) -> tuple[float, float]:
    n = state.n
    if n < 2:
        raise DomainError("Sobolev check needs n >= 2")
    f = np.broadcast_to(np.asarray(f, dtype=float), state.fields.H.shape)
    if np.any(f < 0):
        raise DomainError("f must be nonnegative")
    F = state.fields
    grad = np.abs(F.derivative_s(f))
    rhs_integral = F.integrate(grad + f * _euclidean_H(state))
    lhs = F.integrate(f ** (n / (n - 1.0))) ** ((n - 1.0) / n)
    return rhs_integral, lhs


def sobolev_check(state, f, B: float) -> float:
    """``B ∫(|∇f| + f|H|) dμ - (∫ f^{n/(n-1)} dμ)^{(n-1)/n}`` (Euclidean ``H``)."""
    if B <= 0:
        raise DomainError("B must be positive")
    rhs_integral, lhs = _sobolev_parts(state, f)
    return B * rhs_integral - lhs


def sobolev_minimal_B(state, f) -> float:
    """Smallest ``B`` with nonnegative slack for this field (``0`` if ``f = 0``)."""
    rhs_integral, lhs = _sobolev_parts(state, f)
    if lhs == 0.0:
        return 0.0
    return lhs / rhs_integral


def sobolev_sweep(state, f, Bs: Sequence[float]) -> list[tuple[float, float]]:
    return [(float(B), sobolev_check(state, f, B)) for B in Bs]


# ---------------------------------------------------------------------------
# constants


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class IntegralConstants:
    """Explicit constants of the integral pinching estimates.

    Rational expressions are exact ``Fraction`` values for the supplied ``B``
    (a float ``B`` enters through its exact binary value).
    """

    n: int
    B: Fraction | float = 1

    def __post_init__(self) -> None:
        if self.n < 2:
            raise DomainError("n must be >= 2")
        if float(self.B) <= 0:
            raise DomainError("B must be positive")
        object.__setattr__(self, "B", _frac(self.B))

    def A1(self, q) -> Fraction:
        q = _frac(q)
        if q <= 1:
            raise DomainError("q must exceed 1")
        return (q - 1) / (4 * q) * (1 / (2 * self.B**2))

    def A2(self, q) -> Fraction:
        q = _frac(q)
        return Fraction(self.n**2, 4) + 4 * q * self.n

    @property
    def D1(self) -> Fraction:
        return Fraction(3 * self.n**2 + 2 * self.n, 4)

    @property
    def D2(self) -> Fraction:
        return Fraction(self.n - 2, 8 * self.n) / self.B**2

    @property
    def D3(self) -> Fraction:
        return Fraction(self.n**2 + 10 * self.n, 4)

    def C_surface(self, ambient: str = "euclidean") -> Fraction:
        """Smallness constant for ``∫|h̊|^2`` when ``n = 2``."""
        if ambient == "euclidean":
            return 1 / (60 * self.B**2)
        if ambient == "sphere":
            return 1 / (54 * self.B**2)
        raise DomainError(f"unknown ambient {ambient!r}")

    @staticmethod
    def C_bar(C) -> float:
        """``2C + 16π``: bound on ``∫|H|^2`` that controls volume growth backwards in time."""
        return 2.0 * float(C) + 16.0 * math.pi

    def q_candidates(self) -> tuple[Fraction, ...]:
        n = self.n
        if n < 3:
            raise DomainError("needs n >= 3")
        return (Fraction(n, 2), Fraction(n * n, 2 * (n - 2)))

    def C_n_euclidean_candidates(self) -> dict[Fraction, float]:
        return {q: float(self.A1(q) / self.A2(q)) ** (self.n / 2) for q in self.q_candidates()}

    def C_n_euclidean(self) -> tuple[float, Fraction]:
        """``min_q (A1/A2)^{n/2}`` and the binding ``q``."""
        cands = self.C_n_euclidean_candidates()
        q = min(cands, key=lambda k: (cands[k], k))
        return cands[q], q

    def C_n_sphere(self) -> float:
        """``(D2/D3)^{n/2}``."""
        if self.n < 3:
            raise DomainError("needs n >= 3")
        return float(self.D2 / self.D3) ** (self.n / 2)

    def as_dict(self) -> dict:
        d = {"n": self.n, "B": str(self.B), "D1": str(self.D1), "D3": str(self.D3)}
        if self.n >= 3:
            d["D2"] = str(self.D2)
            d["C_n_sphere"] = self.C_n_sphere()
            val, q = self.C_n_euclidean()
            d["C_n_euclidean"] = val
            d["C_n_euclidean_q"] = str(q)
            d["A"] = {str(q): {"A1": str(self.A1(q)), "A2": str(self.A2(q))} for q in self.q_candidates()}
        else:
            d["C_euclidean"] = str(self.C_surface("euclidean"))
            d["C_sphere"] = str(self.C_surface("sphere"))
        return d


# ---------------------------------------------------------------------------
# trajectory monitors


def _central(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    return (y[2:] - y[:-2]) / (t[2:] - t[:-2])


@dataclass(frozen=True)
class DecayReport:
    """Differential inequality for ``I`` along a surface flow.

    ``slack = bound - dI/dt`` at interior records, with ``bound = -I^2/vol``
    (Euclidean) or ``-4 I`` (sphere).  ``vol_margin`` is the smallest
    increment of ``vol + C̄ t`` between records, nonnegative when
    ``vol(t) <= vol(t0) + C̄ (t0 - t)`` holds for every pair.  ``log_curve``
    lists ``(t, 1/I(t) + log(1 + C̄ (t0 - t)/vol(t0))/C̄)`` for the last
    record time ``t0``.
    """

    times: tuple[float, ...]
    dIdt: tuple[float, ...]
    bound: tuple[float, ...]
    min_slack: float
    violations: int
    C: float
    C_bar: float
    vol_margin: float
    log_curve: tuple[tuple[float, float], ...]
    inverse_I_final: float | None
    log_bound_holds: bool | None


def decay_monitor_2d(records: Sequence[FunctionalRecord], c: int = 0, C: float | None = None, tol: float = 0.0) -> DecayReport:
    """Check the ``I`` decay and the volume bound; ``C`` defaults to ``sup I``."""
    if len(records) < 3:
        raise InsufficientDataError("need at least three functional records")
    t = np.array([r.t for r in records])
    I = np.array([r.I for r in records])
    vol = np.array([r.vol for r in records])
    dI = _central(t, I)
    if c > 0:
        bound = -4.0 * I[1:-1]
    elif c == 0:
        bound = -(I[1:-1] ** 2) / vol[1:-1]
    else:
        raise DomainError("decay monitor covers Euclidean and sphere ambients")
    slack = bound - dI
    Cv = float(np.max(I)) if C is None else float(C)
    Cb = IntegralConstants.C_bar(Cv)
    g = vol + Cb * t
    margin = float(np.min(np.diff(g))) if g.size > 1 else 0.0
    curve = []
    inv_final = None
    holds = None
    if I[-1] > 0 and np.all(I > 0):
        inv_final = 1.0 / I[-1]
        for tk, Ik in zip(t, I):
            curve.append((float(tk), float(1.0 / Ik + math.log1p(Cb * (t[-1] - tk) / vol[-1]) / Cb)))
        holds = bool(all(inv_final >= v - tol * max(1.0, abs(v)) for _, v in curve))
    return DecayReport(
        times=tuple(map(float, t[1:-1])),
        dIdt=tuple(map(float, dI)),
        bound=tuple(map(float, bound)),
        min_slack=float(np.min(slack)),
        violations=int(np.sum(slack < -tol)),
        C=Cv,
        C_bar=Cb,
        vol_margin=margin,
        log_curve=tuple(curve),
        inverse_I_final=inv_final,
        log_bound_holds=holds,
    )


@dataclass(frozen=True)
class MomentReport:
    """Both sides of the ``U_+`` moment inequality at interior records.

    Euclidean: ``d/dt ∫U_+^q <= [-A1 + A2 W^{2/n}] (∫U_+^{qn/(n-2)})^{(n-2)/n}``.
    Sphere (``q = n/2``): ``d/dt J_n <= -D1 J_n - [D2 - D3 W^{2/n}] J_{n^2/(n-2)}^{(n-2)/n}``.
    ``slack = rhs - lhs``.  ``max_increase`` is the largest rise of
    ``J_{n^2/(n-2)}`` between consecutive records.
    """

    q: float
    B: float
    times: tuple[float, ...]
    lhs: tuple[float, ...]
    rhs: tuple[float, ...]
    min_slack: float
    J_high: tuple[float, ...]
    max_increase: float
    nonincreasing: bool


def _moment_series(states, r: float) -> np.ndarray:
    out = []
    for s in states:
        F = s.fields
        Up = np.maximum(_U(F, s.n), 0.0)
        out.append(F.integrate(Up ** (r / 2.0)))
    return np.array(out)


def u_moment_monitor(states, q: float | None = None, B: float = 1.0, slack_tol: float = 0.0) -> MomentReport:
    """Evaluate the moment inequality along a sequence of states (``n >= 3``)."""
    states = list(getattr(states, "states", states))
    if len(states) < 3:
        raise InsufficientDataError("need at least three states")
    n, c = states[0].n, states[0].c
    if n < 3:
        raise DomainError("moment monitor needs n >= 3")
    if c < 0:
        raise DomainError("moment monitor covers Euclidean and sphere ambients")
    K = IntegralConstants(n, B)
    if c > 0 or q is None:
        # the sphere estimate is stated for q = n/2 only
        q = n / 2.0
    t = np.array([s.t for s in states])
    Jq = _moment_series(states, 2.0 * q)
    Jhi = _moment_series(states, 2.0 * q * n / (n - 2))
    Wn = np.array([s.fields.integrate(s.fields.ring_sq ** (n / 2.0)) for s in states])
    lhs = _central(t, Jq)
    mid = slice(1, -1)
    Jpow = Jhi[mid] ** ((n - 2.0) / n)
    Wpow = Wn[mid] ** (2.0 / n)
    if c == 0:
        rhs = (-float(K.A1(q)) + float(K.A2(q)) * Wpow) * Jpow
    else:
        rhs = -float(K.D1) * Jq[mid] - (float(K.D2) - float(K.D3) * Wpow) * Jpow
    J_high = _moment_series(states, n * n / (n - 2.0))
    inc = float(np.max(np.diff(J_high))) if J_high.size > 1 else 0.0
    return MomentReport(
        q=float(q),
        B=float(B),
        times=tuple(map(float, t[mid])),
        lhs=tuple(map(float, lhs)),
        rhs=tuple(map(float, rhs)),
        min_slack=float(np.min(rhs - lhs)),
        J_high=tuple(map(float, J_high)),
        max_increase=inc,
        nonincreasing=bool(inc <= slack_tol),
    )


@dataclass(frozen=True)
class DivergenceCheck:
    """Regularized integration-by-parts identity for ``U_eps = sqrt(U_+^2 + eps)``.

    ``lhs = ∫U_eps^{q-1} ΔU``, ``rhs = -(q-1)∫U_eps^{q-3} U_+ |∇U|^2``,
    ``weaker = -(q-1)∫U_eps^{q-2} |∇U_eps|^2`` (so ``rhs <= weaker``), and the
    limiting inequality slack for the given ``B``.
    """

    eps: float
    lhs: float
    rhs: float
    weaker: float
    residual: float
    sobolev_slack: float


def divergence_check(state, q: float, B: float = 1.0, eps_values: Sequence[float] = (1e-2, 1e-4, 1e-6)) -> list[DivergenceCheck]:
    n = state.n
    if n < 3:
        raise DomainError("needs n >= 3")
    if q <= 1:
        raise DomainError("q must exceed 1")
    F = state.fields
    U = _U(F, n)
    Up = np.maximum(U, 0.0)
    lapU = F.laplacian(U)
    gU2 = F.grad_sq(U)
    Hsq = F.Hsq + (n**2 if state.c > 0 else 0.0)
    big = F.integrate(Up ** (q * n / (n - 2.0))) ** ((n - 2.0) / n)
    bound = -(q - 1) / (4 * q * q) * (big / (2 * B * B) - F.integrate(Hsq * Up**q))
    lim = F.integrate(Up ** (q - 1) * lapU)
    out = []
    for eps in eps_values:
        Ue = np.sqrt(Up**2 + eps)
        lhs = F.integrate(Ue ** (q - 1) * lapU)
        rhs = -(q - 1) * F.integrate(Ue ** (q - 3) * Up * gU2)
        weaker = -(q - 1) * F.integrate(Ue ** (q - 2) * (Up / Ue) ** 2 * gU2)
        out.append(DivergenceCheck(float(eps), lhs, rhs, weaker, abs(lhs - rhs), bound - lim))
    return out


def write_csv_report(path, records: Sequence[FunctionalRecord], constants: Mapping[str, object], slack_columns: Mapping[str, Sequence[float]] | None = None) -> None:
    """Per-record CSV with a ``#`` header line listing the constants used."""
    slack_columns = dict(slack_columns or {})
    jkeys = sorted({k for r in records for k in r.J})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# " + " ".join(f"{k}={constants[k]}" for k in sorted(constants)) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        header = ["t", "vol", "I", "W", "H2"] + [f"J_{k}" for k in jkeys] + ["gb_residual"] + sorted(slack_columns)
        w.writerow(header)
        for i, r in enumerate(records):
            row = [repr(r.t), repr(r.vol), repr(r.I), repr(r.W), repr(r.H2)]
            row += [repr(r.J.get(k, float("nan"))) for k in jkeys]
            row.append("" if r.gb_residual is None else repr(r.gb_residual))
            for key in sorted(slack_columns):
                col = slack_columns[key]
                row.append(repr(float(col[i])) if i < len(col) and col[i] is not None else "")
            w.writerow(row)
