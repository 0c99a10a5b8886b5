"""Mean curvature flow of geodesic spheres and rotational hypersurfaces.

Two geometry payloads share one state type:

* ``umbilical``: a geodesic sphere of radius ``r``, evolved by the ODE
  ``dr/dt = -n cs(r)/sn(r)`` with classical RK4;
* ``profile``: the radial graph ``rho = u(theta)`` of :mod:`ancientflow.geometry`,
  evolved by the method of lines ``u_t = -H W / s`` with classical RK4 under
  the explicit stability bound ``dt <= kappa * (dtheta * min W)^2 / n``.

Runs go forward in time on windows inside ``(-inf, 0)``.  A run halts at the
configured horizon, when the smallest radius drops below
``extinction_factor`` grid spacings, or when a step becomes unstable.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError, ImmersionError, InsufficientDataError, StabilityError
from .exact import cs, euclidean_sphere, hyperbolic_sphere, sn, sphere_cap
from .geometry import (
    CurvatureFields,
    d1,
    profile_fields,
    radial_speed,
    theta_grid,
    umbilical_fields,
)
from .pinching import RATIO_KINDS, f_ratio

__all__ = [
    "FlowState",
    "SimulationConfig",
    "PinchingRecord",
    "Trajectory",
    "EvolutionResidual",
    "GradientSlack",
    "RefinementStudy",
    "FIXTURES",
    "DEFAULT_KAPPA",
    "TRAJECTORY_SCHEMA",
    "TRAJECTORY_VERSION",
    "stability_bound",
    "step",
    "initial_state",
    "run",
    "fit_decay_exponent",
    "pinching_record",
    "verify_evolution",
    "verify_gradient_estimates",
    "evolution_refinement",
]

DEFAULT_KAPPA = 0.2
TRAJECTORY_SCHEMA = "ancientflow.trajectory"
TRAJECTORY_VERSION = 1
UMBILICAL_EXTINCTION = 1e-3
# RK4 step relative to r/|dr/dt|; keeps the closed-form error below 1e-9
UMBILICAL_STEP = 2.5e-4


def _check_immersion(c: int, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise ImmersionError("geometry contains non-finite values")
    if np.any(values <= 0):
        raise ImmersionError(f"radius reached {float(np.min(values)):.3e} <= 0")
    if c > 0 and np.any(values >= math.pi):
        raise ImmersionError("radius reached the antipodal point")


@dataclass(frozen=True, eq=False)
class FlowState:
    """Immutable snapshot: exactly one of ``radius`` and ``profile`` is set."""

    c: int
    n: int
    t: float
    radius: float | None = None
    profile: np.ndarray | None = None
    order: int = 4

    def __post_init__(self) -> None:
        if self.c not in (-1, 0, 1):
            raise DomainError(f"ambient curvature must be -1, 0 or 1, got {self.c}")
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if (self.radius is None) == (self.profile is None):
            raise DomainError("give exactly one of radius and profile")
        if self.profile is not None:
            u = np.array(self.profile, dtype=float)
            if u.ndim != 1 or u.size < 5:
                raise DomainError("profile must be a 1-D array with at least 5 nodes")
            if self.order == 4 and (u.size - 1) % 2:
                raise DomainError("order-4 scheme needs an even number of intervals")
            _check_immersion(self.c, u)
            u.setflags(write=False)
            object.__setattr__(self, "profile", u)
        else:
            _check_immersion(self.c, np.asarray([self.radius], dtype=float))
            object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "t", float(self.t))

    @property
    def mode(self) -> str:
        return "umbilical" if self.profile is None else "profile"

    @property
    def grid(self) -> int | None:
        return None if self.profile is None else self.profile.size - 1

    @property
    def dtheta(self) -> float | None:
        return None if self.profile is None else math.pi / self.grid

    @cached_property
    def fields(self) -> CurvatureFields:
        if self.profile is None:
            return umbilical_fields(self.radius, self.c, self.n)
        return profile_fields(self.profile, self.c, self.n, self.order)

    @property
    def geometry(self):
        return self.radius if self.profile is None else self.profile

    def replace(self, t: float, geometry) -> "FlowState":
        if self.profile is None:
            return FlowState(self.c, self.n, t, radius=float(geometry), order=self.order)
        return FlowState(self.c, self.n, t, profile=geometry, order=self.order)

    def velocity(self):
        """``dr/dt`` (umbilical) or the radial speed ``u_t`` per node (profile)."""
        return _rhs(self.c, self.n, self.order, self.geometry)

    def scale(self) -> float:
        """Smallest ``sn`` of the radius over the nodes."""
        return float(np.min(sn(self.c, np.atleast_1d(self.geometry))))

    def volume(self) -> float:
        return self.fields.volume


def _rhs(c: int, n: int, order: int, g):
    if np.ndim(g) == 0:
        return float(-n * cs(c, g) / sn(c, g))
    return radial_speed(np.asarray(g), c, n, order)


def stability_bound(state: FlowState, kappa: float = DEFAULT_KAPPA) -> float:
    """Largest admissible explicit step; ``inf`` in umbilical mode."""
    if state.profile is None:
        return math.inf
    u = state.profile
    s = sn(state.c, u)
    ut = d1(u, state.dtheta, state.order)
    wmin = float(np.min(np.sqrt(s * s + ut * ut)))
    return kappa * (state.dtheta * wmin) ** 2 / state.n


def step(state: FlowState, dt: float, kappa: float = DEFAULT_KAPPA) -> FlowState:
    """One classical RK4 step of size ``dt``."""
    if not dt > 0:
        raise StabilityError(f"time step must be positive, got {dt}")
    bound = stability_bound(state, kappa)
    if dt > bound * (1.0 + 1e-9):
        raise StabilityError(f"dt={dt:.3e} exceeds stability bound {bound:.3e} at t={state.t:.6g}")
    c, n, o = state.c, state.n, state.order
    y = state.geometry

    def stage(g):
        if not np.all(np.isfinite(g)) or np.any(np.asarray(g) <= 0):
            raise ImmersionError(f"RK stage left the admissible set at t={state.t:.6g}")
        return _rhs(c, n, o, g)

    with np.errstate(all="ignore"):
        k1 = stage(y)
        k2 = stage(y + 0.5 * dt * k1)
        k3 = stage(y + 0.5 * dt * k2)
        k4 = stage(y + dt * k3)
        new = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise StabilityError(f"non-finite values after step at t={state.t:.6g}")
    return state.replace(state.t + dt, new)


# ---------------------------------------------------------------------------
# configuration and fixtures


@dataclass(frozen=True)
class SimulationConfig:
    """Everything that determines a run.  ``dt=None`` selects adaptive steps."""

    fixture: str
    n: int = 2
    c: int | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    grid: int = 128
    order: int = 4
    t0: float = -1.0
    t1: float | None = None
    dt: float | None = None
    kappa: float = DEFAULT_KAPPA
    record_every: int = 1
    monitors: tuple[str, ...] = ()
    a: float = 1.0
    b: float = 0.05
    eps: float = 1.0
    seed: int = 0
    extinction_factor: float = 10.0
    max_steps: int = 2_000_000
    functionals: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "monitors", tuple(self.monitors))
        object.__setattr__(self, "params", dict(self.params))
        self.validate()

    def validate(self) -> None:
        if self.fixture not in FIXTURES:
            raise ConfigError(f"unknown fixture {self.fixture!r}; choose from {sorted(FIXTURES)}")
        spec = FIXTURES[self.fixture]
        unknown = set(self.params) - set(spec.params)
        if unknown:
            raise ConfigError(f"unknown parameters for {self.fixture}: {sorted(unknown)}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.c is not None and self.c not in (-1, 0, 1):
            raise ConfigError("c must be -1, 0 or 1")
        if self.c is not None and spec.allowed_c is not None and self.c not in spec.allowed_c:
            raise ConfigError(f"fixture {self.fixture} supports c in {spec.allowed_c}")
        if self.order not in (2, 4):
            raise ConfigError("order must be 2 or 4")
        if spec.mode == "profile":
            if self.grid < 8:
                raise ConfigError("grid must be >= 8")
            if self.order == 4 and self.grid % 2:
                raise ConfigError("order 4 needs an even grid")
        if self.t1 is not None and self.t1 <= self.t0:
            raise ConfigError("t1 must exceed t0")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.kappa <= 0:
            raise ConfigError("kappa must be positive")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        for m in self.monitors:
            if m not in RATIO_KINDS:
                raise ConfigError(f"unknown monitor {m!r}; choose from {RATIO_KINDS}")

    @property
    def ambient(self) -> int:
        spec = FIXTURES[self.fixture]
        return spec.default_c if self.c is None else self.c

    def as_dict(self) -> dict:
        d = asdict(self)
        d["monitors"] = list(self.monitors)
        d["params"] = dict(sorted(self.params.items()))
        d["c"] = self.ambient
        return d


@dataclass(frozen=True)
class FixtureSpec:
    mode: str
    default_c: int
    params: tuple[str, ...]
    build: Callable[[SimulationConfig, np.random.Generator], object]
    allowed_c: tuple[int, ...] | None = None
    description: str = ""


def _p(cfg: SimulationConfig, key: str, default: float) -> float:
    return float(cfg.params.get(key, default))


def _legendre(k: int, x: np.ndarray) -> np.ndarray:
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    return np.polynomial.legendre.legval(x, coef)


def _build_hyperbolic(cfg, rng):
    if cfg.t0 >= 0:
        raise ConfigError("hyperbolic-sphere needs t0 < 0")
    return hyperbolic_sphere(cfg.t0, cfg.n)[0]


def _build_sphere_cap(cfg, rng):
    try:
        return sphere_cap(cfg.t0, cfg.n, _p(cfg, "C", 0.5))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def _build_euclidean(cfg, rng):
    if cfg.t0 >= 0:
        raise ConfigError("euclidean-sphere needs t0 < 0")
    return euclidean_sphere(cfg.t0, cfg.n)


def _build_round(cfg, rng):
    return np.full(cfg.grid + 1, _p(cfg, "r0", 1.0))


def _build_perturbed(cfg, rng):
    theta = theta_grid(cfg.grid)
    mode = int(_p(cfg, "mode", 2))
    default_r0 = 1.2 if cfg.ambient > 0 else 1.0
    r0 = _p(cfg, "r0", default_r0)
    return r0 * (1.0 + _p(cfg, "amp", 0.05) * _legendre(mode, np.cos(theta)))


def _build_random_perturbed(cfg, rng):
    theta = theta_grid(cfg.grid)
    amp = _p(cfg, "amp", 0.05)
    coeffs = rng.uniform(-amp, amp, size=3)
    x = np.cos(theta)
    pert = sum(a * _legendre(k, x) for a, k in zip(coeffs, (2, 3, 4)))
    return _p(cfg, "r0", 1.0) * (1.0 + pert)


def _build_ellipsoid(cfg, rng):
    theta = theta_grid(cfg.grid)
    a = _p(cfg, "a", 1.0)
    axis = _p(cfg, "axis", 1.2)
    return 1.0 / np.sqrt(np.cos(theta) ** 2 / axis**2 + np.sin(theta) ** 2 / a**2)


def _build_equator(cfg, rng):
    return np.full(cfg.grid + 1, math.pi / 2)


FIXTURES: dict[str, FixtureSpec] = {
    "hyperbolic-sphere": FixtureSpec("umbilical", -1, (), _build_hyperbolic, (-1,), "r = arccosh e^{-n t0}"),
    "sphere-cap": FixtureSpec("umbilical", 1, ("C",), _build_sphere_cap, (1,), "cos r = C e^{n t0}"),
    "euclidean-sphere": FixtureSpec("umbilical", 0, (), _build_euclidean, (0,), "r = sqrt(-2 n t0)"),
    "round": FixtureSpec("profile", 0, ("r0",), _build_round, None, "constant profile r0"),
    "perturbed-sphere": FixtureSpec(
        "profile", 0, ("r0", "amp", "mode"), _build_perturbed, None, "r0 (1 + amp P_mode(cos theta))"
    ),
    "perturbed-sphere-S3": FixtureSpec(
        "profile", 1, ("r0", "amp", "mode"), _build_perturbed, (1,), "perturbed geodesic sphere in the unit sphere"
    ),
    "random-perturbed-sphere": FixtureSpec(
        "profile", 0, ("r0", "amp"), _build_random_perturbed, None, "seeded modes 2..4 of size <= amp"
    ),
    "ellipsoid": FixtureSpec("profile", 0, ("a", "axis"), _build_ellipsoid, (0,), "ellipsoid of revolution"),
    "equator": FixtureSpec("profile", 1, (), _build_equator, (1,), "totally geodesic equator"),
}


def initial_state(cfg: SimulationConfig) -> FlowState:
    spec = FIXTURES[cfg.fixture]
    rng = np.random.default_rng(cfg.seed)
    g = spec.build(cfg, rng)
    try:
        if spec.mode == "umbilical":
            return FlowState(cfg.ambient, cfg.n, cfg.t0, radius=g, order=cfg.order)
        return FlowState(cfg.ambient, cfg.n, cfg.t0, profile=g, order=cfg.order)
    except (DomainError, ImmersionError) as exc:
        raise ConfigError(f"fixture {cfg.fixture}: {exc}") from exc


# ---------------------------------------------------------------------------
# records and runs


@dataclass(frozen=True)
class PinchingRecord:
    """Node maxima of the monitored ratios at one time.

    ``ring_excess`` is ``sup(|h̊|^2 - 2n/3)`` at this time and
    ``running_ring_excess`` its supremum over the run so far.
    ``decay_exponent`` is the least-squares rate of ``log max f`` for the
    first monitor over the records so far.
    """

    t: float
    max_f: Mapping[str, float]
    ring_excess: float
    running_ring_excess: float
    decay_exponent: float | None = None

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "max_f": dict(sorted(self.max_f.items())),
            "ring_excess": self.ring_excess,
            "running_ring_excess": self.running_ring_excess,
            "decay_exponent": self.decay_exponent,
        }


def pinching_record(
    state: FlowState,
    monitors: Sequence[str],
    *,
    a: float = 1.0,
    b: float = 0.05,
    eps: float = 1.0,
    running: float = -math.inf,
    decay_exponent: float | None = None,
) -> PinchingRecord:
    F = state.fields
    max_f = {}
    for kind in monitors:
        vals = f_ratio(F.ring_sq, F.Hsq, kind, n=state.n, a=a, b=b, eps=eps)
        max_f[kind] = float(np.max(vals))
    excess = float(np.max(F.ring_sq)) - 2.0 * state.n / 3.0
    return PinchingRecord(
        t=state.t,
        max_f=max_f,
        ring_excess=excess,
        running_ring_excess=max(running, excess),
        decay_exponent=decay_exponent,
    )


class _LogFit:
    """Running least squares for ``log y = alpha - rate * t``."""

    def __init__(self, floor: float = 1e-300) -> None:
        self.floor = floor
        self.k = 0
        self.st = self.sy = self.stt = self.sty = 0.0
        self.t_ref = None

    def add(self, t: float, y: float) -> None:
        if not y > self.floor:
            return
        if self.t_ref is None:
            self.t_ref = t
        x = t - self.t_ref
        ly = math.log(y)
        self.k += 1
        self.st += x
        self.sy += ly
        self.stt += x * x
        self.sty += x * ly

    def rate(self) -> float | None:
        if self.k < 2:
            return None
        den = self.k * self.stt - self.st**2
        if den <= 0:
            return None
        return -(self.k * self.sty - self.st * self.sy) / den


def fit_decay_exponent(times: Iterable[float], values: Iterable[float], floor: float = 1e-300) -> float | None:
    """Least-squares ``rate`` in ``values ~ A exp(-rate t)``; ``None`` if underdetermined."""
    fit = _LogFit(floor)
    for t, v in zip(times, values):
        fit.add(float(t), float(v))
    return fit.rate()


@dataclass
class Trajectory:
    config: SimulationConfig
    states: list[FlowState]
    pinching: list[PinchingRecord]
    functionals: list
    status: str
    message: str = ""
    steps: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def max_f(self, kind: str) -> np.ndarray:
        return np.array([r.max_f[kind] for r in self.pinching])

    def decay_exponent(self, kind: str | None = None, t_min: float | None = None, t_max: float | None = None):
        kind = kind or self.config.monitors[0]
        pts = [
            (r.t, r.max_f[kind])
            for r in self.pinching
            if (t_min is None or r.t >= t_min) and (t_max is None or r.t <= t_max)
        ]
        return fit_decay_exponent([p[0] for p in pts], [p[1] for p in pts])

    def header(self) -> dict:
        return {
            "schema": TRAJECTORY_SCHEMA,
            "version": TRAJECTORY_VERSION,
            "config": self.config.as_dict(),
            "status": self.status,
            "message": self.message,
            "steps": self.steps,
        }

    def records(self):
        for k, s in enumerate(self.states):
            rec = {
                "t": s.t,
                "grid": None if s.profile is None else {"N": s.grid, "order": s.order},
                "fields": {"r": s.radius} if s.profile is None else {"u": s.profile.tolist()},
                "monitors": {
                    "pinching": self.pinching[k].as_dict() if k < len(self.pinching) else None,
                    "functionals": self.functionals[k].as_dict() if k < len(self.functionals) else None,
                },
            }
            yield rec

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True) + "\n")
            for rec in self.records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def run(cfg: SimulationConfig, on_record: Callable[[FlowState], None] | None = None) -> Trajectory:
    """Integrate a fixture and collect monitor records every ``record_every`` steps."""
    from .functionals import integrals

    state = initial_state(cfg)
    if state.profile is None:
        threshold = UMBILICAL_EXTINCTION
    else:
        mean_r = float(np.mean(state.profile))
        threshold = cfg.extinction_factor * state.dtheta * float(sn(state.c, mean_r))

    states: list[FlowState] = []
    pinch: list[PinchingRecord] = []
    funcs: list = []
    fit = _LogFit()
    running = -math.inf

    def record(s: FlowState) -> None:
        nonlocal running
        if cfg.monitors:
            f0 = f_ratio(s.fields.ring_sq, s.fields.Hsq, cfg.monitors[0], n=s.n, a=cfg.a, b=cfg.b, eps=cfg.eps)
            fit.add(s.t, float(np.max(f0)))
        rec = pinching_record(s, cfg.monitors, a=cfg.a, b=cfg.b, eps=cfg.eps, running=running, decay_exponent=fit.rate())
        running = rec.running_ring_excess
        states.append(s)
        pinch.append(rec)
        if cfg.functionals:
            funcs.append(integrals(s))
        if on_record is not None:
            on_record(s)

    record(state)
    steps = 0
    status, message = "horizon", ""
    last_recorded = 0
    while True:
        if cfg.t1 is not None and state.t >= cfg.t1 - 1e-12 * max(1.0, abs(cfg.t1)):
            status = "horizon"
            break
        if state.scale() < threshold:
            status = "extinction"
            message = f"scale {state.scale():.3e} below {threshold:.3e}"
            break
        if steps >= cfg.max_steps:
            status = "max_steps"
            break
        if cfg.dt is not None:
            dt = cfg.dt
        elif state.profile is None:
            dt = UMBILICAL_STEP * state.radius / abs(state.velocity())
        else:
            dt = stability_bound(state, cfg.kappa)
        if cfg.t1 is not None:
            dt = min(dt, cfg.t1 - state.t)
        try:
            state = step(state, dt, cfg.kappa)
        except StabilityError as exc:
            status, message = "instability", str(exc)
            break
        except ImmersionError as exc:
            raise ImmersionError(f"{cfg.fixture}: step {steps + 1} from t={state.t:.9g}: {exc}") from exc
        steps += 1
        if steps % cfg.record_every == 0:
            record(state)
            last_recorded = steps
    if last_recorded != steps:
        record(state)
    return Trajectory(cfg, states, pinch, funcs, status, message, steps)


# ---------------------------------------------------------------------------
# verification of the evolution equations


@dataclass(frozen=True)
class GradientSlack:
    """Node minima of ``|∇h|^2 - 3/(n+2)|∇H|^2`` and
    ``|∇h̊|^2 - 2(n-1)/(n(n+2))|∇H|^2``, plus the max residual of
    ``|∇h̊|^2 = |∇h|^2 - |∇H|^2/n``."""

    slack_h: float
    slack_ring: float
    identity_residual: float

    def as_pair(self) -> tuple[float, float]:
        return self.slack_h, self.slack_ring


def verify_gradient_estimates(state: FlowState) -> GradientSlack:
    F = state.fields
    n = state.n
    s1 = F.grad_h_sq - 3.0 / (n + 2) * F.grad_H_sq
    s2 = F.grad_ring_sq - 2.0 * (n - 1) / (n * (n + 2)) * F.grad_H_sq
    ident = F.grad_ring_sq - (F.grad_h_sq - F.grad_H_sq / n)
    return GradientSlack(float(np.min(s1)), float(np.min(s2)), float(np.max(np.abs(ident))))


@dataclass(frozen=True)
class EvolutionResidual:
    """Max-norm residuals of the evolution equations of ``|h|^2``, ``|H|^2``
    and ``|h̊|^2`` over all equally spaced interior states, with the
    gradient slacks over the same states."""

    hsq: float
    Hsq: float
    ring_sq: float
    slack_h: float
    slack_ring: float
    grid: int | None
    spacing: float
    samples: int

    def as_dict(self) -> dict:
        return asdict(self)


def _evolution_rhs(F: CurvatureFields, c: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # hypersurface: R1 = |h|^4, R2 = |H|^2 |h|^2
    R1 = F.hsq**2
    R2 = F.Hsq * F.hsq
    rh = F.laplacian(F.hsq) - 2.0 * F.grad_h_sq + 2.0 * R1 + 4.0 * c * F.Hsq - 2.0 * n * c * F.hsq
    rH = F.laplacian(F.Hsq) - 2.0 * F.grad_H_sq + 2.0 * R2 + 2.0 * n * c * F.Hsq
    rr = F.laplacian(F.ring_sq) - 2.0 * F.grad_ring_sq + 2.0 * R1 - 2.0 / n * R2 - 2.0 * n * c * F.ring_sq
    return rh, rH, rr


def verify_evolution(states: Trajectory | Sequence[FlowState], rel_tol: float = 1e-9) -> EvolutionResidual:
    """Compare centred time differences with the right-hand sides.

    The grid points move radially, so the normal time derivative is
    recovered as ``f_t - u_t u_theta f_theta / W^2``.
    """
    if isinstance(states, Trajectory):
        states = states.states
    states = list(states)
    if len(states) < 3:
        raise InsufficientDataError("need at least three consecutive states")
    worst = {"hsq": 0.0, "Hsq": 0.0, "ring_sq": 0.0}
    sh, sr = math.inf, math.inf
    used = 0
    spacing = math.nan
    for k in range(1, len(states) - 1):
        a, m, b = states[k - 1], states[k], states[k + 1]
        d1t, d2t = m.t - a.t, b.t - m.t
        if abs(d1t - d2t) > rel_tol * max(d1t, d2t):
            continue
        spacing = d1t
        Fa, F, Fb = a.fields, m.fields, b.fields
        lhs = {
            "hsq": (Fb.hsq - Fa.hsq) / (2 * d1t),
            "Hsq": (Fb.Hsq - Fa.Hsq) / (2 * d1t),
            "ring_sq": (Fb.ring_sq - Fa.ring_sq) / (2 * d1t),
        }
        if m.profile is not None:
            ut = m.velocity()
            u_th = d1(m.profile, m.dtheta, m.order)
            for key, q in (("hsq", F.hsq), ("Hsq", F.Hsq), ("ring_sq", F.ring_sq)):
                lhs[key] = lhs[key] - ut * u_th * d1(q, m.dtheta, m.order) / F.W**2
        rhs = dict(zip(("hsq", "Hsq", "ring_sq"), _evolution_rhs(F, m.c, m.n)))
        for key in worst:
            worst[key] = max(worst[key], float(np.max(np.abs(lhs[key] - rhs[key]))))
        g = verify_gradient_estimates(m)
        sh, sr = min(sh, g.slack_h), min(sr, g.slack_ring)
        used += 1
    if used == 0:
        raise InsufficientDataError("no three consecutive states at a fixed step")
    return EvolutionResidual(
        hsq=worst["hsq"],
        Hsq=worst["Hsq"],
        ring_sq=worst["ring_sq"],
        slack_h=sh,
        slack_ring=sr,
        grid=states[0].grid,
        spacing=spacing,
        samples=used,
    )


@dataclass(frozen=True)
class RefinementStudy:
    """Residuals per refinement level and least-squares orders in ``h``.

    ``h`` is ``dtheta`` in profile mode (with ``dt`` shrinking like ``h^2``)
    and ``dt`` in umbilical mode.  An identity whose residual stays at
    rounding level on every level is reported with order ``inf``.
    """

    h: tuple[float, ...]
    residuals: tuple[EvolutionResidual, ...]
    orders: Mapping[str, float]

    def min_order(self) -> float:
        return min(self.orders.values())


EXACT_RESIDUAL = 1e-12


def _fit_order(h: Sequence[float], r: Sequence[float]) -> float:
    """Slope of ``log r`` against ``log h``; ``inf`` when every residual is at rounding level."""
    r = np.asarray(r, dtype=float)
    if np.all(r <= EXACT_RESIDUAL):
        return math.inf
    x = np.log(np.asarray(h, dtype=float))
    y = np.log(np.maximum(r, 1e-300))
    return float(np.polyfit(x, y, 1)[0])


def evolution_refinement(
    cfg: SimulationConfig,
    levels: Sequence[int] = (32, 64, 128),
    duration: float = 0.02,
    dt0: float | None = None,
) -> RefinementStudy:
    """Evolution residuals at a common time under simultaneous refinement.

    Profile mode: ``levels`` are grid sizes; the step at level ``k`` is
    ``dt0 / 4^k`` so ``dt ~ dtheta^2``.  Umbilical mode: ``levels`` are step
    counts over ``duration``.  Each level integrates from ``t0`` to
    ``t0 + duration`` and the residuals are evaluated at that time.
    """
    if len(levels) < 3:
        raise InsufficientDataError("need at least three refinement levels")
    hs, res = [], []
    for k, lev in enumerate(levels):
        if FIXTURES[cfg.fixture].mode == "umbilical":
            state = initial_state(cfg)
            steps = int(lev)
            dt = duration / steps
            h = dt
        else:
            state = initial_state(_with(cfg, grid=int(lev)))
            if dt0 is None:
                dt0 = 0.5 * stability_bound(initial_state(_with(cfg, grid=int(levels[0]))), cfg.kappa)
            base_steps = max(1, math.ceil(duration / dt0))
            steps = base_steps * 4**k
            dt = duration / steps
            h = state.dtheta
        for _ in range(steps - 1):
            state = step(state, dt, cfg.kappa)
        mid = step(state, dt, cfg.kappa)
        window = [state, mid, step(mid, dt, cfg.kappa)]
        hs.append(h)
        res.append(verify_evolution(window))
    orders = {key: _fit_order(hs, [getattr(r, key) for r in res]) for key in ("hsq", "Hsq", "ring_sq")}
    return RefinementStudy(tuple(hs), tuple(res), orders)


def _with(cfg: SimulationConfig, **kw) -> SimulationConfig:
    d = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    d.update(kw)
    return SimulationConfig(**d)
