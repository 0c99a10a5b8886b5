"""Acceptance gate.

Each test checks one acceptance criterion at its stated tolerance and records
a ``criterion N: PASS|FAIL`` line, printed in the terminal summary.
"""

import functools
import inspect
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from ancientflow.cli import main
from ancientflow.exact import UmbilicalSolution, hyperbolic_sphere
from ancientflow.flow import (
    FIXTURES,
    FlowState,
    SimulationConfig,
    evolution_refinement,
    run,
    verify_gradient_estimates,
)
from ancientflow.functionals import IntegralConstants, gauss_bonnet_residual, u_moment_monitor
from ancientflow.pinching import (
    GParams,
    PhiParams,
    certify_G_negative,
    phi,
    phi_double_prime,
    phi_log_derivative_identity,
    phi_prime,
    psi,
    psi_sup,
    theta_prime,
)
from ancientflow.sweeps import tensor_sweep
from ancientflow.tensor_core import check_li_li

PRODUCTION_GRID = 512
SEED = 20240611


def acceptance(number):
    """Record a PASS/FAIL line for the wrapped test; the test returns a detail string."""

    def wrap(fn):
        @functools.wraps(fn)
        def inner(request, **kwargs):
            lines = request.config.acceptance_lines
            try:
                detail = fn(**kwargs)
            except BaseException as exc:
                msg = str(exc).splitlines()[0] if str(exc) else ""
                lines.append(f"criterion {number}: FAIL ({type(exc).__name__} {msg})".rstrip())
                print(lines[-1])
                raise
            lines.append(f"criterion {number}: PASS ({detail})")
            print(lines[-1])

        # pytest reads fixture names from the signature
        sig = inspect.signature(fn)
        req = inspect.Parameter("request", inspect.Parameter.POSITIONAL_OR_KEYWORD)
        inner.__signature__ = sig.replace(parameters=[req, *sig.parameters.values()])
        return inner

    return wrap


def fitted_order(hs, errs):
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


@acceptance(1)
def test_li_li_sweep():
    ns, ps = range(2, 9), range(2, 6)
    per_cell = 1_000_000 // (len(ns) * len(ps)) + 1
    start = time.perf_counter()
    rep = tensor_sweep(ns, ps, per_cell, SEED, tolerance=1e-12)
    elapsed = time.perf_counter() - start
    min_slack = min(c.li_li for c in rep.cells)
    eq = abs(check_li_li(np.stack([np.diag([1.0, -1.0]), np.array([[0.0, 1.0], [1.0, 0.0]])])))
    total = per_cell * len(rep.cells)
    assert total >= 1_000_000
    assert min_slack >= -1e-12, min_slack
    assert eq <= 1e-14, eq
    assert elapsed < 60.0, elapsed
    return f"{total} tuples, min normalized slack {min_slack:.2e}, equality {eq:.1e}, {elapsed:.1f}s"


@acceptance(2)
def test_inequality_suite():
    rep = tensor_sweep(range(2, 9), range(1, 6), 100_000, SEED + 1, tolerance=1e-12)
    assert rep.passed, rep.failures()[:5]
    g = min(c.r1_global for c in rep.cells if c.p >= 2)
    f = min(c.r1_frame for c in rep.cells if c.p >= 2)
    r2 = max(c.r2_residual for c in rep.cells if c.p >= 2)
    c1 = max(max(c.codim1_R1, c.codim1_R2) for c in rep.cells if c.p == 1)
    assert c1 <= 1e-12
    return f"{len(rep.cells)} cells x 1e5, global {g:.1e}, frame {f:.1e}, R2 {r2:.1e}, codim-1 {c1:.1e}"


@acceptance(3)
def test_G_certified_for_random_admissible_pairs():
    rng = np.random.default_rng(SEED)
    worst = -math.inf
    for _ in range(1000):
        b = rng.uniform(1e-4, 2.0 / 3.0)
        xi = rng.uniform(0.5, 1.0 / b - 1.0)
        cert = certify_G_negative(GParams(b, xi), np.concatenate([[0.0], np.logspace(-6, 6, 4001)]))
        assert cert.admissible
        assert cert.coeffs_negative, (b, xi, cert.coeffs)
        assert cert.certified, (b, xi)
        worst = max(worst, cert.grid_max)
    return f"1000 pairs certified, largest grid value {worst:.2e}"


@acceptance(4)
def test_phi_psi_theta():
    rng = np.random.default_rng(SEED)
    err = 0.0
    for _ in range(10_000):
        n = int(rng.integers(1, 11))
        e = float(np.exp(rng.uniform(np.log(1e-2), np.log(10.0))))
        x = n * n * (1.0 + float(np.exp(rng.uniform(np.log(1e-3), np.log(1e3)))))
        lhs, rhs = phi_log_derivative_identity(x, PhiParams(n, e))
        err = max(err, abs(lhs - rhs) / max(1.0, abs(rhs)))
    assert err <= 1e-12, err

    orders = []
    for n, e, x in [(2, 1.0, 8.0), (3, 0.5, 20.0), (1, 2.5, 3.0), (4, 0.1, 40.0)]:
        pp = PhiParams(n, e)
        hs = [x / 50, x / 100, x / 200]
        d1 = [abs((phi(x + h, pp) - phi(x - h, pp)) / (2 * h) - phi_prime(x, pp)) for h in hs]
        d2 = [abs((phi(x + h, pp) - 2 * phi(x, pp) + phi(x - h, pp)) / h**2 - phi_double_prime(x, pp)) for h in hs]
        orders += [fitted_order(hs, d1), fitted_order(hs, d2)]
    assert all(1.8 <= o <= 2.2 for o in orders), orders

    gap = 0.0
    for e in (0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0):
        res = minimize_scalar(lambda y: -psi(y, e), bounds=(1e-12, 1 - 1e-12), method="bounded", options={"xatol": 1e-13})
        gap = max(gap, abs(-res.fun - psi_sup(e)))
        assert psi_sup(e) < 4
    assert gap <= 1e-8, gap
    tp = max(theta_prime(float(e)) for e in np.logspace(-4, 4, 801))
    assert tp < 0

    fp = PhiParams(2, 1.0)
    lhs, rhs = phi_log_derivative_identity(8.0, fp)
    assert phi(8.0, fp) == pytest.approx(1.0, abs=1e-15)
    assert phi_prime(8.0, fp) == pytest.approx(0.5, abs=1e-15)
    assert lhs == pytest.approx(-3.0, abs=1e-14) and rhs == -3.0
    return f"identity err {err:.1e}, FD orders {min(orders):.2f}..{max(orders):.2f}, psi gap {gap:.1e}, max theta' {tp:.1e}"


@acceptance(5)
def test_exact_solution_oracles():
    windows = {-1: (-5.0, -0.1, {}), 1: (-1.0, 0.2, {"C": 0.5}), 0: (-4.0, -0.1, {})}
    names = {-1: "hyperbolic-sphere", 1: "sphere-cap", 0: "euclidean-sphere"}
    worst = 0.0
    for c, (t0, t1, params) in windows.items():
        for n in (1, 2, 3):
            traj = run(SimulationConfig(names[c], n=n, t0=t0, t1=t1, params=params, functionals=False))
            sol = UmbilicalSolution(c, n, params.get("C", 0.5))
            err = max(abs(s.radius - sol.radius(s.t)) for s in traj.states)
            assert err <= 1e-8, (c, n, err)
            worst = max(worst, err)
    H = hyperbolic_sphere(-1.0, 2)[1]
    assert H == pytest.approx(2.01849, abs=1e-4)
    tails = [hyperbolic_sphere(t, 2)[1] - 2 for t in (-1.0, -2.0, -5.0, -10.0)]
    assert all(a > b >= 0 for a, b in zip(tails, tails[1:])) and tails[-1] < 1e-12
    return f"max oracle error {worst:.1e}, |H|(-1) = {H:.6f}, |H| - n at t=-10: {tails[-1]:.1e}"


@acceptance(6)
def test_evolution_residual_orders():
    start = time.perf_counter()
    cases = [
        ("hyperbolic-sphere", (20, 40, 80)),
        ("sphere-cap", (20, 40, 80)),
        ("euclidean-sphere", (20, 40, 80)),
        ("perturbed-sphere", (32, 64, 128)),
        ("perturbed-sphere-S3", (32, 64, 128)),
    ]
    lowest = math.inf
    for fixture, levels in cases:
        study = evolution_refinement(SimulationConfig(fixture, t0=-1.0, functionals=False), levels=levels)
        assert study.min_order() >= 1.7, (fixture, study.orders)
        lowest = min(lowest, study.min_order())
    elapsed = time.perf_counter() - start
    assert elapsed < 600
    return f"lowest fitted order {lowest:.2f} over {len(cases)} fixtures, {elapsed:.1f}s"


@acceptance(7)
def test_gradient_estimates():
    worst = math.inf
    for name in FIXTURES:
        slacks = []
        for N in (128, 256, PRODUCTION_GRID):
            traj = run(SimulationConfig(name, grid=N, seed=SEED, max_steps=200, record_every=50, functionals=False))
            slacks.append(min(min(verify_gradient_estimates(s).as_pair()) for s in traj.states))
        assert slacks[-1] >= -1e-6, (name, slacks)
        # the violation shrinks with the grid (or is at rounding level)
        deficit = [max(-v, 1e-20) for v in slacks]
        assert deficit[-1] <= deficit[0], (name, slacks)
        worst = min(worst, slacks[-1])
    return f"min slack {worst:.1e} at grid {PRODUCTION_GRID} over {len(FIXTURES)} fixtures"


@acceptance(8)
def test_maximum_principle_decay():
    cfg = SimulationConfig(
        "perturbed-sphere-S3", n=2, grid=128, t0=-1.0, t1=-0.8, monitors=("sphere_codim1",), a=1.0, record_every=50, functionals=False
    )
    traj = run(cfg)
    f = traj.max_f("sphere_codim1")
    assert f[0] < 1.0
    rise = float(np.max(np.diff(f)))
    assert rise <= 1e-8, rise
    delta = cfg.n - cfg.a
    rate = traj.decay_exponent("sphere_codim1")
    assert rate >= 2 * delta * 0.8, rate
    return f"max f {f[0]:.3e} -> {f[-1]:.3e}, largest rise {rise:.1e}, exponent {rate:.2f} >= {1.6 * delta:.2f}"


@acceptance(9)
def test_gauss_bonnet():
    worst = 0.0
    states = [
        FlowState(0, 2, -1.0, profile=np.full(PRODUCTION_GRID + 1, 1.3)),
        FlowState(1, 2, -1.0, profile=np.full(PRODUCTION_GRID + 1, 0.8)),
    ]
    for axis in (0.7, 1.2, 1.5):
        states.append(run(SimulationConfig("ellipsoid", grid=PRODUCTION_GRID, params={"axis": axis}, max_steps=0, functionals=False)).final)
    states.append(run(SimulationConfig("perturbed-sphere-S3", grid=PRODUCTION_GRID, max_steps=0, functionals=False)).final)
    for s in states:
        r = gauss_bonnet_residual(s)
        assert r <= 1e-6, r
        worst = max(worst, r)
    exact = 0.0
    for c, r in ((0, 1.0), (0, 3.7), (1, 0.4), (1, math.pi / 2), (-1, 0.9)):
        s = FlowState(c, 2, -1.0, radius=r)
        F = s.fields
        total = F.integrate(0.25 * F.Hsq - 0.5 * F.ring_sq + c)
        exact = max(exact, abs(total - 4 * math.pi))
    assert exact <= 1e-13 * 4 * math.pi, exact
    return f"max residual {worst:.1e} at grid {PRODUCTION_GRID}, analytic round {exact:.1e}"


@acceptance(10)
def test_integral_constants_and_moments():
    for n in range(3, 9):
        K = IntegralConstants(n)
        for q in (Fraction(n, 2), Fraction(n * n, 2 * (n - 2))):
            assert K.A2(q) == Fraction(n * n, 4) + 4 * q * n
            assert K.A1(q) == (q - 1) / (4 * q) / 2
        assert K.D1 == Fraction(3 * n * n + 2 * n, 4)
        assert K.D3 == Fraction(n * n + 10 * n, 4)
        assert K.D2 == Fraction(n - 2, 8 * n)
        assert K.C_n_sphere() == pytest.approx(float(K.D2 / K.D3) ** (n / 2), rel=1e-15)
    assert IntegralConstants.C_bar(0.25) == 0.5 + 16 * math.pi
    assert IntegralConstants(2).C_surface() == Fraction(1, 60)
    assert IntegralConstants(2).C_surface("sphere") == Fraction(1, 54)

    traj = run(SimulationConfig("ellipsoid", n=3, grid=128, t0=-1.0, t1=-0.8, record_every=25, params={"axis": 0.5}, functionals=False))
    rep = u_moment_monitor(traj)
    J0 = rep.J_high[0]
    assert J0 > 0
    assert rep.max_increase <= 1e-8 * J0, rep.max_increase
    return f"constants exact for n=3..8, J_(n^2/(n-2)) {J0:.3g} -> {rep.J_high[-1]:.3g}, largest rise {rep.max_increase:.1e}"


@acceptance(11)
def test_deterministic_reports(tmp_path):
    runs = [
        ["verify-tensor", "--seed", "7", "--samples", "2000", "--n", "2..4", "--p", "1..3"],
        ["scan-functions", "--seed", "7", "--samples", "100"],
        ["simulate", "--fixture", "random-perturbed-sphere", "--seed", "7", "--grid", "64", "--t1=-0.99", "--monitor", "scale_invariant"],
        ["functionals", "--fixture", "ellipsoid", "--grid", "128", "--t1=-0.995"],
        ["oracle"],
    ]
    files = 0
    for k, args in enumerate(runs):
        outs = []
        for d in ("a", "b"):
            out = tmp_path / f"{k}{d}"
            assert main(args + ["--out", str(out)]) == 0, args
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outs[0] == outs[1], args
        files += len(outs[0])
    return f"{len(runs)} commands, {files} files byte-identical"
