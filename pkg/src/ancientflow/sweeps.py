"""Randomized sweeps of the pointwise inequalities over an ``(n, p)`` lattice.

Each cell draws its samples from its own stream seeded by ``(seed, n, p)``
in fixed-size chunks, so results and worst-case indices do not depend on the
cell order or on the number of worker threads.  A chunk mixes Gaussian
forms, clipped Cauchy forms and three extremal families on which the
inequalities are equalities:

* ``lili``: rotated and normal-mixed copies of ``diag(1,-1)``, ``offdiag(1,1)``;
* ``umbilic``: the same traceless pair plus an arbitrary mean-curvature part
  (equality in the global ``R1`` bound);
* ``single``: one nonzero normal slice (equality in the frame ``R1`` bound).

Slacks are divided by the scale ``|h|^4`` before they are compared with the
tolerance.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .tensor_core import (
    li_li_slack_batch,
    mean_curvature_batch,
    norm_sq_batch,
    r1_frame_slack_batch,
    r1_global_slack_batch,
    r2_residual_batch,
    random_orthogonal,
    random_symmetric,
    reaction_batch,
)

__all__ = ["CellResult", "WorstCase", "SweepReport", "tensor_sweep", "replay_sample", "thread_count", "CHUNK"]

CHUNK = 8192
FAMILIES = ("gauss", "cauchy", "lili", "umbilic", "single")
# share of each family within a chunk
_WEIGHTS = (0.55, 0.15, 0.1, 0.1, 0.1)


def thread_count(default: int | None = None) -> int:
    env = os.environ.get("ANCIENTFLOW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return default or min(4, os.cpu_count() or 1)


def _equality_pair(rng: np.random.Generator, m: int, n: int, p: int) -> np.ndarray:
    base = np.zeros((p, n, n))
    base[0, 0, 0], base[0, 1, 1] = 1.0, -1.0
    base[1, 0, 1] = base[1, 1, 0] = 1.0
    Q = random_orthogonal(rng, (m,), n)
    O = random_orthogonal(rng, (m,), p)
    scale = np.exp(rng.uniform(-3.0, 3.0, size=m))
    rot = np.einsum("mik,akl,mjl->maij", Q, base, Q)
    return scale[:, None, None, None] * np.einsum("mab,mbij->maij", O, rot)


def _chunk(rng: np.random.Generator, m: int, n: int, p: int) -> np.ndarray:
    counts = [int(w * m) for w in _WEIGHTS]
    counts[0] += m - sum(counts)
    parts = [
        random_symmetric(rng, (counts[0], p), n),
        random_symmetric(rng, (counts[1], p), n, heavy_tail=True),
    ]
    if p >= 2:
        parts.append(_equality_pair(rng, counts[2], n, p))
        A = _equality_pair(rng, counts[3], n, p)
        H = rng.standard_normal((counts[3], p)) * np.exp(rng.uniform(-3.0, 3.0, size=(counts[3], 1)))
        parts.append(A + (H / n)[..., None, None] * np.eye(n))
        single = np.zeros((counts[4], p, n, n))
        single[:, 0] = random_symmetric(rng, (counts[4],), n)
        O = random_orthogonal(rng, (counts[4],), p)
        parts.append(np.einsum("mab,mbij->maij", O, single))
    else:
        parts.append(random_symmetric(rng, (m - counts[0] - counts[1],), n)[:, None])
    # interleave families so every prefix of a chunk sees all of them
    return np.concatenate(parts, axis=0)[rng.permutation(m)]


def _cell_samples(seed: int, n: int, p: int, samples: int):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(n), int(p)]))
    done = 0
    while done < samples:
        m = min(CHUNK, samples - done)
        yield done, _chunk(rng, CHUNK, n, p)[:m]
        done += m


def replay_sample(seed: int, n: int, p: int, index: int) -> np.ndarray:
    """Regenerate sample ``index`` of cell ``(n, p)``."""
    for start, h in _cell_samples(seed, n, p, index + 1):
        if start <= index < start + h.shape[0]:
            return h[index - start]
    raise IndexError(index)


@dataclass(frozen=True)
class WorstCase:
    check: str
    n: int
    p: int
    index: int
    value: float
    sample: list

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CellResult:
    """Normalized extremes for one cell.  ``None`` marks a check not defined for ``p``."""

    n: int
    p: int
    samples: int
    li_li: float | None
    r1_global: float | None
    r1_frame: float | None
    r2_residual: float | None
    codim1_R1: float | None
    codim1_R2: float | None
    worst: WorstCase

    def as_dict(self) -> dict:
        d = asdict(self)
        d["worst"] = self.worst.as_dict()
        return d


def _run_cell(seed: int, n: int, p: int, samples: int, rhs_scale: float) -> CellResult:
    best = {}

    def track(name, values, start, h, lower_is_worse=True):
        k = int(np.argmin(values) if lower_is_worse else np.argmax(values))
        v = float(values[k])
        old = best.get(name)
        if old is None or (v < old[0] if lower_is_worse else v > old[0]):
            best[name] = (v, start + k, h[k])

    for start, h in _cell_samples(seed, n, p, samples):
        scale = np.maximum(norm_sq_batch(h) ** 2, np.finfo(float).tiny)
        if p >= 2:
            track("li_li", li_li_slack_batch(h, rhs_scale) / scale, start, h)
            track("r1_global", r1_global_slack_batch(h, rhs_scale) / scale, start, h)
            track("r1_frame", r1_frame_slack_batch(h, rhs_scale) / scale, start, h)
            track("r2_residual", r2_residual_batch(h) / scale, start, h, lower_is_worse=False)
        else:
            R1, R2 = reaction_batch(h)
            hsq = norm_sq_batch(h)
            Hsq = np.sum(mean_curvature_batch(h) ** 2, axis=-1)
            track("codim1_R1", np.abs(R1 - rhs_scale * hsq**2) / scale, start, h, lower_is_worse=False)
            track("codim1_R2", np.abs(R2 - rhs_scale * Hsq * hsq) / scale, start, h, lower_is_worse=False)

    def val(name):
        return best[name][0] if name in best else None

    # the reported worst case is the one closest to failing
    candidates = []
    for name, (v, idx, h) in best.items():
        margin = v if name in ("li_li", "r1_global", "r1_frame") else -v
        candidates.append((margin, name, idx, h, v))
    margin, name, idx, h, v = min(candidates, key=lambda c: (c[0], c[1]))
    return CellResult(
        n=n,
        p=p,
        samples=samples,
        li_li=val("li_li"),
        r1_global=val("r1_global"),
        r1_frame=val("r1_frame"),
        r2_residual=val("r2_residual"),
        codim1_R1=val("codim1_R1"),
        codim1_R2=val("codim1_R2"),
        worst=WorstCase(name, n, p, idx, v, h.tolist()),
    )


@dataclass(frozen=True)
class SweepReport:
    seed: int
    samples: int
    tolerance: float
    cells: tuple[CellResult, ...]

    def failures(self) -> list[tuple[int, int, str, float]]:
        out = []
        tol = self.tolerance
        for c in self.cells:
            for name in ("li_li", "r1_global", "r1_frame"):
                v = getattr(c, name)
                if v is not None and v < -tol:
                    out.append((c.n, c.p, name, v))
            for name in ("r2_residual", "codim1_R1", "codim1_R2"):
                v = getattr(c, name)
                if v is not None and v > tol:
                    out.append((c.n, c.p, name, v))
        return out

    @property
    def passed(self) -> bool:
        return not self.failures()

    def worst(self) -> WorstCase:
        def margin(c: CellResult) -> float:
            w = c.worst
            return w.value if w.check in ("li_li", "r1_global", "r1_frame") else -w.value

        return min(self.cells, key=lambda c: (margin(c), c.n, c.p)).worst

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "samples_per_cell": self.samples,
            "tolerance": self.tolerance,
            "cells": [c.as_dict() for c in self.cells],
            "failures": [list(f) for f in self.failures()],
            "worst": self.worst().as_dict(),
            "passed": self.passed,
        }


def tensor_sweep(
    n_values,
    p_values,
    samples: int,
    seed: int,
    tolerance: float = 1e-12,
    rhs_scale: float = 1.0,
    threads: int | None = None,
) -> SweepReport:
    """Run every check on ``samples`` forms per ``(n, p)`` cell."""
    cells = [(int(n), int(p)) for n in n_values for p in p_values]
    workers = threads or thread_count()
    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _run_cell(seed, c[0], c[1], samples, rhs_scale), cells))
    else:
        results = [_run_cell(seed, n, p, samples, rhs_scale) for n, p in cells]
    return SweepReport(int(seed), int(samples), float(tolerance), tuple(results))
