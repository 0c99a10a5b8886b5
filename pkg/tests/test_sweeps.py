import json

import numpy as np
import pytest

from ancientflow.sweeps import CHUNK, replay_sample, tensor_sweep, thread_count
from ancientflow.tensor_core import (
    FundamentalForm,
    check_li_li,
    li_li_slack_batch,
    norm_sq_batch,
    r1_frame_slack_batch,
    r1_global_slack_batch,
    r2_residual_batch,
)


def test_sweep_passes_and_is_deterministic():
    a = tensor_sweep([2, 3], [1, 2, 3], 3000, seed=11, threads=1)
    b = tensor_sweep([2, 3], [1, 2, 3], 3000, seed=11, threads=4)
    assert a.passed
    assert json.dumps(a.as_dict(), sort_keys=True) == json.dumps(b.as_dict(), sort_keys=True)


def test_seed_changes_samples():
    a = tensor_sweep([3], [2], 500, seed=1, threads=1)
    b = tensor_sweep([3], [2], 500, seed=2, threads=1)
    assert a.cells[0].worst.sample != b.cells[0].worst.sample


def test_cell_results_do_not_depend_on_lattice():
    small = tensor_sweep([4], [3], 2000, seed=5, threads=1)
    big = tensor_sweep([2, 4], [2, 3], 2000, seed=5, threads=2)
    cell = next(c for c in big.cells if (c.n, c.p) == (4, 3))
    assert cell.as_dict() == small.cells[0].as_dict()


def test_equality_families_reach_zero_slack():
    rep = tensor_sweep([2, 5], [2, 4], 4000, seed=3, threads=1)
    for c in rep.cells:
        assert abs(c.li_li) <= 1e-12
        assert abs(c.r1_global) <= 1e-12
        assert abs(c.r1_frame) <= 1e-12
        assert c.codim1_R1 is None


def test_worst_sample_replays():
    rep = tensor_sweep([3], [2], CHUNK + 100, seed=9, threads=1)
    w = rep.worst()
    h = replay_sample(9, w.n, w.p, w.index)
    assert np.array_equal(h, np.array(w.sample))
    slack = {"li_li": li_li_slack_batch, "r1_global": r1_global_slack_batch, "r1_frame": r1_frame_slack_batch, "r2_residual": r2_residual_batch}
    assert slack[w.check](h) / norm_sq_batch(h) ** 2 == w.value == getattr(rep.cells[0], w.check)


def test_replay_across_chunk_boundary():
    h = replay_sample(4, 2, 2, CHUNK + 3)
    assert h.shape == (2, 2, 2)
    assert np.allclose(h, h.swapaxes(-1, -2))


@pytest.mark.parametrize("samples", [50, 700])
def test_prefix_consistency(samples):
    # a short run sees exactly the first samples of a long run
    long = [replay_sample(2, 3, 3, k) for k in range(samples)]
    rep = tensor_sweep([3], [3], samples, seed=2, threads=1)
    idx = rep.cells[0].worst.index
    assert idx < samples
    assert np.array_equal(long[idx], np.array(rep.cells[0].worst.sample))


def test_small_prefix_still_sees_equality_cases():
    rep = tensor_sweep([3], [2], 200, seed=0, threads=1)
    assert abs(rep.cells[0].li_li) <= 1e-12


def test_codimension_one_cells():
    rep = tensor_sweep([2, 4], [1], 2000, seed=8, threads=1)
    for c in rep.cells:
        assert c.li_li is None and c.r1_global is None
        assert c.codim1_R1 <= 1e-12 and c.codim1_R2 <= 1e-12
    assert rep.passed


def test_fault_injection_fails_every_cell():
    rep = tensor_sweep([2, 3, 4], [2, 3], 400, seed=1, rhs_scale=0.99, threads=1)
    assert not rep.passed
    failing = {(n, p, name) for n, p, name, _ in rep.failures()}
    for n in (2, 3, 4):
        for p in (2, 3):
            assert {(n, p, "li_li"), (n, p, "r1_global"), (n, p, "r1_frame")} <= failing
    assert rep.worst().value < 0
    w = rep.worst()
    assert check_li_li(np.array(w.sample)) >= -1e-12 * max(1.0, FundamentalForm(np.array(w.sample)).hsq ** 2)


def test_report_layout():
    d = tensor_sweep([2], [2], 100, seed=0, threads=1).as_dict()
    assert set(d) == {"seed", "samples_per_cell", "tolerance", "cells", "failures", "worst", "passed"}
    assert d["failures"] == [] and d["passed"] is True


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("ANCIENTFLOW_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("ANCIENTFLOW_THREADS", "junk")
    assert thread_count(2) == 2
