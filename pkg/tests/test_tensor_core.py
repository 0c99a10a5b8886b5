from fractions import Fraction
from itertools import product

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ancientflow.tensor_core import (
    FundamentalForm,
    check_li_li,
    check_r1_bound_frame,
    check_r1_bound_global,
    check_r2_identity,
    li_li_slack_batch,
    mean_curvature,
    off_direction_P_batch,
    random_orthogonal,
    random_symmetric,
    reaction_terms,
    special_frame,
    traceless,
    xi_constants,
)

LILI_D = np.diag([1.0, -1.0])
LILI_O = np.array([[0.0, 1.0], [1.0, 0.0]])


def loop_reaction(h):
    """Index-by-index evaluation of the two reaction terms."""
    p, n, _ = h.shape
    H = [sum(h[a, i, i] for i in range(n)) for a in range(p)]
    R1 = 0.0
    for a, b in product(range(p), repeat=2):
        R1 += sum(h[a, i, j] * h[b, i, j] for i, j in product(range(n), repeat=2)) ** 2
        for i, j in product(range(n), repeat=2):
            R1 += sum(h[a, i, k] * h[b, j, k] - h[b, i, k] * h[a, j, k] for k in range(n)) ** 2
    R2 = sum(sum(H[a] * h[a, i, j] for a in range(p)) ** 2 for i, j in product(range(n), repeat=2))
    return R1, R2


def embed(A, n):
    out = np.zeros((A.shape[0], n, n))
    out[:, :2, :2] = A
    return out


def sym_stack(p, n):
    return arrays(np.float64, (p, n, n), elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False)).map(
        lambda a: 0.5 * (a + a.swapaxes(1, 2))
    )


@st.composite
def forms(draw, p_min=1, p_max=4, n_min=2, n_max=5):
    p = draw(st.integers(p_min, p_max))
    n = draw(st.integers(n_min, n_max))
    return draw(sym_stack(p, n))


@pytest.mark.parametrize("n,p", [(2, 1), (3, 2), (4, 3), (2, 4), (5, 2)])
def test_reaction_terms_match_index_loops(rng, n, p):
    for _ in range(5):
        h = random_symmetric(rng, (p,), n)
        R = reaction_terms(FundamentalForm(h))
        R1, R2 = loop_reaction(h)
        assert R.R1 == pytest.approx(R1, rel=1e-12)
        assert R.R2 == pytest.approx(R2, rel=1e-12)


@given(sym_stack(1, 4))
def test_codimension_one_reaction_identities(h):
    f = FundamentalForm(h)
    R = reaction_terms(f)
    scale = max(f.hsq**2, 1e-300)
    assert abs(R.R1 - f.hsq**2) <= 1e-12 * scale
    assert abs(R.R2 - f.Hsq * f.hsq) <= 1e-12 * max(f.Hsq * f.hsq, scale)


@given(forms(p_min=2))
def test_li_li_inequality(h):
    scale = max(np.sum(h * h) ** 2, 1.0)
    assert check_li_li(h) >= -1e-12 * scale


def test_li_li_equality_configuration_exact():
    # exact rational evaluation of both sides
    A = [sp.Matrix([[1, 0], [0, -1]]), sp.Matrix([[0, 1], [1, 0]])]
    lhs = sum(((X * Y - Y * X).norm() ** 2 + ((X * Y).trace()) ** 2) for X in A for Y in A)
    rhs = sp.Rational(3, 2) * sum(X.norm() ** 2 for X in A) ** 2
    assert sp.simplify(lhs - rhs) == 0
    assert abs(check_li_li(np.stack([LILI_D, LILI_O]))) <= 1e-14


@pytest.mark.parametrize("n,p", [(2, 2), (3, 2), (4, 3), (6, 5)])
def test_li_li_equality_survives_rotations(rng, n, p):
    base = np.zeros((p, n, n))
    base[:2] = embed(np.stack([LILI_D, LILI_O]), n)
    Q = random_orthogonal(rng, (), n)
    O = random_orthogonal(rng, (), p)
    A = np.einsum("ab,bij->aij", O, Q @ base @ Q.T)
    assert abs(check_li_li(A)) <= 1e-12 * np.sum(A * A) ** 2


def test_li_li_fault_injection_detects_equality_case():
    A = np.stack([LILI_D, LILI_O])
    assert li_li_slack_batch(A, rhs_scale=0.99) < 0


@given(forms(p_min=2))
def test_r1_global_bound(h):
    f = FundamentalForm(h)
    assert check_r1_bound_global(f) >= -1e-12 * max(f.hsq**2, 1.0)


@given(forms(p_min=2))
def test_r1_frame_bound(h):
    f = FundamentalForm(h)
    assert check_r1_bound_frame(f) >= -1e-12 * max(f.hsq**2, 1.0)


@given(forms())
def test_r2_identity(h):
    f = FundamentalForm(h)
    assert check_r2_identity(f) <= 1e-12 * max(f.hsq**2, 1.0)


@pytest.mark.parametrize("n,p", [(2, 2), (3, 3), (5, 4)])
def test_global_bound_equality_with_umbilic_part(rng, n, p):
    A = np.zeros((p, n, n))
    A[:2] = embed(np.stack([LILI_D, LILI_O]), n)
    H = rng.standard_normal(p)
    h = A + (H / n)[:, None, None] * np.eye(n)
    f = FundamentalForm(h)
    assert abs(check_r1_bound_global(f)) <= 1e-12 * f.hsq**2


@pytest.mark.parametrize("p", [2, 3, 5])
def test_frame_bound_equality_for_single_slice(rng, p):
    h = np.zeros((p, 4, 4))
    h[0] = random_symmetric(rng, (), 4)
    O = random_orthogonal(rng, (), p)
    f = FundamentalForm(np.einsum("ab,bij->aij", O, h))
    assert abs(check_r1_bound_frame(f)) <= 1e-12 * f.hsq**2


@given(forms(p_min=2))
def test_special_frame_properties(h):
    f = FundamentalForm(h)
    fr = special_frame(f)
    rot = fr.rotated
    assert np.allclose(rot.coeffs[0], np.diag(fr.lambdas), atol=1e-9 * max(1.0, f.hsq))
    assert rot.hsq == pytest.approx(f.hsq, rel=1e-12, abs=1e-12)
    assert rot.Hsq == pytest.approx(f.Hsq, rel=1e-10, abs=1e-9)
    if not fr.degenerate:
        Hrot = mean_curvature(rot)
        assert Hrot[0] == pytest.approx(fr.Hnorm, rel=1e-10, abs=1e-9)
        assert np.allclose(Hrot[1:], 0.0, atol=1e-9 * max(1.0, fr.Hnorm))
    P_batch, _ = off_direction_P_batch(h)
    assert float(P_batch) == pytest.approx(fr.P, rel=1e-9, abs=1e-9 * max(1.0, f.hsq))


def test_degenerate_frame_flagged():
    f = FundamentalForm(np.stack([LILI_D, LILI_O]))
    assert special_frame(f).degenerate


@given(forms())
def test_traceless_norm(h):
    f = FundamentalForm(h)
    assert traceless(f).hsq == pytest.approx(f.hsq - f.Hsq / f.n, rel=1e-10, abs=1e-9)
    assert f.ringsq == pytest.approx(traceless(f).hsq)


@pytest.mark.parametrize("p,expected", [(2, (Fraction(1, 2), Fraction(1))), (3, (Fraction(2, 3), Fraction(3, 2))), (7, (Fraction(2, 3), Fraction(3, 2)))])
def test_xi_constants(p, expected):
    assert xi_constants(p) == expected


def test_invalid_inputs():
    with pytest.raises(ValueError):
        xi_constants(1)
    with pytest.raises(ValueError):
        FundamentalForm(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        FundamentalForm(np.full((1, 2, 2), np.nan))
    with pytest.raises(ValueError):
        check_li_li(np.eye(2)[None])
    with pytest.raises(ValueError):
        check_r1_bound_global(FundamentalForm(np.eye(2)))
    with pytest.raises(ValueError):
        check_r1_bound_frame(FundamentalForm(np.eye(2)))
