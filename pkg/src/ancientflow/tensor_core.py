"""Pointwise algebra of the second fundamental form.

A form is stored as an array ``h[alpha, i, j]`` of shape ``(p, n, n)``: one
symmetric ``n x n`` slice per normal direction.  Every quantity here is a
pure function of that array.  The ``*_batch`` kernels accept any leading
batch shape ``(..., p, n, n)`` and are what the randomized sweeps use; the
single-form functions are thin wrappers around them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "FundamentalForm",
    "FrameDecomposition",
    "ReactionTerms",
    "mean_curvature",
    "traceless",
    "reaction_terms",
    "special_frame",
    "check_li_li",
    "check_r1_bound_global",
    "check_r1_bound_frame",
    "check_r2_identity",
    "xi_constants",
    "random_symmetric",
    "random_orthogonal",
]

FRAME_TOL = 1e-12
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class FundamentalForm:
    """Second fundamental form ``h[alpha][i][j]`` at one point."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.coeffs, dtype=float)
        if a.ndim == 2:
            a = a[None]
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ValueError(f"coeffs must have shape (p, n, n), got {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("need p >= 1 and n >= 1")
        if not np.all(np.isfinite(a)):
            raise ValueError("coeffs must be finite")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.swapaxes(1, 2))) > SYMMETRY_TOL * scale:
            raise ValueError("every slice h[alpha] must be symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @classmethod
    def from_slices(cls, *slices) -> "FundamentalForm":
        return cls(np.stack([np.asarray(s, dtype=float) for s in slices]))

    @property
    def p(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    @property
    def hsq(self) -> float:
        """|h|^2"""
        return float(norm_sq_batch(self.coeffs))

    @property
    def Hsq(self) -> float:
        """|H|^2"""
        return float(np.sum(mean_curvature_batch(self.coeffs) ** 2))

    @property
    def ringsq(self) -> float:
        """|h̊|^2, computed from the trace-free form itself."""
        return float(norm_sq_batch(traceless_batch(self.coeffs)))


@dataclass(frozen=True)
class ReactionTerms:
    R1: float
    R2: float


@dataclass(frozen=True)
class FrameDecomposition:
    """Form data in the frame with ``H = |H| nu_1`` and ``h^1`` diagonal.

    ``rotated`` is the whole form expressed in that frame; it is kept so the
    reconstruction of frame-independent quantities can be checked.
    """

    Hnorm: float
    lambdas: np.ndarray
    ring_lambdas: np.ndarray
    off_components: np.ndarray
    P: float
    degenerate: bool
    rotated: FundamentalForm = field(repr=False)


# ---------------------------------------------------------------------------
# batched kernels


def norm_sq_batch(h: np.ndarray) -> np.ndarray:
    return np.sum(h * h, axis=(-3, -2, -1))


def mean_curvature_batch(h: np.ndarray) -> np.ndarray:
    return np.trace(h, axis1=-2, axis2=-1)


def traceless_batch(h: np.ndarray) -> np.ndarray:
    n = h.shape[-1]
    H = mean_curvature_batch(h)
    return h - (H / n)[..., None, None] * np.eye(n)


def gram_batch(h: np.ndarray) -> np.ndarray:
    """``tr(A_alpha A_beta)`` for every pair, shape ``(..., p, p)``."""
    return np.einsum("...aij,...bij->...ab", h, h)


def commutator_sq_batch(h: np.ndarray) -> np.ndarray:
    """``sum_{alpha,beta} |A_alpha A_beta - A_beta A_alpha|^2``."""
    p = h.shape[-3]
    total = np.zeros(h.shape[:-3])
    for a in range(p):
        for b in range(a + 1, p):
            prod = h[..., a, :, :] @ h[..., b, :, :]
            comm = prod - prod.swapaxes(-1, -2)
            total += 2.0 * np.sum(comm * comm, axis=(-2, -1))
    return total


def reaction_batch(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    g = gram_batch(h)
    R1 = np.sum(g * g, axis=(-2, -1)) + commutator_sq_batch(h)
    H = mean_curvature_batch(h)
    HA = np.einsum("...a,...aij->...ij", H, h)
    R2 = np.sum(HA * HA, axis=(-2, -1))
    return R1, R2


def li_li_slack_batch(A: np.ndarray, rhs_scale: float = 1.0) -> np.ndarray:
    g = gram_batch(A)
    lhs = commutator_sq_batch(A) + np.sum(g * g, axis=(-2, -1))
    return rhs_scale * 1.5 * norm_sq_batch(A) ** 2 - lhs


def off_direction_P_batch(h: np.ndarray, tol: float = FRAME_TOL) -> tuple[np.ndarray, np.ndarray]:
    """``P`` without an eigendecomposition, plus the degenerate-frame mask.

    In the special frame ``|h^1|^2`` is the squared norm of the slice along
    ``H/|H|``, so ``P = |h|^2 - |sum_a (H^a/|H|) h^a|^2``.  When ``|H|`` is
    below ``tol`` the slice of largest norm plays the role of ``nu_1``.
    """
    H = mean_curvature_batch(h)
    Hn = np.sqrt(np.sum(H * H, axis=-1))
    degenerate = Hn < tol * np.maximum(1.0, np.sqrt(norm_sq_batch(h)))
    safe = np.where(degenerate, 1.0, Hn)
    first = np.einsum("...a,...aij->...ij", H / safe[..., None], h)
    first_sq = np.sum(first * first, axis=(-2, -1))
    slice_sq = np.sum(h * h, axis=(-2, -1))
    first_sq = np.where(degenerate, np.max(slice_sq, axis=-1), first_sq)
    P = np.maximum(norm_sq_batch(h) - first_sq, 0.0)
    return P, degenerate


def r1_global_slack_batch(h: np.ndarray, rhs_scale: float = 1.0) -> np.ndarray:
    n = h.shape[-1]
    R1, R2 = reaction_batch(h)
    ring = norm_sq_batch(traceless_batch(h))
    Hsq = np.sum(mean_curvature_batch(h) ** 2, axis=-1)
    rhs = 1.5 * ring**2 + (2.0 / n) * R2 - Hsq**2 / n**2
    return rhs_scale * rhs - R1


def r1_frame_slack_batch(h: np.ndarray, rhs_scale: float = 1.0) -> np.ndarray:
    n, p = h.shape[-1], h.shape[-3]
    xi, _ = xi_constants(p)
    R1, _ = reaction_batch(h)
    hsq = norm_sq_batch(h)
    ring = norm_sq_batch(traceless_batch(h))
    Hsq = np.sum(mean_curvature_batch(h) ** 2, axis=-1)
    P, _ = off_direction_P_batch(h)
    rhs = hsq**2 + (2.0 * ring - (2.0 / n) * Hsq) * P - P**2 / float(xi)
    return rhs_scale * rhs - R1


def r2_residual_batch(h: np.ndarray) -> np.ndarray:
    _, R2 = reaction_batch(h)
    Hsq = np.sum(mean_curvature_batch(h) ** 2, axis=-1)
    P, _ = off_direction_P_batch(h)
    return np.abs(R2 - Hsq * (norm_sq_batch(h) - P))


# ---------------------------------------------------------------------------
# single-form API


def mean_curvature(h: FundamentalForm) -> np.ndarray:
    """Mean curvature vector ``H^alpha = sum_i h^alpha_ii``."""
    return mean_curvature_batch(h.coeffs)


def traceless(h: FundamentalForm) -> FundamentalForm:
    """Trace-free part ``h - (1/n) H (x) g``."""
    return FundamentalForm(traceless_batch(h.coeffs))


def reaction_terms(h: FundamentalForm) -> ReactionTerms:
    R1, R2 = reaction_batch(h.coeffs)
    return ReactionTerms(float(R1), float(R2))


def _normal_frame(H: np.ndarray, h: np.ndarray, tol: float) -> tuple[np.ndarray, bool]:
    """Orthonormal normal frame (as columns) whose first vector is ``H/|H|``."""
    p = H.shape[0]
    Hn = float(np.linalg.norm(H))
    scale = max(1.0, float(np.sqrt(np.sum(h * h))))
    if Hn < tol * scale:
        # |H| = 0: the slice of largest norm becomes nu_1, others keep their order
        lead = int(np.argmax(np.sum(h * h, axis=(1, 2))))
        order = [lead] + [a for a in range(p) if a != lead]
        return np.eye(p)[:, order], True
    target = H / Hn
    e1 = np.zeros(p)
    e1[0] = 1.0
    v = e1 - target
    if np.linalg.norm(v) < 1e-14:
        return np.eye(p), False
    Q = np.eye(p) - 2.0 * np.outer(v, v) / np.dot(v, v)
    return Q, False


def special_frame(h: FundamentalForm, tol: float = FRAME_TOL) -> FrameDecomposition:
    """Rotate to the frame with ``nu_1 = H/|H|`` and diagonal ``h^1``.

    Eigenvalues are ordered descending, ties by original index.  For
    ``|H| < tol`` the frame is degenerate and the slice of largest norm is
    taken as ``nu_1``.
    """
    a = h.coeffs
    H = mean_curvature_batch(a)
    Q, degenerate = _normal_frame(H, a, tol)
    b = np.einsum("ab,aij->bij", Q, a)
    w, E = np.linalg.eigh(b[0])
    order = np.argsort(-w, kind="stable")
    w, E = w[order], E[:, order]
    b = np.einsum("ik,aij,jl->akl", E, b, E)
    b[0] = np.diag(w)
    b = 0.5 * (b + b.swapaxes(1, 2))
    Hn = float(np.linalg.norm(H))
    off = b[1:].copy()
    P = float(np.sum(off * off))
    return FrameDecomposition(
        Hnorm=Hn,
        lambdas=w,
        ring_lambdas=w - Hn / h.n,
        off_components=off,
        P=P,
        degenerate=degenerate,
        rotated=FundamentalForm(b),
    )


def check_li_li(A, rhs_scale: float = 1.0) -> float:
    """Slack of the commutator/trace matrix inequality for ``p >= 2`` symmetric matrices.

    Returns ``(3/2)(sum|A_a|^2)^2 - sum|[A_a, A_b]|^2 - sum tr(A_a A_b)^2``.
    """
    arr = np.asarray(A, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError("expected a stack of square matrices")
    if arr.shape[0] < 2:
        raise ValueError("need p >= 2 matrices")
    scale = max(1.0, float(np.max(np.abs(arr)))) if arr.size else 1.0
    if np.max(np.abs(arr - arr.swapaxes(1, 2)), initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrices must be symmetric")
    return float(li_li_slack_batch(arr, rhs_scale))


def _require_codim2(h: FundamentalForm) -> None:
    if h.p < 2:
        raise ValueError("bound requires codimension p >= 2")


def check_r1_bound_global(h: FundamentalForm) -> float:
    """``(3/2)|h̊|^4 + (2/n) R2 - |H|^4/n^2 - R1``."""
    _require_codim2(h)
    return float(r1_global_slack_batch(h.coeffs))


def check_r1_bound_frame(h: FundamentalForm) -> float:
    """``|h|^4 + (2|h̊|^2 - (2/n)|H|^2) P - P^2/xi - R1`` with ``P`` from the special frame."""
    _require_codim2(h)
    fr = special_frame(h)
    xi, _ = xi_constants(h.p)
    R1 = reaction_terms(h).R1
    hsq, ring, Hsq = h.hsq, h.ringsq, h.Hsq
    rhs = hsq**2 + (2.0 * ring - (2.0 / h.n) * Hsq) * fr.P - fr.P**2 / float(xi)
    return rhs - R1


def check_r2_identity(h: FundamentalForm) -> float:
    """``|R2 - |H|^2 (|h|^2 - P)|``."""
    fr = special_frame(h)
    R2 = reaction_terms(h).R2
    return abs(R2 - h.Hsq * (h.hsq - fr.P))


def xi_constants(p: int) -> tuple[Fraction, Fraction]:
    """``(xi, xi_tilde)`` for codimension ``p >= 2``: ``(1/2, 1)`` or ``(2/3, 3/2)``."""
    if p < 2:
        raise ValueError("xi constants are defined for p >= 2")
    sgn = 0 if p == 2 else 1
    return Fraction(2, 4 - sgn), Fraction(1) + Fraction(sgn, 2)


# ---------------------------------------------------------------------------
# sampling helpers


def random_symmetric(
    rng: np.random.Generator, size: tuple[int, ...], n: int, heavy_tail: bool = False, clip: float = 1e3
) -> np.ndarray:
    """Symmetrized random matrices, shape ``size + (n, n)``."""
    shape = tuple(size) + (n, n)
    if heavy_tail:
        g = np.clip(rng.standard_cauchy(shape), -clip, clip)
    else:
        g = rng.standard_normal(shape)
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def random_orthogonal(rng: np.random.Generator, size: tuple[int, ...], n: int) -> np.ndarray:
    """Haar-distributed orthogonal matrices via sign-corrected QR."""
    g = rng.standard_normal(tuple(size) + (n, n))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    return q * d[..., None, :]
