"""Sine-basis modal models on an interval.

Everything here lives on the first N Dirichlet sine modes of (0, L),

    phi_k(x) = sqrt(2/L) * sin(k pi x / L),   k = 1..N,

which are L2-orthonormal and diagonalize both the Laplacian (wave stiffness,
lambda_k = mu_k) and the bilaplacian with simply supported ends (beam
stiffness, lambda_k = mu_k**2). A third "abstract" kind accepts any strictly
increasing positive stiffness spectrum on the same geometry.

Modal vectors are plain 1-D float arrays of length N (coefficients against
phi_k); nodal fields are samples at the interior grid x_j = j L / (M + 1),
j = 1..M, with uniform quadrature weight L / (M + 1). On that grid the
discrete sine sums are exactly orthogonal for k <= M, so modal<->nodal
round trips and the quadrature Parseval identity hold to rounding as long
as M >= N (we require M >= 4N so power nonlinearities are well resolved).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

WAVE = "wave"
BEAM = "beam"
ABSTRACT = "abstract"
KINDS = (WAVE, BEAM, ABSTRACT)

Z_L2 = "l2"
Z_H10 = "h10"
Z_LP = "l_alpha_plus_2"


@dataclass(frozen=True)
class ZSpace:
    """Intermediate space between the energy space and the base space.

    kind "l2" is the base space itself, "h10" the first-order Dirichlet
    space (mu-weighted), and "l_alpha_plus_2" the Lebesgue space of order
    alpha + 2 evaluated by nodal quadrature.
    """

    kind: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in (Z_L2, Z_H10, Z_LP):
            raise ValueError(f"unknown Z-space kind {self.kind!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")


def z_l2() -> ZSpace:
    return ZSpace(Z_L2)


def z_h10() -> ZSpace:
    return ZSpace(Z_H10)


def z_lp(alpha: float) -> ZSpace:
    return ZSpace(Z_LP, float(alpha))


@dataclass(frozen=True)
class SpectralOperator:
    """Diagonal positive stiffness operator on the truncated sine basis.

    Fields are immutable after construction; instances may be shared freely
    across threads. `basis[j, k] = phi_{k+1}(x_j)` and `quad_weight` is the
    uniform quadrature weight for the interior grid `nodes`.
    """

    kind: str
    num_modes: int
    length: float
    mu: np.ndarray
    lam: np.ndarray
    num_quad: int
    embedding_P: float
    nodes: np.ndarray
    quad_weight: float
    basis: np.ndarray

    def __repr__(self):  # arrays make the default repr unreadable
        return (
            f"SpectralOperator(kind={self.kind!r}, num_modes={self.num_modes}, "
            f"length={self.length:g}, num_quad={self.num_quad})"
        )


def make_operator(kind, num_modes, length=math.pi, lambda_override=None,
                  num_quad=None) -> SpectralOperator:
    """Build an operator of the given kind.

    lambda_override is required for (and only allowed with) the abstract
    kind and must be strictly increasing and positive. num_quad defaults to
    4 * num_modes and may only be raised.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown operator kind {kind!r}")
    num_modes = int(num_modes)
    if num_modes < 1:
        raise ValueError("num_modes must be a positive integer")
    length = float(length)
    if not length > 0:
        raise ValueError("length must be positive")

    k = np.arange(1, num_modes + 1, dtype=float)
    mu = (k * (math.pi / length)) ** 2

    if kind == ABSTRACT:
        if lambda_override is None:
            raise ValueError("abstract kind requires lambda_override")
        lam = np.asarray(lambda_override, dtype=float)
        if lam.shape != (num_modes,):
            raise ValueError("lambda_override must have length num_modes")
        if not np.all(lam > 0):
            raise ValueError("lambda_override must be strictly positive")
        if num_modes > 1 and not np.all(np.diff(lam) > 0):
            raise ValueError("lambda_override must be strictly increasing")
    else:
        if lambda_override is not None:
            raise ValueError("lambda_override only valid for the abstract kind")
        lam = mu if kind == WAVE else mu ** 2

    if num_quad is None:
        num_quad = 4 * num_modes
    num_quad = int(num_quad)
    if num_quad < 4 * num_modes:
        raise ValueError("num_quad must be at least 4 * num_modes")

    j = np.arange(1, num_quad + 1, dtype=float)
    nodes = j * (length / (num_quad + 1))
    quad_weight = length / (num_quad + 1)
    # basis[j, k] = sqrt(2/L) sin((k+1) pi x_j / L)
    basis = np.sqrt(2.0 / length) * np.sin(
        np.outer(nodes, k) * (math.pi / length))

    lam = lam.copy()
    mu = mu.copy()
    for arr in (lam, mu, nodes, basis):
        arr.setflags(write=False)

    return SpectralOperator(
        kind=kind, num_modes=num_modes, length=length, mu=mu, lam=lam,
        num_quad=num_quad, embedding_P=1.0 / math.sqrt(lam[0]),
        nodes=nodes, quad_weight=quad_weight, basis=basis)


def _check_modal(op: SpectralOperator, m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (op.num_modes,):
        raise ValueError(
            f"modal vector has shape {m.shape}, expected ({op.num_modes},)")
    return m


def _check_nodal(op: SpectralOperator, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (op.num_quad,):
        raise ValueError(
            f"nodal field has shape {f.shape}, expected ({op.num_quad},)")
    return f


def norm_h(op: SpectralOperator, m) -> float:
    """Base-space norm: Parseval against the orthonormal sine modes."""
    m = _check_modal(op, m)
    return float(np.sqrt(np.dot(m, m)))


def norm_v(op: SpectralOperator, m) -> float:
    """Energy-space norm sqrt(sum lambda_k m_k^2)."""
    m = _check_modal(op, m)
    return float(np.sqrt(np.dot(op.lam * m, m)))


def norm_v_dual(op: SpectralOperator, m) -> float:
    """Dual energy norm sqrt(sum m_k^2 / lambda_k)."""
    m = _check_modal(op, m)
    return float(np.sqrt(np.dot(m / op.lam, m)))


def norm_z(op: SpectralOperator, m, z: ZSpace) -> float:
    """Norm of the intermediate space z. The l_alpha_plus_2 norm is the
    (alpha+2)-th root of the nodal quadrature of |f|**(alpha+2)."""
    m = _check_modal(op, m)
    if z.kind == Z_L2:
        return norm_h(op, m)
    if z.kind == Z_H10:
        return float(np.sqrt(np.dot(op.mu * m, m)))
    p = z.alpha + 2.0
    f = to_nodal(op, m)
    return float((op.quad_weight * np.sum(np.abs(f) ** p)) ** (1.0 / p))


def h_inner(op: SpectralOperator, a, b) -> float:
    a = _check_modal(op, a)
    b = _check_modal(op, b)
    return float(np.dot(a, b))


def v_inner(op: SpectralOperator, a, b) -> float:
    a = _check_modal(op, a)
    b = _check_modal(op, b)
    return float(np.dot(op.lam * a, b))


def apply_a(op: SpectralOperator, m) -> np.ndarray:
    """Stiffness application: coefficient k is multiplied by lambda_k."""
    m = _check_modal(op, m)
    return op.lam * m


def to_nodal(op: SpectralOperator, m) -> np.ndarray:
    m = _check_modal(op, m)
    return op.basis @ m


def to_modal(op: SpectralOperator, f) -> np.ndarray:
    f = _check_nodal(op, f)
    return op.quad_weight * (op.basis.T @ f)


def unit_mode(op: SpectralOperator, k: int, scale: float = 1.0) -> np.ndarray:
    """Coefficient vector scale * e_k (1-based mode index)."""
    if not 1 <= k <= op.num_modes:
        raise ValueError(f"mode index {k} out of range 1..{op.num_modes}")
    m = np.zeros(op.num_modes)
    m[k - 1] = scale
    return m
