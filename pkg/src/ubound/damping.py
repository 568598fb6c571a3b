"""Monotone damping maps and their coercivity/growth certificates.

Three concrete families act on modal velocity vectors v:

  local_power            pointwise c |f|**alpha f on the nodal grid,
                         projected back to the modal space
  averaged_h             c * |v|_H**alpha * v  (nonlocal, scalar gain)
  structural_averaged    c * ||v||_h10**alpha * (mu_k v_k)  (nonlocal,
                         first-order stiffness weighted)

plus linear_viscous, which the constructor canonicalizes to averaged_h with
alpha = 0, and finite sums of the above (sums of monotone maps are
monotone). All maps are odd, vanish at zero, and are gradients of convex
potentials, hence monotone.

A certificate packages constants (gamma, C1, K, C2) witnessing one of three
inequality sets on the truncated model:

  quadratic    <g(v), v> >= gamma |v|_H^2 - C1          and
               ||g(v)||_V' <= C2 + K <g(v), v>
  power        <g(v), v> >= gamma ||v||_Z^(alpha+2) - C1   and
               ||g(v)||_V' <= C2 + K ||v||_Z^(alpha+1)
  power_dual   ||g(v)||_Z' <= C2 + K ||v||_Z^(alpha+1)

Constants are exact where the family allows (the averaged families, and
local_power against its Lebesgue space) and otherwise follow from discrete
Hoelder / Cauchy-Schwarz / Young inequalities evaluated on the instance, so
every certificate is rigorous for the truncation at hand. Constants are not
claimed uniform in the truncation size.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import (SpectralOperator, ZSpace, _check_modal, norm_h,
                       norm_v_dual, norm_z, to_modal, to_nodal, z_h10, z_l2,
                       z_lp, Z_H10, Z_L2, Z_LP)

LOCAL_POWER = "local_power"
AVERAGED_H = "averaged_h"
STRUCTURAL_AVERAGED = "structural_averaged"
LINEAR_VISCOUS = "linear_viscous"
FAMILIES = (LOCAL_POWER, AVERAGED_H, STRUCTURAL_AVERAGED, LINEAR_VISCOUS)

COND_QUADRATIC = "quadratic"
COND_POWER = "power"
COND_POWER_DUAL = "power_dual"
CONDITIONS = (COND_QUADRATIC, COND_POWER, COND_POWER_DUAL)


class NoCertificateError(ValueError):
    """Raised when no finite certificate exists for the requested pair."""


@dataclass(frozen=True)
class DampingOp:
    family: str
    c: float
    alpha: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown damping family {self.family!r}")
        if not self.c > 0:
            raise ValueError("damping strength c must be positive")
        if self.alpha < 0:
            raise ValueError("growth exponent alpha must be nonnegative")
        if self.family == LINEAR_VISCOUS:
            # canonical aliasing: linear viscous is averaged_h at alpha 0
            object.__setattr__(self, "family", AVERAGED_H)
            object.__setattr__(self, "alpha", 0.0)


@dataclass(frozen=True)
class DampingSum:
    """Sum of damping maps; monotone because each part is."""

    parts: tuple

    def __post_init__(self):
        if len(self.parts) == 0:
            raise ValueError("DampingSum needs at least one part")
        for p in self.parts:
            if not isinstance(p, DampingOp):
                raise ValueError("DampingSum parts must be DampingOp instances")


def _parts(g):
    return g.parts if isinstance(g, DampingSum) else (g,)


def z_space_for(g) -> ZSpace:
    """The natural intermediate space of a damping map."""
    if isinstance(g, DampingSum):
        kinds = {z_space_for(p).kind for p in g.parts}
        if len(kinds) != 1:
            raise NoCertificateError(
                "summed damping parts do not share an intermediate space")
        kind = kinds.pop()
        if kind == Z_LP:
            alphas = {p.alpha for p in g.parts}
            if len(alphas) != 1:
                raise NoCertificateError(
                    "summed pointwise-power parts with different exponents "
                    "have no common Lebesgue space")
            return z_lp(alphas.pop())
        return ZSpace(kind)
    if g.family == LOCAL_POWER:
        return z_lp(g.alpha)
    if g.family == AVERAGED_H:
        return z_l2()
    return z_h10()


def apply_g(op: SpectralOperator, g, v) -> np.ndarray:
    """Modal representation of g(v)."""
    v = _check_modal(op, v)
    if isinstance(g, DampingSum):
        out = np.zeros_like(v)
        for p in g.parts:
            out += apply_g(op, p, v)
        return out
    if g.family == AVERAGED_H:
        s = np.sqrt(np.dot(v, v))
        return (g.c * s ** g.alpha) * v
    if g.family == STRUCTURAL_AVERAGED:
        sigma = np.sqrt(np.dot(op.mu * v, v))
        return (g.c * sigma ** g.alpha) * (op.mu * v)
    # pointwise power: sign(f)|f|^(alpha+1) avoids NaN at f = 0
    f = to_nodal(op, v)
    return to_modal(op, g.c * np.sign(f) * np.abs(f) ** (g.alpha + 1.0))


def dissipation(op: SpectralOperator, g, v) -> float:
    """The pairing <g(v), v>, always nonnegative."""
    v = _check_modal(op, v)
    if isinstance(g, DampingSum):
        return sum(dissipation(op, p, v) for p in g.parts)
    if g.family == AVERAGED_H:
        s = np.sqrt(np.dot(v, v))
        return float(g.c * s ** (g.alpha + 2.0))
    if g.family == STRUCTURAL_AVERAGED:
        sigma = np.sqrt(np.dot(op.mu * v, v))
        return float(g.c * sigma ** (g.alpha + 2.0))
    f = to_nodal(op, v)
    return float(g.c * op.quad_weight * np.sum(np.abs(f) ** (g.alpha + 2.0)))


def jacobian_g(op: SpectralOperator, g, v) -> np.ndarray:
    """Dense derivative of apply_g at v (symmetric positive semidefinite)."""
    v = _check_modal(op, v)
    n = op.num_modes
    if isinstance(g, DampingSum):
        out = np.zeros((n, n))
        for p in g.parts:
            out += jacobian_g(op, p, v)
        return out
    if g.family == AVERAGED_H:
        s = float(np.sqrt(np.dot(v, v)))
        jac = (g.c * s ** g.alpha) * np.eye(n)
        if g.alpha > 0 and s > 0:
            jac += (g.c * g.alpha * s ** (g.alpha - 2.0)) * np.outer(v, v)
        return jac
    if g.family == STRUCTURAL_AVERAGED:
        sigma = float(np.sqrt(np.dot(op.mu * v, v)))
        jac = (g.c * sigma ** g.alpha) * np.diag(op.mu)
        if g.alpha > 0 and sigma > 0:
            mv = op.mu * v
            jac += (g.c * g.alpha * sigma ** (g.alpha - 2.0)) * np.outer(mv, mv)
        return jac
    f = to_nodal(op, v)
    d = g.c * (g.alpha + 1.0) * np.abs(f) ** g.alpha
    return op.quad_weight * (op.basis.T * d) @ op.basis


@dataclass(frozen=True)
class DampingCertificate:
    gamma: float
    C1: float
    K: float
    C2: float
    z: ZSpace
    alpha: float
    condition: str
    provenance: str = "analytic"

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError("gamma must be finite and positive")
        for name in ("C1", "K", "C2"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def _young_const(p: float, q: float, eps: float) -> float:
    """Smallest C with t**p <= eps t**q + C for all t >= 0 (0 < p < q)."""
    if not 0 < p < q:
        raise ValueError("need 0 < p < q")
    tstar = (p / (q * eps)) ** (1.0 / (q - p))
    return (1.0 - p / q) * tstar ** p


def _best_split(a_k: float, a_c: float, p: float, q: float) -> tuple:
    """Pick eps minimizing a_k*eps + a_c*young_const(p, q, eps).

    Returns (K, C2) = (a_k * eps, a_c * C(eps)). Golden-section search on
    log(eps); any eps yields a valid certificate, this just balances the
    constants.
    """
    def cost(log_eps):
        e = np.exp(log_eps)
        return a_k * e + a_c * _young_const(p, q, e)

    lo, hi = -20.0, 20.0
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - phi * (hi - lo)
    x2 = lo + phi * (hi - lo)
    f1, f2 = cost(x1), cost(x2)
    for _ in range(80):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = cost(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = cost(x2)
    eps = float(np.exp((lo + hi) / 2.0))
    return a_k * eps, a_c * _young_const(p, q, eps)


def _sup_embedding_const(op: SpectralOperator) -> float:
    # |v(x)| <= B ||v||_V pointwise, by Cauchy-Schwarz across modes
    return float(np.sqrt((2.0 / op.length) * np.sum(1.0 / op.lam)))


def _lp_embedding_const(op: SpectralOperator, alpha: float) -> float:
    """||v||_{L^(alpha+2)} <= c_emb ||v||_V on the truncation (quadrature
    norm; exact for alpha = 0 where it reduces to the embedding constant)."""
    if alpha == 0.0:
        return op.embedding_P
    b = _sup_embedding_const(op)
    return b ** (alpha / (alpha + 2.0)) * op.embedding_P ** (2.0 / (alpha + 2.0))


def _vprime_gain(op: SpectralOperator, g: DampingOp) -> float:
    """K0 with ||g(v)||_V' <= K0 * ||v||_Z^(alpha+1) for a single family."""
    if g.family == AVERAGED_H:
        return g.c * op.embedding_P
    if g.family == STRUCTURAL_AVERAGED:
        rmax = float(np.max(np.sqrt(op.mu / op.lam)))
        return g.c * rmax
    return g.c * _lp_embedding_const(op, g.alpha)


def _zdual_gain(op: SpectralOperator, g: DampingOp) -> float:
    """K0 with ||g(v)||_Z' <= K0 * ||v||_Z^(alpha+1); exact for all three
    families (closed form or discrete Hoelder)."""
    return g.c


def _quadratic_single(op: SpectralOperator, g: DampingOp) -> tuple:
    """(gamma, C1, K, C2) for the quadratic condition of one family."""
    # gain with <g(v), v> >= gain |v|_H^(alpha+2) on the truncation
    if g.family == AVERAGED_H:
        gain = g.c
    elif g.family == STRUCTURAL_AVERAGED:
        gain = g.c * op.mu[0] ** ((g.alpha + 2.0) / 2.0)
    else:
        # |v|_H <= W^(alpha/(2 alpha + 4)) ||v||_p by discrete Hoelder,
        # W the total quadrature weight
        w_total = op.quad_weight * op.num_quad
        gain = g.c * w_total ** (-g.alpha / 2.0)
    if g.alpha == 0.0:
        gamma, c1 = gain, 0.0
    else:
        gamma = gain
        c1 = gain * _young_const(2.0, g.alpha + 2.0, 1.0)

    # growth side: ||g(v)||_V' <= K0 t^(alpha+1) with t the Z-quantity whose
    # (alpha+2) power is <= <g(v), v> / c_like; split t^(alpha+1) against it
    k0 = _vprime_gain(op, g)
    diss_gain = g.c  # <g,v> = diss_gain * t^(alpha+2) with matching t
    k_fit, c2 = _best_split(k0 / diss_gain, k0, g.alpha + 1.0, g.alpha + 2.0)
    return gamma, c1, k_fit, c2


def certificate(op: SpectralOperator, g, condition: str) -> DampingCertificate:
    """Constants witnessing the requested inequality set for (op, g).

    Raises NoCertificateError when the pair admits no finite certificate on
    the truncation (summed maps without a common intermediate space).
    """
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    parts = _parts(g)

    if condition == COND_QUADRATIC:
        gammas, c1s, ks, c2s = [], [], [], []
        for p in parts:
            ga, c1, k, c2 = _quadratic_single(op, p)
            gammas.append(ga)
            c1s.append(c1)
            ks.append(k)
            c2s.append(c2)
        # sums: coercivities add, growth uses the worst K since every part's
        # dissipation is nonnegative
        return DampingCertificate(
            gamma=sum(gammas), C1=sum(c1s), K=max(ks), C2=sum(c2s),
            z=z_l2(), alpha=0.0, condition=condition)

    z = z_space_for(g)  # raises NoCertificateError for incompatible sums
    alpha_max = max(p.alpha for p in parts)
    gain = {COND_POWER: _vprime_gain, COND_POWER_DUAL: _zdual_gain}[condition]

    # coercivity: parts at the top exponent pair exactly against the shared
    # Z-norm; lower-exponent parts contribute nonnegatively and are dropped
    gamma = sum(p.c for p in parts if p.alpha == alpha_max)
    c1 = 0.0
    k_total, c2_total = 0.0, 0.0
    for p in parts:
        k0 = gain(op, p)
        if p.alpha == alpha_max:
            k_total += k0
        else:
            # lift t^(alpha_i+1) <= eps t^(alpha_max+1) + C
            k_lift, c2_lift = _best_split(
                k0, k0, p.alpha + 1.0, alpha_max + 1.0)
            k_total += k_lift
            c2_total += c2_lift
    return DampingCertificate(
        gamma=gamma, C1=c1, K=k_total, C2=c2_total,
        z=z, alpha=alpha_max, condition=condition)


def norm_z_dual(op: SpectralOperator, m, z: ZSpace):
    """Dual Z-norm where it is closed form; None for the Lebesgue kind."""
    if z.kind == Z_L2:
        return norm_h(op, m)
    if z.kind == Z_H10:
        m = _check_modal(op, m)
        return float(np.sqrt(np.dot(m / op.mu, m)))
    return None


def certificate_slacks(op: SpectralOperator, g, cert: DampingCertificate,
                       v, w=None) -> list:
    """Signed slacks (RHS - LHS) of the certified inequalities at v.

    For the dual-growth condition on a Lebesgue space the dual norm is
    checked in pairing form against the witness w.
    """
    v = _check_modal(op, v)
    diss = dissipation(op, g, v)
    gv = apply_g(op, g, v)
    if cert.condition == COND_QUADRATIC:
        s1 = diss - cert.gamma * np.dot(v, v) + cert.C1
        s2 = cert.C2 + cert.K * diss - norm_v_dual(op, gv)
        return [float(s1), float(s2)]
    zn = norm_z(op, v, cert.z)
    rhs = cert.C2 + cert.K * zn ** (cert.alpha + 1.0)
    if cert.condition == COND_POWER:
        s1 = diss - cert.gamma * zn ** (cert.alpha + 2.0) + cert.C1
        s2 = rhs - norm_v_dual(op, gv)
        return [float(s1), float(s2)]
    dual = norm_z_dual(op, gv, cert.z)
    if dual is not None:
        return [float(rhs - dual)]
    if w is None:
        raise ValueError("pairing witness w required for this certificate")
    w = _check_modal(op, w)
    wz = norm_z(op, w, cert.z)
    return [float(rhs * wz - np.dot(gv, w))]


def verify_certificate(op: SpectralOperator, g, cert: DampingCertificate,
                       n_samples: int = 1000, max_norm: float = 1e3,
                       rng=None) -> float:
    """Largest relative violation over random samples (0.0 when sound)."""
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(n_samples):
        scale = 10.0 ** rng.uniform(-2, np.log10(max_norm))
        v = rng.standard_normal(op.num_modes)
        v *= scale / max(np.sqrt(np.dot(v, v)), 1e-300)
        w = rng.standard_normal(op.num_modes)
        for s in certificate_slacks(op, g, cert, v, w):
            rel = max(0.0, -s) / (1.0 + _slack_scale(op, g, cert, v))
            worst = max(worst, rel)
    return worst


def _slack_scale(op, g, cert, v):
    # scale for relative violation checks: the RHS magnitude
    if cert.condition == COND_QUADRATIC:
        return cert.gamma * float(np.dot(v, v)) + cert.C1
    zn = norm_z(op, v, cert.z)
    return cert.C2 + cert.K * zn ** (cert.alpha + 1.0)
