"""Ultimate-bound estimation, amplitude sweeps, and exponent checks.

The asymptotic quantity of interest is limsup_t Phi(t) along a trajectory,
with Phi = |v|_H^2 + ||u||_V^2. Its finite-time estimator here is the
maximum of Phi over the tail of a long run, guarded two ways:

  * the tail is split into equal windows whose maxima must agree to a
    relative tolerance (otherwise the transient is not dead and the
    estimate is rejected rather than silently reported), and
  * the run is repeated at half the step size and both estimates must
    agree (implicit midpoint is only trusted after this refinement check).

Sweeps scale a forcing family, estimate the bound per amplitude, and fit
the log-log slope against the chosen forcing norm over the upper half of
the amplitudes, where the additive constant of a bound K(1 + norm^e) no
longer matters. check_bound_inequality reports the smallest K making
M <= K(1 + norm^e) hold row-wise and whether that K stays stable (does not
keep growing) as the amplitude increases.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from . import damping as dmp
from . import forcing as frc
from . import integrator as itg
from .spectral import SpectralOperator, _check_modal

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0

NORM_S2 = "s2"
NORM_LINF = "linf"
NORM_L2_PERIOD = "l2_period"
NORM_KINDS = (NORM_S2, NORM_LINF, NORM_L2_PERIOD)


class BoundRejection(RuntimeError):
    """The finite-time estimate failed a stationarity or refinement gate."""


@dataclass(frozen=True)
class BoundConfig:
    T_total: float | None = None  # None: 400 / linear damping rate
    burn_in_fraction: float = 0.5
    window_count: int = 4
    window_agreement_tol: float = 0.05
    dt_refinement_tol: float = 0.02
    value_floor: float = 1e-9  # below this, window spread is noise

    def __post_init__(self):
        if self.T_total is not None and not self.T_total > 0:
            raise ValueError("T_total must be positive")
        if not 0.0 < self.burn_in_fraction < 1.0:
            raise ValueError("burn_in_fraction must be in (0, 1)")
        if self.window_count < 2:
            raise ValueError("window_count must be at least 2")
        if not self.window_agreement_tol > 0:
            raise ValueError("window_agreement_tol must be positive")
        if not self.dt_refinement_tol > 0:
            raise ValueError("dt_refinement_tol must be positive")


def nonresonant_frequency(op: SpectralOperator) -> float:
    """Default probing frequency: golden-ratio multiple of the slowest
    natural frequency, safely away from every eigenfrequency."""
    return math.sqrt(float(op.lam[0])) * GOLDEN_RATIO


def _default_T(g) -> float:
    parts = g.parts if isinstance(g, dmp.DampingSum) else (g,)
    linear_rate = sum(p.c for p in parts if p.alpha == 0.0)
    rate = linear_rate if linear_rate > 0 else max(p.c for p in parts)
    return 400.0 / rate


def _tail_window_maxima(op, g, forcing, state0, T, cfg: BoundConfig,
                        stepper: itg.StepperConfig):
    n_steps = max(cfg.window_count + 1, int(round(T / stepper.dt)))
    burn = int(n_steps * cfg.burn_in_fraction)
    tail = n_steps - burn
    h_fn = frc.evaluator(forcing)
    u = _check_modal(op, state0.u).copy()
    v = _check_modal(op, state0.v).copy()
    t = state0.t
    maxima = np.zeros(cfg.window_count)
    for i in range(1, n_steps + 1):
        u, v, _, _ = itg._step_core(op, g, u, v, t, h_fn, stepper)
        t = state0.t + i * stepper.dt
        if i > burn:
            w = min((i - burn - 1) * cfg.window_count // tail,
                    cfg.window_count - 1)
            q = itg.phi_value(op, u, v)
            if q > maxima[w]:
                maxima[w] = q
    return maxima


def estimate_ultimate_bound(op: SpectralOperator, g, forcing, state0,
                            cfg: BoundConfig,
                            stepper: itg.StepperConfig) -> float:
    """Tail-window maximum of Phi with stationarity and dt-refinement gates.

    Raises BoundRejection when the tail windows disagree (transient not
    dead) or the half-step re-run moves the estimate beyond tolerance.
    """
    T = cfg.T_total if cfg.T_total is not None else _default_T(g)
    wins = _tail_window_maxima(op, g, forcing, state0, T, cfg, stepper)
    spread = float(wins.max() - wins.min())
    if wins.max() > cfg.value_floor and \
            spread > cfg.window_agreement_tol * wins.max():
        raise BoundRejection(
            f"tail windows disagree by {spread / wins.max():.3f} "
            f"(tol {cfg.window_agreement_tol}); transient not dead")
    m_coarse = float(wins.max())
    fine = replace(stepper, dt=0.5 * stepper.dt)
    wins2 = _tail_window_maxima(op, g, forcing, state0, T, cfg, fine)
    m_fine = float(wins2.max())
    scale = max(m_coarse, m_fine)
    if scale > cfg.value_floor and \
            abs(m_coarse - m_fine) > cfg.dt_refinement_tol * scale:
        raise BoundRejection(
            f"dt refinement moved the estimate by "
            f"{abs(m_coarse - m_fine) / scale:.3f} "
            f"(tol {cfg.dt_refinement_tol})")
    return m_fine


def signal_norm(sig, norm_kind: str, horizon: float = 100.0,
                tau: float | None = None) -> float:
    if norm_kind == NORM_S2:
        return frc.s2_norm(sig, horizon)
    if norm_kind == NORM_LINF:
        return frc.linf_norm(sig, horizon)
    if norm_kind == NORM_L2_PERIOD:
        tau = tau if tau is not None else sig.declared_antiperiod
        if tau is None:
            raise ValueError("l2_period norm needs tau or a declared anti-period")
        return frc.l2_period_norm(sig, tau)
    raise ValueError(f"unknown norm kind {norm_kind!r}")


@dataclass
class SweepRow:
    amplitude: float
    norm_kind: str
    forcing_norm: float
    m_hat: float | None
    status: str = "ok"
    extras: dict = field(default_factory=dict)


@dataclass
class SweepResult:
    rows: list
    fitted_slope: float
    fitted_intercept: float
    r_squared: float


def fit_loglog(norms, values):
    """Least-squares line through (ln x, ln y); returns slope, intercept,
    and the squared correlation coefficient."""
    x = np.log(np.asarray(norms, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if len(x) < 2:
        raise ValueError("need at least two points to fit")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    if sxx == 0.0:
        raise ValueError("all forcing norms identical; slope undefined")
    sxy = float(np.dot(xc, yc))
    syy = float(np.dot(yc, yc))
    slope = sxy / sxx
    intercept = float(y.mean() - slope * x.mean())
    r2 = 1.0 if syy == 0.0 else min(1.0, sxy * sxy / (sxx * syy))
    return slope, intercept, r2


def _upper_half(rows):
    return rows[len(rows) // 2:]


def _evaluate_row(op, g, sig, state0, norm_kind, norm_horizon, cfg, stepper,
                  amplitude):
    norm = signal_norm(sig, norm_kind, horizon=norm_horizon)
    try:
        m_hat = estimate_ultimate_bound(op, g, sig, state0, cfg, stepper)
        return SweepRow(amplitude, norm_kind, norm, m_hat)
    except BoundRejection as exc:
        return SweepRow(amplitude, norm_kind, norm, None,
                        status=f"rejected: {exc}")
    except itg.TrajectoryError as exc:
        return SweepRow(amplitude, norm_kind, norm, None,
                        status=f"failed: {exc.cause}")


def amplitude_sweep(op: SpectralOperator, g, forcing_family: Callable,
                    amplitudes, norm_kind: str, cfg: BoundConfig,
                    stepper: itg.StepperConfig, initial_state=None,
                    norm_horizon: float = 100.0, n_jobs: int = 1
                    ) -> SweepResult:
    """Estimate the bound along forcing_family(k) for each amplitude k.

    initial_state, when given, maps (amplitude, signal) to the starting
    state (default: rest). Rows are independent; n_jobs > 1 evaluates them
    in worker processes (all arguments must then be picklable). The fit
    uses the valid rows in the upper half of the amplitude range.
    """
    amplitudes = sorted(float(a) for a in amplitudes)
    if len(amplitudes) < 4:
        raise ValueError("need at least four amplitudes")
    tasks = []
    for a in amplitudes:
        sig = forcing_family(a)
        state0 = (initial_state(a, sig) if initial_state is not None
                  else itg.zero_state(op))
        tasks.append((op, g, sig, state0, norm_kind, norm_horizon, cfg,
                      stepper, a))
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_evaluate_row_star, tasks))
    else:
        rows = [_evaluate_row(*task) for task in tasks]

    fit_rows = [r for r in _upper_half(rows) if r.m_hat is not None]
    if len(fit_rows) < 4:
        raise BoundRejection(
            f"only {len(fit_rows)} valid rows in the upper half; "
            "need at least 4 for the exponent fit")
    slope, intercept, r2 = fit_loglog([r.forcing_norm for r in fit_rows],
                                      [r.m_hat for r in fit_rows])
    return SweepResult(rows, slope, intercept, r2)


def _evaluate_row_star(task):
    return _evaluate_row(*task)


class BoundCheck(NamedTuple):
    k_fit: float
    holds: bool
    stability_factor: float


def check_bound_inequality(sweep: SweepResult, exponent: float,
                           stability_threshold: float = 10.0) -> BoundCheck:
    """Smallest K with M_hat <= K (1 + norm^exponent) over the valid rows.

    The bound "holds" when the row-wise K does not grow with amplitude
    over the upper half: the largest amplitude-increasing ratio K_j / K_i
    (j above i) must stay below the threshold. Decreasing K is fine; it
    just means the exponent dominates the observed growth.
    """
    valid = [r for r in sweep.rows if r.m_hat is not None]
    if not valid:
        raise ValueError("sweep has no valid rows")
    k_rows = [r.m_hat / (1.0 + r.forcing_norm ** exponent) for r in valid]
    k_fit = max(k_rows)
    upper = [r.m_hat / (1.0 + r.forcing_norm ** exponent)
             for r in _upper_half(valid)]
    factor = 1.0
    running_min = math.inf
    for k in upper:
        running_min = min(running_min, k)
        factor = max(factor, k / running_min)
    return BoundCheck(k_fit, factor < stability_threshold, factor)


# ---------------------------------------------------------------------------
# warm starts for sweep rows

def equilibrium_state(op: SpectralOperator, sig) -> itg.State:
    """Static balance u = A^-1 h(0), v = 0 (the stationary solution for
    constant forcing and any damping vanishing at zero velocity)."""
    h0 = frc.eval_forcing(sig, 0.0)
    return itg.State(h0 / op.lam, np.zeros(op.num_modes), 0.0)


def linear_response_state(op: SpectralOperator, sig) -> itg.State:
    """Start on the undamped linear particular solution of a sinusoid.

    Valid warm start whenever the damping correction is small; the
    estimator's gates still decide whether the tail is stationary.
    """
    if sig.kind != frc.SINUSOIDAL:
        raise ValueError("linear response start needs a sinusoidal signal")
    det = op.lam - sig.omega ** 2
    if np.any(np.abs(det) < 1e-9 * (1.0 + op.lam)):
        raise ValueError("forcing frequency is resonant; no linear response")
    coef = sig.amplitude * sig.profile / det
    u0 = math.sin(sig.phase) * coef
    v0 = sig.omega * math.cos(sig.phase) * coef
    return itg.State(u0, v0, 0.0)


@dataclass(frozen=True)
class EquilibriumStart:
    op: SpectralOperator

    def __call__(self, amplitude, sig):
        return equilibrium_state(self.op, sig)


@dataclass(frozen=True)
class LinearResponseStart:
    op: SpectralOperator

    def __call__(self, amplitude, sig):
        return linear_response_state(self.op, sig)


# ---------------------------------------------------------------------------
# output

def write_sweep_csv(result: SweepResult, path) -> None:
    extra_keys = sorted({k for r in result.rows for k in r.extras})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["amplitude", "norm_kind", "forcing_norm", "M_hat",
                         "status"] + extra_keys)
        for r in result.rows:
            row = [format(r.amplitude, ".17g"), r.norm_kind,
                   format(r.forcing_norm, ".17g"),
                   "" if r.m_hat is None else format(r.m_hat, ".17g"),
                   r.status]
            for key in extra_keys:
                val = r.extras.get(key, "")
                row.append(format(val, ".17g")
                           if isinstance(val, float) else str(val))
            writer.writerow(row)


def fit_summary(result: SweepResult, checks: dict | None = None) -> dict:
    summary = {
        "slope": result.fitted_slope,
        "intercept": result.fitted_intercept,
        "r_squared": result.r_squared,
        "rows_total": len(result.rows),
        "rows_valid": sum(1 for r in result.rows if r.m_hat is not None),
    }
    if checks:
        summary["checks"] = {
            format(expo, "g"): {"K_fit": chk.k_fit, "holds": chk.holds,
                                "stability_factor": chk.stability_factor}
            for expo, chk in checks.items()}
    return summary


def write_fit_summary(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
