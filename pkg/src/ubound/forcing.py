"""Time-dependent right-hand sides with modal profiles and their norms.

All analytic kinds factor as h(t) = a(t) * profile with a scalar envelope
a(t); the sampled kind interpolates tabulated modal values linearly. Three
size functionals are provided:

  s2_norm         sup over window starts of the sliding unit-window L2
                  integral of |h|_H (closed form for constants and pure
                  sinusoids, fine-grid midpoint quadrature otherwise)
  linf_norm       essential sup of |h(t)|_H over the horizon
  l2_period_norm  L2 norm of |h|_H over one half-period [0, tau]

A signal may declare an anti-period tau, meaning h(t + tau) = -h(t); the
declaration is verified on a tau-grid at construction time.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

ZERO = "zero"
CONSTANT = "constant"
SINUSOIDAL = "sinusoidal"
POWER_OF_SINE = "power_of_sine"
SAMPLED = "sampled"


@dataclass(frozen=True, eq=False)
class ForcingSignal:
    kind: str
    profile: np.ndarray
    amplitude: float = 1.0
    omega: float = 0.0
    phase: float = 0.0
    exponent: float = 1.0
    times: np.ndarray | None = None
    values: np.ndarray | None = None
    declared_antiperiod: float | None = None

    @property
    def num_modes(self) -> int:
        if self.kind == SAMPLED:
            return self.values.shape[1]
        return self.profile.shape[0]


def _as_profile(profile) -> np.ndarray:
    p = np.asarray(profile, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("profile must be a nonempty 1-D coefficient vector")
    p = p.copy()
    p.setflags(write=False)
    return p


def zero_signal(num_modes: int, antiperiod=None) -> ForcingSignal:
    return ForcingSignal(ZERO, _as_profile(np.zeros(max(int(num_modes), 1))),
                         declared_antiperiod=antiperiod)


def constant_signal(profile) -> ForcingSignal:
    return ForcingSignal(CONSTANT, _as_profile(profile))


def sinusoidal_signal(profile, amplitude, omega, phase=0.0,
                      antiperiod=None) -> ForcingSignal:
    if omega <= 0:
        raise ValueError("omega must be positive")
    sig = ForcingSignal(SINUSOIDAL, _as_profile(profile), float(amplitude),
                        float(omega), float(phase),
                        declared_antiperiod=antiperiod)
    _verify_antiperiod_declaration(sig)
    return sig


def power_of_sine_signal(profile, amplitude, omega, exponent,
                         antiperiod=None) -> ForcingSignal:
    """h(t) = amplitude * |sin(omega t)|**exponent * sign(sin(omega t)) * profile."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if exponent < 0:
        raise ValueError("exponent must be nonnegative")
    sig = ForcingSignal(POWER_OF_SINE, _as_profile(profile), float(amplitude),
                        float(omega), 0.0, float(exponent),
                        declared_antiperiod=antiperiod)
    _verify_antiperiod_declaration(sig)
    return sig


def sampled_signal(times, values, antiperiod=None) -> ForcingSignal:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or len(times) < 2:
        raise ValueError("need at least two sample times")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if values.shape != (len(times),) and values.ndim != 2:
        raise ValueError("values must be (n_times, num_modes)")
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != len(times):
        raise ValueError("values must have one row per sample time")
    times = times.copy()
    values = values.copy()
    times.setflags(write=False)
    values.setflags(write=False)
    sig = ForcingSignal(SAMPLED, _as_profile(np.zeros(values.shape[1])),
                        times=times, values=values,
                        declared_antiperiod=antiperiod)
    _verify_antiperiod_declaration(sig)
    return sig


def load_sampled_csv(path, antiperiod=None) -> ForcingSignal:
    """Read a sampled signal from CSV with columns t, coeff_1..coeff_N."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    if not header or header[0].strip() != "t":
        raise ValueError("first CSV column must be 't'")
    for i, name in enumerate(header[1:], start=1):
        if name.strip() != f"coeff_{i}":
            raise ValueError(f"column {i + 1} must be named coeff_{i}")
    data = np.asarray(rows, dtype=float)
    return sampled_signal(data[:, 0], data[:, 1:], antiperiod=antiperiod)


def write_sampled_csv(sig: ForcingSignal, path) -> None:
    if sig.kind != SAMPLED:
        raise ValueError("only sampled signals are written to CSV")
    n = sig.values.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"coeff_{i}" for i in range(1, n + 1)])
        for t, row in zip(sig.times, sig.values):
            writer.writerow([format(t, ".17g")]
                            + [format(x, ".17g") for x in row])


def with_amplitude(sig: ForcingSignal, amplitude: float) -> ForcingSignal:
    """Copy of an analytic signal with the amplitude field replaced."""
    if sig.kind in (ZERO, CONSTANT, SAMPLED):
        raise ValueError(f"{sig.kind} signals carry no amplitude field")
    return ForcingSignal(sig.kind, sig.profile, float(amplitude), sig.omega,
                         sig.phase, sig.exponent,
                         declared_antiperiod=sig.declared_antiperiod)


def _envelope(sig: ForcingSignal):
    """Scalar envelope a(t) with h(t) = a(t) * profile, or None (sampled)."""
    if sig.kind == ZERO:
        return lambda t: 0.0
    if sig.kind == CONSTANT:
        return lambda t: 1.0
    if sig.kind == SINUSOIDAL:
        amp, om, ph = sig.amplitude, sig.omega, sig.phase
        return lambda t: amp * math.sin(om * t + ph)
    if sig.kind == POWER_OF_SINE:
        amp, om, beta = sig.amplitude, sig.omega, sig.exponent
        def env(t):
            s = math.sin(om * t)
            return amp * math.copysign(abs(s) ** beta, s)
        return env
    return None


def eval_forcing(sig: ForcingSignal, t: float) -> np.ndarray:
    env = _envelope(sig)
    if env is not None:
        return env(t) * sig.profile
    if not sig.times[0] <= t <= sig.times[-1]:
        raise ValueError(
            f"t={t} outside sampled range [{sig.times[0]}, {sig.times[-1]}]")
    out = np.empty(sig.values.shape[1])
    for j in range(sig.values.shape[1]):
        out[j] = np.interp(t, sig.times, sig.values[:, j])
    return out


def evaluator(sig: ForcingSignal):
    """Fast closure t -> modal vector for stepping loops."""
    env = _envelope(sig)
    if env is None:
        return lambda t: eval_forcing(sig, t)
    profile = sig.profile
    return lambda t: env(t) * profile


def _profile_h_norm(sig: ForcingSignal) -> float:
    return float(np.sqrt(np.dot(sig.profile, sig.profile)))


def _envelope_grid(sig: ForcingSignal, t0: float, t1: float):
    """Midpoint samples of a(t)^2 on a uniform fine grid over [t0, t1]."""
    if sig.kind in (SINUSOIDAL, POWER_OF_SINE):
        step = 1e-3 * min(1.0, 2.0 * math.pi / sig.omega)
    else:
        step = 1e-3
    n = max(int(math.ceil((t1 - t0) / step)), 8)
    edges = np.linspace(t0, t1, n + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    env = _envelope(sig)
    if env is not None:
        vals = np.array([env(t) for t in mids]) ** 2 * _profile_h_norm(sig) ** 2
    else:
        vals = np.array([np.dot(eval_forcing(sig, t), eval_forcing(sig, t))
                         for t in mids])
    return mids, vals, (t1 - t0) / n


def linf_norm(sig: ForcingSignal, horizon: float) -> float:
    """Sup of |h(t)|_H over [0, horizon]."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    pn = _profile_h_norm(sig)
    if sig.kind == ZERO:
        return 0.0
    if sig.kind == CONSTANT:
        return pn
    if sig.kind in (SINUSOIDAL, POWER_OF_SINE):
        if sig.omega * horizon >= 2.0 * math.pi:
            return abs(sig.amplitude) * pn
        env = _envelope(sig)
        ts = np.linspace(0.0, horizon, 4097)
        return float(max(abs(env(t)) for t in ts)) * pn
    if horizon > sig.times[-1]:
        raise ValueError("horizon exceeds the sampled range")
    mask = sig.times <= horizon
    pts = np.linalg.norm(sig.values[mask], axis=1)
    end = eval_forcing(sig, horizon)
    return float(max(pts.max(initial=0.0), np.sqrt(np.dot(end, end))))


def s2_norm(sig: ForcingSignal, horizon: float) -> float:
    """Sliding unit-window L2 size, sup over starts in [0, horizon - 1]."""
    if horizon < 1.0:
        raise ValueError("horizon must be at least the unit window")
    pn = _profile_h_norm(sig)
    if sig.kind == ZERO:
        return 0.0
    if sig.kind == CONSTANT:
        return pn
    if sig.kind == SINUSOIDAL:
        om = sig.omega
        # integral over [t, t+1] of sin^2 = 1/2 - cos(2 om t + om + 2 phase)
        # * sin(om) / (2 om); the sup over starts adds |sin om| / (2 om)
        window_sup = 0.5 + abs(math.sin(om)) / (2.0 * om)
        return abs(sig.amplitude) * pn * math.sqrt(window_sup)
    # periodic kinds need one period of window starts; sampled ones the
    # whole declared horizon
    if sig.kind == POWER_OF_SINE:
        period = 2.0 * math.pi / sig.omega
        span = min(horizon - 1.0, period)
        t0 = 0.0
        step0 = 1e-3 * min(1.0, period)
    else:
        if horizon > sig.times[-1]:
            raise ValueError("horizon exceeds the sampled range")
        t0 = float(sig.times[0])
        span = horizon - t0 - 1.0
        if span < 0:
            raise ValueError("sampled range shorter than the unit window")
        step0 = 1e-3
    # the grid step must divide the unit window exactly, otherwise the
    # windowed sums cover slightly more or less than one time unit
    n_win = int(math.ceil(1.0 / step0))
    step = 1.0 / n_win
    n_total = n_win + int(math.ceil(span / step))
    if sig.kind == SAMPLED:
        n_total = min(n_total, int((sig.times[-1] - t0) / step))
    mids = t0 + (np.arange(n_total) + 0.5) * step
    env = _envelope(sig)
    if env is not None:
        vals = np.array([env(t) for t in mids]) ** 2 * _profile_h_norm(sig) ** 2
    else:
        vals = np.array([float(np.dot(v, v)) for v in
                         (eval_forcing(sig, t) for t in mids)])
    cum = np.concatenate([[0.0], np.cumsum(vals) * step])
    if len(cum) <= n_win:
        return float(math.sqrt(cum[-1]))
    windows = cum[n_win:] - cum[:-n_win]
    return float(math.sqrt(windows.max()))


def l2_period_norm(sig: ForcingSignal, tau: float) -> float:
    """L2 norm of |h|_H over [0, tau]."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    pn = _profile_h_norm(sig)
    if sig.kind == ZERO:
        return 0.0
    if sig.kind == CONSTANT:
        return pn * math.sqrt(tau)
    if sig.kind == SINUSOIDAL:
        om, ph = sig.omega, sig.phase
        integral = 0.5 * tau - (math.sin(2 * om * tau + 2 * ph)
                                - math.sin(2 * ph)) / (4.0 * om)
        return abs(sig.amplitude) * pn * math.sqrt(max(integral, 0.0))
    _, vals, step = _envelope_grid(sig, 0.0, tau)
    return float(math.sqrt(np.sum(vals) * step))


def _verify_antiperiod_declaration(sig: ForcingSignal) -> None:
    tau = sig.declared_antiperiod
    if tau is None:
        return
    if tau <= 0:
        raise ValueError("declared anti-period must be positive")
    if sig.kind == SAMPLED and sig.times[-1] - sig.times[0] < 2 * tau:
        raise ValueError("sampled range must cover two anti-periods")
    t0 = float(sig.times[0]) if sig.kind == SAMPLED else 0.0
    ts = t0 + np.linspace(0.0, tau, 257)
    sup = 0.0
    worst = 0.0
    for t in ts:
        a = eval_forcing(sig, t)
        b = eval_forcing(sig, t + tau)
        sup = max(sup, float(np.sqrt(np.dot(a, a))))
        mism = a + b
        worst = max(worst, float(np.sqrt(np.dot(mism, mism))))
    if worst >= 1e-9 * (1.0 + sup):
        raise ValueError(
            f"signal is not anti-periodic with tau={tau}: "
            f"max |h(t+tau)+h(t)| = {worst:.3e}")
