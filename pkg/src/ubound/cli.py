"""Config-driven experiment runner.

Subcommands:
  simulate      integrate one trajectory and write its energy ledger
  sweep         amplitude sweep with exponent fit and bound checks
  antiperiodic  shooting sweep (or single solve) for anti-periodic solutions
  verify        run the property suite and print a pass/fail table

All experiments are described by one JSON config (nested key-value); every
field can be overridden on the command line with --set dotted.path=value.
The resolved config is written next to the outputs so a run can be
reproduced exactly. Exit codes: 0 ok, 1 validation error, 2 numerical
failure, 3 property-suite failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import antiperiodic as ap
from . import bounds as bnd
from . import damping as dmp
from . import forcing as frc
from . import integrator as itg
from . import spectral as sp
from . import verify as vfy

EXPERIMENTS = ("simulate", "sweep", "antiperiodic", "verify")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_PROPERTIES = 3


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


DEFAULT_CONFIG = {
    "experiment": "simulate",
    "seed": 0,
    "output_dir": "out",
    "operator": {
        "kind": "wave",
        "num_modes": 8,
        "length": math.pi,
        "lambda_override": None,
        "num_quad": None,
    },
    "damping": {
        "family": "averaged_h",
        "c": 1.0,
        "alpha": 0.0,
        "parts": None,  # list of {family, c, alpha}; overrides the above
    },
    "forcing": {
        # kinds: zero, constant, sinusoidal, power_of_sine, sampled_csv,
        # power_oracle (exact anti-periodic construction from the damping)
        "kind": "sinusoidal",
        "profile_mode": 1,
        "profile": None,  # explicit coefficient list; overrides profile_mode
        "amplitude": 1.0,
        "omega": None,  # None: golden-ratio multiple of the slow frequency
        "phase": 0.0,
        "exponent": 1.0,
        "antiperiod": None,
        "csv_path": None,
        "amplitudes": None,  # list => sweep experiments scale by these
    },
    "stepper": {
        "dt": None,  # None: min(0.01, 0.1/sqrt(lambda_max))
        "scheme": "implicit_midpoint",
        "newton_tol": 1e-12,
        "newton_max_iter": 50,
        "fallback": "fixed_point",
    },
    "bound": {
        "T_total": None,
        "burn_in_fraction": 0.5,
        "window_count": 4,
        "window_agreement_tol": 0.05,
        "dt_refinement_tol": 0.02,
    },
    "shooting": {
        "tau": None,  # None: the forcing anti-period
        "residual_tol": 1e-9,
        "max_outer_iter": 60,
        "jacobian": "finite_difference",
        "fd_eps": 1e-6,
        "picard_relaxation": 1.0,
        "warm_start_periods": 0,
    },
    "sweep": {
        "norm_kind": "s2",
        "check_exponents": [2.0, 4.0],
        "initial": "zero",  # zero | equilibrium | linear_response | random
        "norm_horizon": 100.0,
        "n_jobs": 1,
    },
    "simulate": {
        "T": 10.0,
        "observe_every": 1,
        "initial": "zero",  # zero | mode | random
        "initial_mode": 1,
        "initial_u": 1.0,
        "initial_v": 0.0,
    },
    "verify": {
        "monotonicity_pairs": 1000,
        "certificate_samples": 1000,
    },
}


def _merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(here, "unknown field")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, overrides=(), experiment=None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(str(path), f"invalid JSON: {exc}")
        if not isinstance(user, dict):
            raise ConfigError(str(path), "config must be a JSON object")
        cfg = _merge(cfg, user)
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(key, "unknown field")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(key, "unknown field")
        node[parts[-1]] = value
    if experiment is not None:
        cfg["experiment"] = experiment
    return cfg


# ---------------------------------------------------------------------------
# builders (validation happens here, with field paths in every message)

def _expect(cond, path, message):
    if not cond:
        raise ConfigError(path, message)


def _as_number(value, path, minimum=None, strict=False):
    _expect(isinstance(value, (int, float)) and not isinstance(value, bool),
            path, "must be a number")
    value = float(value)
    if minimum is not None:
        if strict:
            _expect(value > minimum, path, f"must be > {minimum}")
        else:
            _expect(value >= minimum, path, f"must be >= {minimum}")
    return value


def _as_int(value, path, minimum=None):
    _expect(isinstance(value, int) and not isinstance(value, bool),
            path, "must be an integer")
    if minimum is not None:
        _expect(value >= minimum, path, f"must be >= {minimum}")
    return value


def build_operator(cfg: dict) -> sp.SpectralOperator:
    spec = cfg["operator"]
    _expect(spec["kind"] in sp.KINDS, "operator.kind",
            f"must be one of {sp.KINDS}")
    n = _as_int(spec["num_modes"], "operator.num_modes", minimum=1)
    length = _as_number(spec["length"], "operator.length", 0.0, strict=True)
    override = spec["lambda_override"]
    if override is not None:
        _expect(isinstance(override, list), "operator.lambda_override",
                "must be a list of numbers")
    num_quad = spec["num_quad"]
    if num_quad is not None:
        num_quad = _as_int(num_quad, "operator.num_quad", minimum=1)
    try:
        return sp.make_operator(spec["kind"], n, length, override, num_quad)
    except ValueError as exc:
        raise ConfigError("operator", str(exc))


def build_damping(cfg: dict):
    spec = cfg["damping"]

    def one(entry, path):
        _expect(entry.get("family") in dmp.FAMILIES, f"{path}.family",
                f"must be one of {dmp.FAMILIES}")
        c = _as_number(entry.get("c", 1.0), f"{path}.c", 0.0, strict=True)
        alpha = _as_number(entry.get("alpha", 0.0), f"{path}.alpha", 0.0)
        return dmp.DampingOp(entry["family"], c, alpha)

    if spec["parts"] is not None:
        _expect(isinstance(spec["parts"], list) and spec["parts"],
                "damping.parts", "must be a nonempty list")
        parts = tuple(one(p, f"damping.parts[{i}]")
                      for i, p in enumerate(spec["parts"]))
        return parts[0] if len(parts) == 1 else dmp.DampingSum(parts)
    return one(spec, "damping")


def _profile(cfg: dict, op: sp.SpectralOperator) -> np.ndarray:
    spec = cfg["forcing"]
    if spec["profile"] is not None:
        prof = np.asarray(spec["profile"], dtype=float)
        _expect(prof.shape == (op.num_modes,), "forcing.profile",
                f"must have length {op.num_modes}")
        return prof
    mode = _as_int(spec["profile_mode"], "forcing.profile_mode", minimum=1)
    _expect(mode <= op.num_modes, "forcing.profile_mode",
            f"must be <= num_modes ({op.num_modes})")
    return sp.unit_mode(op, mode)


def _omega(cfg: dict, op: sp.SpectralOperator) -> float:
    spec = cfg["forcing"]
    if spec["omega"] is None:
        return bnd.nonresonant_frequency(op)
    return _as_number(spec["omega"], "forcing.omega", 0.0, strict=True)


def build_forcing(cfg: dict, op: sp.SpectralOperator, g) -> frc.ForcingSignal:
    try:
        return _build_forcing(cfg, op, g)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("forcing", str(exc))


def _build_forcing(cfg: dict, op: sp.SpectralOperator, g) -> frc.ForcingSignal:
    spec = cfg["forcing"]
    kind = spec["kind"]
    amp = _as_number(spec["amplitude"], "forcing.amplitude")
    if kind == "zero":
        return frc.zero_signal(op.num_modes)
    if kind == "constant":
        return frc.constant_signal(amp * _profile(cfg, op))
    if kind == "sinusoidal":
        return frc.sinusoidal_signal(_profile(cfg, op), amp, _omega(cfg, op),
                                     _as_number(spec["phase"], "forcing.phase"),
                                     antiperiod=spec["antiperiod"])
    if kind == "power_of_sine":
        return frc.power_of_sine_signal(
            _profile(cfg, op), amp, _omega(cfg, op),
            _as_number(spec["exponent"], "forcing.exponent", 0.0),
            antiperiod=spec["antiperiod"])
    if kind == "sampled_csv":
        _expect(spec["csv_path"], "forcing.csv_path",
                "required for sampled_csv forcing")
        return frc.load_sampled_csv(spec["csv_path"],
                                    antiperiod=spec["antiperiod"])
    if kind == "power_oracle":
        _expect(isinstance(g, dmp.DampingOp), "forcing.kind",
                "power_oracle needs a single damping family")
        mode = _as_int(spec["profile_mode"], "forcing.profile_mode", minimum=1)
        family, _tau = ap.power_oracle_family(op, g, mode)
        return family(amp if amp > 0 else 1.0)
    raise ConfigError("forcing.kind", f"unknown kind {kind!r}")


def build_forcing_family(cfg: dict, op, g):
    """Callable amplitude -> signal for sweep experiments."""
    kind = cfg["forcing"]["kind"]
    if kind == "power_oracle":
        _expect(isinstance(g, dmp.DampingOp), "forcing.kind",
                "power_oracle needs a single damping family")
        mode = _as_int(cfg["forcing"]["profile_mode"], "forcing.profile_mode",
                       minimum=1)
        family, tau = ap.power_oracle_family(op, g, mode)
        return family, tau
    if kind == "constant":
        profile = _profile(cfg, op)
        return (lambda k: frc.constant_signal(k * profile)), None
    if kind in ("sinusoidal", "power_of_sine"):
        base = build_forcing(cfg, op, g)
        return (lambda k: frc.with_amplitude(base, k)), base.declared_antiperiod
    raise ConfigError("forcing.kind",
                      f"kind {kind!r} does not define an amplitude family")


def build_stepper(cfg: dict, op) -> itg.StepperConfig:
    spec = cfg["stepper"]
    dt = spec["dt"]
    if dt is None:
        dt = itg.default_dt(op)
    dt = _as_number(dt, "stepper.dt", 0.0, strict=True)
    _expect(spec["scheme"] in itg.SCHEMES, "stepper.scheme",
            f"must be one of {itg.SCHEMES}")
    try:
        return itg.StepperConfig(
            dt=dt, scheme=spec["scheme"],
            newton_tol=_as_number(spec["newton_tol"], "stepper.newton_tol",
                                  0.0, strict=True),
            newton_max_iter=_as_int(spec["newton_max_iter"],
                                    "stepper.newton_max_iter", minimum=1),
            fallback=spec["fallback"])
    except ValueError as exc:
        raise ConfigError("stepper", str(exc))


def build_bound(cfg: dict) -> bnd.BoundConfig:
    spec = cfg["bound"]
    t_total = spec["T_total"]
    if t_total is not None:
        t_total = _as_number(t_total, "bound.T_total", 0.0, strict=True)
    try:
        return bnd.BoundConfig(
            T_total=t_total,
            burn_in_fraction=_as_number(spec["burn_in_fraction"],
                                        "bound.burn_in_fraction"),
            window_count=_as_int(spec["window_count"], "bound.window_count",
                                 minimum=2),
            window_agreement_tol=_as_number(spec["window_agreement_tol"],
                                            "bound.window_agreement_tol",
                                            0.0, strict=True),
            dt_refinement_tol=_as_number(spec["dt_refinement_tol"],
                                         "bound.dt_refinement_tol",
                                         0.0, strict=True))
    except ValueError as exc:
        raise ConfigError("bound", str(exc))


def build_shooting(cfg: dict, tau_default) -> ap.ShootingConfig:
    spec = cfg["shooting"]
    tau = spec["tau"] if spec["tau"] is not None else tau_default
    _expect(tau is not None, "shooting.tau",
            "required (or declare a forcing anti-period)")
    try:
        return ap.ShootingConfig(
            tau=_as_number(tau, "shooting.tau", 0.0, strict=True),
            residual_tol=_as_number(spec["residual_tol"],
                                    "shooting.residual_tol", 0.0, strict=True),
            max_outer_iter=_as_int(spec["max_outer_iter"],
                                   "shooting.max_outer_iter", minimum=1),
            jacobian=spec["jacobian"],
            fd_eps=_as_number(spec["fd_eps"], "shooting.fd_eps", 0.0,
                              strict=True),
            picard_relaxation=_as_number(spec["picard_relaxation"],
                                         "shooting.picard_relaxation"),
            warm_start_periods=_as_int(spec["warm_start_periods"],
                                       "shooting.warm_start_periods",
                                       minimum=0))
    except ValueError as exc:
        raise ConfigError("shooting", str(exc))


def _initial_state(cfg: dict, op, rng) -> itg.State:
    spec = cfg["simulate"]
    kind = spec["initial"]
    if kind == "zero":
        return itg.zero_state(op)
    if kind == "mode":
        mode = _as_int(spec["initial_mode"], "simulate.initial_mode",
                       minimum=1)
        _expect(mode <= op.num_modes, "simulate.initial_mode",
                f"must be <= num_modes ({op.num_modes})")
        u = sp.unit_mode(op, mode, _as_number(spec["initial_u"],
                                              "simulate.initial_u"))
        v = sp.unit_mode(op, mode, _as_number(spec["initial_v"],
                                              "simulate.initial_v"))
        return itg.make_state(op, u, v)
    if kind == "random":
        return itg.make_state(op, rng.standard_normal(op.num_modes),
                              rng.standard_normal(op.num_modes))
    raise ConfigError("simulate.initial", f"unknown initial kind {kind!r}")


def _sweep_initial(cfg: dict, op, rng):
    kind = cfg["sweep"]["initial"]
    if kind == "zero":
        return None
    if kind == "equilibrium":
        return bnd.EquilibriumStart(op)
    if kind == "linear_response":
        return bnd.LinearResponseStart(op)
    if kind == "random":
        u = rng.standard_normal(op.num_modes)
        v = rng.standard_normal(op.num_modes)
        return lambda amplitude, sig: itg.make_state(op, u, v)
    raise ConfigError("sweep.initial", f"unknown initial kind {kind!r}")


def _amplitudes(cfg: dict):
    amps = cfg["forcing"]["amplitudes"]
    _expect(isinstance(amps, list) and len(amps) >= 1, "forcing.amplitudes",
            "must be a nonempty list for this experiment")
    return [
        _as_number(a, f"forcing.amplitudes[{i}]", 0.0, strict=True)
        for i, a in enumerate(amps)
    ]


# ---------------------------------------------------------------------------
# experiments

def _write_ledger_csv(records, path):
    import csv as _csv
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["t", "E", "Phi", "work", "dissipation"])
        for r in records:
            writer.writerow([format(x, ".17g") for x in
                             (r.t, r.E, r.Phi, r.work_increment,
                              r.dissipation_increment)])


def _write_trajectory_csv(op, states, path):
    import csv as _csv
    n = op.num_modes
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["t", "Phi"]
                        + [f"u_{i}" for i in range(1, n + 1)]
                        + [f"v_{i}" for i in range(1, n + 1)])
        for s in states:
            row = [s.t, itg.phi_value(op, s.u, s.v), *s.u, *s.v]
            writer.writerow([format(x, ".17g") for x in row])


def run_simulate(cfg, out_dir):
    op = build_operator(cfg)
    g = build_damping(cfg)
    sig = build_forcing(cfg, op, g)
    stepper = build_stepper(cfg, op)
    rng = np.random.default_rng(cfg["seed"])
    state0 = _initial_state(cfg, op, rng)
    T = _as_number(cfg["simulate"]["T"], "simulate.T", 0.0, strict=True)
    every = _as_int(cfg["simulate"]["observe_every"],
                    "simulate.observe_every", minimum=1)
    records = itg.run(op, g, state0, sig, T, stepper, observe_every=every)
    _write_ledger_csv(records, out_dir / "ledger.csv")
    print(f"simulate: {len(records)} records, final E = "
          f"{records[-1].E:.6g} -> {out_dir / 'ledger.csv'}")


def run_sweep(cfg, out_dir):
    op = build_operator(cfg)
    g = build_damping(cfg)
    family, _ = build_forcing_family(cfg, op, g)
    stepper = build_stepper(cfg, op)
    bound_cfg = build_bound(cfg)
    rng = np.random.default_rng(cfg["seed"])
    norm_kind = cfg["sweep"]["norm_kind"]
    _expect(norm_kind in bnd.NORM_KINDS, "sweep.norm_kind",
            f"must be one of {bnd.NORM_KINDS}")
    amps = _amplitudes(cfg)
    result = bnd.amplitude_sweep(
        op, g, family, amps, norm_kind, bound_cfg, stepper,
        initial_state=_sweep_initial(cfg, op, rng),
        norm_horizon=_as_number(cfg["sweep"]["norm_horizon"],
                                "sweep.norm_horizon", 0.0, strict=True),
        n_jobs=_as_int(cfg["sweep"]["n_jobs"], "sweep.n_jobs", minimum=1))
    checks = {
        _as_number(e, f"sweep.check_exponents[{i}]", 0.0, strict=True):
            bnd.check_bound_inequality(result, float(e))
        for i, e in enumerate(cfg["sweep"]["check_exponents"])
    }
    bnd.write_sweep_csv(result, out_dir / "sweep.csv")
    summary = bnd.fit_summary(result, checks)
    bnd.write_fit_summary(summary, out_dir / "fit_summary.json")
    print(f"sweep: slope = {result.fitted_slope:.6g}, "
          f"r^2 = {result.r_squared:.6g} -> {out_dir / 'sweep.csv'}")


def run_antiperiodic(cfg, out_dir):
    op = build_operator(cfg)
    g = build_damping(cfg)
    stepper = build_stepper(cfg, op)
    amps = cfg["forcing"]["amplitudes"]
    family, tau_default = build_forcing_family(cfg, op, g)
    shooting = build_shooting(cfg, tau_default)
    norm_kind = cfg["sweep"]["norm_kind"]
    if norm_kind not in (bnd.NORM_LINF, bnd.NORM_L2_PERIOD):
        norm_kind = bnd.NORM_LINF if op.kind == sp.ABSTRACT \
            else bnd.NORM_L2_PERIOD
    if amps is not None and len(amps) > 1:
        result = ap.antiperiodic_exponent_sweep(
            op, g, _amplitudes(cfg), shooting, stepper,
            forcing_family=family, norm_kind=norm_kind)
        bnd.write_sweep_csv(result, out_dir / "antiperiodic.csv")
        checks = {
            float(e): bnd.check_bound_inequality(result, float(e))
            for e in cfg["sweep"]["check_exponents"]
        }
        bnd.write_fit_summary(bnd.fit_summary(result, checks),
                              out_dir / "fit_summary.json")
        largest = max((r for r in result.rows if r.m_hat is not None),
                      key=lambda r: r.amplitude, default=None)
        if largest is not None:
            _emit_trajectory(op, g, family(largest.amplitude), shooting,
                             stepper, out_dir)
        print(f"antiperiodic sweep: slope = {result.fitted_slope:.6g}, "
              f"r^2 = {result.r_squared:.6g} -> {out_dir / 'antiperiodic.csv'}")
        return
    amplitude = _amplitudes(cfg)[0] if amps else cfg["forcing"]["amplitude"]
    sig = family(amplitude)
    result = ap.shoot(op, g, sig, shooting, stepper)
    states = _emit_trajectory(op, g, sig, shooting, stepper, out_dir,
                              start=result.state)
    residual, mean_h = ap.verify_antiperiodic(op, states, shooting.tau)
    row = bnd.SweepRow(
        amplitude, norm_kind,
        bnd.signal_norm(sig, norm_kind, horizon=1.0 + 2 * shooting.tau,
                        tau=shooting.tau),
        max(itg.phi_value(op, s.u, s.v) for s in states),
        extras={"linf_norm": frc.linf_norm(sig, 1.0 + 2 * shooting.tau),
                "l2_period_norm": frc.l2_period_norm(sig, shooting.tau),
                "shooting_residual": result.residual,
                "warm_start_used": result.warm_start_used})
    bnd.write_sweep_csv(bnd.SweepResult([row], float("nan"), float("nan"),
                                        0.0), out_dir / "antiperiodic.csv")
    print(f"antiperiodic: residual = {result.residual:.3e}, "
          f"verify residual = {residual:.3e}, mean |u| = {mean_h:.3e}")


def _emit_trajectory(op, g, sig, shooting, stepper, out_dir, start=None):
    if start is None:
        start = ap.shoot(op, g, sig, shooting, stepper).state
    snapped, _ = ap._snap_stepper(stepper, shooting.tau)
    _, states = itg.run(op, g, start, sig, 2.0 * shooting.tau, snapped,
                        store_states=True)
    _write_trajectory_csv(op, states, out_dir / "trajectory.csv")
    return states


def run_verify(cfg, out_dir):
    results = vfy.run_property_suite(
        seed=cfg["seed"],
        monotonicity_pairs=_as_int(cfg["verify"]["monotonicity_pairs"],
                                   "verify.monotonicity_pairs", minimum=1),
        certificate_samples=_as_int(cfg["verify"]["certificate_samples"],
                                    "verify.certificate_samples", minimum=1))
    report = vfy.format_report(results)
    print(report)
    (out_dir / "verify_report.txt").write_text(report + "\n")
    if not all(r.passed for r in results):
        return EXIT_PROPERTIES
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ubound",
        description="Simulator and ultimate-bound measurement harness for "
                    "damped second-order modal systems")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON experiment config")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override a config field by dotted path")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (overrides config)")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set, experiment=args.experiment)
        out_dir = Path(args.out) if args.out is not None \
            else Path(cfg["output_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        cfg["output_dir"] = str(out_dir)
        with open(out_dir / "resolved_config.json", "w") as fh:
            json.dump(cfg, fh, indent=2, sort_keys=True)
            fh.write("\n")
        runner = {
            "simulate": run_simulate,
            "sweep": run_sweep,
            "antiperiodic": run_antiperiodic,
            "verify": run_verify,
        }[cfg["experiment"]]
        status = runner(cfg, out_dir)
        return EXIT_OK if status is None else status
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (itg.StepError, itg.TrajectoryError, bnd.BoundRejection,
            ap.ShootError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
