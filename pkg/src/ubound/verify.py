"""Self-contained property suite: the numerical invariants the solver is
built on, executed against fresh random data.

Each check returns a CheckResult with the worst observed violation, so a
failing run says which invariant broke and by how much.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import antiperiodic as ap
from . import bounds as bnd
from . import damping as dmp
from . import forcing as frc
from . import integrator as itg
from . import spectral as sp


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _result(name, worst, tol, fmt="{:.3e}"):
    return CheckResult(name, worst <= tol,
                       f"worst {fmt.format(worst)} (tol {fmt.format(tol)})")


def _damping_zoo(op_wave, op_beam):
    return [
        (op_wave, dmp.DampingOp(dmp.AVERAGED_H, 1.0, 0.0), "viscous"),
        (op_wave, dmp.DampingOp(dmp.AVERAGED_H, 1.0, 2.0), "averaged cubic"),
        (op_wave, dmp.DampingOp(dmp.LOCAL_POWER, 1.0, 2.0), "pointwise cubic"),
        (op_beam, dmp.DampingOp(dmp.STRUCTURAL_AVERAGED, 1.0, 1.0),
         "structural quadratic"),
    ]


def check_transform_round_trip(op, rng, n_samples=200):
    worst = 0.0
    for _ in range(n_samples):
        m = rng.standard_normal(op.num_modes) * 10.0 ** rng.uniform(-2, 2)
        back = sp.to_modal(op, sp.to_nodal(op, m))
        worst = max(worst, float(np.max(np.abs(back - m))))
    return _result("transform round trip", worst, 1e-10)


def check_duality_identity(op, rng, n_samples=200):
    worst = 0.0
    for _ in range(n_samples):
        m = rng.standard_normal(op.num_modes)
        w = rng.standard_normal(op.num_modes)
        lhs = float(np.dot(sp.apply_a(op, m), w))
        rhs = sp.v_inner(op, m, w)
        worst = max(worst, abs(lhs - rhs))
    return _result("stiffness pairing equals energy inner product", worst, 0.0)


def check_norm_ordering(op, rng, n_samples=500):
    worst = 0.0
    for _ in range(n_samples):
        m = rng.standard_normal(op.num_modes) * 10.0 ** rng.uniform(-3, 3)
        worst = max(worst, sp.norm_h(op, m)
                    - op.embedding_P * sp.norm_v(op, m))
    return _result("norm ordering (base <= P * energy)", max(worst, 0.0), 1e-12)


def check_parseval(op, rng, n_samples=200):
    worst = 0.0
    for _ in range(n_samples):
        m = rng.standard_normal(op.num_modes) * 10.0 ** rng.uniform(-2, 2)
        f = sp.to_nodal(op, m)
        quad = op.quad_weight * float(np.sum(f * f))
        nh2 = sp.norm_h(op, m) ** 2
        worst = max(worst, abs(nh2 - quad) / (1.0 + nh2))
    return _result("quadrature Parseval identity", worst, 1e-8)


def check_monotonicity(configs, rng, n_pairs=1000):
    worst = 0.0
    for op, g, _ in configs:
        for _ in range(n_pairs):
            v = rng.standard_normal(op.num_modes) * 10.0 ** rng.uniform(-2, 2)
            w = rng.standard_normal(op.num_modes) * 10.0 ** rng.uniform(-2, 2)
            pair = float(np.dot(dmp.apply_g(op, g, v) - dmp.apply_g(op, g, w),
                                v - w))
            nv = math.sqrt(float(np.dot(v, v)))
            nw = math.sqrt(float(np.dot(w, w)))
            scaled = -pair / (1.0 + nv + nw) ** 2
            worst = max(worst, scaled)
    return _result("damping monotonicity", max(worst, 0.0), 1e-10)


def check_oddness(configs, rng, n_samples=300):
    worst = 0.0
    for op, g, _ in configs:
        for _ in range(n_samples):
            v = rng.standard_normal(op.num_modes) * 10.0 ** rng.uniform(-2, 2)
            diff = dmp.apply_g(op, g, -v) + dmp.apply_g(op, g, v)
            worst = max(worst, float(np.max(np.abs(diff))))
    return _result("damping oddness (exact)", worst, 0.0)


def check_homogeneity(configs, rng, n_samples=300):
    worst = 0.0
    for op, g, _ in configs:
        if not isinstance(g, dmp.DampingOp) or g.family == dmp.LOCAL_POWER:
            continue
        for _ in range(n_samples):
            v = rng.standard_normal(op.num_modes)
            s = 10.0 ** rng.uniform(-3, 3)
            a = dmp.apply_g(op, g, s * v)
            b = s ** (g.alpha + 1.0) * dmp.apply_g(op, g, v)
            scale = float(np.max(np.abs(b))) + 1e-300
            worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    return _result("averaged-family homogeneity", worst, 1e-12)


def check_certificates(configs, rng, n_samples=1000):
    worst = 0.0
    for op, g, _ in configs:
        for cond in dmp.CONDITIONS:
            cert = dmp.certificate(op, g, cond)
            worst = max(worst, dmp.verify_certificate(
                op, g, cert, n_samples=n_samples, rng=rng))
    return _result("certificate soundness", worst, 1e-9)


def check_s2_le_linf(rng):
    profile = np.array([1.0, -0.5, 0.25])
    zoo = [
        frc.constant_signal(profile),
        frc.sinusoidal_signal(profile, 2.0, 2 * math.pi),
        frc.sinusoidal_signal(profile, 3.0, 0.7, phase=0.3),
        frc.power_of_sine_signal(profile, 1.5, 1.0, 3.0),
        frc.power_of_sine_signal(profile, 4.0, 2.5, 1.0),
    ]
    ts = np.linspace(0.0, 40.0, 2001)
    zoo.append(frc.sampled_signal(
        ts, rng.standard_normal((len(ts), 3))))
    worst = -math.inf
    for sig in zoo:
        worst = max(worst, frc.s2_norm(sig, 30.0) - frc.linf_norm(sig, 30.0))
    return _result("sliding-window size below sup size", max(worst, 0.0), 1e-9)


def check_contraction(configs, rng, n_pairs=10, T=2.0):
    worst = 0.0
    for op, g, _ in configs:
        stepper = itg.StepperConfig(dt=0.01, scheme=itg.BACKWARD_EULER)
        h = frc.sinusoidal_signal(sp.unit_mode(op, 1), 1.0,
                                  bnd.nonresonant_frequency(op))
        for _ in range(n_pairs):
            a = itg.make_state(op, rng.standard_normal(op.num_modes),
                               rng.standard_normal(op.num_modes))
            b = itg.make_state(op, rng.standard_normal(op.num_modes),
                               rng.standard_normal(op.num_modes))
            rep = itg.contraction_check(op, g, a, b, h, T, stepper)
            worst = max(worst, rep.max_ratio - 1.0)
    return _result("discrete flow non-expansive", max(worst, 0.0), 1e-10)


def check_forcing_difference(configs, rng, n_pairs=5, T=2.0):
    worst = 0.0
    for op, g, _ in configs:
        stepper = itg.StepperConfig(dt=0.01, scheme=itg.BACKWARD_EULER)
        om = bnd.nonresonant_frequency(op)
        ha = frc.sinusoidal_signal(sp.unit_mode(op, 1), 1.0, om)
        hb = frc.sinusoidal_signal(sp.unit_mode(op, 1), 1.5, 1.3 * om)
        for _ in range(n_pairs):
            a = itg.make_state(op, rng.standard_normal(op.num_modes),
                               rng.standard_normal(op.num_modes))
            b = itg.make_state(op, rng.standard_normal(op.num_modes),
                               rng.standard_normal(op.num_modes))
            rep = itg.contraction_check(op, g, a, b, ha, T, stepper,
                                        forcing_b=hb)
            slack = rep.dist_initial + rep.forcing_l1_diff - rep.dist_final
            worst = max(worst, -slack)
    return _result("forcing-difference bound", max(worst, 0.0), 1e-9)


def check_unforced_decay(configs, rng):
    worst = 0.0
    for op, g, _ in configs:
        h0 = frc.zero_signal(op.num_modes)
        state = itg.make_state(op, rng.standard_normal(op.num_modes),
                               rng.standard_normal(op.num_modes))
        for scheme in itg.SCHEMES:
            stepper = itg.StepperConfig(dt=0.02, scheme=scheme)
            records = itg.run(op, g, state, h0, 4.0, stepper)
            energies = [r.E for r in records]
            worst = max(worst, max(b - a for a, b in zip(energies,
                                                         energies[1:])))
    return _result("unforced energy decay", max(worst, 0.0), 1e-12)


def check_energy_identity(configs, rng):
    """Backward Euler: per-step identity defect is nonpositive and the
    total residual is first order in dt (Richardson ratio near 2)."""
    op, g, _ = configs[1]
    h = frc.sinusoidal_signal(sp.unit_mode(op, 1), 1.0,
                              bnd.nonresonant_frequency(op))
    state = itg.make_state(op, rng.standard_normal(op.num_modes),
                           rng.standard_normal(op.num_modes))

    def total_residual(dt):
        stepper = itg.StepperConfig(dt=dt, scheme=itg.BACKWARD_EULER)
        records = itg.run(op, g, state, h, 10.0, stepper)
        worst_defect = -math.inf
        for prev, cur in zip(records, records[1:]):
            defect = (cur.E - prev.E
                      - (cur.work_increment - cur.dissipation_increment))
            worst_defect = max(worst_defect, defect)
        resid = abs(records[-1].E - records[0].E
                    - sum(r.work_increment - r.dissipation_increment
                          for r in records[1:]))
        return resid, worst_defect

    r1, d1 = total_residual(0.02)
    r2, d2 = total_residual(0.01)
    ratio = r1 / r2
    ok = 1.6 <= ratio <= 2.4 and d1 <= 1e-12 and d2 <= 1e-12
    return CheckResult("energy identity (signed defect, first-order residual)",
                       ok, f"ratio {ratio:.3f}, worst defect "
                           f"{max(d1, d2):.3e}")


def check_equilibrium(configs):
    worst = 0.0
    for op, g, _ in configs:
        k = 3.0
        h = frc.constant_signal(k * op.lam[0] * sp.unit_mode(op, 1))
        state = itg.make_state(op, sp.unit_mode(op, 1, k),
                               np.zeros(op.num_modes))
        for scheme in itg.SCHEMES:
            stepper = itg.StepperConfig(dt=0.01, scheme=scheme)
            cur = state
            for _ in range(50):
                nxt = itg.step(op, g, cur, h, stepper)
                drift = max(float(np.max(np.abs(nxt.u - cur.u))),
                            float(np.max(np.abs(nxt.v - cur.v))))
                worst = max(worst, drift)
                cur = nxt
    return _result("stationary states are fixed points", worst, 1e-12)


def check_antiperiodic_double_period(rng):
    profile = np.array([0.5, 1.0])
    om = 1.3
    tau = math.pi / om
    zoo = [frc.sinusoidal_signal(profile, 2.0, om, antiperiod=tau),
           frc.power_of_sine_signal(profile, 1.5, om, 3.0, antiperiod=tau)]
    worst = 0.0
    for sig in zoo:
        for t in np.linspace(0.0, 2 * tau, 101):
            d = frc.eval_forcing(sig, t + 2 * tau) - frc.eval_forcing(sig, t)
            worst = max(worst, float(np.sqrt(np.dot(d, d))))
    return _result("anti-periodic implies double-period periodic", worst, 1e-10)


def run_property_suite(seed: int = 0, monotonicity_pairs: int = 1000,
                       certificate_samples: int = 1000) -> list:
    """Run every check; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    op_wave = sp.make_operator(sp.WAVE, 6)
    op_beam = sp.make_operator(sp.BEAM, 4)
    configs = _damping_zoo(op_wave, op_beam)
    configs_sum = configs + [
        (op_wave, dmp.DampingSum((dmp.DampingOp(dmp.LINEAR_VISCOUS, 1.0),
                                  dmp.DampingOp(dmp.AVERAGED_H, 1.0, 2.0))),
         "viscous + averaged cubic"),
    ]
    results = [
        check_transform_round_trip(op_wave, rng),
        check_duality_identity(op_wave, rng),
        check_norm_ordering(op_wave, rng),
        check_parseval(op_wave, rng),
        check_monotonicity(configs_sum, rng, n_pairs=monotonicity_pairs),
        check_oddness(configs_sum, rng),
        check_homogeneity(configs, rng),
        check_certificates(configs_sum, rng, n_samples=certificate_samples),
        check_s2_le_linf(rng),
        check_contraction(configs, rng),
        check_forcing_difference(configs, rng),
        check_unforced_decay(configs, rng),
        check_energy_identity(configs, rng),
        check_equilibrium(configs),
        check_antiperiodic_double_period(rng),
    ]
    return results


def format_report(results) -> str:
    width = max(len(r.name) for r in results)
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name:<{width}}  {status}  {r.detail}")
    n_fail = sum(1 for r in results if not r.passed)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
