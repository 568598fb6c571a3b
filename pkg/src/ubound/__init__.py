"""Modal simulator and measurement harness for damped second-order systems.

Simulates u'' + A u + g(u') = h(t) on a sine-mode truncation with monotone
nonlinear damping, estimates the ultimate bound of the energy along
trajectories, and measures how that bound grows with the forcing size.
"""

from .spectral import (ABSTRACT, BEAM, WAVE, SpectralOperator, ZSpace,
                       apply_a, make_operator, norm_h, norm_v, norm_v_dual,
                       norm_z, to_modal, to_nodal, unit_mode, z_h10, z_l2,
                       z_lp)
from .damping import (AVERAGED_H, LINEAR_VISCOUS, LOCAL_POWER,
                      STRUCTURAL_AVERAGED, DampingCertificate, DampingOp,
                      DampingSum, NoCertificateError, apply_g, certificate,
                      dissipation, verify_certificate)
from .forcing import (ForcingSignal, constant_signal, eval_forcing,
                      l2_period_norm, linf_norm, load_sampled_csv,
                      power_of_sine_signal, s2_norm, sampled_signal,
                      sinusoidal_signal, with_amplitude, zero_signal)
from .integrator import (BACKWARD_EULER, IMPLICIT_MIDPOINT, EnergyRecord,
                         State, StepError, StepperConfig, TrajectoryError,
                         contraction_check, default_dt, energy, make_state,
                         run, step, zero_state)
from .bounds import (BoundConfig, BoundRejection, SweepResult,
                     amplitude_sweep, check_bound_inequality,
                     estimate_ultimate_bound, fit_loglog,
                     nonresonant_frequency)
from .antiperiodic import (ShootError, ShootingConfig, ShootResult,
                           antiperiodic_exponent_sweep, half_period_map,
                           power_oracle_family, shoot, verify_antiperiodic)

__version__ = "0.1.0"
