"""Classical dynamics of excited hydrogen in parallel static and microwave fields."""

from .critical import (CritQuery, CriticalFieldTable, F_CRIT_1D, NoFoldError,
                       Region, adiabatic_boundaries, critical_action, f_crit,
                       ionisation_criterion, tunnelling_width_1d)
from .adiabatic import (AdiabaticOutcome, AdiabaticState, AngleHarmonics,
                        FourierBlock, G_and_gradients, adiabatic_derivatives,
                        angle_corrections, fourier_coeffs,
                        integrate_adiabatic, stark_energy_gradient,
                        trace_adiabatic)
from .ensemble import (EnsembleSpec, IonisationCurve, IonisationResult,
                       WidthFit, WidthRecord, ionisation_probability, sample,
                       scan, stratification_dims, width_fit)
from .exact import (OrbitOutcome, TrajectoryState, actions_from_state,
                    initial_state, integrate, kepler_invariants, trace)
from .meanmotion import (MeanMotionOutcome, ZVector, integrate_z,
                         stark_nonlinear_gradient, trace_z, z_derivatives,
                         ze_angles, ze_map)
from .resonance import (FieldEstimate, IslandAbsentError, IslandParams,
                        NoResonanceError, PhaseCurve, ResonanceCoeffs,
                        ResonanceContours, bessel_jprime_zero,
                        disappearance_field, island_fraction, island_params,
                        phase_line_evolution, resonance_contours,
                        resonance_position, rotation_profile_pade, script_J)
from .series import (Actions, GFunction, PadeApproximant, PowerSeries,
                     SingularSeriesError, StarkSeries, action_integral_series,
                     g_bar, g_function, g_tilde, pade, radius_of_convergence,
                     richardson, series_arith, stark_series)
from .units import (Envelope, LabParams, ScaledParams, envelope_derivative,
                    envelope_value, field_derivative, field_value, scale,
                    unscale)

__version__ = "0.1.0"
