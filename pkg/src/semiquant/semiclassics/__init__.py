"""Trace-formula layer: windows, smoothed traces, predictions, fits and checks."""
from .window import WindowFunction, time_sum
from .traces import (FactorSpectra, OrbitTerm, TracePrediction, complex_normal_determinant,
                     gutzwiller_predict, orbit_amplitude, poisson_rotation, resonant_orbits, smoothed_kernel_matrix,
                     smoothed_trace, smoothed_trace_direct, twist_holonomy, weyl_term)
from .fitting import (ExpansionFit, Extrapolation, IllConditionedFitError, ModelTerm,
                      decay_exponent, fit_expansion, richardson)
from .checks import (CheckResult, a0_check, a0_samples, b_kernel_check,
                     coherent_propagation_check, default_spectra, kernel_decay_check,
                     window_decay_check, window_kernel)
