"""Frozen numerical defaults.

Every tolerance or scheme constant that was calibrated (rather than derived)
lives here, so reruns are reproducible and the values show up in one place.
"""

# Seed for all sampled property checks (random diagonal metrics etc.).
SEED = 745318

# -- ODE integration -----------------------------------------------------
FLOW_RTOL = 1e-9
FLOW_ATOL = 1e-12
# Tighter setting used for long-horizon conserved-quantity runs.
LONG_RTOL = 1e-12
LONG_ATOL = 1e-14
SAMPLES_PER_DECADE = 32
# Coefficients below this are treated as a degenerate metric.
POSITIVITY_FLOOR = 1e-300

# -- coordinate finite-difference oracle ---------------------------------
ORACLE_STEP = 1e-3

# -- power-law fitting ----------------------------------------------------
FIT_TAIL_DECADES = 1.0          # fit window: last decade of a run
LOG_CORRECTION_EXPONENTS = (-0.5, 0.0, 0.5)

# -- rescaling / soliton convergence --------------------------------------
RESCALE_WINDOW = (1.0, 2.0)     # rescaled time window used for deviations
RESCALE_POINTS = 33
# Deviation threshold at s = 1e6, frozen after a one-time calibration run.
# Observed worst case over the catalog was ~2e-4 (class a3); 1e-2 is the
# contract value.
SOLITON_DEVIATION_MAX = 1e-2
# Deviations below this are integrator noise: once a flow locks onto the
# soliton to machine precision (isom_r2 sits at ~3e-9 for every s), the
# deviation sequence is no longer required to decrease strictly.
RESCALE_NOISE_FLOOR = 1e-8

# -- bundle flow -----------------------------------------------------------
# Parabolic CFL constant for classical RK4 on the 4th-order stencil.
# The linear-stability limit is ~0.52; 0.4 was calibrated to stay stable
# with the nonlinear terms over the full acceptance run.
BUNDLE_CFL = 0.4
# Base metric is seeded at 2*t0*tension*(1+margin) -- the self-similar
# profile inflated by `margin` -- so the scale-normalized volume decreases
# from the first step.
BUNDLE_SEED_MARGIN = 0.1
BUNDLE_T0 = 1.0
BUNDLE_SEED_AMPLITUDE = 0.1
BUNDLE_SEED_MODES = 2
BUNDLE_SEED_RNG = 7
# Floor for the seeded base metric, as a fraction of the peak tension
# density: keeps min(g) -- and with it the parabolic step size -- bounded
# below where the seed's tension dips.
BUNDLE_SEED_FLOOR = 0.3
BUNDLE_SAMPLES_PER_DECADE = 16
BUNDLE_MAX_STEPS = 50_000_000

# -- catalog defaults ------------------------------------------------------
A2_DEFAULT_K = 1.0
A3_DEFAULT_K = 1.0
EINSTEIN_DEFAULT_C = 1.0
