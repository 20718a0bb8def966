"""
Configuration settings for chain simulations and supratransmission experiments
"""

# Chain defaults (desk scale)
DEFAULT_N_SITES = 200
DEFAULT_N_PHYSICAL = 150
DEFAULT_COUPLING = 4.0
DEFAULT_KAPPA = 0.5          # absorbing strength
DEFAULT_SIGMA = 3.0          # absorbing width (sites)
DEFAULT_DT = 0.05
DEFAULT_T_FINAL = 200.0
DEFAULT_FREQUENCY = 0.9
DEFAULT_RAMP_TIME = 50.0   # time units for the 0 -> A amplitude ramp

# Newton iteration
NEWTON_TOLERANCE = 1e-12       # inf-norm of the correction, scaled by max(1, |u|_inf)
NEWTON_MAX_ITERATIONS = 25

# Discrete gradient singularity guard
DISCRETE_GRADIENT_EPSILON = 1e-7

# |u| above this is treated as a blow-up
BLOWUP_THRESHOLD = 1e8

# Energy diagnostics
IDENTITY_RELATIVE_TOLERANCE = 1e-8
GREENS_RELATIVE_TOLERANCE = 1e-12

# Threshold detection
THRESHOLD_RATIO = 10.0           # E(A) > R * E_base * (A / A_base)^2
THRESHOLD_TOLERANCE = 1e-3       # bracket width
THRESHOLD_BASELINE_FRACTION = 0.1   # A_base = fraction * A_lo
THRESHOLD_LOWER_FACTOR = 0.25    # default A_lo = factor * A_s
THRESHOLD_UPPER_FACTOR = 2.0     # default A_hi = factor * A_s
ENERGY_FLOOR = 1e-30

# Near the band edge the onset needs a longer horizon
BAND_EDGE_FREQUENCY = 0.95
BAND_EDGE_T_FINAL = 500.0

# The evanescent envelope needs the start-up transient gone from site 60
EVANESCENT_T_FINAL = 1000.0

# Shift-law and monotonicity checks
SHIFT_LAW_TOLERANCE = 0.10       # relative
MASS_LEVEL_DENOMINATOR = 40.0    # sqrt(m^2 + 1) = 1 + level / 40

# Output
CSV_FLOAT_FORMAT = "%.17g"
DEFAULT_OUTPUT_DIR = "results"
DEFAULT_PROBES = (60,)

# Exit codes
EXIT_OK = 0
EXIT_VALIDATION_FAILURE = 2
EXIT_BLOWUP = 3
EXIT_CONFIG_ERROR = 4
