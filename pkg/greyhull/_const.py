import numpy as np

# Channel order of a vessel state vector.
STATE_CHANNELS = ("x", "y", "psi", "u", "v", "r", "n", "delta")

# Channel order of a control input vector.
INPUT_CHANNELS = ("c_n", "c_delta")

# Channels compared by the distance measures and the trajectory cost.
METRIC_CHANNELS = STATE_CHANNELS[:6]

PARAM_NAMES = tuple(f"p{i}" for i in range(11))

# Index of each state channel.
IX, IY, IPSI, IU, IV, IR, IN, IDELTA = range(8)

# Units written into file headers. Rudder channels are stored in degrees.
FILE_UNITS = {
    "x": "m",
    "y": "m",
    "psi": "rad",
    "u": "m/s",
    "v": "m/s",
    "r": "rad/s",
    "n": "rpm",
    "delta": "deg",
    "c_n": "rpm",
    "c_delta": "deg",
}

# Columns converted between radians (memory) and degrees (files).
DEGREE_COLUMNS = tuple(k for k, unit in FILE_UNITS.items() if unit == "deg")

EPS_U = 1e-3  # m/s, cutoff for U-normalised damping and rudder inflow
EPS_N = 1e-3  # rev/s, advance-ratio guard
EPS_DET = 1e-9  # relative floor of the sway/yaw inertia determinant

R_MAX = 0.0314  # rad/s
A_MAX = float(np.deg2rad(35.0))
LIFT_SIGN_GATE = float(np.deg2rad(2.0))

DEFAULT_DT = 1.0
DEFAULT_KNOTS = 120

PENALTY = 1e12
FEASIBILITY_TOL = 1e-6
TEST_FRACTION = 0.125

# Printing format for every number leaving the package.
FLOAT_FORMAT = "%.17g"
