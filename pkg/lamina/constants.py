"""Constants and named presets shared across runs."""
import math

# Bounds fixed by the analysis rather than by configuration
EPSILON_STAR = 1.0
ALPHA_MIN = 2.5
SOBOLEV_ORDER = 3

# Linear solvers
CG_TOLERANCE = 1e-10
CG_MAX_ITERATIONS = 10_000

# Geometry sampling
L_SAMPLES_PER_PERIOD = 1024
PERIOD_TOLERANCE = 1e-9

# Computational box in x' is [0, BOX_PERIOD)^2
BOX_PERIOD = 2 * math.pi

# Presets are applied on top of dataclass defaults, before the config file
PRESETS = {
    "smoke": {
        "grid": {"n1": 32, "n2": 32, "n3": 64, "height": 6.0},
        "time": {"t_final": 0.25, "dt": 0.01, "snapshot_every": 1},
        "check": {"sandwich_samples": 100_000, "eigen_points": 200},
    },
    "resolved": {
        "grid": {"n1": 64, "n2": 64, "n3": 128, "height": 8.0},
        "time": {"t_final": 0.5, "dt": 0.0025, "snapshot_every": 1},
    },
    "flat": {
        "geometry": {"profile": "flat"},
        "grid": {"n1": 16, "n2": 16, "n3": 48, "height": 6.0},
        "time": {"t_final": 0.1, "dt": 0.01},
    },
    "sweep": {
        "geometry": {"profile": "cosine", "amplitude": 0.2, "alpha": 3.0},
        "params": {"k0": 1.0},
        "grid": {"n1": 64, "n2": 64, "n3": 128, "height": 8.0},
        "time": {"t_final": 0.5, "dt": 0.005},
        "sweep": {
            "mode": "paired",
            "eta": {"start": 1 / 12, "ratio": 0.5, "count": 6},
            "nu_power": 3.0,
            "delta_match_eta": True,
        },
    },
}
