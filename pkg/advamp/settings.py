"""
This module is only intended for the storage of various global settings.
"""

# Choc-Kale user model
CK_DEFAULTS = {
    "beta": 0.9,
    "tau": 0.25,
    "mu_choc": 8.0,
    "mu_kale": 2.0,
    "sigma_choc": 0.5,
    "sigma_kale": 0.5,
    "gamma": 0.95,
}

# Observation corruption and discretization
DEFAULT_N_BUCKETS = 50
DEFAULT_SIGMA_N_GRID = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]

# Slate environment
SLATE_DEFAULTS = {
    "n_items": 7,
    "lambda_": 0.2,
    "item_std": 0.3,
    "targets": [0.0, 0.25, 0.5, 0.75, 1.0],
}

# Temporal abstraction grids of the default sweep
DEFAULT_GAMMA_GRID = [0.95, 0.99]
DEFAULT_K_GRID = [3, 5]
DEFAULT_T_GRID = [1.0, 2.0, 3.0]

# Q-learning protocol
QLEARN_DEFAULTS = {
    "n_events": 30000,
    "alpha0": 1.0,
    "alpha_decay": 0.3,
    "init_q": 0.0,
}

# Evaluation protocol
DEFAULT_N_RUNS = 10
DEFAULT_N_ROLLOUTS = 100
DEFAULT_HORIZON = 1000
CI95_Z = 1.96

# Exact solvers
SOLVER_TOL = 1e-8

# Verification suites
VERIFY_RANDOM_MDPS = 50
VERIFY_MAX_STATES = 10
VERIFY_MAX_ACTIONS = 4
VERIFY_K_VALUES = [2, 3, 5]
VERIFY_GAMMAS = [0.95, 0.99]
KAPPA_GRID = {
    "gamma": [0.9, 0.95, 0.99],
    "L": [0.05, 0.1, 0.5],
    "T": [0.5, 1.0, 2.0],
}

# Output files
DEFAULT_OUTPUT_DIR = "results"

if __name__ == "__main__":
    print("This module not intended for interactive use.  Please use cli.py.")
