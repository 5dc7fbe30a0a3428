"""Shared constants for the advect_eig package."""

VERSION = "0.1.0"

# Fixture names accepted by --fixture and apply_fixture
FIXTURE_NAMES = ("paper", "desk", "rda")

# Fold-point tolerances, relative to max|m| and max|m'|
FOLD_VALUE_TOL = 1e-12
FOLD_DERIVATIVE_TOL = 1e-9

# Staircase products stop once sigma_k drops below this
STAIRCASE_SIGMA_FLOOR = 1e-18

# Persistence / extinction thresholds
EXTINCTION_SUP = 1e-8
EXTINCTION_RATE = -1e-3
PERSISTENCE_CHANGE = 1e-6
PERSISTENCE_SUP = 1e-3
RATE_WINDOW_FRACTION = 0.2

# Membership comparisons allow this much absolute slack
MEMBERSHIP_SLACK = 1e-15

# CSV column layouts
SWEEP_COLUMNS = ("s", "lambda", "residual", "h_estimate", "nodes", "seconds")
CERTIFICATE_COLUMNS = ("s", "rq_dirichlet_test", "rq_neumann_test", "lambda")
TRAJECTORY_COLUMNS = ("t", "sup_norm", "mass", "rate_estimate")
PHASE_COLUMNS = ("s", "lambda1", "verdict")
MESH_COLUMNS = ("index", "node", "provenance")
DIVERGENCE_COLUMNS = ("s", "lambda", "residual", "stage", "target")
