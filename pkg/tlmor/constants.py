import math

TLMOR_THREADS_ENV = "TLMOR_THREADS"
TLMOR_LOG_LEVEL_ENV = "TLMOR_LOG_LEVEL"
TLMOR_LOG_FILE_ENV = "TLMOR_LOG_FILE"

INFINITY = math.inf

# Relative tolerances
SOLVER_RESIDUAL_TOL = 1e-10
IMAG_TRUNCATION_TOL = 1e-12
STABILITY_MARGIN = 1e-12
POLE_GAP_TOL = 1e-8
CONDITION_LIMIT = 1e12
RANK_TOL = 1e-10
DEFINITENESS_FLOOR = 1e-12
OBSERVABILITY_TOL = 1e-10
GRAMIAN_CLAMP = 1e-10
# squared errors below this fraction of the energy scale are round-off of the difference formula
ENERGY_ROUNDOFF_TOL = 2e-13
BALANCING_CLAMP = 1e-12
CONJUGATE_MATCH_TOL = 1e-10

IRKA_MAXITER = 100
IRKA_TOL = 1e-6
TLIRKA_RESIDUAL_TOL = 1e-8

HINF_GRID_POINTS = 1000
HINF_DECADES_MARGIN = 2
STEP_GRID_POINTS = 201

CSV_FLOAT_FORMAT = "{:.9g}"
CSV_COLUMNS = (
    "method",
    "r",
    "t1",
    "t2",
    "h2t_error",
    "hinf_error",
    "stable",
    "defect_energy",
    "defect_gramian",
    "runtime_ms",
    "status",
)
STEP_CSV_COLUMNS = ("time", "method", "abs_error")


class Method:
    BT = "BT"
    TLBT = "TLBT"
    ATLBT = "A-TLBT"
    IRKA = "IRKA"
    TLIRKA = "TLIRKA"
    PORK = "PORK"
    CURE = "CURE"
    TLPORK = "TLPORK"
    OTLPORK = "O-TLPORK"
    TLCURE = "TLCURE"

    ALL = (BT, TLBT, ATLBT, IRKA, TLIRKA, PORK, CURE, TLPORK, OTLPORK, TLCURE)
    PSEUDO_OPTIMAL = (TLPORK, OTLPORK, TLCURE)


class Side:
    INPUT = "input"
    OUTPUT = "output"
    RIGHT = "right"
    LEFT = "left"


class GramianKind:
    CTRL = "ctrl"
    OBS = "obs"
