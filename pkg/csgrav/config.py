"""
Numeric constants, default check tolerances and logging setup.

Nothing here is read from the environment: a run is fully determined by its
spec, its seed and the package version.
"""
import logging

# Invertibility threshold for coframes and group elements
EPS_DET = 1e-12

# Exponential series: stop once a term drops below this (relative) size
EXP_TOL = 1e-16
SERIES_MAX_TERMS = 64

# Scaling-and-squaring target norm for exp
EXP_SCALE_TARGET = 0.5

# sup-norm of the transvection part accepted as "admissible"
ADMISSIBILITY_TOL = 1e-10

DEFAULT_SIGNATURE = (-1, 1, 1)

# Residual objective below which descent stops
SOLVER_TOL = 1e-8

# Points per evaluation chunk; fixed so results never depend on worker count
EVAL_CHUNK = 4096

DEFAULT_TOLERANCES = {
    "projector": 1e-14,
    "k_invariance": 1e-9,
    "gram_gl": 1e-3,
    "gram_aff3": 1e-6,
    "aff_invariance": 1e-9,
    "jacobi": 1e-12,
    "iso_intertwining": 1e-10,
    "d_squared": 1e-12,
    "leibniz": 1e-10,
    "stokes": 1e-11,
    "bianchi": 1e-9,
    "cs_transgression": 1e-12,
    "maurer_cartan": 1e-9,
    "gauge_composition": 1e-9,
    "gauge_defect": 1e-8,
    "gauge_defect_integral": 1e-10,
    "wzw_closed": 1e-8,
    "action_gauge_invariance": 1e-9,
    "metricity": 1e-12,
    "frame_completeness": 1e-12,
    "witten_split": 1e-10,
    "reduce_round_trip": 1e-14,
    "palatini_normalization": 1e-10,
    "correspondence": 1e-9,
    "ratio_spread": 1e-9,
    "chern_weil": 1e-9,
    "chern_weil_integral": 1e-9,
    "objective_reduction": 1e3,
    "stationarity": 1e-6,
}

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(quiet: bool = False) -> None:
    """Configure root logging once for the CLI (stderr only)."""
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format=LOG_FORMAT,
    )
