"""Central table of default tolerances, sizes and limits.

Every default used by the library or the CLI lives here so that reports can
embed them and users can find them in one place.
"""

DEFAULTS = {
    # Newton solver
    "newton_tol": 1e-9,
    "newton_max_iter": 100,
    "newton_max_halvings": 60,
    # quadrature
    "quad_tol": 1e-10,
    "quad_abs_tol": 1e-14,
    "quad_max_depth": 200,
    "quad_max_intervals": 2_000_000,
    # inverse weights are floored here before division
    "weight_floor": 1e-8,
    # sphering eigenvalue floor
    "eigen_floor": 1e-12,
    # Cox separation detector
    "cox_beta_bound": 50.0,
    # bootstrap / simulation
    "bootstrap_B": 1000,
    "bootstrap_seed": 0,
    "percentile_levels": (0.025, 0.975),
    "confidence_levels": (0.90, 0.95),
    # local likelihood
    "local_grid_size": 50,
    # diagnose
    "sphered_threshold": 3.0,
    # oracle
    "oracle_condition_warn": 1e10,
}
