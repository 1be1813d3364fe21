"""Product-form analysis of preemptive-priority multiclass queueing networks.

The analytic core computes iterative product-form marginals for networks
with static buffer priorities and multi-server stations.  A truncated-CTMC
solver and a discrete-event simulator serve as independent checks.
"""

__version__ = "0.1.0"

from .errors import (CapTooSmall, ConfigError, NotIrreducible, ParseError, PrioqnError,
                     ShapeError, SingularRouting, Unstable, ValidationError)
from .model import NetworkSpec, TrafficSolution, ValidationReport, solve_traffic, validate_spec
from .productform import (ClassMarginal, KappaTable, ProductForm, StabilityReport, class_marginal,
                          joint_probability, kappa_table, marginal_moments, mmc_marginal,
                          solve_product_form, stability_check)
from .srbm import (MetricsRow, VariabilityParams, comparison_table, exact_metrics, srbm_metrics,
                   srbm_workload)
from .oracle import (OracleResult, TruncatedChain, build_generator, compare_to_product_form,
                     paper_balance_residual, run_oracle, stationary_solve)
from .specfile import parse_spec

__all__ = [
    "CapTooSmall", "ConfigError", "NotIrreducible", "ParseError", "PrioqnError", "ShapeError",
    "SingularRouting", "Unstable", "ValidationError",
    "NetworkSpec", "TrafficSolution", "ValidationReport", "solve_traffic", "validate_spec",
    "ClassMarginal", "KappaTable", "ProductForm", "StabilityReport", "class_marginal",
    "joint_probability", "kappa_table", "marginal_moments", "mmc_marginal", "solve_product_form",
    "stability_check",
    "MetricsRow", "VariabilityParams", "comparison_table", "exact_metrics", "srbm_metrics",
    "srbm_workload",
    "OracleResult", "TruncatedChain", "build_generator", "compare_to_product_form",
    "paper_balance_residual", "run_oracle", "stationary_solve",
    "parse_spec",
]
