"""Martingale CLT rate laboratory.

Simulate martingale difference sequences from conditional kernels, certify
their moment conditions, estimate Kolmogorov distances to the standard
normal, and compare the resulting decay against explicit (constant-free)
rate functionals.  See the README for the CLI and the experiment scripts.
"""

__version__ = "0.1.0"

from .bounds import BOUNDS, compare_table, evaluate_rate, verify_smoothing_lemma
from .conditions import (
    EXHAUSTIVE,
    ConditionReport,
    SimulatedHistories,
    certify,
    check_bernstein,
    minimal_delta,
    minimal_epsilon,
    verify_moment_lemmas,
)
from .distance import (
    KolmogorovEstimate,
    exact_kolmogorov_discrete,
    fit_rate,
    kolmogorov_distance,
    standard_normal_cdf,
)
from .kernels import (
    ConditionalKernel,
    PathBundle,
    PathCollection,
    StepDistribution,
    TerminalStatistics,
    conditional_moment,
    make_kernel,
    sample_paths,
    sample_terminal,
    terminal_statistics,
)
from .lipschitz import (
    LipschitzModel,
    doob_decompose,
    epsilon_delta_n,
    make_model,
    variance_sandwich,
    verify_a1_lipschitz,
)
from .transforms import (
    INF_GE_1,
    SUP_LE_1,
    pad_to_unit_variance,
    restrict_to_v,
    stop_time_v,
)

__all__ = [
    "__version__",
    "BOUNDS",
    "compare_table",
    "evaluate_rate",
    "verify_smoothing_lemma",
    "EXHAUSTIVE",
    "ConditionReport",
    "SimulatedHistories",
    "certify",
    "check_bernstein",
    "minimal_delta",
    "minimal_epsilon",
    "verify_moment_lemmas",
    "KolmogorovEstimate",
    "exact_kolmogorov_discrete",
    "fit_rate",
    "kolmogorov_distance",
    "standard_normal_cdf",
    "ConditionalKernel",
    "PathBundle",
    "PathCollection",
    "StepDistribution",
    "TerminalStatistics",
    "conditional_moment",
    "make_kernel",
    "sample_paths",
    "sample_terminal",
    "terminal_statistics",
    "LipschitzModel",
    "doob_decompose",
    "epsilon_delta_n",
    "make_model",
    "variance_sandwich",
    "verify_a1_lipschitz",
    "INF_GE_1",
    "SUP_LE_1",
    "pad_to_unit_variance",
    "restrict_to_v",
    "stop_time_v",
]
