"""Interaction-energy minimisation for well-barrier kernels.

Modules: :mod:`~wblab.kernels`, :mod:`~wblab.densities`, :mod:`~wblab.energy`,
:mod:`~wblab.droplets`, :mod:`~wblab.toy1d`, :mod:`~wblab.search` and the
command line in :mod:`~wblab.cli`.
"""
__version__ = "0.1.0"

from .kernels import (  # noqa: E402
    Profile, ToyKernel, TruncatedKernel, ValidationReport, WellBarrierKernel, eval_kernel, kernel_from_config,
    kernel_to_config, load_kernel, make_well_barrier, power_law_kernel, truncate_kernel, validate_kernel,
)
from .densities import (  # noqa: E402
    AdmissibilityReport, Ball, Box, DropletConfig, GridDensity, IntervalConfig, check_admissible,
    from_droplets, grid_from_indicator,
)
from .energy import (  # noqa: E402
    ELReport, EnergyResult, SeparationReport, cross_energy, el_check, exact_interval_energy,
    interaction_energy, potential, separation_check,
)
from .droplets import (  # noqa: E402
    GeneralizedMinimizer, PowerLawParams, SplitThresholds, ball_energy_g, best_two_ball_split, c_np,
    linear_growth_limit, minimal_energy_E, optimal_partition, split_function_f, split_thresholds,
    subadditivity_probe,
)
from .toy1d import brute_force_min, decompose, diameter_lemma_check, toy_minimal_energy, w_zero_example  # noqa: E402
from .search import (  # noqa: E402
    AnnealSchedule, ClusterSet, InfeasibleError, SequenceTrace, anneal, cluster_decompose,
    el_residual_of_annealed, minimizing_sequence,
)
