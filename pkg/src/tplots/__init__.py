"""Traffic load distribution plots for capacitated networks under oblivious routing."""

from .alloc import (
    CapacityAllocation,
    lagrangian_allocation,
    mu_k_sigma_allocation,
    optimize_envelope,
    saturation_probability,
)
from .bounds import (
    capacity_for_guarantee,
    chebyshev_saturation_bound,
    dummy_edge,
    global_cdf_bounds,
)
from .complexity import permanent_bruteforce, reduction_routing, verify_reduction
from .exceptions import (
    AllocationError,
    EnumerationLimitError,
    MissingMomentTableError,
    RoutingError,
    StructuralError,
    TPlotError,
    UnsupportedModeError,
)
from .fixtures import load_fixture
from .moments import MomentTable, moment_tables
from .net import (
    Edge,
    Network,
    Node,
    Routing,
    classify_edges,
    edge_congestion,
    global_congestion,
    shortest_path_routing,
    throughput,
    validate_routing,
    worst_case_edge_congestion,
)
from .normality import lilliefors_test, npp_data
from .stats import (
    GaussianParams,
    TPlot,
    build_tplot,
    exact_tplot_permutations,
    gaussian_params,
    throughput_ccdf,
    tplot_stats,
)
from .tset import (
    SamplerConfig,
    TSetSpec,
    contains,
    convergence_diagnostics,
    sample_permutation,
    sample_stream,
    walk_step,
)

__version__ = "0.1.0"
