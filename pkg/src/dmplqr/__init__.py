"""Compute-aware receding-horizon LQR design.

Selects reduced model order, sampling time and prediction horizon for a
linear plant under a per-sample flop budget, by minimizing a fitted
sector-bound proxy of the closed-loop performance gap subject to a
small-gain stability condition.
"""

__version__ = "0.1.0"

from .dmp import (
    DissConstants,
    DmpConfig,
    DmpSolution,
    compute_budget_sweep,
    cost_lipschitz,
    diss_constants,
    flop_count,
    horizon_from_timing,
    mu_rho_slope,
    performance_gap_bound,
    rho_tau_sweep,
    small_gain_rhs,
    solve_dmp,
    solve_dmp_fixed_model,
)
from .errors import DmpError, InfeasibleError, NotHurwitzError, NumericalError, ValidationError
from .linalg import condition_number, matrix_exponential, operator_norm, solve_lyapunov, spectral_abscissa
from .pipeline import BENCHMARK_SEED, StudyConfig, benchmark_study, run_study
from .reduction import ReducedModel, balanced_truncation, rom_riccati, rom_sector_gain
from .riccati import (
    DarrResult,
    DiscretizedProblem,
    RiccatiSolution,
    darr_finite_horizon,
    euler_discretize,
    gain_from_value,
    solve_care,
    solve_dare,
)
from .sector import SectorBoundFit, SectorSample, fit_sector_bound, sector_gain_at, zoh_transition
from .simulation import (
    local_optimal_tau,
    monte_carlo_subopt,
    riemann_cost,
    simulate_baseline,
    simulate_deployed,
    verify_small_gain_trajectory,
)
from .systems import CostSpec, LtiSystem, PoleSpec, generate_benchmark_system
