"""Limit objects: curve geometry, deterministic ODEs, limit SDEs, fixed points."""

from .curve import (LOWER, MIDDLE, UPPER, NoSuchBranchError, branch_exists,
                    critical_points, curve_abscissa, fold_abscissa, g_jump,
                    invariant_curve, jump_target, tabulate)
from .fixedpoint import (averaging_fixed_point, lipschitz_ledger, orderN2_law,
                         renormalization_map)
from .ode import (GridProfile, default_grid, equilibrium_profile,
                  meanfield_ode, order1_profile_ode)
from .sde import (SDEPath, em_paths_same_noise, hier_drift, hitting_time_cdf,
                  hitting_time_pdf, limit_sde_hier_orderN,
                  limit_sde_hier_orderN_batch, limit_sde_meanfield,
                  limit_sde_meanfield_batch, meanfield_diffusion,
                  meanfield_drift)

__all__ = [
    "LOWER", "MIDDLE", "UPPER", "NoSuchBranchError", "branch_exists",
    "critical_points", "curve_abscissa", "fold_abscissa", "g_jump",
    "invariant_curve", "jump_target", "tabulate",
    "averaging_fixed_point", "lipschitz_ledger", "orderN2_law",
    "renormalization_map",
    "GridProfile", "default_grid", "equilibrium_profile", "meanfield_ode",
    "order1_profile_ode",
    "SDEPath", "em_paths_same_noise", "hier_drift", "hitting_time_cdf",
    "hitting_time_pdf", "limit_sde_hier_orderN", "limit_sde_hier_orderN_batch",
    "limit_sde_meanfield", "limit_sde_meanfield_batch", "meanfield_diffusion",
    "meanfield_drift",
]
