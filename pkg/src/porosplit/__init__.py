"""Iterative splitting solvers for linearized dynamic poromechanics.

The package assembles the coupled solid/fluid/pressure system on 2D
triangulated squares and solves each implicit-Euler time step either
monolithically (GMRES + ILU(3)) or by one of two iterative splits: the
alternating-minimization split with div-div stabilization of the solid
problem, and the diagonally L2-stabilized split with configurable
stabilization scalings and optional Anderson acceleration.
"""

from .analysis import (
    GammaBreakdown,
    StabilityLedger,
    energy,
    error_norm,
    gamma,
    korn_constants,
    rlinear_subsequence,
    stability_check,
)
from .assembly import BlockSystem, Coefficient, apply_dirichlet
from .fe import DofSet, FeSpace, build_space, dirichlet_dofs, evaluate_basis, interpolate
from .mesh import BoundaryTag, Mesh, refine_near, unit_square_mesh
from .model import (
    BenchmarkCase,
    ModelParameters,
    Problem,
    State,
    advance,
    build_benchmark,
    initial_state,
    oscillatory_porosity,
    run_time_loop,
)
from .sparse import IluPrecond, SolveStats, generalized_symmetric_eig_max, gmres, ilu, qr_lstsq
from .splitters import (
    AndersonState,
    IterationReport,
    SplitConfig,
    anderson_update,
    altmin_step,
    l2s_step,
    monolithic_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
