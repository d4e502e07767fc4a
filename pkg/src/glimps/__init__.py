"""Super-robust matched subspace detection: greedy erasure followed by big-M branch and bound."""
from .baselines import (BaselineKind, brute_force_consensus, greedy_only, greedy_plus_l1, l1_fit,
                        milp_only, run_method)
from .errors import (BudgetError, ConfigError, DegenerateActiveSetError, DomainError, ExportError,
                     GlimpsError, RankDeficientError, SolverError, ZeroVectorError)
from .greedy import GreedyConfig, GreedyTrace, best_removal, erase_until_consistent, greedy_erase
from .linalg import least_squares, project_onto_subspace, projection_ratio
from .metrics import TrialMetrics, coef_error, misclass_ratio
from .milp import (NOISELESS, MilpProblem, MilpSolution, choose_big_m, solve, solve_escalating,
                   solve_noiseless, solve_noisy)
from .mps import export_mps, read_mps
from .pipeline import DetectionResult, GlimpsConfig, classify_all, glimps_detect
from .synth import Instance, InstanceSpec, derive_seed, generate

__version__ = "0.1.0"
