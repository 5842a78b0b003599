"""Reconfigurable hierarchical affine formations.

Stress matrices and affine localizability, leader reassignment with
power-centric topology switching, and a deterministic leader/follower
simulator driven by scenario files.
"""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    FormationError, DuplicateEdge, SelfLoop, IndexOutOfRange, TooFewAgents,
    DimensionMismatch, DegenerateSource, DegenerateConfiguration, NotRooted,
    NoValidStress, MissingEdgeWeight, NotLocalizable, Cancelled, DegenerateLeaders,
    TooFewLeaders, NoViableAssignment, LeadersDoNotSpan, NotViableAssignment,
    ZeroWeightSum, ScheduleExhausted, ParseError, ScenarioValidationError,
    SchemaVersionMismatch)
from .graph import (FormationGraph, build_graph, complete_graph,  # noqa: E402
                    in_neighbors, is_d_plus_1_rooted)
from .geometry import (AffineTransform, RoleAssignment, affinely_spans,  # noqa: E402
                       apply_affine, enumerate_viable_assignments, fit_affine,
                       in_affine_image)
from .stress import (StressAssignment, assemble_stress_matrix,  # noqa: E402
                     compute_equilibrium_stress, equilibrium_residual,
                     follower_positions_from_leaders, is_affinely_localizable,
                     make_stress, partition_stress)
from .reorganizer import (COSTS, CostContext, ReorganizationPlan,  # noqa: E402
                          auto_reorganize, block_omega_ff, incidence_matrix,
                          per_follower_stress, power_centric_topology,
                          raw_follower_stress, reorganize, select_leaders)
from .simulation import (AgentState, ControllerParams, FormationState,  # noqa: E402
                         ReferenceSchedule, follower_step, initial_state,
                         leader_reference, step)
from .scenario import Scenario, load_corpus, load_scenario, verify_scenario  # noqa: E402
from .trace import Trace, read_trace, write_trace  # noqa: E402
from .metrics import error_propagation_probe, follower_chain_topology, metrics  # noqa: E402
from .runner import run_scenario  # noqa: E402
from .estimators import AffineFormationLocalizer, AffineTransformFitter  # noqa: E402

__all__ = ["__version__",
           "FormationError", "DuplicateEdge", "SelfLoop", "IndexOutOfRange",
           "TooFewAgents", "DimensionMismatch", "DegenerateSource",
           "DegenerateConfiguration", "NotRooted", "NoValidStress", "MissingEdgeWeight",
           "NotLocalizable", "Cancelled", "DegenerateLeaders", "TooFewLeaders",
           "NoViableAssignment", "LeadersDoNotSpan", "NotViableAssignment",
           "ZeroWeightSum", "ScheduleExhausted", "ParseError",
           "ScenarioValidationError", "SchemaVersionMismatch",
           "FormationGraph", "build_graph", "complete_graph", "in_neighbors",
           "is_d_plus_1_rooted", "AffineTransform", "RoleAssignment", "affinely_spans",
           "apply_affine", "enumerate_viable_assignments", "fit_affine",
           "in_affine_image", "StressAssignment", "assemble_stress_matrix",
           "compute_equilibrium_stress", "equilibrium_residual",
           "follower_positions_from_leaders", "is_affinely_localizable", "make_stress",
           "partition_stress", "COSTS", "CostContext", "ReorganizationPlan",
           "auto_reorganize", "block_omega_ff", "incidence_matrix",
           "per_follower_stress", "power_centric_topology", "raw_follower_stress",
           "reorganize", "select_leaders", "AgentState", "ControllerParams",
           "FormationState", "ReferenceSchedule", "follower_step", "initial_state",
           "leader_reference", "step", "Scenario", "load_corpus", "load_scenario",
           "verify_scenario", "Trace", "read_trace", "write_trace",
           "error_propagation_probe", "follower_chain_topology", "metrics",
           "run_scenario", "AffineFormationLocalizer", "AffineTransformFitter"]
