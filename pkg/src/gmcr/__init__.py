"""Graph-based maximum consensus registration for 3D correspondences.

The registration objective is decoupled into scale, rotation, and
translation stages; each stage maps its measurements onto a consensus graph
whose maximum clique selects the inliers, and the stage estimate follows in
closed form. A RANSAC baseline, a synthetic benchmark harness, and PLY /
correspondence-file I/O round out the toolkit.
"""

from .core import (
    Correspondence,
    Similarity,
    add_error,
    angle_between,
    apply,
    consensus_set,
    geodesic_rotation_error,
    residual,
    rotation_from_axis_angle,
    rotation_from_quaternion,
)
from .errors import (
    ConfigError,
    DegenerateGeometryError,
    GmcrError,
    InconsistentCliqueError,
    InsufficientInputError,
    RegistrationFailureError,
)
from .graph import Clique, ConsensusGraph, graph_stats, max_clique
from .invariants import build_tims, scale_measurements
from .pipeline import GmcrConfig, RegistrationResult, gmcr_register
from .ply import parse_ply, write_ply
from .solvers import RansacConfig, ransac_register, umeyama_similarity
from .synthbench import SyntheticConfig, evaluate, generate_synthetic, run_benchmark

__version__ = "0.1.0"

__all__ = [
    "Clique",
    "ConfigError",
    "ConsensusGraph",
    "Correspondence",
    "DegenerateGeometryError",
    "GmcrConfig",
    "GmcrError",
    "InconsistentCliqueError",
    "InsufficientInputError",
    "RansacConfig",
    "RegistrationFailureError",
    "RegistrationResult",
    "Similarity",
    "SyntheticConfig",
    "add_error",
    "angle_between",
    "apply",
    "build_tims",
    "consensus_set",
    "evaluate",
    "generate_synthetic",
    "geodesic_rotation_error",
    "gmcr_register",
    "graph_stats",
    "max_clique",
    "parse_ply",
    "ransac_register",
    "residual",
    "rotation_from_axis_angle",
    "rotation_from_quaternion",
    "run_benchmark",
    "scale_measurements",
    "umeyama_similarity",
    "write_ply",
]
