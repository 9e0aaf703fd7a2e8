"""End-to-end graph-based maximum consensus registration.

Stage order: pairwise difference measurements -> scale graph and clique ->
scale estimate -> known-scale consistency pruning of correspondences ->
rotation graph and clique -> rotation estimate -> translation graph and
clique -> translation estimate. Measurements rejected at one stage never
reach the next, and each estimate is closed-form over its clique.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .consensus import (
    rotation_consensus_matrix,
    rotation_measurements,
    scale_consensus_matrix,
    translation_consensus_matrix,
    translation_measurements,
)
from .core import Correspondence, Similarity, consensus_set
from .errors import (
    ConfigError,
    DegenerateGeometryError,
    InconsistentCliqueError,
    InsufficientInputError,
    RegistrationFailureError,
)
from .graph import Clique, ConsensusGraph, GraphStats, consistency_graph, graph_stats, max_clique
from .invariants import DEFAULT_MIN_TIM_NORM, TimSet, build_tims, scale_measurements
from .solvers import solve_rotation_arun, solve_scale, solve_translation

logger = logging.getLogger(__name__)

SCALE_MODES = ("estimate", "fixed")


@dataclass(frozen=True)
class GmcrConfig:
    """Registration controls; defaults follow the standard benchmark setup."""

    c: float = 1.0
    beta_default: float = 0.02
    scale_mode: str = "estimate"
    fixed_scale: float | None = None
    rotation_mode: str = "tight"
    tim_mode: str = "all_pairs"
    tim_limit: int | None = None
    min_tim_norm: float = DEFAULT_MIN_TIM_NORM
    tim_survival_min: int = 1
    clique_time_budget_ms: float | None = None
    seed: int = 0  # used only for TIM subsampling in complete_limit mode

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError("inlier threshold parameter c must be positive")
        if not self.beta_default > 0:
            raise ConfigError("beta_default must be positive")
        if self.scale_mode not in SCALE_MODES:
            raise ConfigError(f"unknown scale_mode {self.scale_mode!r}")
        if self.scale_mode == "fixed" and not (self.fixed_scale and self.fixed_scale > 0):
            raise ConfigError("fixed scale_mode requires a positive fixed_scale")
        if self.tim_survival_min < 1:
            raise ConfigError("tim_survival_min must be >= 1")


@dataclass(frozen=True)
class StageReport:
    """Per-stage diagnostics: clique, graph statistics, exactness, timings."""

    name: str
    clique: Clique | None
    stats: GraphStats | None
    exact: bool
    graph_ms: float
    clique_ms: float


@dataclass(frozen=True, eq=False)
class RegistrationResult:
    transform: Similarity
    inlier_correspondences: tuple[int, ...]
    scale_stage: StageReport
    rotation_stage: StageReport
    translation_stage: StageReport
    timings_ms: dict[str, float] = field(repr=False)
    consistency_clique: Clique | None = None

    @property
    def stage_cliques(self) -> tuple[Clique | None, Clique | None, Clique | None]:
        return (self.scale_stage.clique, self.rotation_stage.clique, self.translation_stage.clique)

    @property
    def stage_graph_stats(self) -> tuple[GraphStats | None, GraphStats | None, GraphStats | None]:
        return (self.scale_stage.stats, self.rotation_stage.stats, self.translation_stage.stats)

    @property
    def exact_flags(self) -> tuple[bool, bool, bool]:
        return (self.scale_stage.exact, self.rotation_stage.exact, self.translation_stage.exact)

    @property
    def clique_ms_total(self) -> float:
        return self.scale_stage.clique_ms + self.rotation_stage.clique_ms + self.translation_stage.clique_ms


def map_tim_clique_to_correspondences(clique: Clique, tims: TimSet, min_count: int = 1) -> list[int]:
    """Correspondence indices appearing in at least min_count clique TIMs."""
    if len(clique) == 0:
        return []
    rows = np.asarray(clique.nodes, dtype=np.int64)
    ids = np.concatenate([tims.i[rows], tims.j[rows]])
    values, counts = np.unique(ids, return_counts=True)
    return [int(v) for v in values[counts >= min_count]]


def _solve_stage_clique(graph: ConsensusGraph, budget_ms: float | None, stage: str) -> tuple[Clique, bool, float]:
    t0 = time.perf_counter()
    clique, exact = max_clique(graph, budget_ms)
    ms = (time.perf_counter() - t0) * 1e3
    if len(clique) == 0:
        raise RegistrationFailureError(stage, "empty clique")
    return clique, exact, ms


def gmcr_register(corrs: list[Correspondence], cfg: GmcrConfig = GmcrConfig()) -> RegistrationResult:
    """Register correspondences and return the estimate with diagnostics.

    Raises RegistrationFailureError naming the failing stage when any stage
    yields an empty clique, fewer than 3 correspondences survive, or the
    surviving geometry cannot determine the estimate.
    """
    if len(corrs) < 3:
        raise InsufficientInputError(f"registration needs at least 3 correspondences, got {len(corrs)}")
    timings: dict[str, float] = {}
    t_total = time.perf_counter()

    t0 = time.perf_counter()
    tims = build_tims(corrs, cfg.tim_mode, cfg.tim_limit, cfg.seed)
    timings["tims"] = (time.perf_counter() - t0) * 1e3

    # Scale: intervals around norm ratios; the clique pins the common scale.
    t0 = time.perf_counter()
    if cfg.scale_mode == "estimate":
        meas = scale_measurements(tims, cfg.min_tim_norm)
        if len(meas) == 0:
            raise RegistrationFailureError("scale", "no usable scale measurements")
        g_build0 = time.perf_counter()
        scale_graph = ConsensusGraph(scale_consensus_matrix(meas.s, meas.alpha, cfg.c))
        graph_ms = (time.perf_counter() - g_build0) * 1e3
        scale_clique, scale_exact, clique_ms = _solve_stage_clique(
            scale_graph, cfg.clique_time_budget_ms, "scale")
        try:
            s_hat = solve_scale(meas, scale_clique, cfg.c)
        except InconsistentCliqueError as e:
            raise RegistrationFailureError("scale", str(e)) from e
        scale_stage = StageReport("scale", scale_clique, graph_stats(scale_graph),
                                  scale_exact, graph_ms, clique_ms)
    else:
        s_hat = float(cfg.fixed_scale)
        scale_stage = StageReport("scale", None, None, True, 0.0, 0.0)
    timings["scale"] = (time.perf_counter() - t0) * 1e3

    # Consistency pruning at the (now known) scale.
    t0 = time.perf_counter()
    cons = consistency_graph(corrs, s_hat, cfg.c)
    cons_clique, _, _ = _solve_stage_clique(cons, cfg.clique_time_budget_ms, "consistency")
    surviving = np.asarray(cons_clique.nodes, dtype=np.int64)
    if surviving.shape[0] < 3:
        raise RegistrationFailureError(
            "consistency", f"only {surviving.shape[0]} correspondences survive pruning")
    keep = np.isin(tims.i, surviving) & np.isin(tims.j, surviving)
    tims_kept = tims.subset(keep)
    timings["consistency"] = (time.perf_counter() - t0) * 1e3

    # Rotation: cones of admissible rotations per TIM at the estimated scale.
    t0 = time.perf_counter()
    rot_meas = rotation_measurements(tims_kept, s_hat, cfg.c, cfg.min_tim_norm)
    if len(rot_meas) == 0:
        raise RegistrationFailureError("rotation", "no TIM admits any rotation at this scale")
    g_build0 = time.perf_counter()
    rot_graph = ConsensusGraph(rotation_consensus_matrix(rot_meas, cfg.rotation_mode))
    graph_ms = (time.perf_counter() - g_build0) * 1e3
    rot_clique, rot_exact, clique_ms = _solve_stage_clique(
        rot_graph, cfg.clique_time_budget_ms, "rotation")
    tim_clique = Clique(tuple(int(rot_meas.tim_index[v]) for v in rot_clique.nodes))
    try:
        r_hat = solve_rotation_arun(tims_kept, tim_clique, s_hat)
    except DegenerateGeometryError as e:
        raise RegistrationFailureError("rotation", str(e)) from e
    rot_corrs = map_tim_clique_to_correspondences(tim_clique, tims_kept, cfg.tim_survival_min)
    if len(rot_corrs) < 3:
        raise RegistrationFailureError(
            "rotation", f"only {len(rot_corrs)} correspondences survive the rotation clique")
    rotation_stage = StageReport("rotation", rot_clique, graph_stats(rot_graph),
                                 rot_exact, graph_ms, clique_ms)
    timings["rotation"] = (time.perf_counter() - t0) * 1e3

    # Translation: overlapping spheres around per-correspondence votes.
    t0 = time.perf_counter()
    tmeas = translation_measurements(corrs, s_hat, r_hat, np.asarray(rot_corrs, dtype=np.int64))
    g_build0 = time.perf_counter()
    trans_graph = ConsensusGraph(translation_consensus_matrix(tmeas, cfg.c),
                                 node_ids=tmeas.corr_index)
    graph_ms = (time.perf_counter() - g_build0) * 1e3
    trans_clique, trans_exact, clique_ms = _solve_stage_clique(
        trans_graph, cfg.clique_time_budget_ms, "translation")
    t_hat = solve_translation(tmeas, trans_clique)
    inliers = tuple(int(trans_graph.node_ids[v]) for v in trans_clique.nodes)
    translation_stage = StageReport("translation", trans_clique, graph_stats(trans_graph),
                                    trans_exact, graph_ms, clique_ms)
    timings["translation"] = (time.perf_counter() - t0) * 1e3

    transform = Similarity(s_hat, r_hat, t_hat)
    timings["total"] = (time.perf_counter() - t_total) * 1e3

    # A translation clique is not guaranteed a common point in 3D (spheres
    # lack the 1D interval property), so self-consistency can rarely slip;
    # report it rather than fail.
    selected = [corrs[i] for i in inliers]
    covered = consensus_set(selected, transform, cfg.c)
    if len(covered) < len(selected):
        logger.warning(
            "final consensus set covers %d of %d reported inliers", len(covered), len(selected))

    return RegistrationResult(
        transform=transform,
        inlier_correspondences=inliers,
        scale_stage=scale_stage,
        rotation_stage=rotation_stage,
        translation_stage=translation_stage,
        timings_ms=timings,
        consistency_clique=cons_clique,
    )
