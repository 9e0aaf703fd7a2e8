"""Synthetic registration problems and the benchmark harness.

A problem instance is a procedurally sampled model cloud, a transformed and
noise-corrupted target cloud with sphere-shell clutter, and a correspondence
list containing a controlled fraction of outliers (random mispairings or
structured clusters around random bases). The harness sweeps configurations
and methods, derives per-cell seeds, and emits one CSV row per run plus
median / mean / std aggregate rows per cell group.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .core import (
    Correspondence,
    Similarity,
    add_error,
    geodesic_rotation_error,
    rotation_from_quaternion,
)
from .errors import ConfigError, GmcrError
from .pipeline import GmcrConfig, RegistrationResult, gmcr_register
from .solvers import RansacConfig, ransac_register

SHAPES = ("sphere", "cube", "blob_mixture", "ply_file")
ROTATION_MODELS = ("full_so3", "z_axis_only")
OUTLIER_MODELS = ("random", "structured")
DEFAULT_SUCCESS_THRESHOLD_M = 0.3
RANDOM_OUTLIER_MARGIN = 5.0  # outliers must miss the true model by this many noise bounds

CSV_HEADER = (
    "config_id,method,run,seed,outlier_rate,n_corr,rot_err_rad,trans_err_m,"
    "scale_err,add_err_m,success,runtime_ms,scale_density,rot_density,"
    "trans_density,exact_cliques"
)
CSV_COLUMNS = CSV_HEADER.split(",")


@dataclass(frozen=True)
class SyntheticConfig:
    """One benchmark cell: cloud generation and corruption controls."""

    n_model_points: int = 1500
    shape: str = "cube"
    ply_path: str | None = None
    noise_half_width: float = 0.01
    n_sphere_outlier_points: int = 200
    n_correspondences: int = 60
    outlier_rate: float = 0.0
    outlier_model: str = "random"
    n_outlier_bases: int | None = None  # structured mode; default max(1, n_outliers // 6)
    outlier_base_sigma: float = 0.1
    nearest_neighbor_inliers: bool = False
    scale_range: tuple[float, float] = (1.0, 5.0)
    translation_range: tuple[float, float] = (-1.5, 1.5)
    rotation_model: str = "full_so3"
    beta: float | None = None  # noise bound stamped on correspondences; default 2 * noise_half_width
    seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"unknown shape {self.shape!r}")
        if self.shape == "ply_file" and not self.ply_path:
            raise ConfigError("shape 'ply_file' requires ply_path")
        if self.rotation_model not in ROTATION_MODELS:
            raise ConfigError(f"unknown rotation_model {self.rotation_model!r}")
        if self.outlier_model not in OUTLIER_MODELS:
            raise ConfigError(f"unknown outlier_model {self.outlier_model!r}")
        if not (0.0 <= self.outlier_rate < 1.0):
            raise ConfigError("outlier_rate must be in [0, 1)")
        if self.n_model_points < 1 or self.n_correspondences < 1:
            raise ConfigError("point and correspondence counts must be positive")
        if self.noise_half_width < 0:
            raise ConfigError("noise_half_width must be nonnegative")
        for name, rng_ in (("scale_range", self.scale_range), ("translation_range", self.translation_range)):
            if not (len(rng_) == 2 and rng_[0] <= rng_[1]):
                raise ConfigError(f"{name} must be a nonempty (lo, hi) interval")
        if self.scale_range[0] <= 0:
            raise ConfigError("scale_range must be positive")
        if self.beta is not None and self.beta <= 0:
            raise ConfigError("beta must be positive when set")

    @property
    def effective_beta(self) -> float:
        beta = self.beta if self.beta is not None else 2.0 * self.noise_half_width
        if beta <= 0:
            raise ConfigError("noiseless configs must set beta explicitly")
        return beta


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    source: np.ndarray  # model points (N, 3)
    target: np.ndarray  # transformed noisy points plus clutter (N + K, 3)
    correspondences: list[Correspondence]
    truth: Similarity
    inlier_mask: np.ndarray  # (n_corr,) bool


@dataclass(frozen=True)
class Metrics:
    rot_err_rad: float
    trans_err_m: float
    scale_err: float
    add_err_m: float
    success: bool
    runtime_ms: float
    scale_density: float
    rot_density: float
    trans_density: float
    exact_cliques: bool


def sample_uniform_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform rotation via a normalized 4-component Gaussian quaternion."""
    while True:
        q = rng.normal(size=4)
        if np.linalg.norm(q) > 1e-12:
            return rotation_from_quaternion(q)


def sample_z_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation about the z axis; fixes e_z exactly."""
    theta = rng.uniform(-np.pi, np.pi)
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rescale_to_unit_cube(pts: np.ndarray) -> np.ndarray:
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0:
        raise ConfigError("degenerate model cloud: zero extent")
    return (pts - (lo + hi) / 2.0) / extent


def _sample_shape(cfg: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    n = cfg.n_model_points
    if cfg.shape == "cube":
        pts = rng.uniform(-0.5, 0.5, size=(n, 3))
    elif cfg.shape == "sphere":
        v = rng.normal(size=(n, 3))
        pts = 0.5 * v / np.linalg.norm(v, axis=1, keepdims=True)
    elif cfg.shape == "blob_mixture":
        centers = rng.uniform(-0.5, 0.5, size=(5, 3))
        which = rng.integers(0, 5, size=n)
        pts = centers[which] + rng.normal(scale=0.15, size=(n, 3))
    else:  # ply_file
        from .ply import parse_ply

        pts = parse_ply(cfg.ply_path)
        if pts.shape[0] < cfg.n_correspondences:
            raise ConfigError("PLY model has fewer points than requested correspondences")
    return _rescale_to_unit_cube(pts)


def generate_synthetic(cfg: SyntheticConfig) -> ProblemInstance:
    """Sample a problem instance; fully determined by cfg (including its seed)."""
    rng = np.random.default_rng(cfg.seed)
    model = _sample_shape(cfg, rng)
    n = model.shape[0]
    n_corr = cfg.n_correspondences
    if n_corr > n:
        raise ConfigError(f"cannot draw {n_corr} correspondences from {n} model points")

    s = rng.uniform(*cfg.scale_range)
    r = sample_uniform_rotation(rng) if cfg.rotation_model == "full_so3" else sample_z_rotation(rng)
    t = rng.uniform(cfg.translation_range[0], cfg.translation_range[1], size=3)
    truth = Similarity(float(s), r, t)

    target_pts = truth.apply(model)
    if cfg.noise_half_width > 0:
        target_pts = target_pts + rng.uniform(
            -cfg.noise_half_width, cfg.noise_half_width, size=target_pts.shape)
    centroid = target_pts.mean(axis=0)
    bounding_radius = float(np.linalg.norm(target_pts - centroid, axis=1).max())
    dirs = rng.normal(size=(cfg.n_sphere_outlier_points, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    clutter = centroid + 1.5 * bounding_radius * dirs
    target = np.vstack([target_pts, clutter])

    beta = cfg.effective_beta
    n_in = math.ceil((1.0 - cfg.outlier_rate) * n_corr)
    n_out = n_corr - n_in
    src_idx = rng.choice(n, size=n_corr, replace=False)

    tree = cKDTree(target) if cfg.nearest_neighbor_inliers else None
    b_pts = np.empty((n_corr, 3))
    for k in range(n_in):
        true_b = target_pts[src_idx[k]]
        if tree is not None:
            # Nearest *other* target point: simulates slightly-off association.
            _, idx = tree.query(true_b, k=2)
            b_pts[k] = target[idx[1]]
        else:
            b_pts[k] = true_b

    if n_out > 0:
        if cfg.outlier_model == "random":
            predicted = truth.apply(model[src_idx[n_in:]])
            for k in range(n_out):
                for _ in range(200):
                    cand = target[rng.integers(0, target.shape[0])]
                    if np.linalg.norm(cand - predicted[k]) >= RANDOM_OUTLIER_MARGIN * beta:
                        b_pts[n_in + k] = cand
                        break
                else:
                    raise ConfigError("could not place an outlier clear of the true model")
        else:
            n_bases = cfg.n_outlier_bases or max(1, n_out // 6)
            bases = target[rng.choice(target.shape[0], size=n_bases, replace=False)]
            which = rng.integers(0, n_bases, size=n_out)
            b_pts[n_in:] = bases[which] + rng.normal(scale=cfg.outlier_base_sigma, size=(n_out, 3))

    corrs = [Correspondence(model[src_idx[k]], b_pts[k], beta) for k in range(n_corr)]
    resid = np.linalg.norm(b_pts - truth.apply(model[src_idx]), axis=1)
    mask = resid <= beta
    return ProblemInstance(
        source=model, target=target, correspondences=corrs, truth=truth, inlier_mask=mask)


def evaluate(result, instance: ProblemInstance,
             success_threshold_m: float = DEFAULT_SUCCESS_THRESHOLD_M,
             runtime_ms: float = float("nan")) -> Metrics:
    """Error metrics of an estimate against the instance truth.

    `result` may be a RegistrationResult (stage statistics are carried over)
    or a bare Similarity.
    """
    transform: Similarity = getattr(result, "transform", result)
    truth = instance.truth
    rot_err = geodesic_rotation_error(transform.r, truth.r)
    trans_err = float(np.linalg.norm(truth.t - transform.t))
    scale_err = abs(truth.s - transform.s)
    add = add_error(transform, truth, instance.source)
    if isinstance(result, RegistrationResult):
        stats = result.stage_graph_stats
        densities = tuple(s.density if s is not None else float("nan") for s in stats)
        exact = all(result.exact_flags)
    else:
        densities = (float("nan"),) * 3
        exact = True
    return Metrics(
        rot_err_rad=rot_err,
        trans_err_m=trans_err,
        scale_err=scale_err,
        add_err_m=add,
        success=add < success_threshold_m,
        runtime_ms=runtime_ms,
        scale_density=densities[0],
        rot_density=densities[1],
        trans_density=densities[2],
        exact_cliques=exact,
    )


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def noiseless_suite(n_correspondences: int = 20) -> list[SyntheticConfig]:
    """Exact-recovery cells: no noise, no outliers, bound stamped at 0.02."""
    return [SyntheticConfig(
        n_model_points=300, noise_half_width=0.0, n_sphere_outlier_points=0,
        n_correspondences=n_correspondences, outlier_rate=0.0, beta=0.02)]


def standard_sweep_suite(rates: tuple[float, ...] = (0.2, 0.4, 0.6, 0.7, 0.8),
                         n_correspondences: int = 60) -> list[SyntheticConfig]:
    """Random-outlier sweep mirroring the standard synthetic benchmark."""
    return [SyntheticConfig(n_correspondences=n_correspondences, outlier_rate=r)
            for r in rates]


def structured_suite(rates: tuple[float, ...] = (0.4, 0.6, 0.7),
                     n_correspondences: int = 90) -> list[SyntheticConfig]:
    """Structured-outlier cells: nearest-neighbor inliers, clustered outliers."""
    return [SyntheticConfig(
        n_correspondences=n_correspondences, outlier_rate=r,
        outlier_model="structured", nearest_neighbor_inliers=True, beta=0.07)
        for r in rates]


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------

METHODS = ("gmcr", "ransac", "ransac10k")
_CFG_SEED_STRIDE = 1009
_METHOD_SEED_OFFSET = 500009


def _run_method(method: str, corrs: list[Correspondence], seed: int,
                gmcr_config: GmcrConfig):
    if method == "gmcr":
        return gmcr_register(corrs, gmcr_config)
    if method == "ransac":
        model, _, _ = ransac_register(
            corrs, RansacConfig(max_iterations=10000, confidence=0.99, seed=seed))
        return model
    if method == "ransac10k":
        model, _, _ = ransac_register(
            corrs, RansacConfig(fixed_iterations=10000, seed=seed))
        return model
    raise ConfigError(f"unknown method {method!r}")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


def _nan_aggregate(values: list[float], fn) -> float:
    arr = np.asarray(values, dtype=np.float64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        out = fn(arr)
    return float(out)


def run_benchmark(
    suite: list[SyntheticConfig],
    methods: list[str],
    runs_per_cell: int,
    out=None,
    base_seed: int = 0,
    success_threshold_m: float = DEFAULT_SUCCESS_THRESHOLD_M,
    gmcr_config: GmcrConfig = GmcrConfig(),
    measure_time: bool = True,
) -> list[dict]:
    """Run every (config, method, run) cell; return rows and optionally write CSV.

    Per-cell seeds derive from base_seed plus the config and run indices, so
    a fixed base seed reproduces every instance and method draw exactly.
    Registration failures become rows with success 0 and NaN errors; they
    never abort the suite. With measure_time=False the runtime_ms column is
    written as 0 so that repeated runs are byte-identical.

    Returned rows include diagnostic keys beyond the CSV columns (clique_ms,
    n_inliers, failure_stage).
    """
    if not suite or not methods:
        raise ConfigError("benchmark needs a nonempty suite and method list")
    if runs_per_cell < 1 or runs_per_cell >= _CFG_SEED_STRIDE:
        raise ConfigError(f"runs_per_cell must be in [1, {_CFG_SEED_STRIDE})")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")

    rows: list[dict] = []
    for cfg_idx, cell in enumerate(suite):
        config_id = f"cfg{cfg_idx:03d}"
        instances = []
        for run in range(runs_per_cell):
            inst_seed = base_seed + _CFG_SEED_STRIDE * cfg_idx + run
            instances.append((run, inst_seed, generate_synthetic(replace(cell, seed=inst_seed))))
        for method in methods:
            group: list[dict] = []
            for run, inst_seed, instance in instances:
                row = {
                    "config_id": config_id, "method": method, "run": run,
                    "seed": inst_seed, "outlier_rate": cell.outlier_rate,
                    "n_corr": cell.n_correspondences,
                    "clique_ms": float("nan"), "n_inliers": -1, "failure_stage": "",
                }
                t0 = time.perf_counter()
                try:
                    result = _run_method(
                        method, instance.correspondences, inst_seed + _METHOD_SEED_OFFSET,
                        gmcr_config)
                except GmcrError as e:
                    elapsed = (time.perf_counter() - t0) * 1e3
                    row.update(
                        rot_err_rad=float("nan"), trans_err_m=float("nan"),
                        scale_err=float("nan"), add_err_m=float("nan"), success=False,
                        runtime_ms=elapsed if measure_time else 0.0,
                        scale_density=float("nan"), rot_density=float("nan"),
                        trans_density=float("nan"), exact_cliques=False,
                        failure_stage=getattr(e, "stage", type(e).__name__),
                    )
                    group.append(row)
                    rows.append(row)
                    continue
                elapsed = (time.perf_counter() - t0) * 1e3
                metrics = evaluate(result, instance, success_threshold_m,
                                   elapsed if measure_time else 0.0)
                row.update(
                    rot_err_rad=metrics.rot_err_rad, trans_err_m=metrics.trans_err_m,
                    scale_err=metrics.scale_err, add_err_m=metrics.add_err_m,
                    success=metrics.success, runtime_ms=metrics.runtime_ms,
                    scale_density=metrics.scale_density, rot_density=metrics.rot_density,
                    trans_density=metrics.trans_density, exact_cliques=metrics.exact_cliques,
                )
                if isinstance(result, RegistrationResult):
                    row["clique_ms"] = result.clique_ms_total
                    row["n_inliers"] = len(result.inlier_correspondences)
                group.append(row)
                rows.append(row)

            numeric = ("rot_err_rad", "trans_err_m", "scale_err", "add_err_m",
                       "success", "runtime_ms", "scale_density", "rot_density",
                       "trans_density", "exact_cliques")
            for agg_name, fn in (("median", np.nanmedian), ("mean", np.nanmean), ("std", np.nanstd)):
                agg = {
                    "config_id": config_id, "method": method, "run": agg_name, "seed": "",
                    "outlier_rate": cell.outlier_rate, "n_corr": cell.n_correspondences,
                }
                for col in numeric:
                    agg[col] = _nan_aggregate([float(r[col]) for r in group], fn)
                rows.append(agg)

    if out is not None:
        _write_csv(rows, out)
    return rows


def _write_csv(rows: list[dict], out) -> None:
    own = not hasattr(out, "write")
    fh = open(out, "w", encoding="ascii", newline="") if own else out
    try:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[col]) for col in CSV_COLUMNS) + "\n")
    finally:
        if own:
            fh.close()
