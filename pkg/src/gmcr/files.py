"""Structured-text file formats: correspondences, run configs, results.

Correspondence files are JSON Lines (one record per line with keys "a",
"b", and optional "beta"); a single JSON document holding an array of such
records, or an object with a "correspondences" array, is accepted on input.
Run configs and result records are plain JSON. All lengths are meters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

from .core import Correspondence, Similarity, quaternion_from_rotation
from .errors import ConfigError
from .pipeline import GmcrConfig, RegistrationResult
from .solvers import RansacConfig
from .synthbench import SyntheticConfig

_TUPLE_FIELDS = {"scale_range", "translation_range"}


def _record_to_correspondence(rec: dict, beta_default: float, where: str) -> Correspondence:
    if not isinstance(rec, dict):
        raise ConfigError(f"{where}: correspondence record must be an object")
    unknown = set(rec) - {"a", "b", "beta"}
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        a = [float(v) for v in rec["a"]]
        b = [float(v) for v in rec["b"]]
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{where}: records need 3-vector keys 'a' and 'b'") from e
    if len(a) != 3 or len(b) != 3:
        raise ConfigError(f"{where}: 'a' and 'b' must have 3 components")
    beta = rec.get("beta", beta_default)
    try:
        return Correspondence(np.array(a), np.array(b), float(beta))
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


def read_correspondences(path, beta_default: float = 0.02) -> list[Correspondence]:
    """Read a correspondence file (JSON Lines or a single JSON document)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.strip()
    if not stripped:
        raise ConfigError(f"{path}: empty correspondence file")
    # Single-document variant: an array, or {"correspondences": [...]}.
    if stripped[0] in "[{":
        try:
            doc = json.loads(stripped)
            if isinstance(doc, dict) and "correspondences" in doc:
                doc = doc["correspondences"]
            if isinstance(doc, list):
                return [
                    _record_to_correspondence(rec, beta_default, f"{path}: record {k}")
                    for k, rec in enumerate(doc)
                ]
        except json.JSONDecodeError:
            pass  # fall through to line-by-line parsing
    corrs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {lineno}: invalid JSON ({e.msg})") from e
        corrs.append(_record_to_correspondence(rec, beta_default, f"{path}: line {lineno}"))
    return corrs


def write_correspondences(path, corrs: list[Correspondence]) -> None:
    """Write one JSON record per line (keys a, b, beta)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for c in corrs:
            fh.write(json.dumps({"a": list(c.a), "b": list(c.b), "beta": c.beta}) + "\n")


def _construct(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"config section {section!r}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config section {section!r}: {e}") from e


@dataclass(frozen=True)
class RunConfig:
    gmcr: GmcrConfig
    ransac: RansacConfig
    synthetic: SyntheticConfig


def run_config_from_dict(doc: dict, where: str = "config") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: top level must be an object")
    unknown = set(doc) - {"gmcr", "ransac", "synthetic"}
    if unknown:
        raise ConfigError(f"{where}: unknown sections {sorted(unknown)}")
    return RunConfig(
        gmcr=_construct(GmcrConfig, doc.get("gmcr", {}), "gmcr"),
        ransac=_construct(RansacConfig, doc.get("ransac", {}), "ransac"),
        synthetic=_construct(SyntheticConfig, doc.get("synthetic", {}), "synthetic"),
    )


def read_run_config(path) -> RunConfig:
    """Read a JSON run config with optional gmcr / ransac / synthetic sections."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e.msg}, line {e.lineno})") from e
    return run_config_from_dict(doc, str(path))


@dataclass(frozen=True)
class BenchSuite:
    cells: list[SyntheticConfig]
    methods: list[str]
    runs: int
    seed: int
    success_threshold_m: float


def read_suite(path) -> BenchSuite:
    """Read a benchmark suite file: {"methods": [...], "cells": [{...}, ...]}."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e.msg}, line {e.lineno})") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: suite must be a JSON object")
    unknown = set(doc) - {"methods", "cells", "runs", "seed", "success_threshold_m"}
    if unknown:
        raise ConfigError(f"{path}: unknown suite keys {sorted(unknown)}")
    methods = doc.get("methods")
    cells_raw = doc.get("cells")
    if not methods or not isinstance(methods, list):
        raise ConfigError(f"{path}: suite needs a nonempty 'methods' list")
    if not cells_raw or not isinstance(cells_raw, list):
        raise ConfigError(f"{path}: suite needs a nonempty 'cells' list")
    cells = [_construct(SyntheticConfig, cell, f"cells[{k}]") for k, cell in enumerate(cells_raw)]
    return BenchSuite(
        cells=cells,
        methods=[str(m) for m in methods],
        runs=int(doc.get("runs", 10)),
        seed=int(doc.get("seed", 0)),
        success_threshold_m=float(doc.get("success_threshold_m", 0.3)),
    )


def similarity_record(transform: Similarity) -> dict:
    """Serializable form: scale, row-major rotation, redundant quaternion, translation."""
    return {
        "scale": transform.s,
        "rotation": [float(v) for v in transform.r.reshape(9)],
        "quaternion": [float(v) for v in quaternion_from_rotation(transform.r)],
        "translation": [float(v) for v in transform.t],
    }


def similarity_from_record(rec: dict) -> Similarity:
    """Rebuild a transform from its record; the matrix is authoritative."""
    try:
        r = np.array([float(v) for v in rec["rotation"]], dtype=np.float64).reshape(3, 3)
        return Similarity(float(rec["scale"]), r, np.array([float(v) for v in rec["translation"]]))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"malformed transform record: {e}") from e


def _stage_record(stage) -> dict:
    rec = {"exact": stage.exact, "graph_ms": stage.graph_ms, "clique_ms": stage.clique_ms}
    if stage.clique is not None:
        rec["clique_size"] = len(stage.clique)
    if stage.stats is not None:
        rec["density"] = stage.stats.density
        rec["degeneracy"] = stage.stats.degeneracy
        rec["mean_degree"] = stage.stats.mean_degree
    return rec


def result_record(method: str, result, inliers, timings_ms: dict | None = None,
                  iterations: int | None = None) -> dict:
    """Result document for one registration run."""
    transform = getattr(result, "transform", result)
    rec = {"method": method, **similarity_record(transform),
           "inliers": [int(i) for i in inliers]}
    if isinstance(result, RegistrationResult):
        rec["stages"] = {
            "scale": _stage_record(result.scale_stage),
            "rotation": _stage_record(result.rotation_stage),
            "translation": _stage_record(result.translation_stage),
        }
        rec["timings_ms"] = dict(result.timings_ms)
    if timings_ms is not None:
        rec["timings_ms"] = dict(timings_ms)
    if iterations is not None:
        rec["iterations"] = iterations
    return rec


def dump_json(doc: dict, fh) -> None:
    fh.write(json.dumps(doc, indent=2) + "\n")
