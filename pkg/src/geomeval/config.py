"""Declarative run configuration: YAML schema, strict validation."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import yaml

from .distances import METRIC_KINDS
from .errors import GeomevalError
from .pooling import PoolingStrategy

SCHEMA_VERSION = 1


class ConfigError(GeomevalError):
    """Carries every violation found, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass
class SubsetRef:
    name: str
    manifest: str


@dataclass
class RunConfig:
    seed: int
    output_dir: str
    subsets: list[SubsetRef]
    pooling: list[PoolingStrategy]
    pca_dims: list[int | None]
    distance_metrics: list[str]
    metrics: list[str]
    min_class_size: int = 2
    filter: dict | None = None
    baseline: dict | None = None
    noise: dict | None = None
    dtw: dict | None = None
    clustering: bool = False
    perception: dict | None = None
    workers: int = 1
    cache_dir: str | None = None
    base_dir: str = "."
    extras: dict = field(default_factory=dict)

    def resolved_cache_dir(self) -> str:
        return self.cache_dir or os.path.join(self.output_dir, "cache")


_TOP_KEYS = {
    "schema_version",
    "seed",
    "output_dir",
    "subsets",
    "pooling",
    "pca_dims",
    "distance_metrics",
    "metrics",
    "min_class_size",
    "filter",
    "baseline",
    "noise",
    "dtw",
    "clustering",
    "perception",
    "workers",
    "cache_dir",
}

_FILTER_KEYS = {"min_class_size", "duration_percentile"}
_BASELINE_KEYS = {"metrics", "permutations"}
_NOISE_KEYS = {"fractions", "metrics"}
_DTW_KEYS = {"band_radius", "stride", "shortlist_size", "pca_dims", "normalize_path"}
_PERCEPTION_KEYS = {"trials", "triplets"}


def _check_metric_name(name: str, problems: list, where: str):
    if name in ("gsr", "csr", "cs", "cscf", "silhouette"):
        return
    if name.startswith("p_at_"):
        tail = name[len("p_at_") :]
        if tail.isdigit() and int(tail) >= 1:
            return
    problems.append(f"{where}: unknown metric {name!r}")


def parse_config(raw: dict, base_dir: str = ".") -> RunConfig:
    """Validate a parsed YAML mapping and build a RunConfig.

    Every violation is collected; a single ConfigError reports them all.
    """
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a mapping"])

    unknown = set(raw) - _TOP_KEYS
    for k in sorted(unknown):
        problems.append(f"unknown key {k!r}")

    if raw.get("schema_version") != SCHEMA_VERSION:
        problems.append(f"schema_version must be {SCHEMA_VERSION}, got {raw.get('schema_version')!r}")
    seed = raw.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        problems.append(f"seed is mandatory and must be a nonnegative integer, got {seed!r}")
        seed = 0
    output_dir = raw.get("output_dir")
    if not isinstance(output_dir, str) or not output_dir:
        problems.append("output_dir is mandatory")
        output_dir = "."

    subsets = []
    raw_subsets = raw.get("subsets")
    if not isinstance(raw_subsets, list) or not raw_subsets:
        problems.append("subsets must be a nonempty list of {name, manifest}")
    else:
        for i, s in enumerate(raw_subsets):
            if not isinstance(s, dict) or set(s) != {"name", "manifest"}:
                problems.append(f"subsets[{i}] must have exactly the keys name, manifest")
                continue
            manifest = s["manifest"]
            if not os.path.isabs(manifest):
                manifest = os.path.join(base_dir, manifest)
            subsets.append(SubsetRef(name=str(s["name"]), manifest=manifest))
        names = [s.name for s in subsets]
        if len(set(names)) != len(names):
            problems.append("subset names must be unique")

    pooling = []
    for i, p in enumerate(raw.get("pooling", ["mean_time_incl_pad+mean_feat"])):
        try:
            pooling.append(PoolingStrategy.parse(str(p)))
        except GeomevalError as exc:
            problems.append(f"pooling[{i}]: {exc}")

    pca_dims: list[int | None] = []
    for i, p in enumerate(raw.get("pca_dims", ["none"])):
        if p in ("none", None):
            pca_dims.append(None)
        elif isinstance(p, int) and not isinstance(p, bool) and p >= 1:
            pca_dims.append(p)
        else:
            problems.append(f"pca_dims[{i}] must be a positive integer or 'none', got {p!r}")

    distance_metrics = list(raw.get("distance_metrics", ["spearman"]))
    for m in distance_metrics:
        if m not in METRIC_KINDS:
            problems.append(f"distance_metrics: unknown kind {m!r}, expected one of {METRIC_KINDS}")

    metrics = [str(m) for m in raw.get("metrics", ["p_at_1", "p_at_5", "gsr"])]
    for m in metrics:
        _check_metric_name(m, problems, "metrics")

    min_class_size = raw.get("min_class_size", 2)
    if not isinstance(min_class_size, int) or min_class_size < 2:
        problems.append(f"min_class_size must be an integer >= 2, got {min_class_size!r}")
        min_class_size = 2

    def _block(key, allowed):
        block = raw.get(key)
        if block is None:
            return None
        if not isinstance(block, dict):
            problems.append(f"{key} must be a mapping")
            return None
        for k in sorted(set(block) - allowed):
            problems.append(f"{key}: unknown key {k!r}")
        return block

    filter_block = _block("filter", _FILTER_KEYS)
    baseline = _block("baseline", _BASELINE_KEYS)
    if baseline:
        for m in baseline.get("metrics", []):
            if m not in ("p_at_1", "p_at_5", "gsr"):
                problems.append(f"baseline.metrics: {m!r} has no permutation baseline")
        nperm = baseline.get("permutations", 1000)
        if not isinstance(nperm, int) or nperm < 100:
            problems.append(f"baseline.permutations must be an integer >= 100, got {nperm!r}")
    noise = _block("noise", _NOISE_KEYS)
    if noise:
        fracs = noise.get("fractions", [])
        if not fracs or any(not (0.0 <= float(f) < 1.0) for f in fracs):
            problems.append("noise.fractions must be nonempty values in [0, 1)")
        elif sorted(float(f) for f in fracs) != [float(f) for f in fracs]:
            problems.append("noise.fractions must be sorted ascending")
        for m in noise.get("metrics", ["p_at_1", "gsr"]):
            if m not in ("p_at_1", "p_at_5", "gsr"):
                problems.append(f"noise.metrics: {m!r} not supported in the sweep")
    dtw = _block("dtw", _DTW_KEYS)
    perception = _block("perception", _PERCEPTION_KEYS)
    if perception is not None:
        if not perception:
            problems.append("perception block needs trials and/or triplets")
        for key in ("trials", "triplets"):
            if key in perception and not os.path.isabs(str(perception[key])):
                perception[key] = os.path.join(base_dir, str(perception[key]))

    clustering = raw.get("clustering", False)
    if isinstance(clustering, dict):
        for k in sorted(set(clustering) - {"kmeans"}):
            problems.append(f"clustering: unknown key {k!r}")
        clustering = bool(clustering.get("kmeans", True))
    elif not isinstance(clustering, bool):
        problems.append(f"clustering must be a boolean or {{kmeans: bool}}, got {clustering!r}")
        clustering = False

    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        problems.append(f"workers must be a positive integer, got {workers!r}")
        workers = 1

    if problems:
        raise ConfigError(problems)

    out_dir = output_dir if os.path.isabs(output_dir) else os.path.join(base_dir, output_dir)
    cache_dir = raw.get("cache_dir")
    if cache_dir is not None and not os.path.isabs(cache_dir):
        cache_dir = os.path.join(base_dir, cache_dir)
    return RunConfig(
        seed=seed,
        output_dir=out_dir,
        subsets=subsets,
        pooling=pooling,
        pca_dims=pca_dims,
        distance_metrics=distance_metrics,
        metrics=metrics,
        min_class_size=min_class_size,
        filter=filter_block,
        baseline=baseline,
        noise=noise,
        dtw=dtw,
        clustering=clustering,
        perception=perception,
        workers=workers,
        cache_dir=cache_dir,
        base_dir=base_dir,
    )


def load_config(path) -> RunConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return parse_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def validate_inputs(config: RunConfig) -> list[str]:
    """Check that every referenced file exists and parses; returns problems."""
    from .io import probe_manifest

    problems = []
    for ref in config.subsets:
        problems.extend(probe_manifest(ref.manifest, ref.name))
    if config.perception:
        for key in ("trials", "triplets"):
            path = config.perception.get(key)
            if path and not os.path.exists(path):
                problems.append(f"perception.{key}: file not found: {path}")
    return problems
