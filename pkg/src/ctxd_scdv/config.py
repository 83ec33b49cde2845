"""Pipeline configuration: one JSON document, every CLI flag overrides a key."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .utils import config_hash

# Mixture-component counts per dataset and training-data percentage.
GMM_COMPONENTS_BY_DATASET: dict[str, dict[int, int]] = {
    "20ng": {10: 45, 20: 45, 30: 60, 40: 60, 50: 60, 100: 60},
    "amazon": {10: 30, 20: 30, 30: 30, 40: 30, 50: 30, 100: 30},
    "twitter": {10: 30, 20: 45, 30: 45, 40: 45, 50: 45, 100: 45},
    "bbcsport": {10: 60, 20: 60, 30: 75, 40: 75, 50: 75, 100: 90},
    "classic": {10: 30, 20: 30, 30: 30, 40: 30, 50: 30, 100: 30},
    "recipe-l": {10: 30, 20: 30, 30: 30, 40: 30, 50: 30, 100: 30},
}

MODES = ("ctxd", "weight_avg")
IDF_DOMAINS = ("sense", "surface")
AVERAGING = ("occurrence", "unique")
ANISO_TARGETS = ("word", "doc")

# Keys that change the document representation itself. Only these feed the
# provenance hash, so re-running evaluation with different protocol settings
# does not invalidate built vectors.
_REPRESENTATION_KEYS = (
    "tau", "num_components", "k_aniso", "aniso_target", "aniso_center", "mode",
    "sparsify_percent", "idf_domain", "doc_averaging", "k_max", "min_occurrences",
    "min_cluster_size", "gmm_max_iters", "gmm_tol", "gmm_eps", "gmm_covariance", "seed",
)


@dataclass
class PipelineConfig:
    tau: float = 0.8
    num_components: int | None = None  # resolved via dataset table when unset
    dataset: str | None = None
    data_percent: int = 100
    k_aniso: int | None = 6  # None disables centering and removal entirely
    aniso_target: str = "word"
    aniso_center: bool = True  # subtract the mean before removing directions
    mode: str = "ctxd"
    sparsify_percent: float | None = None
    idf_domain: str = "sense"
    doc_averaging: str = "occurrence"
    k_max: int = 10
    min_occurrences: int = 10
    min_cluster_size: int = 5
    gmm_max_iters: int = 200
    gmm_tol: float = 1e-5
    gmm_eps: float = 1e-6
    gmm_covariance: str = "full"
    seed: int = 0
    # evaluation protocol settings
    c_grid: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0, 100.0)
    svm_epochs: int = 100
    full_repeats: int = 5
    limited_repeats: int = 10
    fewshot_repeats: int = 5
    fractions: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 1.0)
    k_shots: tuple[int, ...] = (5, 10, 15, 20)
    fewshot_metric: str = "cosine"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must lie in (0, 1), got {self.tau}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.idf_domain not in IDF_DOMAINS:
            raise ConfigError(f"idf_domain must be one of {IDF_DOMAINS}")
        if self.doc_averaging not in AVERAGING:
            raise ConfigError(f"doc_averaging must be one of {AVERAGING}")
        if self.aniso_target not in ANISO_TARGETS:
            raise ConfigError(f"aniso_target must be one of {ANISO_TARGETS}")
        if self.gmm_covariance not in ("full", "diag"):
            raise ConfigError("gmm_covariance must be 'full' or 'diag'")
        if self.k_aniso is not None and self.k_aniso < 0:
            raise ConfigError(f"k_aniso must be >= 0 or off, got {self.k_aniso}")
        if self.sparsify_percent is not None and not 0 <= self.sparsify_percent < 100:
            raise ConfigError("sparsify_percent must lie in [0, 100) or be off")
        if self.num_components is not None and self.num_components < 1:
            raise ConfigError("num_components must be >= 1")
        for f in self.fractions:
            if not 0.0 < f <= 1.0:
                raise ConfigError(f"fractions must lie in (0, 1], got {f}")

    def resolved_components(self) -> int:
        if self.num_components is not None:
            return self.num_components
        if self.dataset is not None:
            table = GMM_COMPONENTS_BY_DATASET.get(self.dataset.lower())
            if table is None:
                raise ConfigError(
                    f"no component table for dataset {self.dataset!r}; set num_components"
                )
            if self.data_percent not in table:
                raise ConfigError(
                    f"no component entry for {self.dataset!r} at {self.data_percent}%"
                )
            return table[self.data_percent]
        raise ConfigError("set num_components or a known dataset name")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key in ("c_grid", "fractions", "k_shots"):
            out[key] = list(out[key])
        return out

    def representation_hash(self) -> str:
        payload = {k: getattr(self, k) for k in _REPRESENTATION_KEYS}
        payload["num_components"] = self.resolved_components()
        return config_hash(payload)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        for key in ("k_aniso", "sparsify_percent"):
            if isinstance(kwargs.get(key), str):
                if kwargs[key].lower() == "off":
                    kwargs[key] = None
                else:
                    raise ConfigError(f"{key} must be a number or \"off\"")
        for key in ("c_grid", "fractions", "k_shots"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def with_overrides(self, overrides: dict) -> "PipelineConfig":
        raw = self.to_dict()
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return self.from_dict(raw)
