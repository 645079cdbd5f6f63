"""Experiment configuration: YAML files, presets, and CLI overrides.

A config fully determines an experiment given a dataset directory. Presets
bundle the usual starting points; a YAML file (and then CLI flags) can
override any part. Validation failures raise ConfigError with the path of
the offending key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .dataset import (FixedFirstKScheme, FractionScheme, PerCategoryScheme,
                      SplitScheme)
from .errors import ConfigError
from .features import HogConfig, LbpConfig
from .fusion import FUSED_MODES
from .modelsearch import SearchSpace
from .preprocess import NormalizationMode

FUSION_KINDS = ("sum_rule",) + FUSED_MODES
CHANNEL_KINDS = ("pixels", "lbp", "hog")


@dataclass(frozen=True)
class ChannelConfig:
    """One feature channel; params is the LbpConfig/HogConfig for the
    engineered kinds and None for raw pixels."""

    kind: str
    params: object = None

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ConfigError(f"unknown channel kind {self.kind!r}")
        wanted = {"pixels": type(None), "lbp": LbpConfig, "hog": HogConfig}
        if not isinstance(self.params, wanted[self.kind]):
            raise ConfigError(f"channel {self.kind!r} has mismatched params")


@dataclass(frozen=True)
class ArchitectureConfig:
    """Either a fixed (n_pcs, n_neurons) per channel, or search ranges.

    Fixed sizes may be one int for all channels or one per channel.
    coarse_step 1 means plain exhaustive search; larger steps stride the
    grid, and refine (default on for strided grids) adds the fine pass
    around the best coarse points.
    """

    mode: str = "search"
    n_pcs: tuple[int, ...] | None = None
    n_neurons: tuple[int, ...] | None = None
    pcs_range: tuple[int, int] = (1, 150)
    neurons_range: tuple[int, int] = (20, 35)
    coarse_step: int = 1
    refine: bool | None = None
    top_k: int = 10

    def __post_init__(self):
        if self.mode not in ("fixed", "search"):
            raise ConfigError("architecture.mode must be fixed or search")
        if self.mode == "fixed":
            if self.n_pcs is None or self.n_neurons is None:
                raise ConfigError(
                    "fixed architecture needs n_pcs and n_neurons")

    def search_space(self) -> SearchSpace:
        refine = self.coarse_step > 1 if self.refine is None else self.refine
        try:
            return SearchSpace(pcs=self.pcs_range, neurons=self.neurons_range,
                               pcs_step=self.coarse_step,
                               neurons_step=self.coarse_step,
                               refine=refine, top_k=self.top_k)
        except ValueError as exc:
            raise ConfigError(f"architecture: {exc}") from exc


@dataclass(frozen=True)
class TrainingConfig:
    max_epochs: int = 300
    patience: int = 5

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError("training.max_epochs must be >= 1")
        if self.patience < 1:
            raise ConfigError("training.patience must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    data_dir: str
    out_dir: str = "biorec-out"
    seed: int = 1234
    n_splits: int = 10
    resize_to: tuple[int, int] | None = None
    normalization: NormalizationMode = NormalizationMode("sn")
    split: SplitScheme = field(default_factory=lambda: PerCategoryScheme(5))
    channels: tuple[ChannelConfig, ...] = ()
    architecture: ArchitectureConfig = ArchitectureConfig()
    training: TrainingConfig = TrainingConfig()
    fusion: str = "sum_rule"

    def __post_init__(self):
        if self.n_splits < 1:
            raise ConfigError("n_splits must be >= 1")
        if len(self.channels) == 0:
            raise ConfigError("at least one channel is required")
        if self.fusion not in FUSION_KINDS:
            raise ConfigError(
                f"fusion must be one of {', '.join(FUSION_KINDS)}")
        for name in ("n_pcs", "n_neurons"):
            sizes = getattr(self.architecture, name)
            if sizes is not None and len(sizes) not in (1, len(self.channels)):
                raise ConfigError(
                    f"architecture.{name} needs 1 or {len(self.channels)} entries")


def default_channels(face_like: bool = True) -> tuple[ChannelConfig, ...]:
    """The standard three channels, sized for faces or for objects."""
    if face_like:
        lbp = LbpConfig(p=8, r=1.0, grid=(6, 6))
        hog = HogConfig(cell=(8, 8))
    else:
        lbp = LbpConfig(p=14, r=1.0, grid=(10, 10))
        hog = HogConfig(cell=(16, 16))
    return (ChannelConfig("pixels"), ChannelConfig("lbp", lbp),
            ChannelConfig("hog", hog))


def preset_dict(name: str) -> dict:
    """Named starting-point configs as plain dicts (deep-merge friendly)."""
    common = {
        "seed": 1234,
        "n_splits": 10,
        "normalization": {"variant": "sn"},
        "split": {"scheme": "per_category", "n_train": 5,
                  "val_fraction_of_train": 0.1},
        "fusion": "sum_rule",
        "training": {"max_epochs": 300, "patience": 5},
    }
    if name == "faces":
        return {**common,
                "resize_to": [96, 96],
                "channels": [
                    {"kind": "pixels"},
                    {"kind": "lbp", "p": 8, "r": 1.0, "grid": [6, 6]},
                    {"kind": "hog", "cell": [8, 8]},
                ],
                "architecture": {"mode": "search", "pcs_range": [1, 150],
                                 "neurons_range": [20, 35], "coarse_step": 1}}
    if name == "objects":
        return {**common,
                "resize_to": [128, 128],
                "channels": [
                    {"kind": "pixels"},
                    {"kind": "lbp", "p": 14, "r": 1.0, "grid": [10, 10]},
                    {"kind": "hog", "cell": [16, 16]},
                ],
                "architecture": {"mode": "search", "pcs_range": [1, 50],
                                 "neurons_range": [1, 100], "coarse_step": 1}}
    if name == "large":
        faces = preset_dict("faces")
        faces["architecture"] = {"mode": "search", "pcs_range": [1, 150],
                                 "neurons_range": [20, 35], "coarse_step": 5,
                                 "top_k": 10}
        return faces
    raise ConfigError(f"unknown preset {name!r}")


def deep_merge(base: dict, override: dict) -> dict:
    """Dicts merge recursively; any other value replaces wholesale."""
    merged = dict(base)
    for key, value in override.items():
        if (key in merged and isinstance(merged[key], dict)
                and isinstance(value, dict)):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _require(d: dict, key: str, context: str):
    if key not in d:
        raise ConfigError(f"{context}.{key} is required")
    return d[key]


def _as_pair(value, context: str) -> tuple[int, int]:
    try:
        a, b = value
        return int(a), int(b)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context} must be a pair of integers") from exc


def _parse_split(d: dict) -> SplitScheme:
    if not isinstance(d, dict):
        raise ConfigError("split must be a mapping")
    scheme = _require(d, "scheme", "split")
    vf = float(d.get("val_fraction_of_train", 0.1))
    try:
        if scheme == "fraction":
            return FractionScheme(float(_require(d, "train_fraction", "split")),
                                  val_fraction_of_train=vf)
        if scheme == "per_category":
            return PerCategoryScheme(int(_require(d, "n_train", "split")),
                                     val_fraction_of_train=vf)
        if scheme == "fixed_first_k":
            return FixedFirstKScheme(int(_require(d, "k_first", "split")),
                                     int(_require(d, "k_random", "split")),
                                     val_fraction_of_train=vf)
    except ValueError as exc:
        raise ConfigError(f"split: {exc}") from exc
    raise ConfigError(f"unknown split scheme {scheme!r}")


def _parse_channel(d: dict, index: int) -> ChannelConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"channels[{index}] must be a mapping")
    kind = _require(d, "kind", f"channels[{index}]")
    try:
        if kind == "pixels":
            return ChannelConfig("pixels")
        if kind == "lbp":
            grid = d.get("grid", [6, 6])
            return ChannelConfig("lbp", LbpConfig(
                p=int(d.get("p", 8)), r=float(d.get("r", 1.0)),
                grid=(int(grid[0]), int(grid[1]))))
        if kind == "hog":
            cell = d.get("cell", [8, 8])
            return ChannelConfig("hog", HogConfig(
                cell=(int(cell[0]), int(cell[1]))))
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"channels[{index}]: {exc}") from exc
    raise ConfigError(f"unknown channel kind {kind!r}")


def _parse_architecture(d: dict, n_channels: int) -> ArchitectureConfig:
    if not isinstance(d, dict):
        raise ConfigError("architecture must be a mapping")
    mode = d.get("mode", "search")

    def sizes(key):
        if key not in d or d[key] is None:
            return None
        value = d[key]
        if isinstance(value, (int, float)):
            return (int(value),)
        return tuple(int(v) for v in value)

    refine = d.get("refine")
    try:
        return ArchitectureConfig(
            mode=mode,
            n_pcs=sizes("n_pcs"),
            n_neurons=sizes("n_neurons"),
            pcs_range=_as_pair(d.get("pcs_range", [1, 150]),
                               "architecture.pcs_range"),
            neurons_range=_as_pair(d.get("neurons_range", [20, 35]),
                                   "architecture.neurons_range"),
            coarse_step=int(d.get("coarse_step", 1)),
            refine=None if refine is None else bool(refine),
            top_k=int(d.get("top_k", 10)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"architecture: {exc}") from exc


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config root must be a mapping")
    known = {"data_dir", "out_dir", "seed", "n_splits", "resize_to",
             "normalization", "split", "channels", "architecture", "training",
             "fusion", "preset"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    norm_d = d.get("normalization", {"variant": "sn"})
    if isinstance(norm_d, str):
        norm_d = {"variant": norm_d}
    try:
        normalization = NormalizationMode(
            variant=norm_d.get("variant", "sn"),
            ln_window=int(norm_d.get("ln_window", 7)))
    except ValueError as exc:
        raise ConfigError(f"normalization: {exc}") from exc

    resize = d.get("resize_to")
    channels_d = d.get("channels")
    if not channels_d:
        raise ConfigError("channels is required and must be non-empty")
    channels = tuple(_parse_channel(c, i) for i, c in enumerate(channels_d))

    training_d = d.get("training", {})
    if not isinstance(training_d, dict):
        raise ConfigError("training must be a mapping")
    try:
        return ExperimentConfig(
            data_dir=str(_require(d, "data_dir", "config")),
            out_dir=str(d.get("out_dir", "biorec-out")),
            seed=int(d.get("seed", 1234)),
            n_splits=int(d.get("n_splits", 10)),
            resize_to=None if resize is None else _as_pair(resize, "resize_to"),
            normalization=normalization,
            split=_parse_split(d.get("split", {"scheme": "per_category",
                                               "n_train": 5})),
            channels=channels,
            architecture=_parse_architecture(d.get("architecture", {}),
                                             len(channels)),
            training=TrainingConfig(
                max_epochs=int(training_d.get("max_epochs", 300)),
                patience=int(training_d.get("patience", 5))),
            fusion=str(d.get("fusion", "sum_rule")),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-YAML form of a config; config_from_dict inverts it."""
    split = cfg.split
    if isinstance(split, FractionScheme):
        split_d = {"scheme": "fraction", "train_fraction": split.train_fraction}
    elif isinstance(split, PerCategoryScheme):
        split_d = {"scheme": "per_category", "n_train": split.n_train}
    else:
        split_d = {"scheme": "fixed_first_k", "k_first": split.k_first,
                   "k_random": split.k_random}
    split_d["val_fraction_of_train"] = split.val_fraction_of_train

    channels = []
    for ch in cfg.channels:
        if ch.kind == "lbp":
            channels.append({"kind": "lbp", "p": ch.params.p, "r": ch.params.r,
                             "grid": list(ch.params.grid)})
        elif ch.kind == "hog":
            channels.append({"kind": "hog", "cell": list(ch.params.cell)})
        else:
            channels.append({"kind": "pixels"})

    arch = cfg.architecture
    arch_d = {"mode": arch.mode,
              "pcs_range": list(arch.pcs_range),
              "neurons_range": list(arch.neurons_range),
              "coarse_step": arch.coarse_step,
              "refine": arch.refine,
              "top_k": arch.top_k}
    if arch.n_pcs is not None:
        arch_d["n_pcs"] = list(arch.n_pcs)
    if arch.n_neurons is not None:
        arch_d["n_neurons"] = list(arch.n_neurons)

    d = {
        "data_dir": cfg.data_dir,
        "out_dir": cfg.out_dir,
        "seed": cfg.seed,
        "n_splits": cfg.n_splits,
        "normalization": {"variant": cfg.normalization.variant,
                          "ln_window": cfg.normalization.ln_window},
        "split": split_d,
        "channels": channels,
        "architecture": arch_d,
        "training": {"max_epochs": cfg.training.max_epochs,
                     "patience": cfg.training.patience},
        "fusion": cfg.fusion,
    }
    if cfg.resize_to is not None:
        d["resize_to"] = list(cfg.resize_to)
    return d


def load_config(path=None, preset: str | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    """Resolve preset -> YAML file -> overrides (later wins) and validate."""
    merged: dict = {}
    file_dict: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        try:
            file_dict = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}") from exc
        if not isinstance(file_dict, dict):
            raise ConfigError("config root must be a mapping")
    preset = preset or file_dict.get("preset")
    if preset is not None:
        merged = preset_dict(str(preset))
    merged = deep_merge(merged, file_dict)
    if overrides:
        merged = deep_merge(merged, overrides)
    return config_from_dict(merged)
