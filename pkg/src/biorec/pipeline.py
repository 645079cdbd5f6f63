"""End-to-end experiments over repeated random splits.

The flow per split: normalize images, extract each channel's features on
the learning set, fit that channel's PCA and network (early stopping on
the carved-out validation part), then combine channel scores on the test
set by the configured fusion. Architectures come from the config directly
or from a search run once on the first split; the same architecture is
then used for every split so the repeated-split statistics measure one
model family.

Fitting functions receive only learning/validation data, so test samples
cannot influence any fitted parameter by construction.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .bundle import read_container, write_container
from .config import (ChannelConfig, ExperimentConfig, TrainingConfig,
                     config_to_dict)
from .dataset import (ImageSet, SplitPlan, decode_image, load_dataset,
                      make_split, resize_bilinear)
from .errors import BiorecError, BundleError, ConfigError
from .features import HogConfig, LbpConfig, hog_descriptor, lbp_descriptor
from .fusion import (FusedHybridNetwork, block_diagonal_mask, build_fhn,
                     decide, fuse_sum, stack_features, train_fhn)
from .metrics import (Metrics, RocCurve, aggregate_splits, compute_metrics,
                      roc_one_vs_rest)
from .mlp import MlpArch, MlpModel, init_weights, scg_train
from .modelsearch import SearchResult, grid_search
from .pca import PcaModel, fit_pca
from .preprocess import NormalizationMode, vectorize
from .seeds import derive_seed


def extract_features(images: np.ndarray, channel: ChannelConfig,
                     normalization: NormalizationMode) -> np.ndarray:
    """Feature matrix (m, d) for a stack of images, normalized first."""
    rows = []
    for image in images:
        prepared = normalization.apply(image)
        if channel.kind == "pixels":
            rows.append(vectorize(prepared))
        elif channel.kind == "lbp":
            rows.append(lbp_descriptor(prepared, channel.params))
        else:
            rows.append(hog_descriptor(prepared, channel.params))
    return np.array(rows)


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """One fitted channel: feature config, projection, and network."""

    channel: ChannelConfig
    pca: PcaModel
    net: MlpModel

    def scores(self, features: np.ndarray) -> np.ndarray:
        """(n_categories, m) output scores for raw channel features."""
        return self.net.predict_proba(self.pca.transform(features))


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """Everything needed to classify new images, as saved to disk.

    config_snapshot is the experiment config that produced the model,
    as YAML text (informational; prediction never parses it).
    """

    normalization: NormalizationMode
    image_hw: tuple[int, int]
    category_names: tuple[str, ...]
    channels: tuple[ChannelModel, ...]
    fusion: str
    fused: FusedHybridNetwork | None = None
    config_snapshot: str = ""

    def _check_images(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 3 or images.shape[1:] != self.image_hw:
            raise ValueError(
                f"expected (m, {self.image_hw[0]}, {self.image_hw[1]}) images,"
                f" got {images.shape}")
        return images

    def predict_scores(self, images: np.ndarray) -> np.ndarray:
        """Fused score matrix (n_categories, m)."""
        images = self._check_images(images)
        projections = []
        channel_scores = []
        for cm in self.channels:
            features = extract_features(images, cm.channel, self.normalization)
            projected = cm.pca.transform(features)
            if self.fusion == "sum_rule":
                channel_scores.append(cm.net.predict_proba(projected))
            else:
                projections.append(projected)
        if self.fusion == "sum_rule":
            return fuse_sum(channel_scores)
        return self.fused.predict_proba(stack_features(projections))

    def predict(self, images: np.ndarray) -> np.ndarray:
        return decide(self.predict_scores(images))


def fit_channel(learn_set, val_set, n_categories: int,
                channel: ChannelConfig, n_pcs: int, n_neurons: int,
                init_seed: int, training: TrainingConfig) -> ChannelModel:
    """Fit one channel's PCA and network on the learning data only.

    learn_set and val_set are (features, labels) pairs. The effective
    component count is min(n_pcs, numerical rank of the learning
    features).
    """
    features_learn, labels_learn = learn_set
    features_val, labels_val = val_set
    pca = fit_pca(features_learn, n_pcs)
    start = init_weights(pca.n_components, n_neurons, n_categories, init_seed)
    model, _ = scg_train(
        start, (pca.transform(features_learn), labels_learn),
        (pca.transform(features_val), labels_val),
        max_epochs=training.max_epochs, patience=training.patience)
    return ChannelModel(channel=channel, pca=pca, net=model)


def fit_split(images_learn, labels_learn, images_val, labels_val,
              category_names, cfg: ExperimentConfig,
              architectures, split_index: int) -> ModelBundle:
    """Fit all channels (and the fused network, if configured) for one
    split. Sees no test data."""
    n_categories = len(category_names)
    channel_models = []
    proj_learn = []
    proj_val = []
    for i, channel in enumerate(cfg.channels):
        n_pcs, n_neurons = architectures[i]
        fl = extract_features(images_learn, channel, cfg.normalization)
        fv = extract_features(images_val, channel, cfg.normalization)
        cm = fit_channel(
            (fl, labels_learn), (fv, labels_val), n_categories, channel,
            n_pcs, n_neurons,
            derive_seed(cfg.seed, "init", f"ch{i}", f"split{split_index}"),
            cfg.training)
        channel_models.append(cm)
        if cfg.fusion != "sum_rule":
            proj_learn.append(cm.pca.transform(fl))
            proj_val.append(cm.pca.transform(fv))

    fused = None
    if cfg.fusion != "sum_rule":
        fhn = build_fhn(
            [cm.net for cm in channel_models], cfg.fusion,
            seed=derive_seed(cfg.seed, "fused", f"split{split_index}"))
        fused, _ = train_fhn(
            fhn, (stack_features(proj_learn), labels_learn),
            (stack_features(proj_val), labels_val),
            max_epochs=cfg.training.max_epochs,
            patience=cfg.training.patience)

    return ModelBundle(
        normalization=cfg.normalization,
        image_hw=(int(images_learn.shape[1]), int(images_learn.shape[2])),
        category_names=tuple(category_names),
        channels=tuple(channel_models),
        fusion=cfg.fusion,
        fused=fused,
        config_snapshot=yaml.safe_dump(config_to_dict(cfg), sort_keys=True))


def choose_architectures(image_set: ImageSet, plan: SplitPlan,
                         cfg: ExperimentConfig):
    """Per-channel (n_pcs, n_neurons), searching on the given split when
    the config asks for it. Returns (architectures, search results)."""
    arch_cfg = cfg.architecture
    n = len(cfg.channels)
    if arch_cfg.mode == "fixed":
        pcs = arch_cfg.n_pcs * n if len(arch_cfg.n_pcs) == 1 else arch_cfg.n_pcs
        neurons = (arch_cfg.n_neurons * n if len(arch_cfg.n_neurons) == 1
                   else arch_cfg.n_neurons)
        return tuple(zip(pcs, neurons)), (None,) * n

    labels_learn = image_set.labels[plan.learn_idx]
    labels_val = image_set.labels[plan.val_idx]
    if labels_val.size == 0:
        raise ConfigError("architecture search needs a validation part; "
                          "set val_fraction_of_train > 0")
    space = arch_cfg.search_space()
    architectures = []
    searches = []
    for i, channel in enumerate(cfg.channels):
        fl = extract_features(image_set.images[plan.learn_idx], channel,
                              cfg.normalization)
        fv = extract_features(image_set.images[plan.val_idx], channel,
                              cfg.normalization)
        result = grid_search(
            (fl, labels_learn), (fv, labels_val), image_set.n_categories,
            space, derive_seed(cfg.seed, "search", f"ch{i}"),
            max_epochs=cfg.training.max_epochs,
            patience=cfg.training.patience)
        architectures.append((result.best.n_pcs, result.best.n_neurons))
        searches.append(result)
    return tuple(architectures), tuple(searches)


@dataclass(eq=False)
class ExperimentResult:
    config: ExperimentConfig
    architectures: tuple
    searches: tuple
    plans: list
    split_metrics: list
    aggregate: dict
    best_split: int
    model: ModelBundle
    roc: RocCurve
    runtime_seconds: float


@contextmanager
def _stage(name: str):
    """Re-raise package errors with the failing stage named."""
    try:
        yield
    except BiorecError as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def load_experiment_images(cfg: ExperimentConfig) -> ImageSet:
    resize = None if cfg.resize_to is None else tuple(cfg.resize_to)
    return load_dataset(cfg.data_dir, resize_to=resize)


def run_experiment(config: ExperimentConfig, *, image_set: ImageSet | None = None,
                   log=None) -> ExperimentResult:
    """Full protocol: n_splits random splits, one model family throughout.

    Loads the dataset from config.data_dir unless image_set is supplied.
    The returned model is the fitted model from the split with the highest
    test accuracy (lowest split index on ties); roc is that split's fused
    test-set sweep.
    """
    say = log or (lambda _msg: None)
    t0 = time.monotonic()
    if image_set is None:
        with _stage("load dataset"):
            image_set = load_experiment_images(config)

    with _stage("split"):
        plans = [make_split(image_set, config.split,
                            derive_seed(config.seed, "split", str(j)))
                 for j in range(config.n_splits)]

    with _stage("architecture selection"):
        architectures, searches = choose_architectures(image_set, plans[0],
                                                       config)
    for i, (n_pcs, n_neurons) in enumerate(architectures):
        say(f"channel {i} ({config.channels[i].kind}): "
            f"{n_pcs} components, {n_neurons} hidden units")

    n_channels = len(config.channels)
    split_metrics = []
    best_split = -1
    best_accuracy = -1.0
    best_model = None
    best_scores = None
    best_truth = None
    for j, plan in enumerate(plans):
        with _stage(f"split {j}"):
            model = fit_split(
                image_set.images[plan.learn_idx],
                image_set.labels[plan.learn_idx],
                image_set.images[plan.val_idx],
                image_set.labels[plan.val_idx],
                image_set.category_names, config, architectures, j)
            truth = image_set.labels[plan.test_idx]
            scores = model.predict_scores(image_set.images[plan.test_idx])
            if config.fusion == "sum_rule":
                scores = scores / n_channels  # back to mean probabilities
            predictions = decide(scores)
            record = compute_metrics(predictions, truth,
                                     image_set.n_categories, scores=scores)
        split_metrics.append(record)
        say(f"split {j}: accuracy {record.accuracy:.4f}")
        if record.accuracy > best_accuracy:
            best_accuracy = record.accuracy
            best_split = j
            best_model = model
            best_scores = scores
            best_truth = truth

    with _stage("aggregate"):
        aggregate = aggregate_splits(split_metrics)
        roc = roc_one_vs_rest(best_scores, best_truth)
    return ExperimentResult(
        config=config, architectures=architectures, searches=searches,
        plans=plans, split_metrics=split_metrics, aggregate=aggregate,
        best_split=best_split, model=best_model, roc=roc,
        runtime_seconds=time.monotonic() - t0)


# ---------------------------------------------------------------------------
# Model bundle (de)serialization
# ---------------------------------------------------------------------------

def _net_dims(net: MlpModel) -> np.ndarray:
    return np.array([net.n_in, net.n_hidden, net.n_out], dtype=np.int64)


def bundle_to_arrays(bundle: ModelBundle) -> dict[str, np.ndarray]:
    arrays = {
        "meta/fusion": np.array(bundle.fusion),
        "meta/categories": np.array(list(bundle.category_names)),
        "meta/image_hw": np.array(bundle.image_hw, dtype=np.int64),
        "meta/norm_variant": np.array(bundle.normalization.variant),
        "meta/norm_window": np.array(bundle.normalization.ln_window,
                                     dtype=np.int64),
        "meta/n_channels": np.array(len(bundle.channels), dtype=np.int64),
        "meta/config_yaml": np.array(bundle.config_snapshot),
    }
    for i, cm in enumerate(bundle.channels):
        key = f"ch{i}"
        arrays[f"{key}/kind"] = np.array(cm.channel.kind)
        if cm.channel.kind == "lbp":
            p = cm.channel.params
            arrays[f"{key}/lbp_p"] = np.array(p.p, dtype=np.int64)
            arrays[f"{key}/lbp_r"] = np.array(p.r, dtype=np.float64)
            arrays[f"{key}/lbp_grid"] = np.array(p.grid, dtype=np.int64)
        elif cm.channel.kind == "hog":
            arrays[f"{key}/hog_cell"] = np.array(cm.channel.params.cell,
                                                 dtype=np.int64)
        arrays[f"{key}/pca_mean"] = cm.pca.mean
        arrays[f"{key}/pca_scale"] = cm.pca.scale
        arrays[f"{key}/pca_basis"] = cm.pca.basis
        arrays[f"{key}/pca_spectrum"] = cm.pca.spectrum
        arrays[f"{key}/pca_total_variance"] = np.array(cm.pca.total_variance)
        arrays[f"{key}/pca_standardized"] = np.array(
            int(cm.pca.standardized), dtype=np.int64)
        arrays[f"{key}/net_dims"] = _net_dims(cm.net)
        arrays[f"{key}/net_weights"] = cm.net.weights
    if bundle.fused is not None:
        arrays["fused/net_dims"] = _net_dims(bundle.fused.net)
        arrays["fused/net_weights"] = bundle.fused.net.weights
        arrays["fused/in_sizes"] = np.array(bundle.fused.in_sizes,
                                            dtype=np.int64)
        arrays["fused/hidden_sizes"] = np.array(bundle.fused.hidden_sizes,
                                                dtype=np.int64)
        arrays["fused/mode"] = np.array(bundle.fused.mode)
    return arrays


def _net_from(arrays, key) -> MlpModel:
    n_in, n_hidden, n_out = (int(v) for v in arrays[f"{key}/net_dims"])
    arch = MlpArch(n_in=n_in, n_hidden=n_hidden, n_out=n_out)
    return MlpModel(arch=arch, weights=np.asarray(arrays[f"{key}/net_weights"],
                                                  dtype=np.float64))


def bundle_from_arrays(arrays: dict[str, np.ndarray]) -> ModelBundle:
    try:
        fusion = str(arrays["meta/fusion"][()])
        normalization = NormalizationMode(
            variant=str(arrays["meta/norm_variant"][()]),
            ln_window=int(arrays["meta/norm_window"]))
        image_hw = tuple(int(v) for v in arrays["meta/image_hw"])
        categories = tuple(str(c) for c in arrays["meta/categories"])
        snapshot = str(arrays["meta/config_yaml"][()])
        channels = []
        for i in range(int(arrays["meta/n_channels"])):
            key = f"ch{i}"
            kind = str(arrays[f"{key}/kind"][()])
            if kind == "lbp":
                params = LbpConfig(
                    p=int(arrays[f"{key}/lbp_p"]),
                    r=float(arrays[f"{key}/lbp_r"]),
                    grid=tuple(int(v) for v in arrays[f"{key}/lbp_grid"]))
            elif kind == "hog":
                params = HogConfig(cell=tuple(
                    int(v) for v in arrays[f"{key}/hog_cell"]))
            else:
                params = None
            basis = np.asarray(arrays[f"{key}/pca_basis"], dtype=np.float64)
            spectrum = np.asarray(arrays[f"{key}/pca_spectrum"],
                                  dtype=np.float64)
            pca = PcaModel(
                mean=np.asarray(arrays[f"{key}/pca_mean"], dtype=np.float64),
                scale=np.asarray(arrays[f"{key}/pca_scale"], dtype=np.float64),
                basis=basis,
                eigenvalues=spectrum[:basis.shape[1]],
                spectrum=spectrum,
                total_variance=float(arrays[f"{key}/pca_total_variance"]),
                standardized=bool(int(arrays[f"{key}/pca_standardized"])),
                n_requested=basis.shape[1])
            channels.append(ChannelModel(channel=ChannelConfig(kind, params),
                                         pca=pca, net=_net_from(arrays, key)))
        fused = None
        if "fused/net_dims" in arrays:
            net = _net_from(arrays, "fused")
            in_sizes = tuple(int(v) for v in arrays["fused/in_sizes"])
            hidden_sizes = tuple(int(v) for v in arrays["fused/hidden_sizes"])
            fused = FusedHybridNetwork(
                net=net,
                mask=block_diagonal_mask(in_sizes, hidden_sizes, net.n_out),
                in_sizes=in_sizes, hidden_sizes=hidden_sizes,
                mode=str(arrays["fused/mode"][()]))
    except (KeyError, ValueError, TypeError) as exc:
        raise BundleError(f"bundle is missing or has malformed fields: {exc}") from exc
    return ModelBundle(
        normalization=normalization, image_hw=image_hw,
        category_names=categories, channels=tuple(channels),
        fusion=fusion, fused=fused, config_snapshot=snapshot)


def save_bundle(bundle: ModelBundle, path) -> None:
    """Write a model bundle to the checksummed container format."""
    write_container(path, bundle_to_arrays(bundle))


def load_bundle(path) -> ModelBundle:
    """Read a model bundle back, verifying container integrity."""
    return bundle_from_arrays(read_container(path))


def predict(bundle: ModelBundle, image_paths) -> list[tuple[str, np.ndarray]]:
    """Classify image files: per image, (category name, fused score vector).

    Images are decoded to grayscale and resized to the bundle's training
    size when they differ.
    """
    paths = list(image_paths)
    if not paths:
        raise ValueError("no images to classify")
    images = []
    for path in paths:
        image = decode_image(str(path))
        if image.shape != bundle.image_hw:
            image = resize_bilinear(image, bundle.image_hw)
        images.append(image)
    scores = bundle.predict_scores(np.stack(images))
    labels = decide(scores)
    return [(bundle.category_names[int(label)], scores[:, i].copy())
            for i, label in enumerate(labels)]


# ---------------------------------------------------------------------------
# Result files (delimiter-separated text)
# ---------------------------------------------------------------------------

_SCALAR_COLUMNS = ("accuracy", "macro_precision", "macro_recall", "macro_f1",
                   "macro_auc")


def metrics_table_text(split_metrics, aggregate: dict) -> str:
    """Per-split scalar metrics plus mean/std rows, tab-separated."""
    columns = [c for c in _SCALAR_COLUMNS if c in aggregate]
    lines = ["split\t" + "\t".join(columns)]
    for j, record in enumerate(split_metrics):
        scalars = record.scalars()
        lines.append(f"{j}\t" + "\t".join(f"{float(scalars[c])!r}"
                                          for c in columns))
    for stat, pick in (("mean", 0), ("std", 1)):
        lines.append(f"{stat}\t" + "\t".join(f"{float(aggregate[c][pick])!r}"
                                             for c in columns))
    return "\n".join(lines) + "\n"


def confusion_table_text(split_metrics) -> str:
    """Tab-separated confusion matrices, one block per split."""
    blocks = []
    for j, record in enumerate(split_metrics):
        rows = [f"split\t{j}"]
        for row in record.confusion:
            rows.append("\t".join(str(int(v)) for v in row))
        blocks.append("\n".join(rows))
    return "\n\n".join(blocks) + "\n"


def search_table_text(channel_configs, searches) -> str | None:
    """Leaderboards of every searched channel in one tab-separated table."""
    if all(s is None for s in searches):
        return None
    lines = ["channel\tkind\tn_pcs\tn_neurons\tval_accuracy\tparam_count"
             "\tepochs_run"]
    notes = []
    for i, (cfg, search) in enumerate(zip(channel_configs, searches)):
        if search is None:
            notes.append(f"# channel {i} ({cfg.kind}): fixed, not searched")
            continue
        for pt in search.leaderboard:
            lines.append(f"{i}\t{cfg.kind}\t{pt.n_pcs}\t{pt.n_neurons}"
                         f"\t{pt.val_accuracy!r}\t{pt.param_count}"
                         f"\t{pt.epochs_run}")
        for note in search.skipped:
            notes.append(f"# channel {i} ({cfg.kind}) skipped: {note}")
    return "\n".join(lines + notes) + "\n"


def write_results(result: ExperimentResult, out_dir) -> dict[str, str]:
    """Write the result files and the model bundle into out_dir.

    metrics.tsv, confusion.tsv, roc.tsv and search.tsv (when searched)
    are tab-separated text; splits.txt records the index lists; the
    model goes to model.biorec. Returns the paths written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    def emit(name, filename, text):
        target = out / filename
        target.write_text(text)
        paths[name] = str(target)

    emit("metrics", "metrics.tsv",
         metrics_table_text(result.split_metrics, result.aggregate))
    emit("confusion", "confusion.tsv",
         confusion_table_text(result.split_metrics))
    emit("roc", "roc.tsv", result.roc.to_text())
    search_text = search_table_text(result.config.channels, result.searches)
    if search_text is not None:
        emit("search", "search.tsv", search_text)
    emit("splits", "splits.txt",
         "\n\n".join(plan.to_text() for plan in result.plans) + "\n")

    model_path = out / "model.biorec"
    save_bundle(result.model, model_path)
    paths["model"] = str(model_path)
    return paths
