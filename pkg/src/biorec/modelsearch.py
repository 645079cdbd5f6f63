"""Architecture search for one channel: component count x hidden size.

Every grid point trains the same way (same initialization seed, same
stopping rule) and is scored by validation accuracy. The PCA basis is
fitted once at the largest requested component count; smaller counts are
column slices, which is exactly what refitting would produce. Ties prefer
fewer parameters, then the lexicographically smallest (n_pcs, n_neurons).

With refine on, the strided coarse grid is followed by step-1 windows
around the best coarse points; all evaluations are pooled, so refinement
can only improve on the coarse best.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import accuracy
from .mlp import MlpArch, MlpModel, scg_train
from .pca import fit_pca


@dataclass(frozen=True)
class SearchSpace:
    """Inclusive (lo, hi) ranges with strides for both grid axes.

    refine adds a step-1 pass in a +-step window around each of the
    top_k best strided points.
    """

    pcs: tuple[int, int]
    neurons: tuple[int, int]
    pcs_step: int = 1
    neurons_step: int = 1
    refine: bool = False
    top_k: int = 10

    def __post_init__(self):
        p_lo, p_hi = self.pcs
        n_lo, n_hi = self.neurons
        if not (1 <= p_lo <= p_hi and 1 <= n_lo <= n_hi):
            raise ValueError("ranges must satisfy 1 <= lo <= hi")
        if self.pcs_step < 1 or self.neurons_step < 1:
            raise ValueError("steps must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass(frozen=True)
class SearchPoint:
    """One evaluated architecture."""

    n_pcs: int
    n_neurons: int
    val_accuracy: float
    param_count: int
    epochs_run: int

    def sort_key(self):
        return (-self.val_accuracy, self.param_count,
                self.n_pcs, self.n_neurons)


@dataclass(frozen=True, eq=False)
class SearchResult:
    """leaderboard holds every evaluated point, best first (descending
    validation accuracy; ties prefer fewer parameters, then the smaller
    (n_pcs, n_neurons)). skipped records infeasible grid points."""

    leaderboard: tuple[SearchPoint, ...]
    skipped: tuple[str, ...]
    n_components_available: int

    @property
    def best(self) -> SearchPoint:
        return self.leaderboard[0]

    @property
    def best_val_accuracy(self) -> float:
        return self.best.val_accuracy

    def leaderboard_text(self) -> str:
        """Tab-separated table of the leaderboard, one point per row."""
        lines = ["n_pcs\tn_neurons\tval_accuracy\tparam_count\tepochs_run"]
        for pt in self.leaderboard:
            lines.append(f"{pt.n_pcs}\t{pt.n_neurons}\t{pt.val_accuracy!r}"
                         f"\t{pt.param_count}\t{pt.epochs_run}")
        for note in self.skipped:
            lines.append(f"# skipped: {note}")
        return "\n".join(lines) + "\n"


def _as_set(name, batch):
    try:
        features, labels = batch
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a (features, labels) pair")
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise ValueError(f"{name} features and labels disagree on length")
    return features, labels


def _strided(lo: int, hi: int, step: int) -> list[int]:
    values = list(range(lo, hi + 1, step))
    if values[-1] != hi:
        values.append(hi)
    return values


def _evaluate_pairs(proj_learn, labels_learn, proj_val, labels_val,
                    n_categories, pairs, seed, max_epochs, patience):
    points = []
    for n_pcs, n_neurons in pairs:
        arch = MlpArch(n_in=n_pcs, n_hidden=n_neurons, n_out=n_categories)
        init = MlpModel(arch=arch, weights=arch.init_flat(seed), seed=seed)
        model, report = scg_train(
            init, (proj_learn[:, :n_pcs], labels_learn),
            (proj_val[:, :n_pcs], labels_val),
            max_epochs=max_epochs, patience=patience)
        val_acc = accuracy(labels_val, model.predict(proj_val[:, :n_pcs]))
        points.append(SearchPoint(n_pcs=n_pcs, n_neurons=n_neurons,
                                  val_accuracy=val_acc,
                                  param_count=arch.param_count,
                                  epochs_run=report.epochs_run))
    return points


def grid_search(learn_set, val_set, n_categories: int, space: SearchSpace,
                seed: int, *, max_epochs: int = 300,
                patience: int = 5) -> SearchResult:
    """Search the (n_pcs, n_neurons) grid on one channel's features.

    learn_set and val_set are (features, labels) pairs from disjoint
    splits. Component counts beyond the numerical rank of the learning
    features are skipped (recorded in .skipped). Deterministic for fixed
    inputs and seed.
    """
    features_learn, labels_learn = _as_set("learn_set", learn_set)
    features_val, labels_val = _as_set("val_set", val_set)
    p_lo, p_hi = space.pcs
    n_lo, n_hi = space.neurons

    pca = fit_pca(features_learn, p_hi)
    available = pca.n_components
    proj_learn = pca.transform(features_learn)
    proj_val = pca.transform(features_val)

    coarse_pcs = _strided(p_lo, p_hi, space.pcs_step)
    coarse_neurons = _strided(n_lo, n_hi, space.neurons_step)
    skipped = [f"n_pcs={p}: exceeds available components ({available})"
               for p in coarse_pcs if p > available]
    pairs = [(p, n) for p in coarse_pcs if p <= available
             for n in coarse_neurons]
    points = _evaluate_pairs(proj_learn, labels_learn, proj_val, labels_val,
                             n_categories, pairs, seed, max_epochs, patience)

    if space.refine and points:
        seen = set(pairs)
        fine_pairs = []
        leaders = sorted(points, key=SearchPoint.sort_key)[:space.top_k]
        for leader in leaders:
            for p in range(max(p_lo, leader.n_pcs - space.pcs_step),
                           min(p_hi, available, leader.n_pcs + space.pcs_step) + 1):
                for n in range(max(n_lo, leader.n_neurons - space.neurons_step),
                               min(n_hi, leader.n_neurons + space.neurons_step) + 1):
                    if (p, n) not in seen:
                        seen.add((p, n))
                        fine_pairs.append((p, n))
        points += _evaluate_pairs(proj_learn, labels_learn, proj_val,
                                  labels_val, n_categories, fine_pairs, seed,
                                  max_epochs, patience)

    if not points:
        raise ValueError("no feasible grid points (feature rank too low?)")
    leaderboard = tuple(sorted(points, key=SearchPoint.sort_key))
    return SearchResult(leaderboard=leaderboard, skipped=tuple(skipped),
                        n_components_available=available)
