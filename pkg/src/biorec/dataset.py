"""Image corpus loading and seeded stratified splits.

A dataset on disk is a directory of category subdirectories, each holding
image files (PGM/PNG/JPEG/BMP). Loading converts everything to grayscale
intensities in [0, 1] at a uniform size; splitting produces disjoint
learn/validation/test index sets, stratified per category and reproducible
bit-for-bit from a seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DatasetError

IMAGE_EXTENSIONS = {".pgm", ".png", ".jpg", ".jpeg", ".bmp"}

# ITU-R 601 luma weights for RGB -> grayscale.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class ImageSet:
    """An in-memory image corpus with integer category labels.

    images: float64 array of shape (n, H, W), intensities in [0, 1].
    labels: int array of shape (n,), values in [0, C).
    category_names: names of the C categories, index-aligned with labels.
    source_paths: provenance path per image (may be empty strings for
        synthetic sets).
    """

    images: np.ndarray
    labels: np.ndarray
    category_names: tuple[str, ...]
    source_paths: tuple[str, ...] = ()

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 3:
            raise DatasetError("images must be a (n, H, W) stack")
        if len(labels) != len(images):
            raise DatasetError("labels and images length mismatch")
        c = len(self.category_names)
        if len(labels) and (labels.min() < 0 or labels.max() >= c):
            raise DatasetError("label outside [0, C)")
        counts = np.bincount(labels, minlength=c)
        if c and counts.min() == 0:
            missing = self.category_names[int(np.argmin(counts))]
            raise DatasetError(f"category {missing!r} has no samples")
        if len(images) and (images.min() < 0.0 or images.max() > 1.0):
            raise DatasetError("intensities must lie in [0, 1]")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return len(self.images)

    @property
    def n_categories(self) -> int:
        return len(self.category_names)

    @property
    def height(self) -> int:
        return self.images.shape[1]

    @property
    def width(self) -> int:
        return self.images.shape[2]


# ---------------------------------------------------------------------------
# Split schemes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FractionScheme:
    """Random per-category split: a fraction of each category is training
    (itself split into learn + validation), the remainder is test."""

    train_fraction: float
    val_fraction_of_train: float = 0.1

    def describe(self) -> str:
        return f"fraction({self.train_fraction},{self.val_fraction_of_train})"


@dataclass(frozen=True)
class PerCategoryScheme:
    """Fixed number of training samples per category; the rest is test."""

    n_train: int
    val_fraction_of_train: float = 0.1

    def describe(self) -> str:
        return f"per_category({self.n_train},{self.val_fraction_of_train})"


@dataclass(frozen=True)
class FixedFirstKScheme:
    """Training = the first k_first images of each category (file order)
    plus k_random further images drawn at random; the rest is test."""

    k_first: int
    k_random: int
    val_fraction_of_train: float = 0.1

    def describe(self) -> str:
        return (f"fixed_first_k_plus_random({self.k_first},{self.k_random},"
                f"{self.val_fraction_of_train})")


SplitScheme = FractionScheme | PerCategoryScheme | FixedFirstKScheme


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint learn/validation/test index sets into an ImageSet."""

    learn_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    scheme: SplitScheme

    def __post_init__(self):
        for name in ("learn_idx", "val_idx", "test_idx"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            object.__setattr__(self, name, np.sort(arr))

    def to_text(self) -> str:
        lines = [
            f"seed {self.seed}",
            f"scheme {self.scheme.describe()}",
            "learn " + " ".join(map(str, self.learn_idx)),
            "val " + " ".join(map(str, self.val_idx)),
            "test " + " ".join(map(str, self.test_idx)),
        ]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def decode_image(path: str) -> np.ndarray:
    """Decode one raster file to grayscale float64 in [0, 1]."""
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode in ("P", "RGBA", "CMYK", "LA"):
                img = img.convert("RGB")
            arr = np.asarray(img)
    except Exception as exc:
        raise DatasetError(f"undecodable image file: {path} ({exc})") from exc
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    elif arr.dtype == np.uint16:
        arr = arr.astype(np.float64) / 65535.0
    elif arr.dtype == np.int32:  # PIL mode "I", e.g. 16-bit PGM
        arr = arr.astype(np.float64) / 65535.0
    else:
        arr = np.clip(arr.astype(np.float64), 0.0, 1.0)
    if arr.ndim == 3:
        arr = arr[:, :, :3] @ _LUMA
    return np.clip(arr, 0.0, 1.0)


def resize_bilinear(image: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Resize a 2-D image by bilinear interpolation (pixel-center aligned)."""
    h, w = image.shape
    out_h, out_w = out_hw
    if (h, w) == (out_h, out_w):
        return image.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = image[np.ix_(y0, x0)] * (1 - fx) + image[np.ix_(y0, x1)] * fx
    bot = image[np.ix_(y1, x0)] * (1 - fx) + image[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def load_dataset(root_dir: str, resize_to: tuple[int, int] | None = None) -> ImageSet:
    """Load a directory-of-categories corpus.

    Category labels follow lexicographic subdirectory order. Color images
    are converted to grayscale with ITU-R 601 luma weights; ``resize_to``
    applies bilinear interpolation. With ``resize_to=None`` all images must
    already share one size.
    """
    if not os.path.isdir(root_dir):
        raise DatasetError(f"dataset root is not a directory: {root_dir}")
    categories = sorted(
        d for d in os.listdir(root_dir)
        if os.path.isdir(os.path.join(root_dir, d))
    )
    if not categories:
        raise DatasetError(f"no categories found under {root_dir}")

    images: list[np.ndarray] = []
    labels: list[int] = []
    paths: list[str] = []
    for label, name in enumerate(categories):
        cat_dir = os.path.join(root_dir, name)
        files = sorted(
            f for f in os.listdir(cat_dir)
            if os.path.splitext(f)[1].lower() in IMAGE_EXTENSIONS
        )
        if not files:
            raise DatasetError(f"category {name!r} contains no images")
        for fname in files:
            path = os.path.join(cat_dir, fname)
            img = decode_image(path)
            if resize_to is not None:
                img = resize_bilinear(img, resize_to)
            images.append(img)
            labels.append(label)
            paths.append(path)

    shapes = {img.shape for img in images}
    if len(shapes) > 1:
        raise DatasetError(
            f"images have mixed dimensions {sorted(shapes)}; pass resize_to"
        )
    return ImageSet(
        images=np.stack(images),
        labels=np.array(labels, dtype=np.int64),
        category_names=tuple(categories),
        source_paths=tuple(paths),
    )


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def _largest_remainder(quotas: np.ndarray, total: int, low: np.ndarray,
                       high: np.ndarray) -> np.ndarray:
    """Integer allocation of `total` across categories with quota targets.

    Starts at floor(quota) clipped into [low, high] per category, then moves
    single units to reach `total`: additions go to the largest fractional
    remainders first, removals to the smallest, ties broken by category
    index. Raises if the bounds make `total` unreachable.
    """
    floors = np.floor(quotas).astype(np.int64)
    alloc = np.clip(floors, low, high)
    remainders = quotas - floors
    order_add = np.lexsort((np.arange(len(quotas)), -remainders))
    order_sub = np.lexsort((np.arange(len(quotas)), remainders))
    need = int(total - alloc.sum())
    while need != 0:
        if need > 0:
            movable = [i for i in order_add if alloc[i] < high[i]][:need]
        else:
            movable = [i for i in order_sub if alloc[i] > low[i]][:-need]
        if not movable:
            raise DatasetError("split scheme infeasible for per-category counts")
        for i in movable:
            alloc[i] += 1 if need > 0 else -1
        need = int(total - alloc.sum())
    return alloc


def _train_counts(scheme: SplitScheme, counts: np.ndarray) -> np.ndarray:
    """Per-category size of the training partition (learn + val)."""
    c = len(counts)
    if isinstance(scheme, FractionScheme):
        if not 0.0 < scheme.train_fraction < 1.0:
            raise DatasetError("train_fraction must lie strictly in (0, 1)")
        quotas = scheme.train_fraction * counts
        total = int(np.floor(quotas.sum() + 0.5))
        return _largest_remainder(quotas, total, np.ones(c, np.int64),
                                  counts - 1)
    if isinstance(scheme, PerCategoryScheme):
        if scheme.n_train < 1:
            raise DatasetError("n_train must be >= 1")
        if np.any(counts < scheme.n_train + 1):
            raise DatasetError(
                "per_category scheme needs n_train + 1 samples per category")
        return np.full(c, scheme.n_train, dtype=np.int64)
    if isinstance(scheme, FixedFirstKScheme):
        n_train = scheme.k_first + scheme.k_random
        if n_train < 1:
            raise DatasetError("k_first + k_random must be >= 1")
        if np.any(counts < n_train + 1):
            raise DatasetError(
                "fixed_first_k scheme needs k_first + k_random + 1 samples "
                "per category")
        return np.full(c, n_train, dtype=np.int64)
    raise DatasetError(f"unknown split scheme {scheme!r}")


def make_split(image_set: ImageSet, scheme: SplitScheme, seed: int) -> SplitPlan:
    """Draw a stratified learn/val/test split.

    Per category, training samples are drawn without replacement; the
    validation part is carved out of the training draw. Identical
    (seed, scheme, image_set) arguments reproduce the identical plan.
    """
    labels = image_set.labels
    c = image_set.n_categories
    counts = np.bincount(labels, minlength=c)
    train_counts = _train_counts(scheme, counts)

    vf = scheme.val_fraction_of_train
    if not 0.0 <= vf < 1.0:
        raise DatasetError("val_fraction_of_train must lie in [0, 1)")
    val_quotas = vf * train_counts
    val_total = int(np.floor(val_quotas.sum() + 0.5))
    val_counts = _largest_remainder(val_quotas, val_total,
                                    np.zeros(c, np.int64),
                                    np.maximum(train_counts - 1, 0))

    rng = np.random.default_rng(seed)
    learn: list[np.ndarray] = []
    val: list[np.ndarray] = []
    test: list[np.ndarray] = []
    for cat in range(c):
        members = np.flatnonzero(labels == cat)
        t = int(train_counts[cat])
        if isinstance(scheme, FixedFirstKScheme):
            first = members[: scheme.k_first]
            rest = members[scheme.k_first:]
            picked = rng.permutation(len(rest))[: scheme.k_random]
            train_part = np.concatenate([first, rest[np.sort(picked)]])
            test_part = np.delete(rest, np.sort(picked))
            # val drawn at random from within the training part
            train_part = train_part[rng.permutation(len(train_part))]
        else:
            perm = rng.permutation(len(members))
            train_part = members[perm[:t]]
            test_part = members[perm[t:]]
        v = int(val_counts[cat])
        val.append(train_part[:v])
        learn.append(train_part[v:])
        test.append(test_part)

    return SplitPlan(
        learn_idx=np.concatenate(learn),
        val_idx=np.concatenate(val),
        test_idx=np.concatenate(test),
        seed=int(seed),
        scheme=scheme,
    )
