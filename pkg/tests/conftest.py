"""Shared helpers: small synthetic corpora the whole suite trains on.

Each category gets one random base pattern; samples are the pattern plus
mild pixel noise, so tiny networks separate the categories quickly and
tests stay fast.
"""

import numpy as np
import pytest
from PIL import Image

from biorec.dataset import ImageSet


def build_image_set(n_categories=4, per_category=10, hw=(16, 16), seed=7,
                    noise=0.05):
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for cat in range(n_categories):
        base = rng.uniform(0.2, 0.8, size=hw)
        for _ in range(per_category):
            img = base + rng.normal(0.0, noise, size=hw)
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(cat)
    return ImageSet(
        images=np.stack(images),
        labels=np.array(labels, dtype=np.int64),
        category_names=tuple(f"cat{c}" for c in range(n_categories)),
    )


def write_png_tree(root, image_set, names=None):
    """Materialize an ImageSet as <root>/<category>/imgNNN.png files."""
    names = names or image_set.category_names
    counters = {}
    for img, label in zip(image_set.images, image_set.labels):
        cat_dir = root / names[label]
        cat_dir.mkdir(parents=True, exist_ok=True)
        i = counters.get(label, 0)
        counters[label] = i + 1
        arr = np.round(np.asarray(img) * 255.0).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(cat_dir / f"img{i:03d}.png")


@pytest.fixture
def image_set():
    return build_image_set()


@pytest.fixture
def dataset_dir(tmp_path, image_set):
    root = tmp_path / "data"
    write_png_tree(root, image_set)
    return root
