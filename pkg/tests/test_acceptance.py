"""Acceptance gate: one test per shipped guarantee, pinned tolerances.

Criteria 1-4 replay the published face-corpus protocols and need the real
corpora on disk; point BIOREC_DATA_DIR at a directory holding att/, jaffe/
and yale/ subtrees (one subdirectory per category, images in PGM/PNG/JPG/
BMP). Without the data those tests skip; they never fake a green run.
Everything else is self-contained and runs everywhere.
"""

import os
from pathlib import Path

import numpy as np
import pytest

import test_features as oracles
from biorec.config import (ArchitectureConfig, ChannelConfig,
                           ExperimentConfig, TrainingConfig, config_from_dict,
                           preset_dict)
from biorec.dataset import ImageSet, PerCategoryScheme, make_split
from biorec.features import (HogConfig, LbpConfig, hog_descriptor,
                             lbp_code_image, lbp_descriptor)
from biorec.fusion import build_fhn, decide, fuse_sum, train_fhn
from biorec.mlp import MlpArch, init_weights
from biorec.modelsearch import SearchSpace, grid_search
from biorec.pca import fit_pca
from biorec.pipeline import (bundle_to_arrays, load_bundle, run_experiment,
                             save_bundle, write_results)
from biorec.preprocess import NormalizationMode
from biorec.seeds import derive_seed
from conftest import build_image_set
from test_mlp import numeric_gradient
from test_modelsearch import separable_sets


def report(line):
    print(line, flush=True)


# ---------------------------------------------------------------------------
# criteria 1-4: published face protocols (need the corpora on disk)
# ---------------------------------------------------------------------------

def gated_corpus(name: str, criterion: int) -> str:
    root = os.environ.get("BIOREC_DATA_DIR")
    if not root:
        pytest.skip(
            f"criterion {criterion} needs the {name} corpus; set "
            "BIOREC_DATA_DIR to a directory with an "
            f"{name}/ subtree (one directory per category). The corpora "
            "cannot be downloaded in this sandbox.")
    path = Path(root) / name
    if not path.is_dir():
        pytest.skip(f"criterion {criterion}: {path} not found")
    return str(path)


def faces_protocol(data_dir, n_train, *, seed=1234, neurons=None,
                   n_splits=10):
    d = preset_dict("faces")
    d["data_dir"] = data_dir
    d["split"] = {"scheme": "per_category", "n_train": n_train,
                  "val_fraction_of_train": 0.1}
    d["n_splits"] = n_splits
    d["seed"] = seed
    # strided coarse pass plus refinement keeps the search inside the
    # runtime budget without giving up the exhaustive neighborhood
    d["architecture"] = {"mode": "search", "pcs_range": [1, 150],
                         "neurons_range": list(neurons or [20, 35]),
                         "coarse_step": 5, "refine": True, "top_k": 10}
    return config_from_dict(d)


def best_accuracy(result):
    return max(m.accuracy for m in result.split_metrics)


def test_criterion_01_att_five_train_sum_rule():
    data = gated_corpus("att", 1)
    result = run_experiment(faces_protocol(data, n_train=5))
    best = best_accuracy(result)
    assert best >= 0.95, f"best accuracy {best:.4f} < 0.95"
    assert result.runtime_seconds <= 15 * 60, (
        f"runtime {result.runtime_seconds:.0f}s > 15 min")
    report(f"PASS criterion 1: sum-rule best accuracy {best:.4f} >= 0.95 "
           f"in {result.runtime_seconds:.0f}s")


def test_criterion_02_att_nine_train_mean():
    data = gated_corpus("att", 2)
    result = run_experiment(faces_protocol(data, n_train=9))
    mean = result.aggregate["accuracy"][0]
    assert mean >= 0.98, f"mean accuracy {mean:.4f} < 0.98"
    report(f"PASS criterion 2: 9-train mean accuracy {mean:.4f} >= 0.98")


def test_criterion_03_jaffe_twenty_hidden():
    data = gated_corpus("jaffe", 3)
    result = run_experiment(
        faces_protocol(data, n_train=8, neurons=[20, 20]))
    best = best_accuracy(result)
    assert best >= 0.98, f"best accuracy {best:.4f} < 0.98"
    report(f"PASS criterion 3: 20-neuron best accuracy {best:.4f} >= 0.98")


def test_criterion_04_yale_cropped():
    data = gated_corpus("yale", 4)
    result = run_experiment(faces_protocol(data, n_train=8))
    best = best_accuracy(result)
    assert best >= 0.94, f"best accuracy {best:.4f} < 0.94"
    report(f"PASS criterion 4: cropped-corpus best accuracy {best:.4f} "
           ">= 0.94")


def test_criterion_05_large_corpus_recipes_informational():
    pytest.skip("criterion 5: large-corpus rows are informational, not "
                "gating; the `large` preset and the objects preset are the "
                "shipped recipes (see README)")


# ---------------------------------------------------------------------------
# criterion 6: analytic gradient vs central finite differences
# ---------------------------------------------------------------------------

def test_criterion_06_gradient_matches_finite_differences():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(20):
        arch = MlpArch(
            n_in=int(rng.integers(1, 9)),
            n_hidden=int(rng.choice([1, 2, 5, 12, 20, 35])),
            n_out=int(rng.integers(2, 6)),
            hidden="identity" if trial % 5 == 4 else "tanh",
            loss="squared_error" if trial % 2 else "cross_entropy")
        m = int(rng.integers(2, 8))
        x = rng.normal(size=(m, arch.n_in))
        if arch.loss == "cross_entropy":
            targets = rng.integers(0, arch.n_out, size=m)
        else:
            targets = rng.normal(size=(m, arch.n_out))
        w = arch.init_flat(int(rng.integers(0, 2**31))) * 1.5
        _, analytic = arch.loss_and_gradient(w, x, targets)
        numeric = numeric_gradient(arch, w, x, targets)
        scale = np.maximum(1.0, np.maximum(np.abs(analytic),
                                           np.abs(numeric)))
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / scale)))
    assert worst < 1e-5, f"worst relative gradient error {worst:.3e}"
    report(f"PASS criterion 6: max relative gradient error {worst:.3e} "
           "< 1e-5 over 20 random configurations")


# ---------------------------------------------------------------------------
# criterion 7: subspace model internals
# ---------------------------------------------------------------------------

def test_criterion_07_pca_internals():
    rng = np.random.default_rng(77)
    data = rng.normal(size=(40, 25)) @ rng.normal(size=(25, 25)) + 3.0

    model = fit_pca(data, 20)
    gram = model.basis.T @ model.basis
    ortho = float(np.max(np.abs(gram - np.eye(model.n_components))))
    assert ortho < 1e-8, f"orthonormality defect {ortho:.3e}"

    z = (data - model.mean) / model.scale
    trace = float(np.trace((z.T @ z) / data.shape[0]))
    eigsum = float(np.sum(model.spectrum))
    rel = abs(eigsum - trace) / trace
    assert rel < 1e-6, f"eigenvalue sum off the covariance trace by {rel:.3e}"

    wide = rng.normal(size=(12, 30))
    via_gram = fit_pca(wide, 8, method="gram")
    via_direct = fit_pca(wide, 8, method="direct")
    signs = np.sign(np.sum(via_gram.basis * via_direct.basis, axis=0))
    assert np.allclose(via_gram.basis, via_direct.basis * signs, atol=1e-8)
    assert np.allclose(via_gram.transform(wide),
                       via_direct.transform(wide) * signs, atol=1e-8)
    report(f"PASS criterion 7: orthonormality {ortho:.3e} < 1e-8, trace "
           f"agreement {rel:.3e} < 1e-6, sample-space and direct routes "
           "agree up to sign")


# ---------------------------------------------------------------------------
# criterion 8: descriptor lengths and invariances
# ---------------------------------------------------------------------------

def test_criterion_08_descriptor_oracles():
    face_lbp = LbpConfig(p=8, r=1.0, grid=(6, 6))
    object_lbp = LbpConfig(p=14, r=1.0, grid=(10, 10))
    face_hog = HogConfig(cell=(8, 8))
    assert face_lbp.descriptor_length == 2124
    assert object_lbp.descriptor_length == 18500
    assert face_hog.descriptor_length((96, 96)) == 4356

    rng = np.random.default_rng(88)
    face = rng.uniform(size=(96, 96))
    descriptor = lbp_descriptor(face, face_lbp)
    assert descriptor.shape == (2124,)
    assert float(descriptor.sum()) == 94 * 94  # one vote per interior pixel

    # monotone intensity maps: arbitrary remapping where the samples sit
    # on pixels, affine maps where they are interpolated
    indices = np.round(rng.uniform(size=(24, 24)) * 255).astype(int)
    quantized = indices / 255.0
    pixel_cfg = LbpConfig(p=4, r=1.0, grid=(2, 2))
    levels = np.sort(rng.uniform(size=256))  # strictly increasing map
    assert np.array_equal(lbp_descriptor(levels[indices], pixel_cfg),
                          lbp_descriptor(quantized, pixel_cfg))
    affine = 1.75 * face + 0.375
    assert np.array_equal(lbp_descriptor(affine, face_lbp), descriptor)

    # exact equality needs exact pixel arithmetic: on 1/64-grid values
    # the +0.25 offset is lossless, so the gradients are bit-identical
    dyadic = rng.integers(0, 49, size=(96, 96)) / 64.0
    assert np.array_equal(hog_descriptor(dyadic + 0.25, face_hog),
                          hog_descriptor(dyadic, face_hog))
    assert np.allclose(hog_descriptor(face + 0.25, face_hog),
                       hog_descriptor(face, face_hog), rtol=1e-9, atol=1e-12)
    report("PASS criterion 8: lengths 2124/18500/4356, histogram mass = "
           "interior pixels, monotone-map and brightness-offset invariance")


# ---------------------------------------------------------------------------
# criterion 9: decision fusion
# ---------------------------------------------------------------------------

def test_criterion_09_fusion_rules():
    rng = np.random.default_rng(99)
    outputs = [rng.uniform(size=(5, 9)) for _ in range(3)]
    assert np.allclose(fuse_sum(outputs), outputs[0] + outputs[1] + outputs[2],
                       atol=1e-15)
    assert np.allclose(fuse_sum(outputs),
                       fuse_sum([outputs[2], outputs[0], outputs[1]]),
                       atol=1e-12)
    assert decide(np.array([[0.4, 0.1], [0.4, 0.6], [0.2, 0.3]])).tolist() \
        == [0, 1]

    sizes = ((4, 6), (3, 5), (5, 4))
    members = [init_weights(n_in, n_h, 3, seed=k)
               for k, (n_in, n_h) in enumerate(sizes)]
    fpt = build_fhn(members, "fpt")
    blocks = [rng.normal(size=(8, n_in)) for n_in, _ in sizes]
    member_sum = sum(m.logits(b) for m, b in zip(members, blocks))
    gap = float(np.max(np.abs(fpt.logits(np.hstack(blocks)) - member_sum)))
    assert gap <= 1e-12, f"fused logit gap {gap:.3e}"

    labels = np.arange(30) % 3
    x = np.hstack([np.random.default_rng(5).normal(size=(3, n))[labels]
                   + 0.1 * rng.normal(size=(30, n)) for n, _ in sizes])
    fnpt = build_fhn(members, "fnpt", seed=17)
    trained, _ = train_fhn(fnpt, (x[:20], labels[:20]), (x[20:], labels[20:]),
                           max_epochs=50)
    frozen = trained.mask == 0.0
    assert np.all(trained.net.weights[frozen] == 0.0)
    report(f"PASS criterion 9: sum rule additive and order-free, fused "
           f"logits within {gap:.1e} of member sum, sparsity mask intact "
           "after training")


# ---------------------------------------------------------------------------
# criterion 10: architecture search
# ---------------------------------------------------------------------------

def test_criterion_10_grid_search_contract():
    learn, val = separable_sets()
    space = SearchSpace(pcs=(1, 2), neurons=(1, 2))
    result = grid_search(learn, val, 2, space, seed=11, max_epochs=80)
    assert all(p.val_accuracy == 1.0 for p in result.leaderboard)
    assert (result.best.n_pcs, result.best.n_neurons) == (1, 1)

    again = grid_search(learn, val, 2, space, seed=11, max_epochs=80)
    assert [(p.n_pcs, p.n_neurons, p.val_accuracy) for p in result.leaderboard] \
        == [(p.n_pcs, p.n_neurons, p.val_accuracy) for p in again.leaderboard]

    (fl, ll), (fv, lv) = separable_sets(seed=9, d=8)
    rng = np.random.default_rng(99)
    fl = fl + rng.normal(scale=2.5, size=fl.shape)
    fv = fv + rng.normal(scale=2.5, size=fv.shape)
    coarse_space = SearchSpace(pcs=(1, 7), neurons=(1, 7), pcs_step=3,
                               neurons_step=3)
    refined_space = SearchSpace(pcs=(1, 7), neurons=(1, 7), pcs_step=3,
                                neurons_step=3, refine=True, top_k=3)
    coarse = grid_search((fl, ll), (fv, lv), 2, coarse_space, seed=21,
                         max_epochs=40)
    refined = grid_search((fl, ll), (fv, lv), 2, refined_space, seed=21,
                          max_epochs=40)
    assert refined.best_val_accuracy >= coarse.best_val_accuracy
    report("PASS criterion 10: ties prefer the smallest model, the search "
           "is deterministic, and refinement never falls below the coarse "
           "best")


# ---------------------------------------------------------------------------
# criterion 11: end-to-end conduct
# ---------------------------------------------------------------------------

def tiny_config(data_dir, n_splits=1):
    return ExperimentConfig(
        data_dir=str(data_dir), seed=501, n_splits=n_splits,
        normalization=NormalizationMode("sn"),
        split=PerCategoryScheme(6, val_fraction_of_train=0.2),
        channels=(ChannelConfig("pixels"),
                  ChannelConfig("lbp", LbpConfig(p=8, r=1.0, grid=(2, 2))),
                  ChannelConfig("hog", HogConfig(cell=(4, 4)))),
        architecture=ArchitectureConfig(mode="fixed", n_pcs=(10,),
                                        n_neurons=(8,)),
        training=TrainingConfig(max_epochs=50, patience=5),
        fusion="sum_rule")


def test_criterion_11_no_leakage_determinism_round_trip(tmp_path):
    cfg = tiny_config(tmp_path)
    set_a = build_image_set()
    plan = make_split(set_a, cfg.split, derive_seed(cfg.seed, "split", "0"))
    images_b = set_a.images.copy()
    images_b[plan.test_idx] = np.random.default_rng(404).uniform(
        size=images_b[plan.test_idx].shape)
    set_b = ImageSet(images=images_b, labels=set_a.labels,
                     category_names=set_a.category_names)
    arrays_a = bundle_to_arrays(run_experiment(cfg, image_set=set_a).model)
    arrays_b = bundle_to_arrays(run_experiment(cfg, image_set=set_b).model)
    for key in arrays_a:
        assert np.array_equal(arrays_a[key], arrays_b[key]), (
            f"test images leaked into {key}")

    two_splits = tiny_config(tmp_path, n_splits=2)
    first = write_results(run_experiment(two_splits, image_set=set_a),
                          tmp_path / "first")
    second = write_results(run_experiment(two_splits, image_set=set_a),
                           tmp_path / "second")
    assert Path(first["metrics"]).read_bytes() \
        == Path(second["metrics"]).read_bytes()

    result = run_experiment(cfg, image_set=set_a)
    save_bundle(result.model, tmp_path / "model.biorec")
    loaded = load_bundle(tmp_path / "model.biorec")
    probe = set_a.images[::3]
    assert np.array_equal(loaded.predict_scores(probe),
                          result.model.predict_scores(probe))
    report("PASS criterion 11: held-out pixels never reach the fit, a seed "
           "pins metrics byte-for-byte, and a reloaded bundle predicts "
           "identically")


# ---------------------------------------------------------------------------
# criterion 12: brute-force descriptor oracles
# ---------------------------------------------------------------------------

def test_criterion_12_brute_force_descriptor_equivalence():
    rng = np.random.default_rng(1212)
    lbp_cfg = LbpConfig(p=8, r=1.0, grid=(1, 1))
    hog_cfg = HogConfig(cell=(2, 2))
    for _ in range(8):
        image = rng.uniform(size=(8, 8))
        ref_codes = np.array([[oracles.ref_lbp_code(image, y, x, 8, 1.0)
                               for x in range(1, 7)] for y in range(1, 7)])
        assert np.array_equal(lbp_code_image(image, 8, 1.0), ref_codes)
        assert np.array_equal(lbp_descriptor(image, lbp_cfg),
                              oracles.ref_lbp_descriptor(image, lbp_cfg))
        assert np.array_equal(hog_descriptor(image, hog_cfg),
                              oracles.ref_hog_descriptor(image, hog_cfg))
    report("PASS criterion 12: pixel-by-pixel reimplementations reproduce "
           "both descriptors exactly on random 8x8 images")
