"""Config parsing, presets, merge precedence, and round-tripping."""

import pytest

from biorec.config import (ArchitectureConfig, ChannelConfig,
                           ExperimentConfig, TrainingConfig, config_from_dict,
                           config_to_dict, deep_merge, default_channels,
                           load_config, preset_dict)
from biorec.dataset import (FixedFirstKScheme, FractionScheme,
                            PerCategoryScheme)
from biorec.errors import ConfigError
from biorec.features import HogConfig, LbpConfig
from biorec.preprocess import NormalizationMode


def minimal(**extra):
    d = {"data_dir": "/data", "channels": [{"kind": "pixels"}]}
    d.update(extra)
    return d


def test_minimal_config_gets_defaults():
    cfg = config_from_dict(minimal())
    assert cfg.out_dir == "biorec-out"
    assert cfg.seed == 1234 and cfg.n_splits == 10
    assert cfg.resize_to is None
    assert cfg.normalization == NormalizationMode("sn")
    assert cfg.split == PerCategoryScheme(5, val_fraction_of_train=0.1)
    assert cfg.architecture.mode == "search"
    assert cfg.training == TrainingConfig(max_epochs=300, patience=5)
    assert cfg.fusion == "sum_rule"


def test_faces_preset():
    cfg = config_from_dict({**preset_dict("faces"), "data_dir": "/data"})
    assert cfg.resize_to == (96, 96)
    assert tuple(ch.kind for ch in cfg.channels) == ("pixels", "lbp", "hog")
    assert cfg.channels[1].params == LbpConfig(p=8, r=1.0, grid=(6, 6))
    assert cfg.channels[2].params == HogConfig(cell=(8, 8))
    assert cfg.architecture.pcs_range == (1, 150)
    assert cfg.architecture.neurons_range == (20, 35)
    assert cfg.architecture.coarse_step == 1
    assert cfg.split == PerCategoryScheme(5, val_fraction_of_train=0.1)
    assert cfg.channels == default_channels(face_like=True)


def test_objects_preset():
    cfg = config_from_dict({**preset_dict("objects"), "data_dir": "/data"})
    assert cfg.resize_to == (128, 128)
    assert cfg.channels[1].params == LbpConfig(p=14, r=1.0, grid=(10, 10))
    assert cfg.channels[2].params == HogConfig(cell=(16, 16))
    assert cfg.architecture.pcs_range == (1, 50)
    assert cfg.architecture.neurons_range == (1, 100)
    assert cfg.channels == default_channels(face_like=False)


def test_large_preset_strides_and_refines():
    cfg = config_from_dict({**preset_dict("large"), "data_dir": "/data"})
    assert cfg.architecture.coarse_step == 5
    assert cfg.architecture.top_k == 10
    space = cfg.architecture.search_space()
    assert space.refine is True and space.pcs_step == 5


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        preset_dict("medium")


def test_search_space_refine_defaults():
    assert ArchitectureConfig().search_space().refine is False
    assert ArchitectureConfig(coarse_step=3).search_space().refine is True
    assert ArchitectureConfig(coarse_step=3,
                              refine=False).search_space().refine is False
    with pytest.raises(ConfigError):
        ArchitectureConfig(pcs_range=(0, 10)).search_space()


def test_load_config_precedence(tmp_path):
    cfg_file = tmp_path / "exp.yaml"
    cfg_file.write_text(
        "preset: faces\n"
        "data_dir: /data\n"
        "seed: 42\n"
        "architecture:\n"
        "  mode: fixed\n"
        "  n_pcs: 30\n"
        "  n_neurons: 25\n")
    cfg = load_config(cfg_file, overrides={"seed": 99})
    assert cfg.seed == 99                       # override beats file
    assert cfg.architecture.mode == "fixed"     # file beats preset
    assert cfg.architecture.n_pcs == (30,)      # scalar broadcasts later
    assert cfg.architecture.pcs_range == (1, 150)  # preset survives the merge
    assert cfg.resize_to == (96, 96)
    assert cfg.n_splits == 10


def test_load_config_preset_parameter(tmp_path):
    cfg = load_config(preset="objects", overrides={"data_dir": "/d"})
    assert cfg.resize_to == (128, 128)
    assert cfg.data_dir == "/d"


def test_load_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [unclosed\n")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_config(bad)
    listy = tmp_path / "list.yaml"
    listy.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="must be a mapping"):
        load_config(listy)


def test_deep_merge_is_recursive():
    base = {"a": {"x": 1, "y": 2}, "b": 3}
    override = {"a": {"y": 20}, "c": 4}
    assert deep_merge(base, override) == {"a": {"x": 1, "y": 20},
                                          "b": 3, "c": 4}
    # non-dict values replace wholesale
    assert deep_merge({"a": [1, 2]}, {"a": [3]}) == {"a": [3]}


def test_round_trip_representative_configs():
    samples = [
        config_from_dict({**preset_dict("faces"), "data_dir": "/data"}),
        ExperimentConfig(
            data_dir="/other", out_dir="out", seed=7, n_splits=3,
            normalization=NormalizationMode("ln", ln_window=9),
            split=FractionScheme(0.6, val_fraction_of_train=0.2),
            channels=(ChannelConfig("pixels"),),
            architecture=ArchitectureConfig(mode="fixed", n_pcs=(12,),
                                            n_neurons=(8,)),
            training=TrainingConfig(max_epochs=50, patience=3),
            fusion="fpt"),
        ExperimentConfig(
            data_dir="/third", seed=5, n_splits=2,
            normalization=NormalizationMode("none"),
            split=FixedFirstKScheme(3, 2, val_fraction_of_train=0.0),
            channels=default_channels(face_like=False),
            architecture=ArchitectureConfig(coarse_step=4, refine=True,
                                            top_k=2),
            fusion="fnpt"),
    ]
    for cfg in samples:
        assert config_from_dict(config_to_dict(cfg)) == cfg


def test_normalization_string_shorthand():
    cfg = config_from_dict(minimal(normalization="ln"))
    assert cfg.normalization == NormalizationMode("ln", ln_window=7)
    with pytest.raises(ConfigError, match="normalization"):
        config_from_dict(minimal(normalization="zscore"))
    with pytest.raises(ConfigError, match="normalization"):
        config_from_dict(minimal(normalization={"variant": "ln",
                                                "ln_window": 4}))


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="mystery"):
        config_from_dict(minimal(mystery=1))


def test_required_keys():
    with pytest.raises(ConfigError, match="data_dir"):
        config_from_dict({"channels": [{"kind": "pixels"}]})
    with pytest.raises(ConfigError, match="channels"):
        config_from_dict({"data_dir": "/data"})


def test_fusion_validation():
    with pytest.raises(ConfigError, match="fusion"):
        config_from_dict(minimal(fusion="mean"))


def test_fixed_architecture_needs_sizes():
    with pytest.raises(ConfigError, match="fixed architecture"):
        config_from_dict(minimal(architecture={"mode": "fixed"}))
    with pytest.raises(ConfigError, match="mode"):
        ArchitectureConfig(mode="random")


def test_size_list_length_must_match_channels():
    d = {**preset_dict("faces"), "data_dir": "/data",
         "architecture": {"mode": "fixed", "n_pcs": [10, 20],
                          "n_neurons": [5, 5, 5]}}
    with pytest.raises(ConfigError, match="n_pcs"):
        config_from_dict(d)


def test_channel_parsing_errors():
    with pytest.raises(ConfigError, match="channel"):
        config_from_dict(minimal(channels=[{"kind": "gabor"}]))
    with pytest.raises(ConfigError, match=r"channels\[0\]"):
        config_from_dict(minimal(channels=[{"kind": "lbp", "p": 3}]))
    with pytest.raises(ConfigError, match=r"channels\[0\]"):
        config_from_dict(minimal(channels=[{"kind": "hog", "cell": [1, 8]}]))
    with pytest.raises(ConfigError):
        ChannelConfig("lbp", params=None)
    with pytest.raises(ConfigError):
        ChannelConfig("pixels", params=LbpConfig())


def test_training_and_split_validation():
    with pytest.raises(ConfigError, match="max_epochs"):
        config_from_dict(minimal(training={"max_epochs": 0}))
    with pytest.raises(ConfigError, match="patience"):
        config_from_dict(minimal(training={"max_epochs": 10, "patience": 0}))
    with pytest.raises(ConfigError, match="n_splits"):
        config_from_dict(minimal(n_splits=0))
    with pytest.raises(ConfigError, match="split"):
        config_from_dict(minimal(split={"scheme": "leave_one_out"}))
    with pytest.raises(ConfigError, match="split"):
        config_from_dict(minimal(split={"scheme": "per_category"}))


def test_resize_must_be_a_pair():
    with pytest.raises(ConfigError, match="resize_to"):
        config_from_dict(minimal(resize_to=[96]))
    cfg = config_from_dict(minimal(resize_to=[64, 48]))
    assert cfg.resize_to == (64, 48)
