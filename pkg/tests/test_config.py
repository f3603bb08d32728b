"""Layered run configuration."""

import pytest
import yaml

from skin.baselines import head_tail_input
from skin.config import ConfigManager, RunConfig, deep_merge, write_run_config
from skin.errors import ConfigurationError
from skin.textio import segment_document


@pytest.fixture
def manager(monkeypatch):
    monkeypatch.delenv("SKIN_PRESET", raising=False)
    return ConfigManager()


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def test_defaults_match_desk_preset(manager):
    config = manager.load()
    assert config.preset == "desk"
    assert config.seed == 7
    assert (config.data.n, config.data.l) == (8, 32)
    assert config.train.smoothing == pytest.approx(0.2)
    assert config.bench.lengths == [128, 256, 512, 1024, 2048]


def test_deep_merge_keeps_siblings():
    base = {"train": {"lr_stage1": 1e-4, "epochs_stage1": 20}, "seed": 7}
    merged = deep_merge(base, {"train": {"epochs_stage1": 2}})
    assert merged == {"train": {"lr_stage1": 1e-4, "epochs_stage1": 2}, "seed": 7}
    assert base["train"]["epochs_stage1"] == 20


def test_unknown_key_rejected(manager, tmp_path):
    user = write_yaml(tmp_path / "user.yaml", {"train": {"learning_rate": 0.1}})
    with pytest.raises(ConfigurationError, match="unknown key 'train.learning_rate'"):
        manager.load(user_file=user)


def test_bad_type_rejected(manager):
    with pytest.raises(ConfigurationError, match="data.n"):
        manager.load(overrides={"data": {"n": "many"}})


def test_unknown_preset(manager):
    with pytest.raises(ConfigurationError, match="unknown preset 'huge'"):
        manager.load(preset="huge")


def test_missing_and_malformed_files(manager, tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        manager.load(user_file=tmp_path / "nope.yaml")
    broken = tmp_path / "broken.yaml"
    broken.write_text("train: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="invalid YAML"):
        manager.load(user_file=broken)
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="mapping"):
        manager.load(user_file=listing)


def test_empty_user_file_is_ignored(manager, tmp_path):
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    assert manager.load(user_file=empty) == manager.load()


def test_preset_priority(manager, tmp_path, monkeypatch):
    desk_file = write_yaml(tmp_path / "desk.yaml", {"preset": "desk"})
    full_file = write_yaml(tmp_path / "full.yaml", {"preset": "full"})

    monkeypatch.setenv("SKIN_PRESET", "full")
    assert manager.load().preset == "full"
    assert manager.load().data.l == 128
    assert manager.load(user_file=desk_file).preset == "desk"

    monkeypatch.setenv("SKIN_PRESET", "desk")
    assert manager.load(user_file=full_file).preset == "full"
    assert manager.load(preset="desk", user_file=full_file).preset == "desk"


def test_overrides_beat_user_file(manager, tmp_path):
    user = write_yaml(tmp_path / "user.yaml", {"seed": 3, "train": {"epochs_stage1": 4}})
    config = manager.load(user_file=user, overrides={"seed": 11})
    assert config.seed == 11
    assert config.train.epochs_stage1 == 4


def test_run_config_roundtrip(manager, tmp_path):
    config = manager.load(overrides={"seed": 11, "data": {"n": 4, "l": 16}, "train": {"r_l2": 3e-5}})
    path = write_run_config(config, tmp_path)
    assert path.name == "run_config.yaml"
    reloaded = manager.load(user_file=path)
    assert reloaded == config
    assert write_run_config(reloaded, tmp_path / "again").read_bytes() == path.read_bytes()


def test_derived_lengths_desk():
    config = RunConfig()
    assert config.truncate_cap() == 256
    assert config.head_tail_len() == 128
    assert config.required_max_len() == 259


def test_derived_lengths_full(manager):
    config = manager.load(preset="full")
    assert config.truncate_cap() == 512
    assert config.head_tail_len() == 128
    assert config.required_max_len() == 514
    doc = segment_document(list(range(4, 2052)), n=config.data.n, l=config.data.l, label=0)
    assert head_tail_input(doc, config.head_tail_len()).size == 257


def test_explicit_baseline_caps(manager):
    config = manager.load(overrides={"baselines": {"truncate_cap": 20, "head_tail_len": 6}})
    assert config.truncate_cap() == 20
    assert config.head_tail_len() == 6
    # key input l + l/2 + 2 dominates
    assert config.required_max_len() == 50


def test_encoder_configs_follow_preset_and_overrides(manager):
    config = manager.load(overrides={"encoder": {"strong": {"layers": 1}}})
    lite, strong = config.encoder_configs(vocab_size=123)
    assert (lite.layers, lite.dim, lite.heads) == (2, 32, 2)
    assert (strong.layers, strong.dim) == (1, 64)
    assert lite.vocab_size == strong.vocab_size == 123
    assert lite.max_len == strong.max_len == 259
    assert strong.dropout == pytest.approx(0.3)


def test_bench_encoders_fit_length_limit(manager):
    lite, strong = manager.load().bench_encoder_configs()
    assert lite.max_len == strong.max_len == 514
    assert strong.vocab_size == 1000


def test_domain_configs_carry_seed(manager):
    config = manager.load(overrides={"seed": 21})
    assert config.train_config().seed == 21
    assert config.bench_config().seed == 21
    spec = config.synth_spec()
    assert (spec.seed, spec.n, spec.l, spec.num_docs) == (21, 8, 32, 2000)


def test_synth_spec_validates_geometry(manager):
    config = manager.load(overrides={"data": {"l": 30}})
    with pytest.raises(ConfigurationError, match="divisible by 4"):
        config.synth_spec()
