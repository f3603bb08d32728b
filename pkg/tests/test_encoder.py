"""Transformer encoder forward/backward, pooling, cost model and checkpoints."""

import numpy as np
import pytest

from skin.encoder import (
    EncoderParams, attention_cost, checkpoint_exists, encode, forward_encoder,
    load_checkpoint, pool, preset_config, record_encoder_calls, save_checkpoint,
    with_overrides,
)
from skin.errors import (
    CheckpointError, CheckpointMismatchError, ConfigurationError, SequenceLengthError, VocabError,
)
from skin.ndtensor import Tensor, grad_check

from .conftest import toy_config


def test_config_rejects_indivisible_heads():
    with pytest.raises(ConfigurationError):
        toy_config(dim=10, heads=4)


def test_presets_and_overrides():
    lite = preset_config("desk", "lite", vocab_size=100, max_len=50)
    assert (lite.layers, lite.dim, lite.heads, lite.ff_dim) == (2, 32, 2, 64)
    strong = preset_config("full", "strong", vocab_size=100)
    assert (strong.layers, strong.dim, strong.heads) == (12, 768, 12)
    assert with_overrides(lite, layers=1).layers == 1
    with pytest.raises(ConfigurationError):
        with_overrides(lite, heads=3)
    with pytest.raises(ConfigurationError):
        preset_config("huge", "lite", vocab_size=100)


def test_encode_shape_and_determinism(rng):
    config = toy_config(layers=2)
    params = EncoderParams.initialize(config, rng)
    ids = rng.integers(0, config.vocab_size, size=10)
    first = encode(ids, params)
    assert first.shape == (10, config.dim)
    assert np.array_equal(first.data, encode(ids, params).data)


def test_encode_is_position_aware(rng):
    params = EncoderParams.initialize(toy_config(), np.random.default_rng(0))
    ids = np.array([5, 6, 7, 8, 9])
    permuted = ids[[4, 3, 2, 1, 0]]
    assert not np.allclose(encode(ids, params).data, encode(permuted, params).data)


def test_encode_errors(rng):
    config = toy_config(max_len=6)
    params = EncoderParams.initialize(config, rng)
    with pytest.raises(VocabError):
        encode([1, config.vocab_size], params)
    with pytest.raises(SequenceLengthError):
        encode(np.ones(7, dtype=np.int64), params)


def test_train_mode_dropout_uses_rng():
    config = toy_config(dropout=0.3)
    params = EncoderParams.initialize(config, np.random.default_rng(0))
    ids = np.arange(4, 12)
    a = encode(ids, params, train_mode=True, rng=np.random.default_rng(1)).data
    b = encode(ids, params, train_mode=True, rng=np.random.default_rng(1)).data
    c = encode(ids, params, train_mode=False).data
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_embedding_gradient_matches_finite_differences():
    config = toy_config(layers=2, dim=8, heads=2, max_len=6, vocab_size=12)
    params = EncoderParams.initialize(config, np.random.default_rng(3))
    ids = np.random.default_rng(4).integers(0, 12, size=(1, 6))
    weights = np.random.default_rng(5).normal(size=(1, 6, 8))
    table = params["tok_emb.weight"]

    def f():
        trace = forward_encoder(ids, params)
        return float((weights * trace.output.data).sum()), lambda: trace.backward(weights)
    assert grad_check(f, [table]) < 1e-4


def test_block_weight_gradients(rng):
    config = toy_config(layers=1, dim=4, heads=2, max_len=5, vocab_size=10)
    params = EncoderParams.initialize(config, np.random.default_rng(6))
    ids = np.array([[1, 4, 5, 9, 3], [2, 2, 7, 8, 3]])
    keep = np.array([[True] * 5, [True, True, True, False, False]])
    weights = rng.normal(size=(2, 5, 4))
    chosen = [params["layers.0.attn.q.weight"], params["layers.0.ff1.weight"], params["layers.0.ln2.gain"]]

    def f():
        trace = forward_encoder(ids, params, keep=keep)
        return float((weights * trace.output.data).sum()), lambda: trace.backward(weights)
    assert grad_check(f, chosen) < 1e-4


def test_pool_examples():
    assert np.array_equal(pool(Tensor([[1.0, 2.0, 3.0]])).data, [1.0, 2.0, 3.0])
    assert np.allclose(pool(Tensor([[1.0, -2.0], [-1.0, 2.0]])).data, [0.0, 0.0])
    x = np.random.default_rng(7).normal(size=(5, 3))
    assert np.allclose(pool(Tensor(x)).data, x.mean(axis=0), atol=1e-12)


def test_attention_cost():
    config = toy_config(layers=12, heads=1, dim=8)
    assert attention_cost(config, 512).quadratic == 3_145_728
    for length in (1, 7, 100, 513):
        assert attention_cost(config, 2 * length).quadratic == 4 * attention_cost(config, length).quadratic
    assert attention_cost(toy_config(layers=0), 64).quadratic == 0
    assert attention_cost(config, 10).linear == 12 * 8 * 10


def test_record_encoder_calls(rng):
    params = EncoderParams.initialize(toy_config(), rng)
    with record_encoder_calls() as calls:
        forward_encoder(np.ones((3, 6), dtype=np.int64), params)
    assert [(c.encoder, c.batch, c.length) for c in calls] == [("toy", 3, 6)]


def test_checkpoint_roundtrip_is_bit_exact(tmp_path, rng):
    arrays = {"a.weight": rng.normal(size=(3, 4)), "b": np.array([np.pi, -0.0, 1e-300])}
    save_checkpoint(tmp_path / "model", "prc", arrays, {"note": "x"})
    assert checkpoint_exists(tmp_path / "model")
    manifest, loaded = load_checkpoint(tmp_path / "model", expected_kind="prc")
    assert manifest["note"] == "x"
    assert manifest["shapes"]["a.weight"] == [3, 4]
    for name, value in arrays.items():
        assert loaded[name].tobytes() == value.tobytes()


def test_checkpoint_bytes_are_reproducible(tmp_path, rng):
    arrays = {"w": rng.normal(size=(2, 2))}
    save_checkpoint(tmp_path / "one", "prc", arrays)
    save_checkpoint(tmp_path / "two", "prc", arrays)
    assert (tmp_path / "one.npz").read_bytes() == (tmp_path / "two.npz").read_bytes()


def test_checkpoint_errors(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent")
    save_checkpoint(tmp_path / "model", "prc", {"w": np.zeros(2)})
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(tmp_path / "model", expected_kind="skin")
