"""Losses, metrics and the three training stages."""

import csv

import numpy as np
import pytest

from skin.baselines import BaselineKind, BaselineParams, predict_baseline
from skin.config import ConfigManager
from skin.encoder import checkpoint_exists
from skin.errors import ConfigurationError, EmptyInputError, ValidationError
from skin.model import SkinParams, load_skin, predict_prc, predict_skin, selection_records
from skin.ndtensor import Tensor, grad_check, ops
from skin.textio import SynthSpec, split_train_test, synth_generate, synth_vocab
from skin.training import (
    EpochRecord, TrainConfig, distill_dataset, distilled_from_records, evaluate,
    evaluate_predictions, is_regularized, l2_penalty, report_from_confusion,
    selection_accuracy, smooth_labels, train_baseline, train_stage1, train_stage3,
    write_training_log,
)

from .conftest import toy_config


def fast_config(**changes) -> TrainConfig:
    settings = dict(
        r_l2=1e-5, smoothing=0.2, lr_stage1=1e-2, lr_stage3=1e-2, batch_size=8,
        epochs_stage1=6, epochs_stage3=3, epochs_baseline=3, patience=10, seed=3,
    )
    settings.update(changes)
    return TrainConfig(**settings)


def fresh_params(seed: int = 0) -> SkinParams:
    return SkinParams.initialize(
        toy_config("lite", dim=4, heads=1), toy_config("strong", dim=8, heads=2),
        num_classes=3, rng=np.random.default_rng(seed),
    )


# =============================================================================
# Losses
# =============================================================================

def test_smooth_labels_literal_rule():
    assert smooth_labels(0, 3, 0.2).data.tolist() == pytest.approx([0.8, 0.2, 0.2])
    assert smooth_labels(1, 2, 0.2).data.tolist() == pytest.approx([0.2, 0.8])
    assert smooth_labels(2, 4, 0.0).data.tolist() == [0.0, 0.0, 1.0, 0.0]


def test_smooth_labels_sum_identity():
    for num_classes in (2, 3, 5, 9):
        for gamma in (0.0, 0.1, 0.2, 0.45):
            total = smooth_labels(0, num_classes, gamma).data.sum()
            assert total == pytest.approx(1 + (num_classes - 2) * gamma, abs=1e-12)


def test_smooth_labels_normalized_variant():
    target = smooth_labels(0, 4, 0.2, normalize=True).data
    assert target.sum() == pytest.approx(1.0)
    assert target[0] == pytest.approx(0.85)


def test_smooth_labels_errors():
    with pytest.raises(ValidationError):
        smooth_labels(3, 3, 0.2)
    with pytest.raises(ConfigurationError):
        smooth_labels(0, 3, 0.5)


def test_unsmoothed_loss_is_plain_cross_entropy():
    pred = Tensor([0.2, 0.5, 0.3])
    assert ops.cross_entropy(pred, smooth_labels(1, 3, 0.0)) == pytest.approx(-np.log(0.5), abs=1e-12)


def test_l2_penalty_examples():
    params = {"w.weight": Tensor([3.0, 4.0]), "w.bias": Tensor([10.0])}
    assert l2_penalty(params, 1.0) == pytest.approx(25.0)
    assert params["w.weight"].grad.tolist() == [6.0, 8.0]
    assert params["w.bias"].grad is None

    fresh = {"w.weight": Tensor([3.0, 4.0])}
    assert l2_penalty(fresh, 0.0) == 0.0
    assert fresh["w.weight"].grad.tolist() == [0.0, 0.0]


def test_l2_penalty_gradient():
    params = {"a.weight": Tensor(np.random.default_rng(0).normal(size=(3, 2)))}
    r = 0.3

    def f():
        loss = r * float(np.sum(params["a.weight"].data ** 2))
        return loss, lambda: l2_penalty(params, r)
    assert grad_check(f, list(params.values())) < 1e-8


def test_penalty_covers_weights_and_embedding_tables():
    penalized = {name for name in fresh_params().named() if is_regularized(name)}
    for name in ("lite.tok_emb.weight", "lite.pos_emb.weight", "strong.tok_emb.weight",
                 "strong.layers.0.attn.q.weight", "w_a.weight", "w_o.weight"):
        assert name in penalized
    assert not any(name.endswith((".bias", ".gain")) for name in penalized)


def test_train_config_defaults_and_validation():
    config = TrainConfig()
    assert (config.r_l2, config.dropout, config.smoothing) == (1e-5, 0.3, 0.2)
    assert (config.lr_stage1, config.lr_stage3, config.batch_size) == (1e-4, 1e-5, 32)
    assert (config.beta1, config.beta2) == (0.9, 0.99)
    with pytest.raises(ConfigurationError):
        TrainConfig(smoothing=0.6)


# =============================================================================
# Metrics
# =============================================================================

def test_metrics_all_correct():
    report = evaluate_predictions([0, 1, 2, 1], [0, 1, 2, 1], 3)
    assert (report.accuracy, report.macro_f1) == (1.0, 1.0)


def test_metrics_half_confusion():
    report = report_from_confusion(np.array([[1, 1], [1, 1]]))
    assert report.accuracy == 0.5
    assert report.macro_f1 == pytest.approx(0.5)


def test_metrics_constant_predictor():
    labels = [0, 1, 2] * 4
    report = evaluate_predictions(labels, [0] * 12, 3)
    assert report.accuracy == pytest.approx(1 / 3)
    assert report.macro_f1 == pytest.approx(0.5 / 3)
    assert report.f1[1:] == [0.0, 0.0]
    assert report.accuracy == np.trace(report.confusion) / report.total


def test_evaluate_uses_argmax():
    class Doc:
        def __init__(self, label):
            self.label = label
    docs = [Doc(0), Doc(1)]
    report = evaluate(lambda ds: np.array([[0.9, 0.1], [0.6, 0.4]]), docs)
    assert report.accuracy == 0.5
    with pytest.raises(EmptyInputError):
        evaluate(lambda ds: np.zeros((0, 2)), [])


def test_selection_accuracy():
    assert selection_accuracy([1, 2, 3], [1, 0, 3]) == pytest.approx(2 / 3)
    assert selection_accuracy([1, 2], [None, None]) is None


def test_eval_report_to_dict_drops_empty_fields():
    data = report_from_confusion(np.eye(2, dtype=int)).to_dict()
    assert "selection_accuracy" not in data and "extra" not in data


# =============================================================================
# Stages
# =============================================================================

def test_stage1_descends_and_is_reproducible(tiny_corpus):
    first, second = fresh_params(), fresh_params()
    a = train_stage1(tiny_corpus, first, fast_config())
    b = train_stage1(tiny_corpus, second, fast_config())
    assert a.losses == b.losses
    assert a.losses[-1] < a.losses[0]
    for name, tensor in first.named().items():
        assert np.array_equal(tensor.data, second.named()[name].data)


def test_stage1_leaves_strong_branch_untouched(tiny_corpus):
    params = fresh_params()
    strong_before = {k: v.data.copy() for k, v in params.strong.named().items()}
    w_o_before = params.w_o.data.copy()
    train_stage1(tiny_corpus, params, fast_config(epochs_stage1=1))
    assert all(np.array_equal(v.data, strong_before[k]) for k, v in params.strong.named().items())
    assert np.array_equal(params.w_o.data, w_o_before)


def test_distill_dataset_consistency(tiny_corpus):
    params = fresh_params()
    distilled = distill_dataset(tiny_corpus, params, batch_size=7)
    assert len(distilled) == len(tiny_corpus)
    for example in distilled:
        assert example.key.k == int(np.argmax(example.record.g))
        assert example.key.span.size == 6
    again = distilled_from_records(tiny_corpus, [e.record for e in distilled])
    assert [e.key.start for e in again] == [e.key.start for e in distilled]


def test_distilled_from_records_requires_every_document(tiny_corpus):
    params = fresh_params()
    records = [e.record for e in distill_dataset(tiny_corpus[:3], params)]
    with pytest.raises(ValidationError):
        distilled_from_records(tiny_corpus[:4], records)


def test_stage3_updates_both_branches_but_not_prc_head(tiny_corpus):
    params = fresh_params()
    distilled = distill_dataset(tiny_corpus, params)
    before = {k: v.data.copy() for k, v in params.named().items()}
    result = train_stage3(distilled, params, fast_config(epochs_stage3=2))
    assert len(result.history) == 2
    after = params.named()
    for name in ("w_a.weight", "w_o.weight", "strong.tok_emb.weight", "lite.tok_emb.weight"):
        assert not np.array_equal(after[name].data, before[name])
    for name in ("w_op.weight", "w_op.bias"):
        assert np.array_equal(after[name].data, before[name])


def test_stage3_ablation_freezes_strong_encoder(tiny_corpus):
    params = fresh_params()
    distilled = distill_dataset(tiny_corpus, params)
    before = params.strong["tok_emb.weight"].data.copy()
    train_stage3(distilled, params, fast_config(epochs_stage3=1), ablate_local=True)
    assert np.array_equal(params.strong["tok_emb.weight"].data, before)


def test_stage_checkpoints_and_resume(tmp_path, tiny_corpus):
    config = fast_config(epochs_stage1=3)
    reference = fresh_params()
    expected = train_stage1(tiny_corpus, reference, config)

    class Interrupt(Exception):
        pass

    def stop_on_second(record: EpochRecord):
        if record.epoch == 2:
            raise Interrupt()

    with pytest.raises(Interrupt):
        train_stage1(tiny_corpus, fresh_params(), config, checkpoint_dir=tmp_path, on_epoch=stop_on_second)
    assert checkpoint_exists(tmp_path / "stage1.partial")

    resumed_params = fresh_params()
    resumed = train_stage1(tiny_corpus, resumed_params, config, checkpoint_dir=tmp_path)
    assert resumed.losses == expected.losses
    assert not checkpoint_exists(tmp_path / "stage1.partial")

    loaded, manifest, _ = load_skin(tmp_path / "stage1", kind="prc")
    assert len(manifest["training"]["history"]) == 3
    for name, tensor in reference.named().items():
        assert np.array_equal(loaded.named()[name].data, tensor.data)


def test_stage3_resume_matches_uninterrupted_run(tmp_path, tiny_corpus):
    start = fresh_params()
    train_stage1(tiny_corpus, start, fast_config(epochs_stage1=2))
    distilled = distill_dataset(tiny_corpus, start)
    config = fast_config(epochs_stage3=3)

    def clone() -> SkinParams:
        return SkinParams.from_arrays(start.manifest(), start.arrays())

    reference = clone()
    expected = train_stage3(distilled, reference, config)

    class Interrupt(Exception):
        pass

    def stop_on_second(record: EpochRecord):
        if record.epoch == 2:
            raise Interrupt()

    with pytest.raises(Interrupt):
        train_stage3(distilled, clone(), config, checkpoint_dir=tmp_path, on_epoch=stop_on_second)
    assert checkpoint_exists(tmp_path / "stage3.partial")

    resumed_params = clone()
    resumed = train_stage3(distilled, resumed_params, config, checkpoint_dir=tmp_path)
    assert resumed.losses == expected.losses
    assert not checkpoint_exists(tmp_path / "stage3.partial")
    for name, tensor in reference.named().items():
        assert np.array_equal(resumed_params.named()[name].data, tensor.data)


def test_early_stopping_on_plateau(tiny_corpus):
    params = fresh_params()
    result = train_stage1(
        tiny_corpus, params, fast_config(lr_stage1=0.0, epochs_stage1=10, patience=2),
    )
    assert result.stopped_early
    assert len(result.history) == 3


@pytest.mark.parametrize("kind", list(BaselineKind))
def test_train_baseline_runs(tmp_path, tiny_corpus, kind):
    params = BaselineParams.initialize(
        kind, toy_config("strong"), num_classes=3, rng=np.random.default_rng(4),
        truncate_cap=8, head_tail_len=4, segment_len=4,
    )
    result = train_baseline(tiny_corpus, params, fast_config(epochs_baseline=2), checkpoint_dir=tmp_path)
    assert [r.stage for r in result.history] == [kind.value] * 2
    assert checkpoint_exists(tmp_path / kind.value)
    probs = predict_baseline(tiny_corpus[:4], params)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_write_training_log(tmp_path):
    path = tmp_path / "training_log.csv"
    write_training_log([EpochRecord("stage1", 1, 0.5, 0.25)], path)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows == [["epoch", "stage", "mean_loss", "train_acc"], ["1", "stage1", "0.5", "0.25"]]


@pytest.mark.slow
def test_stage1_memorizes_small_corpus():
    spec = SynthSpec(num_docs=20, n=2, l=8, num_classes=3, vocab_size=60,
                     signal_count=4, signal_pool_size=2, seed=9)
    docs = [doc for doc, _ in synth_generate(spec)]
    params = SkinParams.initialize(
        toy_config("lite", dim=16, heads=2, vocab_size=60, max_len=14),
        toy_config("strong", dim=8, heads=2, vocab_size=60, max_len=14),
        num_classes=3, rng=np.random.default_rng(0),
    )
    result = train_stage1(docs, params, fast_config(
        lr_stage1=3e-3, epochs_stage1=200, batch_size=5, r_l2=0.0, patience=200,
    ))
    assert max(r.train_acc for r in result.history) == 1.0
    preds = predict_prc(docs, params).argmax(axis=1)
    assert np.mean(preds == np.array([d.label for d in docs])) >= 0.95


@pytest.mark.slow
def test_full_pipeline_beats_chance_on_planted_keys():
    spec = SynthSpec(num_docs=240, n=4, l=8, num_classes=3, vocab_size=80,
                     signal_count=4, signal_pool_size=2, seed=11)
    docs = [doc for doc, _ in synth_generate(spec)]
    train, test = docs[:180], docs[180:]
    params = SkinParams.initialize(
        toy_config("lite", dim=16, heads=2, vocab_size=80, max_len=14),
        toy_config("strong", dim=16, heads=2, vocab_size=80, max_len=14),
        num_classes=3, rng=np.random.default_rng(1),
    )
    config = fast_config(lr_stage1=3e-3, lr_stage3=1e-3, epochs_stage1=30, epochs_stage3=5,
                         batch_size=16, patience=30)
    train_stage1(train, params, config)
    train_stage3(distill_dataset(train, params), params, config)
    probs, _ = predict_skin(test, params)
    accuracy = np.mean(probs.argmax(axis=1) == np.array([d.label for d in test]))
    assert accuracy > 0.5


# =============================================================================
# Planted-key behaviour at desk scale
# =============================================================================

def planted_run(seed: int, **sections):
    """Desk-preset corpus split and fresh parameters, built the way `synth` and `train` build them."""
    overrides = {"seed": seed}
    overrides.update(sections)
    config = ConfigManager().load(preset="desk", overrides=overrides)
    spec = config.synth_spec()
    docs = [doc for doc, _ in synth_generate(spec)]
    train, test = split_train_test(docs, config.data.eval_fraction, seed)
    lite, strong = config.encoder_configs(len(synth_vocab(spec)))
    params = SkinParams.initialize(
        lite, strong, config.data.num_classes, np.random.default_rng([seed, 0]),
    )
    return config, list(train), list(test), params


def accuracy(probs: np.ndarray, docs) -> float:
    return float(np.mean(probs.argmax(axis=1) == np.array([d.label for d in docs])))


@pytest.mark.slow
def test_stage1_selects_planted_key_on_held_out_docs():
    config, train, test, params = planted_run(7)
    assert (len(train), len(test)) == (1400, 600)
    train_stage1(train, params, config.train_config())
    records = selection_records(test, params)
    assert selection_accuracy([r.k for r in records], [r.planted_key for r in records]) >= 0.9


SEEDS = [7, 8, 9, 10, 11]

# Fewer, noisier documents keep five full runs affordable and accuracies below 1.
NOISY = {
    "synth": {"num_docs": 900, "signal_count": 4, "noise_rate": 0.2},
    "train": {"epochs_stage1": 20, "epochs_stage3": 8},
}


@pytest.fixture(scope="module")
def seed_runs():
    """Per seed: held-out accuracy of PrC-SaA, of SkIn, and of SkIn with r_l zeroed."""
    runs = []
    for seed in SEEDS:
        config, train, test, params = planted_run(seed, **NOISY)
        train_config = config.train_config()
        train_stage1(train, params, train_config)
        prc = accuracy(predict_prc(test, params), test)
        train_stage3(distill_dataset(train, params), params, train_config)
        full, _ = predict_skin(test, params)
        ablated, _ = predict_skin(test, params, ablate_local=True)
        runs.append((prc, accuracy(full, test), accuracy(ablated, test)))
    return runs


@pytest.mark.slow
def test_joint_training_matches_or_beats_prc(seed_runs):
    assert sum(skin >= prc for prc, skin, _ in seed_runs) >= 4


@pytest.mark.slow
def test_zeroing_local_vector_costs_accuracy(seed_runs):
    assert sum(ablated < skin for _, skin, ablated in seed_runs) >= 3


@pytest.mark.slow
def test_no_signal_gives_chance_accuracy():
    config, train, test, params = planted_run(
        7, synth={"num_docs": 900, "signal_count": 0}, train={"epochs_stage1": 10},
    )
    train_stage1(train, params, config.train_config())
    chance = 1.0 / config.data.num_classes
    assert abs(accuracy(predict_prc(test, params), test) - chance) < 0.1
