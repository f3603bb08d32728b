"""Truncation, head+tail and sliding-window baselines."""

import numpy as np
import pytest

from skin.baselines import (
    BaselineKind, BaselineParams, BaselineTrace, head_tail_classify, head_tail_input,
    load_baseline, predict_baseline, save_baseline, slide_window_classify,
    truncate_classify, truncate_input,
)
from skin.encoder import record_encoder_calls
from skin.errors import ConfigurationError, ContractError
from skin.ndtensor import Tensor, grad_check, ops
from skin.textio import PAD_ID, SEP_ID, segment_document

from .conftest import toy_config


def make_params(kind, max_len=24, cap=12, half=5, segment_len=8):
    return BaselineParams.initialize(
        kind, toy_config("strong", max_len=max_len), num_classes=3,
        rng=np.random.default_rng(31), truncate_cap=cap, head_tail_len=half,
        segment_len=segment_len,
    )


def test_truncate_input_cuts_and_pads():
    long = segment_document(list(range(4, 36)), n=4, l=8, label=0)
    assert truncate_input(long, 12).tolist() == list(range(4, 16))
    short = segment_document([5, 6, 7], n=2, l=4, label=0)
    assert truncate_input(short, 12).tolist() == [5, 6, 7] + [PAD_ID] * 9


def test_head_tail_input_matches_slicing():
    ids = list(range(4, 36))
    doc = segment_document(ids, n=4, l=8, label=0)
    composite = head_tail_input(doc, 5)
    assert composite.size == 11
    assert composite.tolist() == ids[:5] + [SEP_ID] + ids[-5:]


def test_head_tail_input_pads_short_documents():
    doc = segment_document([7, 8, 9], n=2, l=4, label=0)
    assert head_tail_input(doc, 5).tolist() == [7, 8, 9, 0, 0, SEP_ID, 7, 8, 9, 0, 0]


def test_head_tail_length_at_full_geometry():
    doc = segment_document(list(range(4, 1028)), n=8, l=128, label=0)
    assert head_tail_input(doc, 128).size == 257


def test_truncate_encoder_sees_cap_plus_specials():
    params = make_params(BaselineKind.TRUNCATE)
    doc = segment_document(list(range(4, 36)), n=4, l=8, label=0)
    with record_encoder_calls() as calls:
        o = truncate_classify(doc, params)
    assert [c.length for c in calls] == [14]
    assert o.data.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.array_equal(o.data, truncate_classify(doc, params).data)


def test_slide_window_encodes_each_segment_separately():
    params = make_params(BaselineKind.SLIDE_WINDOW)
    doc = segment_document(list(range(4, 36)), n=4, l=8, label=0)
    with record_encoder_calls() as calls:
        o = slide_window_classify(doc, params)
    assert [(c.batch, c.length) for c in calls] == [(4, 10)]
    assert o.data.sum() == pytest.approx(1.0, abs=1e-9)


def test_slide_window_identical_segments_match_single_window():
    params = make_params(BaselineKind.SLIDE_WINDOW)
    segment = [9, 10, 11, 12, 13, 14, 15, 16]
    repeated = segment_document(segment * 3, n=3, l=8, label=1)
    trace = BaselineTrace([repeated], params)
    assert np.allclose(trace.feature.data[0], trace.pooled.data[0], atol=1e-12)


def test_kind_mismatch_and_length_guard():
    params = make_params(BaselineKind.HEAD_TAIL)
    doc = segment_document([5, 6, 7], n=2, l=4, label=0)
    assert head_tail_classify(doc, params).data.sum() == pytest.approx(1.0)
    with pytest.raises(ContractError):
        truncate_classify(doc, params)
    with pytest.raises(ConfigurationError):
        make_params(BaselineKind.TRUNCATE, max_len=10, cap=12)


@pytest.mark.parametrize("kind", list(BaselineKind))
def test_baseline_head_gradient(kind):
    params = make_params(kind)
    docs = [segment_document(list(range(4 + i, 20 + i)), n=2, l=8, label=i % 3) for i in range(3)]
    targets = Tensor(np.eye(3)[[d.label for d in docs]])

    def f():
        trace = BaselineTrace(docs, params)
        loss = ops.cross_entropy(trace.o, targets)
        return loss, lambda: trace.backward(ops.cross_entropy_backward(trace.o, targets))
    checked = [params.w, params.b, params.encoder["layers.0.ff2.weight"]]
    assert grad_check(f, checked) < 1e-4


def test_baseline_checkpoint_roundtrip(tmp_path):
    params = make_params(BaselineKind.HEAD_TAIL)
    save_baseline(tmp_path / "headtail", params)
    loaded, manifest, rest = load_baseline(tmp_path / "headtail", BaselineKind.HEAD_TAIL)
    assert manifest["model"]["head_tail_len"] == 5
    assert rest == {}
    docs = [segment_document(list(range(4, 20)), n=2, l=8, label=0)]
    assert np.array_equal(predict_baseline(docs, loaded), predict_baseline(docs, params))
