import base64

import numpy as np
import pytest

import voxflood


def test_phantom_shape_and_labels():
    vol, labels = voxflood.generate_phantom(shape=(64, 64, 64), count=3, size_min=6, size_max=8, seed=1)
    assert vol.shape == (64, 64, 64)
    assert vol.dtype == np.float32
    assert labels.dtype == np.uint32
    assert set(np.unique(labels)) == {0, 1, 2, 3}


def test_components_and_distance():
    m = np.zeros((5, 5, 9), dtype=np.uint8)
    m[1:4, 1:4, 1:4] = 1
    m[2, 2, 7] = 1
    cc = voxflood.connected_components(m, 26)
    assert cc.max() == 2
    assert cc[2, 2, 2] != cc[2, 2, 7]
    d = voxflood.distance_transform(m)
    assert d[2, 2, 2] == pytest.approx(2.0)
    assert d[0, 0, 0] == 0.0


def test_otsu_and_merge():
    v = np.full((4, 4, 4), 50, dtype=np.float32)
    v[:2] = 200
    t = voxflood.otsu_threshold(v)
    assert 50 <= t < 200
    rng = np.random.default_rng(0)
    a, b, c = (rng.integers(0, 2, (4, 4, 4), dtype=np.uint8) for _ in range(3))
    for k in (1, 2, 3):
        assert np.array_equal(voxflood.merge_stacks(a, b, c, k), (a.astype(int) + b + c >= k).astype(np.uint8))


def test_segment_and_evaluate_marbles():
    vol, labels = voxflood.generate_phantom(shape=(80, 80, 80), count=2, size_min=8, size_max=10, seed=5)
    config = 'preset = "vitb48"\n[adapter]\nsam-output-channel = "max-predicted-iou"\n'
    pred, journal = voxflood.segment(vol, config)
    assert pred.shape == vol.shape
    assert "segment 1" in journal
    result = voxflood.evaluate(labels, pred)
    assert result["assigned_rows"] == 2
    assert result["best_iou"] >= 0.9
    assert result["summary"].startswith("best_iou=")


def test_errors_and_base64():
    with pytest.raises(voxflood.InputError):
        voxflood.segment(np.zeros((4, 4, 4), dtype=np.float32), "bogus-key = 1\n")
    with pytest.raises(voxflood.InputError):
        voxflood.connected_components(np.zeros((4, 4), dtype=np.uint8))
    raw = bytes(range(256))
    assert voxflood.base64_encode(raw) == base64.b64encode(raw).decode()
    assert voxflood.base64_decode(base64.b64encode(raw).decode()) == raw
    assert "tuned1024" in voxflood.presets()
