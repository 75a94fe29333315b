import struct

import numpy as np
import pytest

from autoeval.classifier import FeatureBundle, TinyClassifier, bundle_accuracy
from autoeval.errors import FormatError, ValidationError
from autoeval.formats import (
    bundle_bytes,
    read_bundle,
    read_checkpoint,
    read_classifier,
    read_stats,
    write_bundle,
    write_checkpoint,
    write_classifier,
    write_stats,
)
from autoeval.stats import compute_stats


def make_bundle(rng, m=20, d=5, k=3, labels=True):
    logits = rng.normal(size=(m, k))
    softmax = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    softmax = softmax.astype(np.float32).astype(np.float64)
    feats = rng.normal(size=(m, d)).astype(np.float32).astype(np.float64)
    return FeatureBundle(feats, softmax, rng.integers(0, k, size=m) if labels else None, "demo")


def test_bundle_round_trip(tmp_path, rng):
    b = make_bundle(rng)
    back = read_bundle(write_bundle(tmp_path / "b.aefb", b))
    assert np.array_equal(back.features, b.features)
    assert np.array_equal(back.softmax, b.softmax)
    assert np.array_equal(back.labels, b.labels)
    assert bundle_accuracy(back) == bundle_accuracy(b)
    assert back.source == "b"


def test_bundle_header_layout(rng):
    b = make_bundle(rng, m=4, d=2, k=3)
    raw = bundle_bytes(b)
    magic, version, m, d, k, has = struct.unpack_from("<4sIQIIB", raw)
    assert (magic, version, m, d, k, has) == (b"AEFB", 1, 4, 2, 3, 1)
    assert len(raw) == struct.calcsize("<4sIQIIB") + 4 * (4 * 2 + 4 * 3 + 4)


def test_unlabeled_round_trip(tmp_path, rng):
    back = read_bundle(write_bundle(tmp_path / "u.aefb", make_bundle(rng, labels=False)))
    assert back.labels is None


def test_truncated_bundle(tmp_path, rng):
    path = write_bundle(tmp_path / "t.aefb", make_bundle(rng))
    path.write_bytes(path.read_bytes()[:-7])
    with pytest.raises(FormatError):
        read_bundle(path)


def test_trailing_bytes(tmp_path, rng):
    path = write_bundle(tmp_path / "t.aefb", make_bundle(rng))
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(FormatError):
        read_bundle(path)


def test_bad_magic(tmp_path, rng):
    path = write_bundle(tmp_path / "t.aefb", make_bundle(rng))
    path.write_bytes(b"XXXX" + path.read_bytes()[4:])
    with pytest.raises(FormatError):
        read_bundle(path)


def test_unnormalised_softmax_fails_validation(tmp_path):
    header = struct.pack("<4sIQIIB", b"AEFB", 1, 2, 1, 2, 0)
    feats = np.zeros(2, "<f4").tobytes()
    soft = np.array([0.5, 0.6, 0.5, 0.5], "<f4").tobytes()
    path = tmp_path / "v.aefb"
    path.write_bytes(header + feats + soft)
    with pytest.raises(ValidationError):
        read_bundle(path)


def test_import_tolerance_accepts_small_drift(tmp_path):
    header = struct.pack("<4sIQIIB", b"AEFB", 1, 2, 1, 2, 0)
    soft = np.array([0.5, 0.50005, 0.25, 0.75], "<f4").tobytes()
    path = tmp_path / "ok.aefb"
    path.write_bytes(header + np.zeros(2, "<f4").tobytes() + soft)
    assert len(read_bundle(path)) == 2


def test_stats_round_trip(tmp_path, rng):
    s = compute_stats(rng.normal(size=(30, 6)))
    back = read_stats(write_stats(tmp_path / "s.aest", s))
    assert back == s


def test_checkpoint_round_trip_and_truncation(tmp_path, rng):
    arrays = [rng.normal(size=(3, 4)), rng.normal(size=5), np.array(2.5)]
    path = write_checkpoint(tmp_path / "c.bin", b"AENP", arrays)
    back = read_checkpoint(path, b"AENP")
    for a, b in zip(arrays, back):
        assert np.array_equal(a, b)
    with pytest.raises(FormatError):
        read_checkpoint(path, b"AELP")
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(FormatError):
        read_checkpoint(path, b"AENP")


def test_classifier_round_trip(tmp_path, rng):
    params = [rng.normal(size=(12, 4)), np.zeros(4), rng.normal(size=(4, 4)), np.zeros(4),
              rng.normal(size=(4, 3)), np.zeros(3)]
    clf = TinyClassifier(params, (2, 2, 3), 3)
    back = read_classifier(write_classifier(tmp_path / "m.aecl", clf))
    assert back.input_shape == (2, 2, 3) and back.n_classes == 3
    for a, b in zip(clf.params, back.params):
        assert np.array_equal(a, b)
