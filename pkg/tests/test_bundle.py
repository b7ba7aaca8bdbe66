import numpy as np
import pytest

import vds
from vds.bundle import MAGIC, VERSION


# values pinned by the pre-build scripted oracle on the standard fixture
ORACLE_TOKENS = [7, 96, 75, 120, 30]
ORACLE_HEAD_SUM = 3.2522911894266144
ORACLE_TRAIN_SUM = -1.4311290689081702


def test_synthetic_matches_pinned_oracle(fixture_bundle):
    b = fixture_bundle
    assert [b.verbalizer[c][0] for c in range(5)] == ORACLE_TOKENS
    assert float(b.lm_head.astype(np.float64).sum()) == ORACLE_HEAD_SUM
    assert float(b.train_reps.astype(np.float64).sum()) == ORACLE_TRAIN_SUM
    assert b.lm_head.dtype == np.float32
    assert b.train_labels.dtype == np.uint32
    assert vds.validate_bundle(b) == []


def test_synthetic_is_deterministic():
    a = vds.gen_synthetic(vds.SynthSpec(seed=5, d=16, v=30, n_classes=2,
                                        n_train=20, n_test=10))
    b = vds.gen_synthetic(vds.SynthSpec(seed=5, d=16, v=30, n_classes=2,
                                        n_train=20, n_test=10))
    assert np.array_equal(a.lm_head, b.lm_head)
    assert np.array_equal(a.train_reps, b.train_reps)
    assert np.array_equal(a.test_labels, b.test_labels)
    c = vds.gen_synthetic(vds.SynthSpec(seed=6, d=16, v=30, n_classes=2,
                                        n_train=20, n_test=10))
    assert not np.array_equal(a.lm_head, c.lm_head)


def test_zero_noise_unmixed_is_separable():
    b = vds.gen_synthetic(vds.SynthSpec(noise_sigma=0.0, mix=False))
    bases = vds.head_bases(b.lm_head)
    for reps, labels in ((b.train_reps, b.train_labels),
                         (b.test_reps, b.test_labels)):
        pred = vds.predict_all(reps, b, bases, vds.LogitsMode.SIM_ALL)
        assert vds.accuracy(pred, labels) == 1.0


def test_mixing_preserves_class_structure():
    # zero noise + mixing: every sample sits exactly on its mixed class
    # point, so exact KNN is perfect and the class points stay distinct
    b = vds.gen_synthetic(vds.SynthSpec(seed=3, d=32, v=64, n_classes=3,
                                        n_train=50, n_test=20,
                                        noise_sigma=0.0, mix=True))
    acc, _ = vds.knn_eval(b, k=1)
    assert acc == 1.0
    centers = {}
    for c in range(b.n_classes):
        rows = b.train_reps[b.train_labels == c]
        assert np.array_equal(rows, np.tile(rows[0], (len(rows), 1)))
        centers[c] = rows[0]
    for i in range(b.n_classes):
        for j in range(i + 1, b.n_classes):
            assert not np.array_equal(centers[i], centers[j])


def test_round_trip_bit_exact(tmp_path, small_bundle):
    p1 = tmp_path / "a.vdsr"
    p2 = tmp_path / "b.vdsr"
    vds.write_bundle(small_bundle, p1)
    back = vds.read_bundle(p1)
    vds.write_bundle(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(back.lm_head, small_bundle.lm_head)
    assert np.array_equal(back.train_reps, small_bundle.train_reps)
    assert np.array_equal(back.train_labels, small_bundle.train_labels)
    assert np.array_equal(back.test_reps, small_bundle.test_reps)
    assert np.array_equal(back.test_labels, small_bundle.test_labels)
    assert back.verbalizer == small_bundle.verbalizer
    assert back.class_names == small_bundle.class_names


def test_header_layout(tmp_path, small_bundle):
    path = tmp_path / "x.vdsr"
    vds.write_bundle(small_bundle, path)
    blob = path.read_bytes()
    assert blob[:4] == MAGIC
    assert int.from_bytes(blob[4:8], "little") == VERSION
    header_len = int.from_bytes(blob[8:16], "little")
    import json
    header = json.loads(blob[16:16 + header_len])
    assert header["dtype"] == "f32"
    assert header["layout"] == "row-major"
    assert header["d"] == small_bundle.d
    assert header["v"] == small_bundle.v
    b = small_bundle
    payload = (b.d * b.v + b.n_train * b.d + b.n_test * b.d) * 4 \
        + (b.n_train + b.n_test) * 4
    assert len(blob) == 16 + header_len + payload


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.vdsr"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(vds.BadMagic):
        vds.read_bundle(path)


def test_read_rejects_bad_version(tmp_path, small_bundle):
    path = tmp_path / "v9.vdsr"
    vds.write_bundle(small_bundle, path)
    blob = bytearray(path.read_bytes())
    blob[4] = 9
    path.write_bytes(bytes(blob))
    with pytest.raises(vds.UnsupportedVersion):
        vds.read_bundle(path)


def test_read_rejects_truncation(tmp_path, small_bundle):
    path = tmp_path / "t.vdsr"
    vds.write_bundle(small_bundle, path)
    blob = path.read_bytes()
    for cut in (3, 10, len(blob) - 5):
        path.write_bytes(blob[:cut])
        with pytest.raises(vds.Truncated):
            vds.read_bundle(path)


def test_read_rejects_trailing_garbage(tmp_path, small_bundle):
    path = tmp_path / "g.vdsr"
    vds.write_bundle(small_bundle, path)
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(vds.ShapeMismatch):
        vds.read_bundle(path)


def test_read_rejects_nonfinite(tmp_path, small_bundle):
    # the writer refuses invalid bundles, so corrupt the bytes directly:
    # overwrite the first train_reps float with a quiet f32 NaN
    path = tmp_path / "nan.vdsr"
    b = small_bundle
    vds.write_bundle(b, path)
    blob = bytearray(path.read_bytes())
    header_len = int.from_bytes(blob[8:16], "little")
    offset = 16 + header_len + b.d * b.v * 4
    blob[offset:offset + 4] = b"\x00\x00\xc0\x7f"
    path.write_bytes(bytes(blob))
    with pytest.raises(vds.NonFinite):
        vds.read_bundle(path)


def test_write_refuses_invalid_bundle(tmp_path, small_bundle):
    small_bundle.train_reps[0, 0] = np.nan
    with pytest.raises(vds.BundleInvalid):
        vds.write_bundle(small_bundle, tmp_path / "x.vdsr")


def test_validate_reports_violations(small_bundle):
    b = small_bundle
    assert vds.validate_bundle(b) == []
    b.verbalizer[0] = [b.v + 5]
    assert "TokenOutOfRange" in vds.validate_bundle(b)
    del b.verbalizer[0]
    assert "VerbalizerIncomplete" in vds.validate_bundle(b)


def test_validate_label_range(small_bundle):
    b = small_bundle
    b.train_labels = b.train_labels.copy()
    b.train_labels[0] = b.n_classes + 3
    assert "LabelOutOfRange" in vds.validate_bundle(b)


def test_synth_spec_rejects_nonsense():
    assert vds.SynthSpec(n_classes=0).violations()
    assert vds.SynthSpec(n_classes=300, v=200).violations()
    assert vds.SynthSpec(n_train=0).violations()
    assert vds.SynthSpec(noise_sigma=-1.0).violations()
    with pytest.raises(vds.BundleInvalid):
        vds.gen_synthetic(vds.SynthSpec(n_classes=0))
