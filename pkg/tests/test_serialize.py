import numpy as np
import pytest

from avqa_debias.serialize import (
    FormatError,
    read_features,
    read_model,
    write_features,
    write_model,
)


def test_features_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    rows = [(rng.standard_normal(4), rng.standard_normal(6), rng.standard_normal(4)) for _ in range(5)]
    path = tmp_path / "x.features"
    write_features(path, rows)
    back = read_features(path)
    assert len(back) == 5
    for (a, v, q), (a2, v2, q2) in zip(rows, back):
        assert np.array_equal(a, a2) and np.array_equal(v, v2) and np.array_equal(q, q2)


def test_features_deterministic_bytes(tmp_path):
    rows = [(np.arange(3.0), np.arange(2.0), np.arange(3.0))]
    p1, p2 = tmp_path / "a", tmp_path / "b"
    write_features(p1, rows)
    write_features(p2, rows)
    assert p1.read_bytes() == p2.read_bytes()


def test_features_errors(tmp_path):
    with pytest.raises(FormatError, match="no feature rows"):
        write_features(tmp_path / "x", [])
    bad_shape = [(np.arange(3.0), np.arange(2.0), np.arange(3.0)),
                 (np.arange(4.0), np.arange(2.0), np.arange(3.0))]
    with pytest.raises(FormatError, match="shape"):
        write_features(tmp_path / "x", bad_shape)
    p = tmp_path / "junk"
    p.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(FormatError, match="not a features file"):
        read_features(p)


def test_features_truncation_and_trailing(tmp_path):
    rows = [(np.arange(3.0), np.arange(2.0), np.arange(3.0))]
    p = tmp_path / "x"
    write_features(p, rows)
    blob = p.read_bytes()
    p.write_bytes(blob[:-4])
    with pytest.raises(FormatError, match="truncated"):
        read_features(p)
    p.write_bytes(blob + b"\x00")
    with pytest.raises(FormatError, match="trailing"):
        read_features(p)


def test_model_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    params = {"enc_W": rng.standard_normal((3, 4)), "enc_b": rng.standard_normal(3)}
    path = tmp_path / "m.bin"
    write_model(path, params)
    back = read_model(path)
    assert set(back) == set(params)
    for k in params:
        assert np.array_equal(params[k], back[k])


def test_model_bad_magic(tmp_path):
    p = tmp_path / "m.bin"
    p.write_bytes(b"XXXX" + b"\x00" * 8)
    with pytest.raises(FormatError, match="not a model file"):
        read_model(p)
