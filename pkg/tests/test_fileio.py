import struct

import numpy as np
import pytest
import scipy.sparse as sp

from accord import fileio
from accord.solver import partial_correlations


def test_binary_roundtrip_and_header(tmp_path):
    x = np.random.default_rng(0).standard_normal((4, 3))
    f = tmp_path / "x.bin"
    fileio.write_binary(f, x)
    raw = f.read_bytes()
    assert raw[:4] == b"ACRD"
    assert struct.unpack("<II", raw[4:12]) == (4, 3)
    assert len(raw) == 16 + 8 * 12
    np.testing.assert_array_equal(fileio.read_binary(f), x)
    np.testing.assert_array_equal(fileio.read_data(f), x)


def test_binary_rejects_bad_magic(tmp_path):
    f = tmp_path / "x.bin"
    f.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ValueError, match="magic"):
        fileio.read_binary(f)


def test_binary_rejects_truncated_body(tmp_path):
    f = tmp_path / "x.bin"
    f.write_bytes(struct.pack("<4sII4x", b"ACRD", 2, 2) + bytes(8))
    with pytest.raises(ValueError, match="expected 32"):
        fileio.read_binary(f)


@pytest.mark.parametrize("header", [False, True])
def test_csv_roundtrip(tmp_path, header):
    x = np.random.default_rng(1).standard_normal((5, 2))
    f = tmp_path / "x.csv"
    fileio.write_csv(f, x, header=header)
    np.testing.assert_array_equal(fileio.read_data(f), x)


def test_matrix_market_general_one_based(tmp_path):
    m = sp.csr_array(np.array([[2.0, 0.5], [0.0, 3.0]]))
    f = tmp_path / "m.mtx"
    fileio.write_matrix_market(f, m)
    lines = f.read_text().splitlines()
    assert lines[0] == "%%MatrixMarket matrix coordinate real general"
    body = [ln for ln in lines[1:] if not ln.startswith("%")]
    assert body[0].split() == ["2", "2", "3"]
    assert {tuple(ln.split()[:2]) for ln in body[1:]} == {("1", "1"), ("1", "2"), ("2", "2")}
    np.testing.assert_array_equal(fileio.read_matrix_market(f).toarray(), m.toarray())


def test_matrix_market_symmetric_input_stays_general(tmp_path):
    m = sp.csr_array(np.array([[1.0, 0.2], [0.2, 1.0]]))
    f = tmp_path / "m.mtx"
    fileio.write_matrix_market(f, m)
    assert "general" in f.read_text().splitlines()[0]
    np.testing.assert_array_equal(fileio.read_matrix_market(f).toarray(), m.toarray())


def test_edge_list_zero_based(tmp_path):
    om = sp.csr_array(np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 1.0]]))
    f = tmp_path / "rho.tsv"
    fileio.write_edge_list(f, partial_correlations(om))
    assert fileio.read_edge_list(f) == [(0, 1, -0.5)]


def test_trace_csv(tmp_path):
    f = tmp_path / "trace.csv"
    fileio.write_trace(f, [3.0, 2.0], [0.0, 0.5])
    assert f.read_text().splitlines() == ["iteration,objective,step", "0,3.0,0.0", "1,2.0,0.5"]
