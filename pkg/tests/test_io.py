import numpy as np
import pytest

from matreg.errors import MatrixParseError
from matreg.io import load_matrix, save_matrix


@pytest.mark.parametrize("suffix", [".mr1", ".csv"])
def test_round_trip_bitwise(tmp_path, rng, suffix):
    A = rng.standard_normal((7, 5)) * 10.0 ** rng.integers(-300, 300, size=(7, 5))
    A[0, 0] = -0.0
    A[1, 1] = 5e-324
    path = tmp_path / f"a{suffix}"
    save_matrix(A, path)
    B = load_matrix(path)
    assert B.dtype == np.float64
    assert A.tobytes() == B.tobytes()


def test_mr1_layout(tmp_path):
    path = tmp_path / "m.mr1"
    save_matrix(np.array([[1.0, 2.0, 3.0]]), path)
    data = path.read_bytes()
    assert data.startswith(b"MR1 1 3\n")
    assert data[8:] == np.array([1.0, 2.0, 3.0], dtype="<f8").tobytes()


def test_mr1_size_mismatch(tmp_path):
    path = tmp_path / "bad.mr1"
    path.write_bytes(b"MR1 2 3\n" + np.zeros(5, dtype="<f8").tobytes())
    with pytest.raises(MatrixParseError, match="size mismatch"):
        load_matrix(path)


@pytest.mark.parametrize("header", [b"MR1 2\n", b"MR1 a b\n", b"MR1 0 3\n", b"MR1 2 3"])
def test_mr1_malformed_header(tmp_path, header):
    path = tmp_path / "bad.mr1"
    path.write_bytes(header + np.zeros(6, dtype="<f8").tobytes())
    with pytest.raises(MatrixParseError, match="line 1"):
        load_matrix(path)


def test_mr1_non_finite(tmp_path):
    path = tmp_path / "nan.mr1"
    path.write_bytes(b"MR1 2 2\n" + np.array([1.0, 2.0, np.inf, 4.0], dtype="<f8").tobytes())
    with pytest.raises(MatrixParseError, match="row 1, column 0"):
        load_matrix(path)


def test_csv_nan_names_position(tmp_path):
    path = tmp_path / "nan.csv"
    path.write_text("1,2\n3,nan\n")
    with pytest.raises(MatrixParseError, match=r"non-finite.*row 1, column 1"):
        load_matrix(path)


def test_csv_ragged(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(MatrixParseError, match="line 2"):
        load_matrix(path)


def test_csv_garbage(tmp_path):
    path = tmp_path / "junk.csv"
    path.write_text("1,x\n")
    with pytest.raises(MatrixParseError, match="line 1, column 1"):
        load_matrix(path)


def test_csv_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("\n")
    with pytest.raises(MatrixParseError):
        load_matrix(path)


def test_missing_file_names_path(tmp_path):
    with pytest.raises(OSError, match="nope.mr1"):
        load_matrix(tmp_path / "nope.mr1")
