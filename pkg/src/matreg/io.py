"""Matrix files: binary MR1 and plain CSV.

MR1 is an ASCII header line ``MR1 <n_rows> <n_cols>`` followed by the entries
as little-endian float64, row-major. Anything not starting with ``MR1`` is
read as comma-separated decimals, one matrix row per line.
"""

import csv
import math
from pathlib import Path

import numpy as np

from .errors import ContractViolation, MatrixParseError
from .matcore import as_matrix

MAGIC = b"MR1"
_LE_F64 = np.dtype("<f8")


def save_matrix(A, path, fmt=None):
    """Write ``A`` to ``path``; the format follows the suffix unless ``fmt`` is given."""
    A = as_matrix(A)
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "mr1")
    try:
        if fmt == "mr1":
            with open(path, "wb") as fh:
                fh.write(b"MR1 %d %d\n" % A.shape)
                fh.write(np.ascontiguousarray(A, dtype=_LE_F64).tobytes())
        elif fmt == "csv":
            with open(path, "w", newline="") as fh:
                for row in A:
                    fh.write(",".join(repr(float(v)) for v in row))
                    fh.write("\n")
        else:
            raise ContractViolation(f"unknown matrix format {fmt!r}")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def load_matrix(path):
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    if data.startswith(MAGIC):
        return _parse_mr1(data, path)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MatrixParseError(f"{path}: not MR1 and not UTF-8 text (byte offset {exc.start})") from None
    return _parse_csv(text, path)


def _parse_mr1(data, path):
    end = data.find(b"\n")
    if end < 0:
        raise MatrixParseError(f"{path}: line 1: MR1 header has no terminating newline")
    parts = data[:end].split()
    try:
        if len(parts) != 3 or parts[0] != MAGIC:
            raise ValueError
        rows, cols = int(parts[1]), int(parts[2])
        if rows < 1 or cols < 1:
            raise ValueError
    except ValueError:
        raise MatrixParseError(
            f"{path}: line 1: malformed header {data[:end].decode('latin-1')!r}, expected 'MR1 <rows> <cols>'") from None
    body = data[end + 1:]
    expected = rows * cols * 8
    if len(body) != expected:
        raise MatrixParseError(
            f"{path}: size mismatch: header says {rows}x{cols} ({expected} bytes), "
            f"payload has {len(body)} bytes ({len(body) / 8:g} values)")
    A = np.frombuffer(body, dtype=_LE_F64).reshape(rows, cols).astype(np.float64)
    bad = np.argwhere(~np.isfinite(A))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        offset = end + 1 + 8 * (i * cols + j)
        raise MatrixParseError(f"{path}: non-finite value {A[i, j]} at row {i}, column {j} (byte offset {offset})")
    return A


def _parse_csv(text, path):
    rows = []
    width = None
    for lineno, fields in enumerate(csv.reader(text.splitlines()), start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        row = []
        for col, tok in enumerate(fields):
            try:
                v = float(tok)
            except ValueError:
                raise MatrixParseError(f"{path}: line {lineno}, column {col}: cannot parse {tok.strip()!r}") from None
            if not math.isfinite(v):
                raise MatrixParseError(
                    f"{path}: line {lineno}: non-finite value {tok.strip()!r} at row {len(rows)}, column {col}")
            row.append(v)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise MatrixParseError(f"{path}: line {lineno}: size mismatch, {len(row)} values where {width} expected")
        rows.append(row)
    if not rows:
        raise MatrixParseError(f"{path}: empty matrix file")
    return np.array(rows, dtype=np.float64)
