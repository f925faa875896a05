"""File interchange: ``.npy`` arrays, JSON documents, CSV tables, PGM dumps.

Only the subset of ``.npy`` the pipeline exchanges is supported: format
version 1.0, C order, little-endian ``float64`` or ``bool`` arrays of one
or two dimensions. Everything else is rejected with a message naming the
offending property.
"""
import csv
import json
import logging
import os
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import numpy.lib.format as npy_format

from carkit.exceptions import ArrayFormatError, BadMagic, ShapeMismatch, UnsupportedDtype
from carkit.tables import DepthTable


_LOGGER = logging.getLogger(__name__)

NPY_MAGIC = b'\x93NUMPY'
NPY_VERSION = (1, 0)
SUPPORTED_DTYPES = {
    np.dtype('<f8').str: np.dtype('<f8'),
    np.dtype('|b1').str: np.dtype('|b1'),
}


def read_array(path) -> np.ndarray:
    """Reads a ``.npy`` v1.0 file.

    Args:
        path (str or os.PathLike): file to read.

    Returns:
        A C-ordered ``float64`` or ``bool`` array of shape (N,) or (N, K).

    Raises:
        BadMagic if the file is not a version 1.0 ``.npy`` file.
        UnsupportedDtype for any dtype, byte order or layout other than the
            supported ones.
        ShapeMismatch for arrays that are not 1-D or 2-D.
    """
    with open(path, 'rb') as fp:
        magic = fp.read(len(NPY_MAGIC))
        if magic != NPY_MAGIC:
            raise BadMagic(f'{os.fspath(path)}: not a .npy file (starts with {magic!r})')
        version = tuple(fp.read(2))
        if version != NPY_VERSION:
            raise BadMagic(f'{os.fspath(path)}: .npy format version {version} unsupported, need 1.0')
        try:
            shape, fortran_order, dtype = npy_format.read_array_header_1_0(fp)
        except ValueError as e:
            raise ArrayFormatError(f'{os.fspath(path)}: malformed .npy header: {e}') from None

        if dtype.str not in SUPPORTED_DTYPES:
            raise UnsupportedDtype(f'{os.fspath(path)}: unsupported dtype {dtype.str!r}, need <f8 or |b1')
        if fortran_order:
            raise UnsupportedDtype(f'{os.fspath(path)}: Fortran-ordered arrays are unsupported')
        if len(shape) not in (1, 2):
            raise ShapeMismatch(f'{os.fspath(path)}: expected a 1-D or 2-D array, got shape {shape}')

        n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        payload = fp.read(n_bytes)
        if len(payload) != n_bytes:
            raise ArrayFormatError(f'{os.fspath(path)}: truncated payload ({len(payload)} of {n_bytes} bytes)')
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def write_array(path, array) -> None:
    """Writes a ``.npy`` v1.0 file in C order, little-endian.

    Floating arrays are stored as ``float64``, boolean arrays as ``bool``.

    Raises:
        UnsupportedDtype for non-float, non-bool arrays.
        ShapeMismatch for arrays that are not 1-D or 2-D.
    """
    array = np.asarray(array)
    if array.dtype.kind == 'b':
        array = np.ascontiguousarray(array, dtype='|b1')
    elif array.dtype.kind == 'f':
        array = np.ascontiguousarray(array, dtype='<f8')
    else:
        raise UnsupportedDtype(f'Cannot write dtype {array.dtype.str!r}, need a float or bool array')
    if array.ndim not in (1, 2):
        raise ShapeMismatch(f'Expected a 1-D or 2-D array, got shape {array.shape}')

    with open(path, 'wb') as fp:
        npy_format.write_array_header_1_0(fp, npy_format.header_data_from_array_1_0(array))
        fp.write(array.tobytes(order='C'))
    _LOGGER.debug('Wrote %s array %s to %s', array.dtype.str, array.shape, os.fspath(path))


def write_json(path, doc) -> None:
    """Writes a JSON document with sorted keys and a trailing newline."""
    with open(path, 'w', encoding='utf-8') as fp:
        fp.write(dumps_json(doc))


def dumps_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + '\n'


def read_json(path):
    with open(path, 'r', encoding='utf-8') as fp:
        return json.load(fp)


def save_table(path, table: DepthTable) -> None:
    write_json(path, table.to_dict())


def load_table(path) -> DepthTable:
    return DepthTable.from_dict(read_json(path))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Writes a CSV file; floats are written at full (repr) precision."""
    with open(path, 'w', newline='', encoding='utf-8') as fp:
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def read_csv(path) -> Tuple[list, list]:
    """Reads a CSV file written by `write_csv` as (header, rows of strings)."""
    with open(path, 'r', newline='', encoding='utf-8') as fp:
        reader = csv.reader(fp)
        header = next(reader)
        return header, [row for row in reader]


def write_pgm(path, values, width: int, lo: Optional[float] = None, hi: Optional[float] = None,
              mask=None) -> None:
    """Dumps a flat map as a 16-bit binary PGM image for inspection.

    Values are scaled linearly from ``[lo, hi]`` to ``[0, 65535]``. When a
    bound is omitted it is taken from the valid values of this map, so
    maps are normalized individually. Masked-out pixels are black.

    Raises:
        ShapeMismatch if the pixel count is not a multiple of `width`.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if width < 1 or values.size % width:
        raise ShapeMismatch(f'{values.size} pixels do not form rows of width {width}')
    valid = np.ones(values.size, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).ravel()
    finite = valid & np.isfinite(values)
    if lo is None:
        lo = float(np.min(values[finite])) if np.any(finite) else 0.0
    if hi is None:
        hi = float(np.max(values[finite])) if np.any(finite) else 1.0
    span = hi - lo
    scaled = np.zeros(values.size, dtype=np.float64)
    if span > 0:
        scaled[finite] = np.clip((values[finite] - lo) / span, 0.0, 1.0)
    pixels = np.rint(scaled * 65535).astype('>u2')
    height = values.size // width
    with open(path, 'wb') as fp:
        fp.write(f'P5\n{width} {height}\n65535\n'.encode('ascii'))
        fp.write(pixels.tobytes())
