"""Byte-exact row-wise and column-wise encodings plus deflate compression.

All encodings are little-endian and element-major (rows) or attribute-major
(columns), with attributes in schema order.  Level 0 compression stores the
payload verbatim; levels 1-9 are zlib deflate.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .containers import SlotArray, TypedSequence
from .errors import CodecError
from .events import ClassSchema, FLOAT

_INT_RANGES = {2: (-(2**15), 2**15 - 1), 4: (-(2**31), 2**31 - 1), 8: (-(2**63), 2**63 - 1)}


@dataclass(frozen=True)
class ByteBlock:
    """A payload plus what is needed to restore it: declared length, level."""

    data: bytes
    uncompressed_length: int
    level: int

    def __post_init__(self):
        if not 0 <= self.level <= 9:
            raise CodecError(f"compression level must be 0..9, got {self.level}")


def raw_block(data: bytes) -> ByteBlock:
    return ByteBlock(data, len(data), 0)


def compress(block: ByteBlock, level: int) -> ByteBlock:
    """Compress a raw block; level 0 keeps the bytes verbatim."""
    if not 0 <= level <= 9:
        raise CodecError(f"compression level must be 0..9, got {level}")
    if block.level != 0:
        raise CodecError("compress expects a raw (level 0) block")
    if level == 0:
        return block
    return ByteBlock(zlib.compress(block.data, level), len(block.data), level)


def decompress(block: ByteBlock) -> ByteBlock:
    """Restore the raw bytes of a (possibly compressed) block."""
    if block.level == 0:
        return block
    try:
        data = zlib.decompress(block.data)
    except zlib.error as exc:
        raise CodecError(f"corrupt compressed stream: {exc}") from exc
    if len(data) != block.uncompressed_length:
        raise CodecError(
            f"declared length {block.uncompressed_length} != decompressed {len(data)}"
        )
    return ByteBlock(data, len(data), 0)


def row_stride(schema: ClassSchema, widen: bool) -> int:
    return schema.all_double_size if widen else schema.raw_size


def encode_row(seq: TypedSequence, schema: ClassSchema, widen: bool = False) -> ByteBlock:
    """Element-major encoding: one record per element, attributes in order."""
    n = seq.size()
    if n == 0:
        return raw_block(b"")
    dt = schema.dtype(widen)
    arr = np.empty(n, dtype=dt)
    if isinstance(seq, SlotArray):
        for j, attr in enumerate(schema.attributes):
            arr[attr.name] = seq.extract_column(j)
    else:
        names = [a.name for a in schema.attributes]
        rows = [tuple(getattr(seq.get(i), name) for name in names) for i in range(n)]
        arr[:] = rows
    return raw_block(arr.tobytes())


def encode_element(element, schema: ClassSchema, widen: bool = False) -> bytes:
    """Encode a single element; concatenating these equals ``encode_row``."""
    values = [getattr(element, a.name) for a in schema.attributes]
    return struct.pack(schema.struct_format(widen), *values)


def _narrow_int(value: float, width: int) -> int:
    iv = int(value)
    lo, hi = _INT_RANGES[width]
    if iv != value or not lo <= iv <= hi:
        raise CodecError(f"cannot narrow {value!r} to a {width}-byte integer")
    return iv


def decode_row(
    block: ByteBlock, schema: ClassSchema, widen: bool, out: TypedSequence
) -> None:
    """Inverse of ``encode_row``; clears ``out`` and refills it."""
    if block.level != 0:
        block = decompress(block)
    stride = row_stride(schema, widen)
    if len(block.data) % stride != 0:
        raise CodecError(
            f"block length {len(block.data)} is not a multiple of stride {stride}"
        )
    arr = np.frombuffer(block.data, dtype=schema.dtype(widen))
    rows = arr.tolist()
    out.clear()
    cls = out.element_type
    if not widen:
        for row in rows:
            out.add(cls(*row))
        return
    attrs = schema.attributes
    for row in rows:
        values = [
            float(np.float32(v)) if a.kind == FLOAT and a.width == 4
            else v if a.kind == FLOAT
            else _narrow_int(v, a.width)
            for a, v in zip(attrs, row)
        ]
        out.add(cls(*values))


def encode_columns(seq: TypedSequence, schema: ClassSchema) -> list[ByteBlock]:
    """One native-width block per attribute, values in insertion order."""
    return [
        encode_column(seq, schema, j) for j in range(len(schema.attributes))
    ]


def encode_column(seq: TypedSequence, schema: ClassSchema, attr_index: int) -> ByteBlock:
    attr = schema.attributes[attr_index]
    col = np.asarray(seq.extract_column(attr_index), dtype=attr.dtype_code)
    return raw_block(col.tobytes())


def decode_columns(
    blocks: list[ByteBlock], schema: ClassSchema, out: TypedSequence
) -> None:
    """Rebuild elements from one block per attribute."""
    if len(blocks) != len(schema.attributes):
        raise CodecError(
            f"expected {len(schema.attributes)} column blocks, got {len(blocks)}"
        )
    cols = []
    n = None
    for attr, block in zip(schema.attributes, blocks):
        if block.level != 0:
            block = decompress(block)
        if len(block.data) % attr.width != 0:
            raise CodecError(
                f"column {attr.name}: length {len(block.data)} not a multiple "
                f"of width {attr.width}"
            )
        col = np.frombuffer(block.data, dtype=attr.dtype_code).tolist()
        if n is None:
            n = len(col)
        elif len(col) != n:
            raise CodecError("column blocks disagree on element count")
        cols.append(col)
    out.clear()
    cls = out.element_type
    for vals in zip(*cols):
        out.add(cls(*vals))
