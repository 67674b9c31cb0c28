"""Columnar entry/branch/basket store with an entry index for random reads.

Layout (all little-endian)::

    header   magic "RTBT" | version u16 | widen u8 | split u8 | level u8 |
             basket_size u64 | entry_count u64 (backpatched at finalize) |
             desc_len u32 | schema descriptor
    baskets  concatenated basket payloads, each independently compressed
    index    entry_count u64 | event_ids u64*n |
             branch_count u32 |
             per branch: class_index u16 | attr_index i16 (-1 = whole class) |
                         basket_count u32 |
                         per basket: first_entry u64 | entry_count u32 |
                                     offset u64 | comp_len u64 | uncomp_len u64 |
                         element_counts u32*n
    trailer  index_offset u64 | magic "RTBT"

Branches: with ``split == 0`` (or ``widen``) one branch per class holding
row-wise records; with ``split >= 1`` one branch per (class, attribute)
holding that attribute's column.  Entries are buffered per branch and
flushed as a basket when ``basket_size`` is reached; an entry larger than
``basket_size`` gets a basket of its own.  Per-entry element counts live in
the index so a random read locates its bytes inside a basket without
decoding neighbours.  Readers keep one cached basket per branch; re-reading
an entry inside a cached basket touches no file.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import (
    ByteBlock,
    compress,
    decode_columns,
    decode_row,
    decompress,
    encode_column,
    encode_element,
    encode_row,
    raw_block,
    row_stride,
)
from .containers import IndirectArray
from .errors import FormatError
from .events import EVENT_LAYOUT, FolderLayout
from .fileformat import (
    ByteReader,
    FileStats,
    check_layout,
    check_magic,
    pack_schemas,
    read_exact,
    unpack_schemas,
)

MAGIC = b"RTBT"
VERSION = 1
_TRAILER_SIZE = 8 + len(MAGIC)
_ENTRY_COUNT_OFFSET = 4 + 2 + 1 + 1 + 1 + 8  # fixed header position, backpatched
DEFAULT_BASKET_SIZE = 8000


@dataclass(frozen=True)
class BranchId:
    class_index: int
    attr_index: int  # -1 for a whole-class (row) branch

    def name(self, layout: FolderLayout) -> str:
        schema = layout.schemas[self.class_index]
        if self.attr_index < 0:
            return schema.class_name
        return f"{schema.class_name}.{schema.attributes[self.attr_index].name}"


@dataclass
class BasketDescriptor:
    first_entry: int
    entry_count: int
    offset: int
    comp_len: int
    uncomp_len: int


def build_branches(layout: FolderLayout, split: int, widen: bool) -> list[BranchId]:
    branches = []
    for ci, schema in enumerate(layout.schemas):
        if widen or split == 0:
            branches.append(BranchId(ci, -1))
        else:
            branches.extend(BranchId(ci, j) for j in range(len(schema.attributes)))
    return branches


class _BranchBuffer:
    __slots__ = ("data", "first_entry", "entry_count")

    def __init__(self):
        self.data = bytearray()
        self.first_entry = 0
        self.entry_count = 0


class TreeFileWriter:
    def __init__(
        self,
        path,
        layout: FolderLayout = EVENT_LAYOUT,
        split: int = 99,
        widen: bool = False,
        basket_size: int = DEFAULT_BASKET_SIZE,
        level: int = 1,
    ):
        if basket_size < 1:
            raise ValueError("basket_size must be positive")
        self.path = Path(path)
        self.layout = layout
        self.split = 0 if widen else split
        self.widen = widen
        self.basket_size = basket_size
        self.level = level
        self.branches = build_branches(layout, self.split, widen)
        self._bufs = [_BranchBuffer() for _ in self.branches]
        self._descs: list[list[BasketDescriptor]] = [[] for _ in self.branches]
        self._counts: list[list[int]] = [[] for _ in self.branches]
        self._event_ids: list[int] = []
        self._entry_count = 0
        self._fh = open(self.path, "wb")
        descriptor = pack_schemas(layout.schemas)
        self._fh.write(
            MAGIC
            + struct.pack(
                "<HBBBQQ",
                VERSION,
                int(widen),
                self.split,
                level,
                basket_size,
                0,
            )
            + struct.pack("<I", len(descriptor))
            + descriptor
        )

    def _flush(self, bi: int) -> None:
        buf = self._bufs[bi]
        if buf.entry_count == 0:
            return
        block = compress(raw_block(bytes(buf.data)), self.level)
        offset = self._fh.tell()
        self._fh.write(block.data)
        self._descs[bi].append(
            BasketDescriptor(
                buf.first_entry,
                buf.entry_count,
                offset,
                len(block.data),
                block.uncompressed_length,
            )
        )
        buf.first_entry += buf.entry_count
        buf.entry_count = 0
        buf.data.clear()

    def _append(self, bi: int, payload: bytes) -> None:
        buf = self._bufs[bi]
        if buf.data and len(buf.data) + len(payload) > self.basket_size:
            self._flush(bi)
        buf.data += payload
        buf.entry_count += 1
        if len(buf.data) >= self.basket_size:
            self._flush(bi)

    def _row_payload(self, seq, schema) -> bytes:
        if isinstance(seq, IndirectArray):
            # element-by-element path: one encode call per handle
            return b"".join(
                encode_element(seq.get(i), schema, self.widen)
                for i in range(seq.size())
            )
        return encode_row(seq, schema, self.widen).data

    def append_event(self, content) -> None:
        collections = content.collections()
        if len(collections) != len(self.layout.schemas):
            raise ValueError("content does not match the writer's layout")
        self._event_ids.append(content.event_id)
        bi = 0
        for schema, seq in zip(self.layout.schemas, collections):
            n = seq.size()
            if self.widen or self.split == 0:
                self._counts[bi].append(n)
                self._append(bi, self._row_payload(seq, schema))
                bi += 1
            else:
                for j in range(len(schema.attributes)):
                    self._counts[bi].append(n)
                    self._append(bi, encode_column(seq, schema, j).data)
                    bi += 1
        self._entry_count += 1

    def finalize(self) -> FileStats:
        for bi in range(len(self.branches)):
            self._flush(bi)
        index_offset = self._fh.tell()
        n = self._entry_count
        parts = [struct.pack("<Q", n)]
        parts.append(np.asarray(self._event_ids, dtype="<u8").tobytes())
        parts.append(struct.pack("<I", len(self.branches)))
        for bi, branch in enumerate(self.branches):
            descs = self._descs[bi]
            parts.append(
                struct.pack("<HhI", branch.class_index, branch.attr_index, len(descs))
            )
            for d in descs:
                parts.append(
                    struct.pack(
                        "<QIQQQ",
                        d.first_entry,
                        d.entry_count,
                        d.offset,
                        d.comp_len,
                        d.uncomp_len,
                    )
                )
            parts.append(np.asarray(self._counts[bi], dtype="<u4").tobytes())
        self._fh.write(b"".join(parts))
        self._fh.write(struct.pack("<Q", index_offset) + MAGIC)
        total = self._fh.tell()
        self._fh.seek(_ENTRY_COUNT_OFFSET)
        self._fh.write(struct.pack("<Q", n))
        self._fh.close()
        basket_counts = {
            branch.name(self.layout): len(self._descs[bi])
            for bi, branch in enumerate(self.branches)
        }
        return FileStats(str(self.path), total, n, basket_counts)

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


class TreeFileReader:
    def __init__(self, path, layout: FolderLayout = EVENT_LAYOUT):
        self.path = Path(path)
        self.layout = layout
        self.file_reads = 0
        self._fh = open(self.path, "rb")
        header = read_exact(self._fh, 25, "header")
        check_magic(header[:4], MAGIC, f"{self.path} header")
        version, widen, split, level, basket_size, entry_count = struct.unpack(
            "<HBBBQQ", header[4:25]
        )
        if version != VERSION:
            raise FormatError(f"{self.path}: unsupported version {version}")
        (desc_len,) = struct.unpack("<I", read_exact(self._fh, 4, "header"))
        reader = ByteReader(
            read_exact(self._fh, desc_len, "schema descriptor"), "schema descriptor"
        )
        self.schemas = unpack_schemas(reader)
        check_layout(self.schemas, layout, self.path)
        self.widen = bool(widen)
        self.split = split
        self.level = level
        self.basket_size = basket_size
        self.entry_count = entry_count

        self._fh.seek(0, 2)
        file_size = self._fh.tell()
        if file_size < _TRAILER_SIZE:
            raise FormatError(f"{self.path}: too small for a trailer")
        self._fh.seek(file_size - _TRAILER_SIZE)
        trailer = read_exact(self._fh, _TRAILER_SIZE, "trailer")
        check_magic(trailer[8:], MAGIC, f"{self.path} trailer")
        (index_offset,) = struct.unpack("<Q", trailer[:8])
        if index_offset > file_size:
            raise FormatError(f"{self.path}: index offset out of range")
        self._fh.seek(index_offset)
        index = ByteReader(
            read_exact(self._fh, file_size - _TRAILER_SIZE - index_offset, "index"),
            "index",
        )
        (n,) = index.unpack("<Q")
        if n != entry_count:
            raise FormatError(f"{self.path}: header/index entry count mismatch")
        self._event_ids = np.frombuffer(index.take(8 * n), dtype="<u8")
        (branch_count,) = index.unpack("<I")
        expected = build_branches(layout, self.split, self.widen)
        if branch_count != len(expected):
            raise FormatError(f"{self.path}: unexpected branch count {branch_count}")
        self.branches: list[BranchId] = []
        self._descs: list[list[BasketDescriptor]] = []
        self._firsts: list[list[int]] = []
        self._counts: list[np.ndarray] = []
        self._prefix: list[np.ndarray] = []
        self._strides: list[int] = []
        self._branch_index: dict[tuple[int, int], int] = {}
        for bi in range(branch_count):
            class_index, attr_index, basket_count = index.unpack("<HhI")
            branch = BranchId(class_index, attr_index)
            if branch != expected[bi]:
                raise FormatError(f"{self.path}: branch order mismatch at {bi}")
            descs = []
            for _ in range(basket_count):
                first, cnt, offset, clen, ulen = index.unpack("<QIQQQ")
                descs.append(BasketDescriptor(first, cnt, offset, clen, ulen))
            counts = np.frombuffer(index.take(4 * n), dtype="<u4").astype(np.int64)
            schema = layout.schemas[class_index]
            stride = (
                row_stride(schema, self.widen)
                if attr_index < 0
                else schema.attributes[attr_index].width
            )
            self.branches.append(branch)
            self._descs.append(descs)
            self._firsts.append([d.first_entry for d in descs])
            self._counts.append(counts)
            self._prefix.append(np.concatenate(([0], np.cumsum(counts))))
            self._strides.append(stride)
            self._branch_index[(class_index, attr_index)] = bi
        if not index.exhausted:
            raise FormatError(f"{self.path}: trailing bytes in index")
        self._cache: dict[int, tuple[int, bytes]] = {}

    def event_id(self, entry: int) -> int:
        return int(self._event_ids[entry])

    def branch_names(self) -> list[str]:
        return [b.name(self.layout) for b in self.branches]

    def _entry_bytes(self, bi: int, entry: int) -> bytes:
        counts = self._counts[bi]
        stride = self._strides[bi]
        length = int(counts[entry]) * stride
        if length == 0:
            return b""
        k = bisect_right(self._firsts[bi], entry) - 1
        descs = self._descs[bi]
        if k < 0 or entry >= descs[k].first_entry + descs[k].entry_count:
            raise FormatError(f"{self.path}: entry {entry} not covered by baskets")
        d = descs[k]
        cached = self._cache.get(bi)
        if cached is None or cached[0] != k:
            self._fh.seek(d.offset)
            payload = read_exact(self._fh, d.comp_len, "basket")
            self.file_reads += 1
            raw = decompress(ByteBlock(payload, d.uncomp_len, self.level)).data
            if len(raw) != d.uncomp_len:
                raise FormatError(f"{self.path}: basket length mismatch")
            self._cache[bi] = (k, raw)
            cached = self._cache[bi]
        raw = cached[1]
        start = int(self._prefix[bi][entry] - self._prefix[bi][d.first_entry]) * stride
        return raw[start : start + length]

    def read_entry(self, entry: int, out) -> None:
        if not 0 <= entry < self.entry_count:
            raise IndexError(f"entry {entry} out of range (count {self.entry_count})")
        out.event_id = self.event_id(entry)
        for ci, (schema, seq) in enumerate(zip(self.layout.schemas, out.collections())):
            if self.widen or self.split == 0:
                bi = self._branch_index[(ci, -1)]
                decode_row(raw_block(self._entry_bytes(bi, entry)), schema, self.widen, seq)
            else:
                blocks = [
                    raw_block(self._entry_bytes(self._branch_index[(ci, j)], entry))
                    for j in range(len(schema.attributes))
                ]
                decode_columns(blocks, schema, seq)

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
