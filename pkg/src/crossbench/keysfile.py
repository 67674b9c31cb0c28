"""Append-only named-record blob store with a trailing directory.

Layout (all little-endian)::

    header    magic "RTBK" | version u16 | desc_len u32 | schema descriptor
    records   { name_len u16 | name utf8 | payload_len u64 | payload }*
    directory count u64 | { name_len u16 | name | offset u64 | payload_len u64 }*
    trailer   directory_offset u64 | magic "RTBK"

A record payload is a self-describing block: level u8, uncompressed length
u64, then the (possibly deflated) bytes.  An event record's uncompressed
payload is ``event_id u64`` followed, per class in layout order, by a u32
element count and the class's row-wise native-width encoding.  Readers fetch
any record with one directory lookup and one seek; cost does not depend on
record position.
"""

from __future__ import annotations

import struct
from pathlib import Path

from .codec import ByteBlock, compress, decode_row, decompress, encode_row, raw_block
from .errors import FormatError
from .fileformat import (
    ByteReader,
    FileStats,
    check_layout,
    check_magic,
    pack_schemas,
    pack_str,
    read_exact,
    unpack_schemas,
)
from .events import EVENT_LAYOUT, FolderLayout

MAGIC = b"RTBK"
VERSION = 1
_TRAILER_SIZE = 8 + len(MAGIC)


def _pack_payload(block: ByteBlock) -> bytes:
    return struct.pack("<BQ", block.level, block.uncompressed_length) + block.data


def _unpack_payload(payload: bytes, context: str) -> ByteBlock:
    if len(payload) < 9:
        raise FormatError(f"truncated payload in {context}")
    level, ulen = struct.unpack_from("<BQ", payload)
    return ByteBlock(payload[9:], ulen, level)


def encode_event_payload(event, layout: FolderLayout) -> ByteBlock:
    """Raw (uncompressed) event payload: id, then per-class count + rows."""
    parts = [struct.pack("<Q", event.event_id)]
    for schema, seq in zip(layout.schemas, event.collections()):
        block = encode_row(seq, schema, widen=False)
        parts.append(struct.pack("<I", seq.size()))
        parts.append(block.data)
    return raw_block(b"".join(parts))


def decode_event_payload(block: ByteBlock, layout: FolderLayout, out) -> None:
    data = decompress(block).data
    reader = ByteReader(data, "event payload")
    (out.event_id,) = reader.unpack("<Q")
    for schema, seq in zip(layout.schemas, out.collections()):
        (count,) = reader.unpack("<I")
        body = reader.take(count * schema.raw_size)
        decode_row(raw_block(body), schema, False, seq)
    if not reader.exhausted:
        raise FormatError("trailing bytes in event payload")


class KeysFileWriter:
    """Writes records sequentially; the directory lands at finalize time."""

    def __init__(self, path, layout: FolderLayout = EVENT_LAYOUT, level: int = 1):
        self.path = Path(path)
        self.layout = layout
        self.level = level
        self._fh = open(self.path, "wb")
        descriptor = pack_schemas(layout.schemas)
        self._fh.write(
            MAGIC + struct.pack("<HI", VERSION, len(descriptor)) + descriptor
        )
        self._directory: list[tuple[str, int, int]] = []
        self._names: set[str] = set()
        self._event_count = 0

    def write_record(self, name: str, block: ByteBlock) -> None:
        if name in self._names:
            raise ValueError(f"duplicate record name {name!r}")
        payload = _pack_payload(block)
        offset = self._fh.tell()
        self._fh.write(pack_str(name) + struct.pack("<Q", len(payload)) + payload)
        self._names.add(name)
        self._directory.append((name, offset, len(payload)))

    def write_event(self, folder_name: str, rank: int, event) -> None:
        """Store one event as record ``<folder_name><rank>``."""
        block = compress(encode_event_payload(event, self.layout), self.level)
        self.write_record(f"{folder_name}{rank}", block)
        self._event_count += 1

    def finalize(self) -> FileStats:
        directory_offset = self._fh.tell()
        parts = [struct.pack("<Q", len(self._directory))]
        for name, offset, payload_len in self._directory:
            parts.append(pack_str(name) + struct.pack("<QQ", offset, payload_len))
        self._fh.write(b"".join(parts))
        self._fh.write(struct.pack("<Q", directory_offset) + MAGIC)
        total = self._fh.tell()
        self._fh.close()
        return FileStats(str(self.path), total, self._event_count)

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


class KeysFileReader:
    """Random access to records through the trailing directory."""

    def __init__(self, path, layout: FolderLayout = EVENT_LAYOUT):
        self.path = Path(path)
        self.layout = layout
        self.bytes_read = 0
        self._fh = open(self.path, "rb")
        header = self._read(10, "header")
        check_magic(header[:4], MAGIC, f"{self.path} header")
        version, desc_len = struct.unpack("<HI", header[4:])
        if version != VERSION:
            raise FormatError(f"{self.path}: unsupported version {version}")
        reader = ByteReader(self._read(desc_len, "schema descriptor"), "schema descriptor")
        self.schemas = unpack_schemas(reader)
        check_layout(self.schemas, layout, self.path)

        self._fh.seek(0, 2)
        file_size = self._fh.tell()
        if file_size < _TRAILER_SIZE:
            raise FormatError(f"{self.path}: too small for a trailer")
        self._fh.seek(file_size - _TRAILER_SIZE)
        trailer = self._read(_TRAILER_SIZE, "trailer")
        check_magic(trailer[8:], MAGIC, f"{self.path} trailer")
        (directory_offset,) = struct.unpack("<Q", trailer[:8])
        if directory_offset > file_size:
            raise FormatError(f"{self.path}: directory offset out of range")
        self._fh.seek(directory_offset)
        dir_bytes = self._read(file_size - _TRAILER_SIZE - directory_offset, "directory")
        reader = ByteReader(dir_bytes, "directory")
        (count,) = reader.unpack("<Q")
        self._records: dict[str, tuple[int, int]] = {}
        self._order: list[str] = []
        for _ in range(count):
            name = reader.read_str()
            offset, payload_len = reader.unpack("<QQ")
            self._records[name] = (offset, payload_len)
            self._order.append(name)

    def _read(self, n: int, context: str) -> bytes:
        data = read_exact(self._fh, n, context)
        self.bytes_read += n
        return data

    @property
    def names(self) -> list[str]:
        return list(self._order)

    def __len__(self) -> int:
        return len(self._records)

    def read_record(self, name: str) -> ByteBlock:
        if name not in self._records:
            raise KeyError(f"no record named {name!r} in {self.path}")
        offset, payload_len = self._records[name]
        self._fh.seek(offset)
        stored_name = ByteReader(
            self._read(2 + len(name.encode("utf-8")), "record name"), "record name"
        ).read_str()
        if stored_name != name:
            raise FormatError(f"{self.path}: directory points at record {stored_name!r}")
        (stored_len,) = struct.unpack("<Q", self._read(8, "record length"))
        if stored_len != payload_len:
            raise FormatError(f"{self.path}: record/directory length mismatch")
        payload = self._read(payload_len, f"record {name!r}")
        return _unpack_payload(payload, f"record {name!r}")

    def read_event(self, name: str, out) -> None:
        decode_event_payload(self.read_record(name), self.layout, out)

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
