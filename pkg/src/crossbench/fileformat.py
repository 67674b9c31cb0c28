"""Shared on-disk helpers for the two store formats.

Both stores are little-endian throughout, open with a 4-byte magic plus a
u16 version, embed a self-describing schema descriptor, and close with a
trailer that echoes the magic so truncation is detectable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

from .errors import FormatError
from .events import FLOAT, INT, AttributeSpec, ClassSchema, FolderLayout

_KIND_CODES = {FLOAT: 0, INT: 1}
_CODE_KINDS = {0: FLOAT, 1: INT}


@dataclass
class FileStats:
    """Size accounting returned by a store writer's ``finalize``."""

    path: str
    total_bytes: int
    event_count: int
    basket_counts: dict[str, int] = field(default_factory=dict)

    @property
    def bytes_per_event(self) -> float:
        return self.total_bytes / self.event_count if self.event_count else 0.0

    @property
    def kb_per_event(self) -> float:
        return self.bytes_per_event / 1024.0


def pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise FormatError(f"string too long for u16 length: {len(raw)}")
    return struct.pack("<H", len(raw)) + raw


def pack_schemas(schemas: tuple[ClassSchema, ...]) -> bytes:
    parts = [struct.pack("<H", len(schemas))]
    for schema in schemas:
        parts.append(pack_str(schema.class_name))
        parts.append(struct.pack("<H", len(schema.attributes)))
        for attr in schema.attributes:
            parts.append(pack_str(attr.name))
            parts.append(struct.pack("<BB", attr.width, _KIND_CODES[attr.kind]))
    return b"".join(parts)


class ByteReader:
    """Cursor over an in-memory byte region with format-error reporting."""

    def __init__(self, data: bytes, context: str):
        self.data = data
        self.pos = 0
        self.context = context

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated {self.context}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def read_str(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")

    @property
    def exhausted(self) -> bool:
        return self.pos == len(self.data)


def unpack_schemas(reader: ByteReader) -> tuple[ClassSchema, ...]:
    (n_classes,) = reader.unpack("<H")
    schemas = []
    for _ in range(n_classes):
        class_name = reader.read_str()
        (n_attrs,) = reader.unpack("<H")
        attrs = []
        for _ in range(n_attrs):
            name = reader.read_str()
            width, kind_code = reader.unpack("<BB")
            if kind_code not in _CODE_KINDS:
                raise FormatError(f"unknown attribute kind code {kind_code}")
            attrs.append(AttributeSpec(name, width, _CODE_KINDS[kind_code]))
        schemas.append(ClassSchema(class_name, tuple(attrs)))
    return tuple(schemas)


def check_layout(file_schemas: tuple[ClassSchema, ...], layout: FolderLayout, path) -> None:
    if file_schemas != layout.schemas:
        raise FormatError(
            f"{path}: file schema does not match expected layout {layout.name!r}"
        )


def read_exact(fh: BinaryIO, n: int, context: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated {context}")
    return data


def check_magic(found: bytes, expected: bytes, context: str) -> None:
    if found != expected:
        raise FormatError(f"bad magic in {context}: {found!r} != {expected!r}")
