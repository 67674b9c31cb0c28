"""The three persistency managers over the two store formats.

* ``keys``   — one named record per event in a :class:`KeysFileWriter`.
* ``matrix`` — tree store holding one all-double row matrix per class per
               entry; every number is widened to 8 bytes on write and
               narrowed back exactly on read.  Used as the cross-check
               oracle for the other managers.
* ``tree``   — tree store at the configured split level with native widths.

Readers share one interface (``load(local_entry, out)``) so the pileup loop
can treat any manager uniformly.  :class:`ReconnectingSource` is the single
pileup manager: it is re-pointed at a new folder (and possibly a new file)
before every read; switching files drops basket caches and reloads the
header and index, reconnecting to the same file only rebinds the folder.
"""

from __future__ import annotations

import time
from enum import Enum
from pathlib import Path

from .events import EVENT_LAYOUT, FolderLayout
from .keysfile import KeysFileReader, KeysFileWriter
from .treefile import DEFAULT_BASKET_SIZE, TreeFileReader, TreeFileWriter


class ManagerKind(Enum):
    KEYS = "keys"
    MATRIX = "matrix"
    TREE = "tree"


class KeysStoreWriter:
    """Keys manager writer: auto-incrementing rank under one folder name."""

    def __init__(self, path, layout=EVENT_LAYOUT, prefix="event", level=1):
        self._writer = KeysFileWriter(path, layout, level)
        self._prefix = prefix
        self._rank = 0

    def write_event(self, content) -> None:
        self._writer.write_event(self._prefix, self._rank, content)
        self._rank += 1

    def finalize(self):
        return self._writer.finalize()

    def close(self) -> None:
        self._writer.close()


class TreeStoreWriter:
    def __init__(self, path, layout=EVENT_LAYOUT, split=99, widen=False,
                 basket_size=DEFAULT_BASKET_SIZE, level=1):
        self._writer = TreeFileWriter(
            path, layout, split=split, widen=widen,
            basket_size=basket_size, level=level,
        )

    def write_event(self, content) -> None:
        self._writer.append_event(content)

    def finalize(self):
        return self._writer.finalize()

    def close(self) -> None:
        self._writer.close()


def open_writer(
    kind: ManagerKind,
    path,
    layout: FolderLayout = EVENT_LAYOUT,
    *,
    prefix: str = "event",
    level: int = 1,
    split: int = 99,
    basket_size: int = DEFAULT_BASKET_SIZE,
):
    if kind is ManagerKind.KEYS:
        return KeysStoreWriter(path, layout, prefix=prefix, level=level)
    if kind is ManagerKind.MATRIX:
        return TreeStoreWriter(
            path, layout, split=0, widen=True, basket_size=basket_size, level=level
        )
    return TreeStoreWriter(
        path, layout, split=split, widen=False, basket_size=basket_size, level=level
    )


class KeysStoreReader:
    def __init__(self, path, layout=EVENT_LAYOUT, prefix="event"):
        self._reader = KeysFileReader(path, layout)
        self._prefix = prefix

    @property
    def entry_count(self) -> int:
        return len(self._reader)

    def load(self, local_entry: int, out) -> None:
        self._reader.read_event(f"{self._prefix}{local_entry}", out)

    def close(self) -> None:
        self._reader.close()


class TreeStoreReader:
    def __init__(self, path, layout=EVENT_LAYOUT):
        self._reader = TreeFileReader(path, layout)

    @property
    def entry_count(self) -> int:
        return self._reader.entry_count

    @property
    def file_reads(self) -> int:
        return self._reader.file_reads

    def load(self, local_entry: int, out) -> None:
        self._reader.read_entry(local_entry, out)

    def close(self) -> None:
        self._reader.close()


def open_reader(kind: ManagerKind, path, layout: FolderLayout = EVENT_LAYOUT,
                prefix: str = "event"):
    if kind is ManagerKind.KEYS:
        return KeysStoreReader(path, layout, prefix)
    return TreeStoreReader(path, layout)


class ReconnectingSource:
    """Single manager serving many folders/files through reconnection."""

    def __init__(self, kind: ManagerKind, layout: FolderLayout = EVENT_LAYOUT,
                 prefix: str = "event"):
        self.kind = kind
        self.layout = layout
        self.prefix = prefix
        self._reader = None
        self._path: Path | None = None
        self._folder = None
        self.index_loads = 0
        self.file_switches = 0

    def connect(self, folder, path) -> float:
        """Target subsequent reads at ``folder``/``path``; returns wall time."""
        start = time.perf_counter()
        path = Path(path)
        if path != self._path:
            if self._reader is not None:
                self._reader.close()
                self.file_switches += 1
            self._reader = open_reader(self.kind, path, self.layout, self.prefix)
            self._path = path
            self.index_loads += 1
        self._folder = folder
        return time.perf_counter() - start

    def load(self, local_entry: int) -> None:
        if self._reader is None or self._folder is None:
            raise RuntimeError("source is not connected")
        self._reader.load(local_entry, self._folder)

    def close(self) -> None:
        if self._reader is not None:
            self._reader.close()
            self._reader = None
            self._path = None


class PooledSource(ReconnectingSource):
    """Variant keeping one open reader per file (no reconnect cost)."""

    def __init__(self, kind, layout=EVENT_LAYOUT, prefix="event"):
        super().__init__(kind, layout, prefix)
        self._pool: dict[Path, object] = {}

    def connect(self, folder, path) -> float:
        start = time.perf_counter()
        path = Path(path)
        if path != self._path:
            if self._path is not None:
                self.file_switches += 1
            reader = self._pool.get(path)
            if reader is None:
                reader = open_reader(self.kind, path, self.layout, self.prefix)
                self._pool[path] = reader
                self.index_loads += 1
            self._reader = reader
            self._path = path
        self._folder = folder
        return time.perf_counter() - start

    def close(self) -> None:
        for reader in self._pool.values():
            reader.close()
        self._pool.clear()
        self._reader = None
        self._path = None
