"""Four in-memory container disciplines behind one sequence interface.

All four kinds expose the same minimal surface (``clear``/``add`` to write,
``size``/``get`` to read, ``extract_column`` for attribute-wise access) and
are observationally equivalent through it.  They differ only in how storage
is allocated and reused:

* ``ValueSeq``       — plain growable sequence, elements held by value.
* ``DoublingArray``  — explicit capacity, doubled (from 16) when full.
* ``IndirectArray``  — one separately allocated handle per element.
* ``SlotArray``      — reusable slab of fixed-size slots, stored column-wise;
                       ``clear`` keeps the slots, columns come out as views.
"""

from __future__ import annotations

import copy
from abc import ABC, abstractmethod
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .events import ClassSchema


class ContainerKind(Enum):
    VALUE_SEQ = "value-seq"
    DOUBLING_ARRAY = "doubling-array"
    INDIRECT_ARRAY = "indirect-array"
    SLOT_ARRAY = "slot-array"


class TypedSequence(ABC):
    """Ordered collection of elements of one event class."""

    kind: ContainerKind

    def __init__(self, schema: "ClassSchema", element_type: type):
        self.schema = schema
        self.element_type = element_type

    @abstractmethod
    def clear(self) -> None: ...

    @abstractmethod
    def add(self, element) -> None: ...

    @abstractmethod
    def size(self) -> int: ...

    @abstractmethod
    def get(self, i: int): ...

    def extract_column(self, attr_index: int):
        """Values of one attribute for every element, in insertion order."""
        attrs = self.schema.attributes
        if not 0 <= attr_index < len(attrs):
            raise IndexError(f"attribute index {attr_index} out of range")
        name = attrs[attr_index].name
        return [getattr(self.get(i), name) for i in range(self.size())]

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.size():
            raise IndexError(f"index {i} out of range for size {self.size()}")

    def __len__(self) -> int:
        return self.size()

    def __iter__(self):
        return (self.get(i) for i in range(self.size()))


class ValueSeq(TypedSequence):
    """Contiguous by-value storage with the platform growth policy."""

    kind = ContainerKind.VALUE_SEQ

    def __init__(self, schema, element_type):
        super().__init__(schema, element_type)
        self._items: list = []

    def clear(self) -> None:
        self._items.clear()

    def add(self, element) -> None:
        self._items.append(copy.copy(element))

    def size(self) -> int:
        return len(self._items)

    def get(self, i: int):
        self._check_index(i)
        return self._items[i]


class DoublingArray(TypedSequence):
    """Fixed buffer that doubles its capacity and moves contents when full."""

    kind = ContainerKind.DOUBLING_ARRAY
    INITIAL_CAPACITY = 16

    def __init__(self, schema, element_type):
        super().__init__(schema, element_type)
        self._buf: list = [None] * self.INITIAL_CAPACITY
        self._size = 0

    @property
    def capacity(self) -> int:
        return len(self._buf)

    def clear(self) -> None:
        self._size = 0

    def add(self, element) -> None:
        if self._size == len(self._buf):
            self._buf = self._buf + [None] * len(self._buf)
        self._buf[self._size] = copy.copy(element)
        self._size += 1

    def size(self) -> int:
        return self._size

    def get(self, i: int):
        self._check_index(i)
        return self._buf[i]


class _Handle:
    __slots__ = ("obj",)

    def __init__(self, obj):
        self.obj = obj


class IndirectArray(TypedSequence):
    """Sequence of handles; every element lives in its own allocation."""

    kind = ContainerKind.INDIRECT_ARRAY

    def __init__(self, schema, element_type):
        super().__init__(schema, element_type)
        self._handles: list[_Handle] = []

    def clear(self) -> None:
        self._handles.clear()

    def add(self, element) -> None:
        self._handles.append(_Handle(copy.copy(element)))

    def size(self) -> int:
        return len(self._handles)

    def get(self, i: int):
        self._check_index(i)
        return self._handles[i].obj


class SlotArray(TypedSequence):
    """Column-wise slab of reusable slots.

    ``clear`` resets the logical size but keeps every slot allocated, so a
    clear/refill cycle within the high-water mark performs no allocation
    (observable through ``allocations``).  ``extract_column`` returns a view
    of the column storage, not a copy.
    """

    kind = ContainerKind.SLOT_ARRAY
    INITIAL_SLOTS = 16

    def __init__(self, schema, element_type):
        super().__init__(schema, element_type)
        self._names = tuple(a.name for a in schema.attributes)
        self._cols = [
            np.empty(self.INITIAL_SLOTS, dtype=a.dtype_code)
            for a in schema.attributes
        ]
        self._size = 0
        self.allocations = 1

    @property
    def capacity(self) -> int:
        return len(self._cols[0]) if self._cols else 0

    def clear(self) -> None:
        self._size = 0

    def _grow(self) -> None:
        new_cap = max(self.INITIAL_SLOTS, 2 * self.capacity)
        for j, col in enumerate(self._cols):
            grown = np.empty(new_cap, dtype=col.dtype)
            grown[: self._size] = col[: self._size]
            self._cols[j] = grown
        self.allocations += 1

    def add(self, element) -> None:
        if self._size == self.capacity:
            self._grow()
        i = self._size
        for j, name in enumerate(self._names):
            self._cols[j][i] = getattr(element, name)
        self._size += 1

    def size(self) -> int:
        return self._size

    def get(self, i: int):
        self._check_index(i)
        values = []
        for a, col in zip(self.schema.attributes, self._cols):
            v = col[i]
            values.append(float(v) if a.kind == "float" else int(v))
        return self.element_type(*values)

    def extract_column(self, attr_index: int) -> np.ndarray:
        if not 0 <= attr_index < len(self._cols):
            raise IndexError(f"attribute index {attr_index} out of range")
        return self._cols[attr_index][: self._size]


_KIND_TO_CLASS = {
    ContainerKind.VALUE_SEQ: ValueSeq,
    ContainerKind.DOUBLING_ARRAY: DoublingArray,
    ContainerKind.INDIRECT_ARRAY: IndirectArray,
    ContainerKind.SLOT_ARRAY: SlotArray,
}


def make_container(kind: ContainerKind, schema, element_type) -> TypedSequence:
    return _KIND_TO_CLASS[kind](schema, element_type)
