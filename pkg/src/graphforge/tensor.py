"""Concrete tensors: a descriptor, an axis-order layout, and flat storage.

Buffers hold Python scalars (floats for F32/F64, ints for I64, bools for
BOOL); F32 values are kept pre-rounded to binary32.  Storage only needs
indexed get/set, so a buffer may be a plain list or a view into a shared
arena (see interpreter.ArenaView).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import RankMismatch
from .ir import ElementType, Shape, TensorDescriptor, element_count
from .layout import Layout, identity_layout
from .numeric import round_f32

ZERO = {
    ElementType.F32: 0.0,
    ElementType.F64: 0.0,
    ElementType.I64: 0,
    ElementType.BOOL: False,
}


@dataclass
class TensorValue:
    descriptor: TensorDescriptor
    layout: Layout
    buffer: object  # indexed storage of length descriptor.element_count
    strides: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.layout.rank != len(self.descriptor.shape):
            raise RankMismatch(
                f"layout rank {self.layout.rank} != shape rank "
                f"{len(self.descriptor.shape)}"
            )
        if len(self.buffer) != self.descriptor.element_count:
            raise RankMismatch(
                f"buffer length {len(self.buffer)} != element count "
                f"{self.descriptor.element_count}"
            )
        self.strides = self.layout.strides(self.descriptor.shape)

    @property
    def shape(self) -> Shape:
        return self.descriptor.shape

    @property
    def element_type(self) -> ElementType:
        return self.descriptor.element_type

    def position(self, index: tuple[int, ...]) -> int:
        pos = 0
        for i, s in zip(index, self.strides):
            pos += i * s
        return pos

    def get(self, index: tuple[int, ...]):
        return self.buffer[self.position(index)]

    def set(self, index: tuple[int, ...], value) -> None:
        self.buffer[self.position(index)] = value

    def indices(self):
        """Logical indices in ascending row-major order."""
        return itertools.product(*(range(d) for d in self.descriptor.shape))

    def to_flat(self) -> list:
        """Logical contents in row-major order, independent of layout."""
        if self.layout.is_identity and isinstance(self.buffer, list):
            return list(self.buffer)
        return [self.get(idx) for idx in self.indices()]


def create_tensor(
    et: ElementType, shape: Shape, layout: Layout | None = None
) -> TensorValue:
    """Zero-initialized tensor; layout defaults to identity order."""
    shape = tuple(shape)
    if layout is None:
        layout = identity_layout(len(shape))
    return TensorValue(
        TensorDescriptor(et, shape), layout, [ZERO[et]] * element_count(shape)
    )


def tensor_from_flat(
    et: ElementType, shape: Shape, data, layout: Layout | None = None
) -> TensorValue:
    """Build a tensor from row-major logical values, stored under `layout`."""
    t = create_tensor(et, tuple(shape), layout)
    values = [coerce_scalar(et, v) for v in data]
    if len(values) != t.descriptor.element_count:
        raise RankMismatch(
            f"data length {len(values)} != element count {t.descriptor.element_count}"
        )
    for idx, v in zip(t.indices(), values):
        t.set(idx, v)
    return t


def coerce_scalar(et: ElementType, v):
    if et is ElementType.F64:
        return float(v)
    if et is ElementType.F32:
        return round_f32(float(v))
    if et is ElementType.I64:
        return int(v)
    return bool(v)


def tensors_bit_equal(a: TensorValue, b: TensorValue) -> bool:
    """Same descriptor and bit-identical logical contents (layouts may differ)."""
    from .numeric import floats_bit_equal

    if a.descriptor != b.descriptor:
        return False
    if a.element_type.is_float:
        return all(
            floats_bit_equal(x, y) for x, y in zip(a.to_flat(), b.to_flat())
        )
    return a.to_flat() == b.to_flat()
