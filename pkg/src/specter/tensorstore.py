"""Bit-exact container for named f32/f16 tensors (the ``.tsg`` format).

Layout, all integers little-endian, no padding::

    b"TSG1" | u32 version (=1) | u32 tensor_count
    per tensor: u16 name_len | name (UTF-8) | u8 dtype (0=F32, 1=F16)
                | u8 rank | rank x u32 dims | raw element data
"""
from __future__ import annotations

import fnmatch
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptySelection, FormatError, ShapeMismatch

MAGIC = b"TSG1"
VERSION = 1

F32, F16 = 0, 1
DTYPES = {F32: np.dtype("<f4"), F16: np.dtype("<f2")}
DTYPE_NAMES = {F32: "F32", F16: "F16"}


@dataclass(eq=False)
class Tensor:
    name: str
    dtype: int
    shape: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        if self.dtype not in DTYPES:
            raise FormatError(f"unknown dtype code {self.dtype}")
        self.shape = tuple(int(d) for d in self.shape)
        self.data = np.ascontiguousarray(self.data, dtype=DTYPES[self.dtype]).reshape(-1)
        if self.data.size != int(np.prod(self.shape, dtype=np.int64)):
            raise ShapeMismatch(f"{self.name}: {self.data.size} elements for shape {self.shape}")

    @property
    def count(self) -> int:
        return self.data.size


@dataclass(eq=False)
class TensorStore:
    tensors: list[Tensor] = field(default_factory=list)

    def __post_init__(self):
        names = [t.name for t in self.tensors]
        if len(set(names)) != len(names):
            raise FormatError("duplicate tensor names")

    def __len__(self):
        return len(self.tensors)

    def __getitem__(self, name: str) -> Tensor:
        for t in self.tensors:
            if t.name == name:
                return t
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.tensors]


def write(store: TensorStore) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(store.tensors))]
    for t in store.tensors:
        name = t.name.encode("utf-8")
        if len(name) > 0xFFFF:
            raise FormatError(f"tensor name too long ({len(name)} bytes)")
        if len(t.shape) > 0xFF:
            raise FormatError("tensor rank above 255")
        parts.append(struct.pack("<H", len(name)))
        parts.append(name)
        parts.append(struct.pack("<BB", t.dtype, len(t.shape)))
        parts.append(struct.pack(f"<{len(t.shape)}I", *t.shape))
        parts.append(t.data.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated file at byte {self.pos} (wanted {n} more)")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read(buf: bytes) -> TensorStore:
    r = _Reader(buf)
    if bytes(r.take(4)) != MAGIC:
        raise FormatError("bad magic")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    tensors = []
    seen = set()
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        try:
            name = bytes(r.take(name_len)).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"tensor name is not UTF-8: {exc}") from None
        if name in seen:
            raise FormatError(f"duplicate tensor name {name!r}")
        seen.add(name)
        dtype, rank = r.unpack("<BB")
        if dtype not in DTYPES:
            raise FormatError(f"unknown dtype code {dtype}")
        dims = r.unpack(f"<{rank}I")
        n = 1
        for dim in dims:
            n *= dim
        nbytes = n * DTYPES[dtype].itemsize
        if nbytes > len(r.buf) - r.pos:
            raise FormatError(f"tensor {name!r} claims {n} elements, file too short")
        data = np.frombuffer(r.take(nbytes), dtype=DTYPES[dtype]).copy()
        tensors.append(Tensor(name, dtype, dims, data))
    if r.pos != len(r.buf):
        raise FormatError(f"{len(r.buf) - r.pos} trailing bytes")
    return TensorStore(tensors)


def load(path) -> TensorStore:
    return read(Path(path).read_bytes())


def save(store: TensorStore, path) -> None:
    Path(path).write_bytes(write(store))


def from_raw_f32(buf: bytes, name: str = "w") -> TensorStore:
    """Wrap a headerless little-endian f32 stream as a one-tensor store."""
    if len(buf) % 4:
        raise FormatError("raw f32 stream length is not a multiple of 4")
    data = np.frombuffer(buf, dtype="<f4").copy()
    return TensorStore([Tensor(name, F32, (data.size,), data)])


def to_raw_f32(store: TensorStore) -> bytes:
    for t in store.tensors:
        if t.dtype != F32:
            raise FormatError(f"tensor {t.name!r} is not F32")
    return b"".join(t.data.tobytes() for t in store.tensors)


def header(store: TensorStore) -> list[dict]:
    """One record per tensor with its byte offset in the written file."""
    out = []
    pos = 12
    for t in store.tensors:
        name_len = len(t.name.encode("utf-8"))
        pos += 2 + name_len + 2 + 4 * len(t.shape)
        out.append(
            {
                "name": t.name,
                "dtype": DTYPE_NAMES[t.dtype],
                "shape": list(t.shape),
                "count": t.count,
                "data_offset": pos,
            }
        )
        pos += t.data.nbytes
    return out


@dataclass(eq=False)
class FlatView:
    """All selected elements widened to float64, in file order.

    ``segments`` maps back to the store: ``(tensor_index, view_start, count)``.
    """

    values: np.ndarray
    segments: list[tuple[int, int, int]]

    def __len__(self):
        return self.values.size

    def with_values(self, values: np.ndarray) -> FlatView:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise ShapeMismatch(f"expected {self.values.size} values, got {values.size}")
        return FlatView(values, self.segments)


def gather(store: TensorStore, include: str | None = None) -> FlatView:
    chosen = [
        i
        for i, t in enumerate(store.tensors)
        if include is None or fnmatch.fnmatchcase(t.name, include)
    ]
    if not chosen:
        raise EmptySelection(f"no tensor matches {include!r}")
    segments = []
    pos = 0
    for i in chosen:
        n = store.tensors[i].count
        segments.append((i, pos, n))
        pos += n
    values = np.empty(pos)
    for i, start, n in segments:
        values[start : start + n] = store.tensors[i].data
    return FlatView(values, segments)


def scatter(store: TensorStore, view: FlatView) -> TensorStore:
    """Write ``view`` back, rounding to each tensor's dtype (nearest-even).

    Elements whose float64 value is bitwise unchanged keep their original
    bits, so an identity edit reproduces the store exactly (NaN payloads
    included).
    """
    total = 0
    for i, start, n in view.segments:
        if i >= len(store.tensors) or store.tensors[i].count != n or start != total:
            raise ShapeMismatch("view was not gathered from this store")
        total += n
    if total != view.values.size:
        raise ShapeMismatch("view length does not match its segments")

    tensors = list(store.tensors)
    for i, start, n in view.segments:
        t = tensors[i]
        new = view.values[start : start + n]
        with np.errstate(over="ignore", invalid="ignore"):
            rounded = new.astype(DTYPES[t.dtype])
        orig = t.data.astype(np.float64)
        same = new.view(np.uint64) == orig.view(np.uint64)
        data = np.where(same, t.data, rounded)
        tensors[i] = Tensor(t.name, t.dtype, t.shape, data)
    return TensorStore(tensors)
