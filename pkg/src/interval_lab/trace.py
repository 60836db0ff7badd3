"""Instruction/memory trace model, CTR1 binary and text formats, chunk slicing.

Binary layout (little-endian)::

    header  : b"CTR1" | version u16 (=1) | flags u16 (=0) | event_count u64
    record  : pc u64 | bb_id u32 | flags u8 [| addr u64 if flags & HAS_MEM]

A JSON sidecar ``<trace>.meta.json`` carries name, input_label, event_count and
bb_count.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from interval_lab.errors import (
    BadMagic,
    ConfigError,
    MetaMismatch,
    TraceFormatError,
    TruncatedRecord,
    VersionMismatch,
)

MAGIC = b"CTR1"
VERSION = 1
HEADER = struct.Struct("<4sHHQ")
RECORD_HEAD = struct.Struct("<QIB")
ADDR = struct.Struct("<Q")
HAS_MEM = 0x1
IS_STORE = 0x2

_READ_BLOCK = 1 << 20


@dataclass(frozen=True, slots=True)
class TraceEvent:
    pc: int
    bb_id: int
    addr: int | None = None
    kind: str | None = None  # "load" | "store"

    def __post_init__(self):
        if (self.addr is None) != (self.kind is None):
            raise ValueError("addr and kind must be given together")
        if self.kind is not None and self.kind not in ("load", "store"):
            raise ValueError(f"unknown memory kind {self.kind!r}")
        if self.bb_id < 0:
            raise ValueError("bb_id must be non-negative")

    @property
    def has_mem(self):
        return self.addr is not None


@dataclass(frozen=True)
class TraceMeta:
    name: str
    input_label: str
    event_count: int
    bb_count: int | None

    def to_json(self):
        return asdict(self)


@dataclass(frozen=True)
class ChunkIndex:
    chunk_size: int
    boundaries: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.boundaries)


@dataclass(eq=False)
class Trace:
    """Columnar, in-memory trace. ``addr`` is 0 where the event has no memory op."""

    pc: np.ndarray
    bb: np.ndarray
    flags: np.ndarray
    addr: np.ndarray
    name: str = "trace"
    input_label: str = ""
    _mem: tuple | None = field(default=None, repr=False)
    _digest: str | None = field(default=None, repr=False)

    def __post_init__(self):
        self.pc = np.ascontiguousarray(self.pc, dtype=np.uint64)
        self.bb = np.ascontiguousarray(self.bb, dtype=np.uint32)
        self.flags = np.ascontiguousarray(self.flags, dtype=np.uint8)
        self.addr = np.ascontiguousarray(self.addr, dtype=np.uint64)
        n = len(self.pc)
        if not (len(self.bb) == len(self.flags) == len(self.addr) == n):
            raise ValueError("trace columns have different lengths")

    def __len__(self):
        return len(self.pc)

    @classmethod
    def from_events(cls, events: Iterable[TraceEvent], name="trace", input_label=""):
        events = list(events)
        pc = np.fromiter((e.pc for e in events), dtype=np.uint64, count=len(events))
        bb = np.fromiter((e.bb_id for e in events), dtype=np.uint32, count=len(events))
        flags = np.fromiter(
            (
                (HAS_MEM | (IS_STORE if e.kind == "store" else 0)) if e.addr is not None else 0
                for e in events
            ),
            dtype=np.uint8,
            count=len(events),
        )
        addr = np.fromiter(
            (e.addr if e.addr is not None else 0 for e in events), dtype=np.uint64, count=len(events)
        )
        return cls(pc, bb, flags, addr, name=name, input_label=input_label)

    def events(self) -> Iterator[TraceEvent]:
        for pc, bb, fl, addr in zip(
            self.pc.tolist(), self.bb.tolist(), self.flags.tolist(), self.addr.tolist()
        ):
            if fl & HAS_MEM:
                yield TraceEvent(pc, bb, addr, "store" if fl & IS_STORE else "load")
            else:
                yield TraceEvent(pc, bb)

    def __getitem__(self, i):
        fl = int(self.flags[i])
        if fl & HAS_MEM:
            kind = "store" if fl & IS_STORE else "load"
            return TraceEvent(int(self.pc[i]), int(self.bb[i]), int(self.addr[i]), kind)
        return TraceEvent(int(self.pc[i]), int(self.bb[i]))

    @property
    def meta(self) -> TraceMeta:
        bb_count = int(len(np.unique(self.bb))) if len(self) else 0
        return TraceMeta(self.name, self.input_label, len(self), bb_count)

    def mem_lists(self):
        """(event positions, addresses, is_store) of memory events as Python lists."""
        if self._mem is None:
            idx = np.flatnonzero(self.flags & HAS_MEM)
            self._mem = (
                idx.tolist(),
                self.addr[idx].tolist(),
                ((self.flags[idx] & IS_STORE) != 0).tolist(),
            )
        return self._mem

    def digest(self) -> str:
        """Content hash over the event columns (name and label excluded)."""
        if self._digest is None:
            h = hashlib.sha256()
            for col in (self.pc, self.bb, self.flags, self.addr):
                h.update(col.tobytes())
            self._digest = h.hexdigest()
        return self._digest


def _as_trace(events, meta: TraceMeta | None = None) -> Trace:
    if isinstance(events, Trace):
        return events
    name = meta.name if meta else "trace"
    label = meta.input_label if meta else ""
    return Trace.from_events(events, name=name, input_label=label)


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def encode_records(trace: Trace) -> bytes:
    """Vectorised CTR1 record encoding (no header)."""
    n = len(trace)
    has_mem = (trace.flags & HAS_MEM) != 0
    sizes = np.where(has_mem, 21, 13).astype(np.int64)
    starts = np.zeros(n, dtype=np.int64)
    if n:
        np.cumsum(sizes[:-1], out=starts[1:])
    total = int(sizes.sum())
    buf = np.zeros(total, dtype=np.uint8)

    def put(offsets, arr, width):
        raw = arr.astype(f"<u{width}").view(np.uint8).reshape(-1, width)
        buf[offsets[:, None] + np.arange(width)] = raw

    put(starts, trace.pc, 8)
    put(starts + 8, trace.bb, 4)
    buf[starts + 12] = trace.flags
    put(starts[has_mem] + 13, trace.addr[has_mem], 8)
    return buf.tobytes()


def write_trace(events, meta: TraceMeta, path) -> Path:
    trace = _as_trace(events, meta)
    if meta.event_count != len(trace):
        raise MetaMismatch(f"meta says {meta.event_count} events, got {len(trace)}")
    actual_bb = trace.meta.bb_count
    if meta.bb_count is not None and meta.bb_count != actual_bb:
        raise MetaMismatch(f"meta says {meta.bb_count} basic blocks, got {actual_bb}")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, VERSION, 0, len(trace)))
        f.write(encode_records(trace))
    meta_path(path).write_text(json.dumps(meta.to_json(), indent=2) + "\n")
    return path


def _read_header(f, path):
    raw = f.read(HEADER.size)
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: not a CTR1 trace")
    if len(raw) < HEADER.size:
        raise TruncatedRecord(len(raw), f"{path}: truncated header")
    _, version, _flags, count = HEADER.unpack(raw)
    if version != VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {VERSION}")
    return count


def _load_meta(path, count):
    mp = meta_path(path)
    if mp.exists():
        data = json.loads(mp.read_text())
        meta = TraceMeta(
            data.get("name", Path(path).stem),
            data.get("input_label", ""),
            int(data["event_count"]),
            data.get("bb_count"),
        )
        if meta.event_count != count:
            raise MetaMismatch(f"sidecar says {meta.event_count} events, header says {count}")
        return meta
    return TraceMeta(Path(path).stem, "", count, None)


def _iter_records(f, count, offset):
    buf = b""
    pos = 0
    emitted = 0
    head = RECORD_HEAD.size
    while emitted < count:
        if len(buf) - pos < 21:
            chunk = f.read(_READ_BLOCK)
            buf = buf[pos:] + chunk
            pos = 0
        if len(buf) - pos < head:
            raise TruncatedRecord(offset)
        pc, bb, fl = RECORD_HEAD.unpack_from(buf, pos)
        if fl & HAS_MEM:
            if len(buf) - pos < head + 8:
                raise TruncatedRecord(offset)
            (addr,) = ADDR.unpack_from(buf, pos + head)
            yield TraceEvent(pc, bb, addr, "store" if fl & IS_STORE else "load")
            pos += head + 8
            offset += head + 8
        else:
            yield TraceEvent(pc, bb)
            pos += head
            offset += head
        emitted += 1
        if emitted == count and (len(buf) - pos or f.read(1)):
            raise TraceFormatError(f"trailing bytes after {count} records at offset {offset}")


def read_trace(path) -> tuple[TraceMeta, Iterator[TraceEvent]]:
    """Open a CTR1 file and stream its events.

    Header validation happens eagerly; record errors surface while iterating.
    """
    path = Path(path)
    f = open(path, "rb")
    try:
        count = _read_header(f, path)
        meta = _load_meta(path, count)
    except Exception:
        f.close()
        raise

    def stream():
        with f:
            yield from _iter_records(f, count, HEADER.size)

    return meta, stream()


def load_trace(path) -> Trace:
    """Materialise a binary or text trace file into a ``Trace``.

    ``.ctr`` files and anything starting with the magic are read as binary.
    """
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(4)
    if head == MAGIC or path.suffix == ".ctr":
        meta, events = read_trace(path)
        trace = Trace.from_events(events, name=meta.name, input_label=meta.input_label)
    else:
        trace = read_text_trace(path)
    return trace


def write_text_trace(events, path, comment=None):
    trace = _as_trace(events)
    with open(path, "w") as f:
        if comment:
            for line in comment.splitlines():
                f.write(f"# {line}\n")
        for ev in trace.events():
            if ev.has_mem:
                f.write(f"{ev.pc:#x} {ev.bb_id} {'S' if ev.kind == 'store' else 'L'} {ev.addr:#x}\n")
            else:
                f.write(f"{ev.pc:#x} {ev.bb_id}\n")


def parse_text_events(lines) -> Iterator[TraceEvent]:
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if len(parts) == 2:
                yield TraceEvent(int(parts[0], 0), int(parts[1], 0))
            elif len(parts) == 4 and parts[2] in ("L", "S"):
                kind = "load" if parts[2] == "L" else "store"
                yield TraceEvent(int(parts[0], 0), int(parts[1], 0), int(parts[3], 0), kind)
            else:
                raise ValueError("expected 'pc bb_id [L|S addr]'")
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None


def read_text_trace(path, name=None, input_label="") -> Trace:
    path = Path(path)
    with open(path) as f:
        events = list(parse_text_events(f))
    return Trace.from_events(events, name=name or path.stem, input_label=input_label)


def slice_chunks(meta, chunk_size: int) -> ChunkIndex:
    """Tile ``event_count`` instructions into fixed-size chunks; the last may be short."""
    if chunk_size < 1:
        raise ConfigError("chunk_size must be >= 1")
    count = meta if isinstance(meta, int) else meta.event_count
    n = math.ceil(count / chunk_size)
    bounds = tuple((i * chunk_size, min(chunk_size, count - i * chunk_size)) for i in range(n))
    return ChunkIndex(chunk_size, bounds)
