"""Array-file reading/writing and the dataset manifest.

File format (write side, version 1.0):
  bytes 0-5   magic  0x93 'N' 'U' 'M' 'P' 'Y'
  bytes 6-7   version 0x01 0x00
  bytes 8-9   little-endian u16 header length
  then the ASCII dict  {'descr': D, 'fortran_order': False, 'shape': S, }
  padded with spaces and terminated by '\n' so the payload starts at a
  multiple of 64; payload is little-endian elements in row-major order.

Read side accepts versions 1.0 and 2.0 (u32 header length) and payload
offsets that are any multiple of 16. Supported element types are '<f4',
'<f8' and '<i8' only.
"""

from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"\x93NUMPY"
_DTYPES = {"<f4": np.float32, "<f8": np.float64, "<i8": np.int64}
_DESCRS = {np.dtype(np.float32): "<f4", np.dtype(np.float64): "<f8",
           np.dtype(np.int64): "<i8"}
ALIGN_WRITE = 64
ALIGN_READ = 16


class TensorFormatError(ValueError):
    """Malformed array file; `offset` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class BadMagicError(TensorFormatError):
    pass


class UnsupportedDtypeError(TensorFormatError):
    pass


class PayloadLengthError(TensorFormatError):
    pass


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Tensor:
    """An n-dimensional array: dtype code, shape, row-major f64/f32/i64 data."""

    descr: str
    shape: tuple
    data: np.ndarray  # shaped, row-major

    def __post_init__(self):
        if self.descr not in _DTYPES:
            raise UnsupportedDtypeError(f"unsupported dtype code {self.descr!r}", 0)
        expect = 1
        for s in self.shape:
            if s < 0:
                raise ValueError(f"negative extent in shape {self.shape}")
            expect *= s
        if self.data.size != expect:
            raise ValueError(
                f"shape {self.shape} implies {expect} elements, buffer has {self.data.size}")

    @staticmethod
    def from_array(arr: np.ndarray) -> "Tensor":
        dt = np.dtype(arr.dtype)
        if dt not in _DESCRS:
            raise UnsupportedDtypeError(f"unsupported dtype {dt}", 0)
        return Tensor(_DESCRS[dt], tuple(arr.shape), np.ascontiguousarray(arr))

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (self.descr == other.descr and self.shape == other.shape
                and self.data.tobytes() == other.data.tobytes())


def read_array(buf: bytes) -> Tensor:
    """Parse an array file; fortran-order payloads are transposed on load."""
    if buf[:6] != MAGIC:
        raise BadMagicError(f"bad magic {buf[:6]!r}", 0)
    if len(buf) < 10:
        raise TensorFormatError("truncated before header length", len(buf))
    major, minor = buf[6], buf[7]
    if (major, minor) == (1, 0):
        hlen = struct.unpack_from("<H", buf, 8)[0]
        hstart = 10
    elif (major, minor) == (2, 0):
        if len(buf) < 12:
            raise TensorFormatError("truncated v2 header length", len(buf))
        hlen = struct.unpack_from("<I", buf, 8)[0]
        hstart = 12
    else:
        raise TensorFormatError(f"unsupported format version {major}.{minor}", 6)
    offset = hstart + hlen
    if len(buf) < offset:
        raise TensorFormatError("truncated header", len(buf))
    header = buf[hstart:offset]
    if not header.endswith(b"\n"):
        raise TensorFormatError("header not newline-terminated", offset - 1)
    if offset % ALIGN_READ != 0:
        raise TensorFormatError(
            f"payload offset {offset} is not a multiple of {ALIGN_READ}", offset)
    try:
        meta = ast.literal_eval(header.decode("latin1").strip())
    except (ValueError, SyntaxError) as exc:
        raise TensorFormatError(f"unparseable header dict: {exc}", hstart) from None
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise TensorFormatError(f"unexpected header keys {sorted(meta)}", hstart)
    descr = meta["descr"]
    if descr not in _DTYPES:
        raise UnsupportedDtypeError(f"unsupported dtype code {descr!r}", hstart)
    shape = tuple(int(s) for s in meta["shape"])
    fortran = bool(meta["fortran_order"])
    dtype = np.dtype(_DTYPES[descr]).newbyteorder("<")
    count = 1
    for s in shape:
        count *= s
    expected = count * dtype.itemsize
    actual = len(buf) - offset
    if actual != expected:
        raise PayloadLengthError(
            f"payload is {actual} bytes, header implies {expected}", offset)
    flat = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
    if fortran:
        arr = np.ascontiguousarray(flat.reshape(shape[::-1]).T)
    else:
        arr = flat.reshape(shape)
    return Tensor(descr, shape, arr)


def write_array(t: Tensor) -> bytes:
    """Serialize a Tensor; round-trips bit-exactly through read_array."""
    header_dict = ("{'descr': %r, 'fortran_order': False, 'shape': %r, }"
                   % (t.descr, tuple(int(s) for s in t.shape)))
    base = len(MAGIC) + 2 + 2 + len(header_dict) + 1  # +1 for '\n'
    pad = (-base) % ALIGN_WRITE
    header = header_dict + " " * pad + "\n"
    if len(header) > 0xFFFF:
        raise ValueError("header too large for version 1.0")
    out = bytearray()
    out += MAGIC
    out += b"\x01\x00"
    out += struct.pack("<H", len(header))
    out += header.encode("latin1")
    dtype = np.dtype(_DTYPES[t.descr]).newbyteorder("<")
    out += np.ascontiguousarray(t.data, dtype=dtype).tobytes()
    return bytes(out)


def load_tensor(path) -> Tensor:
    return read_array(Path(path).read_bytes())


def save_tensor(path, t: Tensor) -> None:
    Path(path).write_bytes(write_array(t))


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    label_name: str
    feature_path: str
    backbone: str
    stage: str


@dataclass(frozen=True)
class DatasetManifest:
    """Binds per-sample feature files to labels and the class-name table."""

    class_names: tuple
    feature_dim: int
    entries: tuple
    root: Path = field(default=Path("."), compare=False)

    def label_index(self, name: str) -> int:
        return self.class_names.index(name)

    def entry_path(self, entry: ManifestEntry) -> Path:
        return self.root / entry.feature_path


def load_manifest(path) -> DatasetManifest:
    """Load and validate the manifest JSON; paths resolve relative to it."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from None
    for key in ("class_names", "feature_dim", "entries"):
        if key not in doc:
            raise ManifestError(f"manifest missing required key {key!r}")
    class_names = tuple(doc["class_names"])
    if len(set(class_names)) != len(class_names) or not class_names:
        raise ManifestError("class_names must be a non-empty list of unique names")
    feature_dim = doc["feature_dim"]
    if not isinstance(feature_dim, int) or feature_dim < 1:
        raise ManifestError(f"feature_dim must be a positive integer, got {feature_dim!r}")
    raw = doc["entries"]
    if not raw:
        raise ManifestError("EmptyManifest: entries list is empty")
    entries = []
    seen = set()
    for i, e in enumerate(raw):
        try:
            entry = ManifestEntry(e["sample_id"], e["label_name"],
                                  e["feature_path"], e["backbone"], e["stage"])
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"entry {i} malformed: {exc}") from None
        if entry.sample_id in seen:
            raise ManifestError(f"duplicate sample_id {entry.sample_id!r}")
        seen.add(entry.sample_id)
        if entry.label_name not in class_names:
            raise ManifestError(f"UnknownLabel({entry.label_name!r}) for sample "
                                f"{entry.sample_id!r}")
        if not (path.parent / entry.feature_path).is_file():
            raise ManifestError(f"missing feature file {entry.feature_path!r} "
                                f"for sample {entry.sample_id!r}")
        entries.append(entry)
    return DatasetManifest(class_names, feature_dim, tuple(entries), root=path.parent)
