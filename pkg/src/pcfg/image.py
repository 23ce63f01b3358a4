"""Loaded binary image: text and data sections plus a symbol table.

Container layout (little-endian): magic "PCFG", version u16, then three
sections in order — TEXT {base u64, len u32, bytes}, DATA {base u64,
len u32, bytes}, SYMS {count u32, entries {offset u64, kind u8, noreturn
u8, name_len u16, mangled bytes}}. The pretty name is the mangled name
stripped of its trailing "$suffix"; the typed name appends "()" for
function symbols.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

from ._kernels import contains_cfi_scan
from .errors import MalformedImageError, OutOfRangeError
from .isa import Instruction, decode_at

MAGIC = b"PCFG"
VERSION = 1


class SymbolKind(Enum):
    FUNC = 0
    OBJECT = 1


@dataclass(frozen=True)
class SymbolEntry:
    offset: int
    mangled: str
    pretty: str
    typed: str
    kind: SymbolKind
    known_noreturn: bool


def make_symbol(
    offset: int, mangled: str, kind: SymbolKind, known_noreturn: bool = False
) -> SymbolEntry:
    """Build a symbol, deriving pretty/typed names from the mangled name."""
    if not mangled:
        raise MalformedImageError("empty mangled symbol name")
    pretty = mangled[: mangled.rindex("$")] if "$" in mangled else mangled
    typed = pretty + "()" if kind is SymbolKind.FUNC else pretty
    return SymbolEntry(offset, mangled, pretty, typed, kind, known_noreturn)


@dataclass(frozen=True)
class Image:
    text_base: int
    text: bytes
    data_base: int
    data: bytes
    symbols: tuple[SymbolEntry, ...]

    @property
    def text_end(self) -> int:
        return self.text_base + len(self.text)

    @property
    def data_end(self) -> int:
        return self.data_base + len(self.data)

    def func_symbols(self) -> list[SymbolEntry]:
        return [s for s in self.symbols if s.kind is SymbolKind.FUNC]


def _validate(image: Image) -> Image:
    t0, t1 = image.text_base, image.text_end
    d0, d1 = image.data_base, image.data_end
    if image.text and image.data and t0 < d1 and d0 < t1:
        raise MalformedImageError("text and data sections overlap")
    for s in image.symbols:
        if s.kind is SymbolKind.FUNC and not t0 <= s.offset < t1:
            raise MalformedImageError(
                f"function symbol {s.mangled!r} at 0x{s.offset:x} outside text"
            )
    return image


def pack_image(image: Image) -> bytes:
    """Serialize an image to container bytes."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", VERSION)
    out += struct.pack("<QI", image.text_base, len(image.text))
    out += image.text
    out += struct.pack("<QI", image.data_base, len(image.data))
    out += image.data
    out += struct.pack("<I", len(image.symbols))
    for s in image.symbols:
        name = s.mangled.encode("utf-8")
        out += struct.pack(
            "<QBBH", s.offset, s.kind.value, int(s.known_noreturn), len(name)
        )
        out += name
    return bytes(out)


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.raw):
            raise MalformedImageError(f"truncated {what}")
        chunk = self.raw[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, what))


def load_image(raw: bytes) -> Image:
    """Parse and validate container bytes into an Image."""
    r = _Reader(raw)
    if r.take(4, "magic") != MAGIC:
        raise MalformedImageError("bad magic")
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise MalformedImageError(f"unsupported version {version}")
    text_base, text_len = r.unpack("<QI", "text header")
    text = r.take(text_len, "text bytes")
    data_base, data_len = r.unpack("<QI", "data header")
    data = r.take(data_len, "data bytes")
    (count,) = r.unpack("<I", "symbol count")
    symbols = []
    for _ in range(count):
        offset, kind_b, noreturn, name_len = r.unpack("<QBBH", "symbol entry")
        name = r.take(name_len, "symbol name").decode("utf-8")
        try:
            kind = SymbolKind(kind_b)
        except ValueError as exc:
            raise MalformedImageError(f"bad symbol kind {kind_b}") from exc
        symbols.append(make_symbol(offset, name, kind, bool(noreturn)))
    if r.pos != len(raw):
        raise MalformedImageError("trailing bytes after symbol table")
    return _validate(Image(text_base, text, data_base, data, tuple(symbols)))


def decode(image: Image, addr: int) -> Instruction:
    """Decode the instruction starting at `addr` in the text section."""
    if not image.text_base <= addr < image.text_end:
        raise OutOfRangeError(addr)
    return decode_at(image.text, image.text_base, addr)


def contains_cfi(image: Image, lo: int, hi: int) -> bool:
    """True iff decoding forward from `lo`, a control flow instruction
    starts and ends within [lo, hi)."""
    if lo > hi:
        raise OutOfRangeError(lo)
    if lo == hi:
        return False
    if not (image.text_base <= lo and hi <= image.text_end):
        raise OutOfRangeError(lo if lo < image.text_base else hi)
    return contains_cfi_scan(image.text, image.text_base, lo, hi)
