import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import pytest

from pcfg.image import Image, SymbolKind, make_symbol
from pcfg.isa import Opcode, encode


def asm_image(text_base, instrs, symbols=(), data_base=0x100000, data=b""):
    """Assemble an image from (kind, a, b) tuples at absolute addresses."""
    text = bytearray()
    for item in instrs:
        kind = item[0]
        a = item[1] if len(item) > 1 else 0
        b = item[2] if len(item) > 2 else 0
        text += encode(kind, a, b)
    syms = tuple(
        make_symbol(off, name, SymbolKind.FUNC, noreturn)
        for off, name, noreturn in symbols
    )
    return Image(text_base, bytes(text), data_base, bytes(data), syms)


@pytest.fixture
def paper_layout():
    """A block [0x4, 0xd) ending in a return, splittable at 0xa."""
    return asm_image(
        0x4,
        [
            (Opcode.ALU,),
            (Opcode.ALU,),
            (Opcode.NOP,),
            (Opcode.NOP,),
            (Opcode.RET,),
        ],
    )
