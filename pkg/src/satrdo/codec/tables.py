"""Baseline JPEG luminance tables (ITU-T T.81 Annex K) and derived lookups.

Quantization tables are kept in natural row-major 8x8 order; the entropy
coder walks coefficients in zig-zag order.
"""
import numpy as np

BASE_LUMA_QTABLE = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
], dtype=np.int32).reshape(8, 8)

# ZIGZAG[k] = row-major index of the k-th coefficient in scan order
ZIGZAG = np.array([
    0, 1, 8, 16, 9, 2, 3, 10,
    17, 24, 32, 25, 18, 11, 4, 5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13, 6, 7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
], dtype=np.intp)

DC_BITS = (0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0)
DC_VALS = tuple(range(12))

AC_BITS = (0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D)
AC_VALS = (
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12,
    0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08,
    0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0A, 0x16,
    0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
    0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79,
    0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98,
    0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7,
    0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6,
    0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5,
    0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4,
    0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA,
    0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
)

EOB = 0x00
ZRL = 0xF0
MAX_DC_SIZE = 11
MAX_AC_SIZE = 10


class HuffmanTable:
    """Canonical Huffman code built from a (BITS, HUFFVAL) pair.

    ``code``/``length`` are indexed by symbol for encoding. ``mincode``,
    ``maxcode`` and ``valptr`` follow the T.81 F.2.2.3 decoding procedure,
    indexed by code length 1..16.
    """

    def __init__(self, bits, values):
        if len(bits) != 16 or sum(bits) != len(values):
            raise ValueError("BITS must have 16 counts summing to len(HUFFVAL)")
        self.code = np.zeros(256, dtype=np.int64)
        self.length = np.zeros(256, dtype=np.int64)
        self.mincode = np.zeros(17, dtype=np.int64)
        self.maxcode = np.full(17, -1, dtype=np.int64)
        self.valptr = np.zeros(17, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.int64)

        code = 0
        k = 0
        for nbits in range(1, 17):
            count = bits[nbits - 1]
            if count:
                self.valptr[nbits] = k
                self.mincode[nbits] = code
                for _ in range(count):
                    sym = values[k]
                    self.code[sym] = code
                    self.length[sym] = nbits
                    code += 1
                    k += 1
                self.maxcode[nbits] = code - 1
            code <<= 1

    def bits_for(self, symbol):
        return int(self.length[symbol])


DC_TABLE = HuffmanTable(DC_BITS, DC_VALS)
AC_TABLE = HuffmanTable(AC_BITS, AC_VALS)

# SIZE_LUT[v] = bit length of v, for 0 <= v < 4096
SIZE_LUT = np.zeros(4096, dtype=np.int64)
SIZE_LUT[1:] = np.floor(np.log2(np.arange(1, 4096))).astype(np.int64) + 1
