"""JPEG-style intra patch codec: 8x8 DCT, quality-scaled quantization, Huffman rate."""
from satrdo.codec.core import (
    ChecksumError,
    EncodedPatch,
    MalformedStreamError,
    dct8x8_forward,
    dct8x8_inverse,
    decode_coefficients,
    decode_patch,
    encode_patch,
    quality_to_qtable,
)

__all__ = [
    "ChecksumError",
    "EncodedPatch",
    "MalformedStreamError",
    "dct8x8_forward",
    "dct8x8_inverse",
    "decode_coefficients",
    "decode_patch",
    "encode_patch",
    "quality_to_qtable",
]
