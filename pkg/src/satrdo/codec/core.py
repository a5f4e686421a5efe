import zlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from satrdo.codec import kernels
from satrdo.codec.tables import AC_TABLE, BASE_LUMA_QTABLE, DC_TABLE, ZIGZAG

BLOCK = 8


class MalformedStreamError(ValueError):
    """Bitstream is truncated, carries an invalid code, or has trailing data."""


class ChecksumError(ValueError):
    """Decoded pixels do not match the checksum recorded at encode time."""


def _check_qv(qv):
    if isinstance(qv, bool) or int(qv) != qv or not 1 <= qv <= 100:
        raise ValueError(f"quality value must be an integer in [1, 100], got {qv!r}")
    return int(qv)


@lru_cache(maxsize=None)
def _qtable_cached(qv):
    scale = 5000 // qv if qv < 50 else 200 - 2 * qv
    table = (BASE_LUMA_QTABLE.astype(np.int64) * scale + 50) // 100
    table = np.clip(table, 1, 255).astype(np.int32)
    table.setflags(write=False)
    return table


def quality_to_qtable(qv):
    """Row-major 8x8 luminance quantization table for quality ``qv``.

    Uses the libjpeg scaling rule: ``5000/qv`` below 50, ``200 - 2*qv`` above.
    """
    return _qtable_cached(_check_qv(qv))


def _dct_matrix():
    k = np.arange(BLOCK)[:, None]
    n = np.arange(BLOCK)[None, :]
    c = np.sqrt(2.0 / BLOCK) * np.cos((2 * n + 1) * k * np.pi / (2 * BLOCK))
    c[0, :] = np.sqrt(1.0 / BLOCK)
    return c


DCT_MATRIX = _dct_matrix()
_DCT_T = np.ascontiguousarray(DCT_MATRIX.T)


def dct8x8_forward(block):
    """Orthonormal 2-D type-II DCT. Accepts ``(8, 8)`` or ``(..., 8, 8)``."""
    block = np.asarray(block, dtype=np.float64)
    return np.matmul(np.matmul(DCT_MATRIX, block), _DCT_T)


def dct8x8_inverse(coeffs):
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return np.matmul(np.matmul(_DCT_T, coeffs), DCT_MATRIX)


def to_blocks(patches):
    """``(n, h, w)`` pixel patches -> ``(n, h/8 * w/8, 8, 8)``, raster block order."""
    n, h, w = patches.shape
    if h % BLOCK or w % BLOCK:
        raise ValueError(f"patch dimensions {w}x{h} are not multiples of 8")
    b = patches.reshape(n, h // BLOCK, BLOCK, w // BLOCK, BLOCK).transpose(0, 1, 3, 2, 4)
    return b.reshape(n, (h // BLOCK) * (w // BLOCK), BLOCK, BLOCK)


def from_blocks(blocks, height, width):
    n = blocks.shape[0]
    b = blocks.reshape(n, height // BLOCK, width // BLOCK, BLOCK, BLOCK).transpose(0, 1, 3, 2, 4)
    return b.reshape(n, height, width)


def forward_blocks(patches):
    """Level-shifted DCT coefficients for a stack of 8-bit patches."""
    blocks = to_blocks(np.asarray(patches))
    return dct8x8_forward(blocks.astype(np.float64) - 128.0)


def quantize(coeffs, qtable):
    """Round-half-away-from-zero quantization to int32."""
    scaled = np.abs(coeffs) / qtable
    return (np.sign(coeffs) * np.floor(scaled + 0.5)).astype(np.int32)


def reconstruct(qcoeffs, qtable):
    """Dequantize, inverse DCT, undo level shift, round and clamp to uint8."""
    pixels = dct8x8_inverse(qcoeffs.astype(np.float64) * qtable) + 128.0
    return np.clip(np.floor(pixels + 0.5), 0, 255).astype(np.uint8)


def zigzag(qcoeffs):
    """``(..., 8, 8)`` -> ``(..., 64)`` in zig-zag scan order."""
    flat = qcoeffs.reshape(qcoeffs.shape[:-2] + (64,))
    return np.ascontiguousarray(flat[..., ZIGZAG])


def unzigzag(zz):
    flat = np.empty_like(zz)
    flat[..., ZIGZAG] = zz
    return flat.reshape(zz.shape[:-1] + (BLOCK, BLOCK))


@dataclass(frozen=True)
class EncodedPatch:
    qv: int
    rate_bits: int
    recon: np.ndarray = field(repr=False)
    bitstream: bytes = field(repr=False)

    @property
    def checksum(self):
        return zlib.crc32(np.ascontiguousarray(self.recon).tobytes())


def _as_patch(patch):
    patch = np.asarray(patch)
    if patch.ndim != 2:
        raise ValueError(f"patch must be 2-D, got shape {patch.shape}")
    if patch.dtype != np.uint8:
        if patch.size and (patch.min() < 0 or patch.max() > 255 or not np.all(patch == np.round(patch))):
            raise ValueError("patch samples must be integers in [0, 255]")
        patch = patch.astype(np.uint8)
    h, w = patch.shape
    if h == 0 or w == 0 or h % BLOCK or w % BLOCK:
        raise ValueError(f"patch dimensions {w}x{h} are not positive multiples of 8")
    return patch


def encode_patch(patch, qv):
    """Encode one patch; the payload carries no headers or markers."""
    qv = _check_qv(qv)
    patch = _as_patch(patch)
    h, w = patch.shape
    qtable = quality_to_qtable(qv)

    q = quantize(forward_blocks(patch[None]), qtable)
    recon = from_blocks(reconstruct(q, qtable), h, w)[0]
    zz = zigzag(q)
    kernels._check_ranges(zz)

    n_blocks = zz.shape[1]
    buf = np.zeros(n_blocks * 210 + 8, dtype=np.uint8)
    nbits = int(kernels.write_bits(zz[0], DC_TABLE.code, DC_TABLE.length,
                                   AC_TABLE.code, AC_TABLE.length, buf))
    nbytes = (nbits + 7) // 8
    pad = nbytes * 8 - nbits
    if pad:
        buf[nbytes - 1] |= (1 << pad) - 1
    recon.setflags(write=False)
    return EncodedPatch(qv=qv, rate_bits=nbits, recon=recon, bitstream=buf[:nbytes].tobytes())


def decode_coefficients(bitstream, n_blocks):
    """Entropy-decode to zig-zag coefficients; returns ``(zz, payload_bits)``.

    The padding after the payload must be fewer than 8 one-bits.
    """
    data = np.frombuffer(bytes(bitstream), dtype=np.uint8)
    zz = np.zeros((n_blocks, 64), dtype=np.int32)
    status, used = kernels.read_bits(data, n_blocks, kernels.DC_DECODE, kernels.AC_DECODE, zz)
    if status == kernels.TRUNCATED:
        raise MalformedStreamError(f"bitstream truncated after {used} bits")
    if status == kernels.BAD_CODE:
        raise MalformedStreamError(f"invalid Huffman code at bit {used}")
    if status == kernels.BAD_RUN:
        raise MalformedStreamError(f"run length overflows block at bit {used}")
    tail = data.size * 8 - used
    if tail >= 8:
        raise MalformedStreamError(f"{tail} trailing bits after payload")
    if tail and (data[-1] & ((1 << tail) - 1)) != (1 << tail) - 1:
        raise MalformedStreamError("padding bits are not all ones")
    return zz, int(used)


def decode_patch(bitstream, qv, dims, checksum=None):
    """Decode a bitstream from :func:`encode_patch`.

    ``dims`` is ``(width, height)``. When ``checksum`` is given (see
    :attr:`EncodedPatch.checksum`), a mismatch raises :class:`ChecksumError`,
    which is how a wrong ``qv`` gets caught.
    """
    qv = _check_qv(qv)
    width, height = dims
    if width <= 0 or height <= 0 or width % BLOCK or height % BLOCK:
        raise ValueError(f"patch dimensions {width}x{height} are not positive multiples of 8")
    n_blocks = (width // BLOCK) * (height // BLOCK)
    zz, _ = decode_coefficients(bitstream, n_blocks)
    q = unzigzag(zz)[None]
    recon = from_blocks(reconstruct(q, quality_to_qtable(qv)), height, width)[0]
    if checksum is not None and zlib.crc32(recon.tobytes()) != checksum:
        raise ChecksumError("decoded patch does not match checksum; wrong qv or dims?")
    return recon
