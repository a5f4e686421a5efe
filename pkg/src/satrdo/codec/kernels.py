"""Entropy-coding kernels.

Every kernel works on zig-zag ordered, quantized coefficients shaped
``(n_patches, blocks_per_patch, 64)``. DC prediction restarts at zero at the
start of each patch.

``count_bits`` is the RD-table hot path. It has a loop implementation,
compiled by numba when available, and a vectorized numpy implementation
used when numba is off. ``write_bits`` / ``read_bits`` are only needed for
real bitstreams and fall back to the interpreted loop.
"""
import numpy as np

from satrdo._accel import NUMBA_ENABLED, jit
from satrdo.codec.tables import AC_TABLE, DC_TABLE, EOB, MAX_AC_SIZE, MAX_DC_SIZE, SIZE_LUT, ZRL

# read_bits status codes
OK = 0
TRUNCATED = 1
BAD_CODE = 2
BAD_RUN = 3

_DC_LEN = DC_TABLE.length
_DC_CODE = DC_TABLE.code
_AC_LEN = AC_TABLE.length
_AC_CODE = AC_TABLE.code


def _check_ranges(zz):
    dc = zz[..., 0].astype(np.int64)
    prev = np.zeros_like(dc)
    prev[:, 1:] = dc[:, :-1]
    if zz.size and np.abs(dc - prev).max() >= (1 << MAX_DC_SIZE):
        raise ValueError("DC difference exceeds 11-bit magnitude category")
    if zz.size and np.abs(zz[..., 1:]).max() >= (1 << MAX_AC_SIZE):
        raise ValueError("AC coefficient exceeds 10-bit magnitude category")


@jit
def _count_bits_loop(zz, dc_len, ac_len):
    n_patches, n_blocks = zz.shape[0], zz.shape[1]
    out = np.zeros(n_patches, dtype=np.int64)
    for p in range(n_patches):
        bits = 0
        pred = 0
        for b in range(n_blocks):
            diff = zz[p, b, 0] - pred
            pred = zz[p, b, 0]
            mag = abs(diff)
            size = 0
            while mag:
                size += 1
                mag >>= 1
            bits += dc_len[size] + size
            run = 0
            for k in range(1, 64):
                v = zz[p, b, k]
                if v == 0:
                    run += 1
                    continue
                while run > 15:
                    bits += ac_len[0xF0]
                    run -= 16
                mag = abs(v)
                size = 0
                while mag:
                    size += 1
                    mag >>= 1
                bits += ac_len[(run << 4) | size] + size
                run = 0
            if run > 0:
                bits += ac_len[0x00]
        out[p] = bits
    return out


def _count_bits_numpy(zz):
    n_patches, n_blocks = zz.shape[0], zz.shape[1]
    zz = zz.astype(np.int64, copy=False)

    dc = zz[:, :, 0]
    prev = np.zeros_like(dc)
    prev[:, 1:] = dc[:, :-1]
    dc_size = SIZE_LUT[np.abs(dc - prev)]
    bits = (_DC_LEN[dc_size] + dc_size).sum(axis=1)

    ac = zz[:, :, 1:].reshape(n_patches * n_blocks, 63)
    nz = ac != 0
    pos = np.where(nz, np.arange(63), -1)
    last = np.maximum.accumulate(pos, axis=1)
    before = np.empty_like(last)
    before[:, 0] = -1
    before[:, 1:] = last[:, :-1]
    run = np.arange(63) - before - 1
    size = SIZE_LUT[np.abs(ac)]
    sym = ((run & 15) << 4) | size
    per_coef = _AC_LEN[sym] + size + (run >> 4) * _AC_LEN[ZRL]
    ac_bits = np.where(nz, per_coef, 0).sum(axis=1)
    ac_bits += np.where(last[:, -1] < 62, _AC_LEN[EOB], 0)
    return bits + ac_bits.reshape(n_patches, n_blocks).sum(axis=1)


def count_bits(zz):
    """Exact entropy-coded payload bits per patch, as an int64 array."""
    zz = np.ascontiguousarray(zz, dtype=np.int32)
    _check_ranges(zz)
    if NUMBA_ENABLED:
        return _count_bits_loop(zz, _DC_LEN, _AC_LEN)
    return _count_bits_numpy(zz)


@jit
def _put(out, pos, code, length):
    for i in range(length - 1, -1, -1):
        if (code >> i) & 1:
            out[pos >> 3] |= np.uint8(0x80 >> (pos & 7))
        pos += 1
    return pos


@jit
def _magnitude_bits(v, size):
    if v < 0:
        return v + (1 << size) - 1
    return v


@jit
def write_bits(zz, dc_code, dc_len, ac_code, ac_len, out):
    """Serialize one patch ``(n_blocks, 64)`` into ``out`` (zeroed bytes).

    Returns the payload length in bits; the caller pads the tail.
    """
    pos = 0
    pred = 0
    for b in range(zz.shape[0]):
        diff = zz[b, 0] - pred
        pred = zz[b, 0]
        mag = abs(diff)
        size = 0
        while mag:
            size += 1
            mag >>= 1
        pos = _put(out, pos, dc_code[size], dc_len[size])
        if size:
            pos = _put(out, pos, _magnitude_bits(diff, size), size)
        run = 0
        for k in range(1, 64):
            v = zz[b, k]
            if v == 0:
                run += 1
                continue
            while run > 15:
                pos = _put(out, pos, ac_code[0xF0], ac_len[0xF0])
                run -= 16
            mag = abs(v)
            size = 0
            while mag:
                size += 1
                mag >>= 1
            sym = (run << 4) | size
            pos = _put(out, pos, ac_code[sym], ac_len[sym])
            pos = _put(out, pos, _magnitude_bits(v, size), size)
            run = 0
        if run > 0:
            pos = _put(out, pos, ac_code[0x00], ac_len[0x00])
    return pos


@jit
def _decode_symbol(data, nbits, pos, mincode, maxcode, valptr, values):
    code = 0
    for length in range(1, 17):
        if pos >= nbits:
            return -1, pos
        # widen before combining: uint8 scalars would wrap in interpreted mode
        code = (code << 1) | np.int64((data[pos >> 3] >> (7 - (pos & 7))) & 1)
        pos += 1
        if maxcode[length] >= 0 and code <= maxcode[length]:
            return values[valptr[length] + code - mincode[length]], pos
    return -2, pos


@jit
def _receive_extend(data, nbits, pos, size):
    if pos + size > nbits:
        return 0, pos, False
    v = 0
    for _ in range(size):
        v = (v << 1) | np.int64((data[pos >> 3] >> (7 - (pos & 7))) & 1)
        pos += 1
    if size and v < (1 << (size - 1)):
        v = v - (1 << size) + 1
    return v, pos, True


@jit
def read_bits(data, n_blocks, dc_tab, ac_tab, out):
    """Decode ``n_blocks`` blocks into ``out`` ``(n_blocks, 64)``.

    ``dc_tab``/``ac_tab`` are ``(mincode, maxcode, valptr, values)`` tuples.
    Returns ``(status, bits_consumed)``.
    """
    nbits = data.shape[0] * 8
    pos = 0
    pred = 0
    for b in range(n_blocks):
        size, pos = _decode_symbol(data, nbits, pos, dc_tab[0], dc_tab[1], dc_tab[2], dc_tab[3])
        if size == -1:
            return TRUNCATED, pos
        if size < 0:
            return BAD_CODE, pos
        diff, pos, ok = _receive_extend(data, nbits, pos, size)
        if not ok:
            return TRUNCATED, pos
        pred += diff
        out[b, 0] = pred
        k = 1
        while k < 64:
            sym, pos = _decode_symbol(data, nbits, pos, ac_tab[0], ac_tab[1], ac_tab[2], ac_tab[3])
            if sym == -1:
                return TRUNCATED, pos
            if sym < 0:
                return BAD_CODE, pos
            run = sym >> 4
            size = sym & 15
            if size == 0:
                if run == 15:
                    k += 16
                    if k > 63:
                        return BAD_RUN, pos
                    continue
                break
            k += run
            if k > 63:
                return BAD_RUN, pos
            v, pos, ok = _receive_extend(data, nbits, pos, size)
            if not ok:
                return TRUNCATED, pos
            out[b, k] = v
            k += 1
    return OK, pos


DC_DECODE = (DC_TABLE.mincode, DC_TABLE.maxcode, DC_TABLE.valptr, DC_TABLE.values)
AC_DECODE = (AC_TABLE.mincode, AC_TABLE.maxcode, AC_TABLE.valptr, AC_TABLE.values)
