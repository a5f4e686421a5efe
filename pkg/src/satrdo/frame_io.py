"""Frame containers, PGM / raw-y8 I/O, frame sampling and patch partitioning."""
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMATS = ("pgm", "raw")


class FrameFormatError(ValueError):
    pass


def _check_dims(width, height):
    if width < 8 or height < 8 or width % 8 or height % 8:
        raise FrameFormatError(
            f"frame dimensions {width}x{height} must be >= 8 and divisible by 8"
        )


@dataclass(frozen=True, eq=False)
class Frame:
    """Single 8-bit luma plane, stored as a read-only ``(height, width)`` array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise FrameFormatError(f"frame must be 2-D, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise FrameFormatError(f"frame samples must be uint8, got {px.dtype}")
        _check_dims(px.shape[1], px.shape[0])
        px = np.array(px, copy=True)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def samples(self):
        return self.pixels.ravel()

    def __eq__(self, other):
        return isinstance(other, Frame) and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True)
class FrameSet:
    frames: tuple
    source_indices: tuple

    def __post_init__(self):
        frames = tuple(self.frames)
        idx = tuple(int(i) for i in self.source_indices)
        if not frames:
            raise ValueError("frame set is empty")
        if len(idx) != len(frames):
            raise ValueError("source_indices must match the number of frames")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("source_indices must be strictly increasing")
        shape = frames[0].pixels.shape
        if any(f.pixels.shape != shape for f in frames):
            raise ValueError("all frames in a set must share dimensions")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "source_indices", idx)

    @classmethod
    def of(cls, frames):
        frames = list(frames)
        return cls(tuple(frames), tuple(range(len(frames))))

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def width(self):
        return self.frames[0].width

    @property
    def height(self):
        return self.frames[0].height

    @property
    def num_pixels(self):
        return self.width * self.height * len(self.frames)

    def stack(self):
        """``(n_frames, height, width)`` uint8 copy."""
        return np.stack([f.pixels for f in self.frames])


def _guess_format(path):
    return "pgm" if Path(path).suffix.lower() == ".pgm" else "raw"


def _read_pgm(data, path):
    pos = 0
    tokens = []

    def skip_space(pos):
        while pos < len(data):
            c = data[pos:pos + 1]
            if c == b"#":
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        return pos

    if data[:2] != b"P5":
        raise FrameFormatError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    for _ in range(3):
        pos = skip_space(pos)
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FrameFormatError(f"{path}: malformed PGM header")
        tokens.append(int(data[start:pos]))
    width, height, maxval = tokens
    if maxval != 255:
        raise FrameFormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FrameFormatError(f"{path}: malformed PGM header")
    pos += 1
    _check_dims(width, height)
    payload = data[pos:]
    if len(payload) != width * height:
        raise FrameFormatError(
            f"{path}: expected {width * height} pixel bytes for {width}x{height}, found {len(payload)}"
        )
    return width, height, payload


def load_frame(path, format=None, width=None, height=None):
    """Read a P5 PGM (maxval 255) or a headerless 8-bit luma file.

    Raw files need ``width`` and ``height``; their byte count must match.
    """
    path = Path(path)
    fmt = format or _guess_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"unknown frame format {fmt!r}; expected one of {FORMATS}")
    if not path.is_file():
        raise FileNotFoundError(f"frame file not found: {path}")
    if fmt == "raw":
        if width is None or height is None:
            raise FrameFormatError(f"{path}: raw frames need explicit width and height")
        _check_dims(width, height)
        size = path.stat().st_size
        if size != width * height:
            raise FrameFormatError(
                f"{path}: {size} bytes does not match declared {width}x{height} ({width * height} bytes)"
            )
        payload = path.read_bytes()
    else:
        width, height, payload = _read_pgm(path.read_bytes(), path)
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return Frame(pixels)


def save_frame(frame, path, format=None):
    path = Path(path)
    fmt = format or _guess_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"unknown frame format {fmt!r}; expected one of {FORMATS}")
    body = np.ascontiguousarray(frame.pixels).tobytes()
    if fmt == "pgm":
        body = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii") + body
    path.write_bytes(body)


def list_frame_files(source):
    """Frame files under a directory (sorted by name) or a single file."""
    source = Path(source)
    if source.is_dir():
        files = sorted(p for p in source.iterdir()
                       if p.is_file() and p.suffix.lower() in (".pgm", ".y", ".y8", ".raw", ".yuv"))
        if not files:
            raise FileNotFoundError(f"no frame files (.pgm/.y/.y8/.raw/.yuv) in {source}")
        return files
    if source.is_file():
        return [source]
    raise FileNotFoundError(f"input not found: {source}")


def load_frames(paths, format=None, width=None, height=None):
    files = []
    for p in ([paths] if isinstance(paths, (str, os.PathLike)) else paths):
        files.extend(list_frame_files(p))
    return FrameSet.of(load_frame(f, format, width, height) for f in files)


def save_frames(frames, directory, format="pgm", prefix="frame"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = "pgm" if format == "pgm" else "y"
    paths = []
    for idx, frame in zip(frames.source_indices, frames.frames):
        p = directory / f"{prefix}_{idx:05d}.{ext}"
        save_frame(frame, p, format)
        paths.append(p)
    return paths


def sample_frames(frames, count):
    """Pick ``count`` frames at indices ``floor(i * total / count)``."""
    total = len(frames)
    if count <= 0 or count > total:
        raise ValueError(f"sample count must be in [1, {total}], got {count}")
    picks = [i * total // count for i in range(count)]
    return FrameSet(tuple(frames.frames[i] for i in picks),
                    tuple(frames.source_indices[i] for i in picks))


@dataclass(frozen=True)
class PatchGrid:
    """Raster partition of a frame set into equal patches.

    Patch ``k`` lives in frame ``k // patches_per_frame`` at block row/column
    ``divmod(k % patches_per_frame, cols)``.
    """

    frame_width: int
    frame_height: int
    patch_width: int
    patch_height: int
    frame_count: int

    def __post_init__(self):
        pw, ph = self.patch_width, self.patch_height
        if pw <= 0 or ph <= 0 or pw % 8 or ph % 8:
            raise ValueError(f"patch dimensions {pw}x{ph} must be positive multiples of 8")
        if self.frame_width % pw or self.frame_height % ph:
            raise ValueError(
                f"patch {pw}x{ph} does not tile frame {self.frame_width}x{self.frame_height}"
            )

    @property
    def cols(self):
        return self.frame_width // self.patch_width

    @property
    def rows(self):
        return self.frame_height // self.patch_height

    @property
    def patches_per_frame(self):
        return self.rows * self.cols

    @property
    def total_patches(self):
        return self.patches_per_frame * self.frame_count

    @property
    def pixels_per_patch(self):
        return self.patch_width * self.patch_height

    def location(self, k):
        if not 0 <= k < self.total_patches:
            raise IndexError(f"patch index {k} out of range")
        frame, rest = divmod(k, self.patches_per_frame)
        row, col = divmod(rest, self.cols)
        return frame, row, col

    def split(self, stack):
        """``(n_frames, H, W)`` -> ``(N, patch_height, patch_width)``."""
        n = stack.shape[0]
        ph, pw = self.patch_height, self.patch_width
        p = stack.reshape(n, self.rows, ph, self.cols, pw).transpose(0, 1, 3, 2, 4)
        return np.ascontiguousarray(p.reshape(n * self.patches_per_frame, ph, pw))

    def assemble(self, patches):
        """Inverse of :meth:`split`."""
        ph, pw = self.patch_height, self.patch_width
        p = np.asarray(patches).reshape(self.frame_count, self.rows, self.cols, ph, pw)
        return p.transpose(0, 1, 3, 2, 4).reshape(
            self.frame_count, self.frame_height, self.frame_width)


def partition(frames, patch_width, patch_height):
    """Return the :class:`PatchGrid` and the ``(N, ph, pw)`` patch array."""
    grid = PatchGrid(frames.width, frames.height, patch_width, patch_height, len(frames))
    return grid, grid.split(frames.stack())
