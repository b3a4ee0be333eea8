"""Grayscale image I/O, patch geometry and PSNR.

Images are 2-D float64 arrays with samples in [0, 1].
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, UsageError

# BT.601 luma weights
LUMA = (0.299, 0.587, 0.114)


def _read_header(data):
    """Parse magic, width, height, maxval; return them and the raster offset."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated header", offset=pos)
        tokens.append((data[start:pos], start))
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after maxval", offset=pos)
    pos += 1
    magic, moff = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported magic {magic!r}", offset=moff)
    values = []
    for tok, off in tokens[1:]:
        if not tok.isdigit():
            raise FormatError(f"bad header field {tok!r}", offset=off)
        values.append(int(tok))
    width, height, maxval = values
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}", offset=tokens[3][1])
    if width < 1 or height < 1:
        raise FormatError(f"bad image size {width}x{height}", offset=tokens[1][1])
    return magic, width, height, pos


def decode_pnm(data):
    magic, width, height, pos = _read_header(data)
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    if len(data) - pos < need:
        raise FormatError(f"raster needs {need} bytes, found {len(data) - pos}", offset=len(data))
    raw = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).astype(np.float64)
    if channels == 1:
        return raw.reshape(height, width) / 255.0
    rgb = raw.reshape(height, width, 3)
    return to_luminance(rgb) / 255.0


def to_luminance(rgb):
    """BT.601 luma of an (H, W, 3) array, in the input's scale."""
    r, g, b = LUMA
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


def load_image(path):
    """Read a binary PGM (P5) or PPM (P6) file as luminance in [0, 1]."""
    with open(path, "rb") as f:
        return decode_pnm(f.read())


def quantize(image):
    """Map [0, 1] samples to 8-bit levels with round-half-up and clamping."""
    return np.clip(np.floor(np.asarray(image, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def encode_pgm(image):
    image = np.asarray(image)
    if image.ndim != 2:
        raise UsageError(f"expected a 2-D image, got shape {image.shape}")
    h, w = image.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + quantize(image).tobytes()


def save_image(image, path):
    with open(path, "wb") as f:
        f.write(encode_pgm(image))


@dataclass
class PatchGrid:
    """Non-overlapping tiles in row-major grid order; ``patches`` is (rows*cols, n, n)."""

    rows: int
    cols: int
    patch_size: int
    patches: np.ndarray


def patch_counts(height, width, size, stride):
    if stride < 1:
        raise UsageError(f"stride must be >= 1, got {stride}")
    if height < size or width < size:
        raise UsageError(f"image {height}x{width} is smaller than patch size {size}")
    return (height - size) // stride + 1, (width - size) // stride + 1


def extract_patches(image, size, stride):
    """Patches at offsets 0, stride, 2*stride, ... on both axes, row-major; (N, size, size)."""
    image = np.asarray(image, dtype=np.float64)
    rows, cols = patch_counts(image.shape[0], image.shape[1], size, stride)
    win = np.lib.stride_tricks.sliding_window_view(image, (size, size))
    win = win[: (rows - 1) * stride + 1 : stride, : (cols - 1) * stride + 1 : stride]
    return np.ascontiguousarray(win.reshape(rows * cols, size, size))


def tile(image, size):
    """Split an image whose sides divide by ``size`` into a PatchGrid."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    if h % size or w % size:
        raise UsageError(f"image {h}x{w} is not a multiple of {size}; pad it first")
    return PatchGrid(h // size, w // size, size, extract_patches(image, size, size))


def assemble_nonoverlapping(grid):
    patches = np.asarray(grid.patches, dtype=np.float64)
    n = grid.patch_size
    if patches.shape != (grid.rows * grid.cols, n, n):
        raise UsageError(
            f"grid of {grid.rows}x{grid.cols} patches of size {n} cannot hold shape {patches.shape}"
        )
    return patches.reshape(grid.rows, grid.cols, n, n).transpose(0, 2, 1, 3).reshape(grid.rows * n, grid.cols * n)


def pad_to_multiple(image, n):
    """Reflect-pad right and bottom up to the next multiple of ``n``."""
    if n < 1:
        raise UsageError(f"n must be >= 1, got {n}")
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    ph, pw = -h % n, -w % n
    if ph == 0 and pw == 0:
        return image.copy(), (h, w)
    # numpy's reflect needs at least two samples along an axis
    for axis, extra in ((0, ph), (1, pw)):
        widths = [(0, 0), (0, 0)]
        widths[axis] = (0, extra)
        image = np.pad(image, widths, mode="reflect" if image.shape[axis] > 1 else "edge")
    return image, (h, w)


def crop(image, size):
    h, w = size
    return np.asarray(image)[:h, :w].copy()


def psnr(a, b):
    """PSNR in dB after 8-bit quantisation of both images; ``math.inf`` when equal."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise UsageError(f"PSNR of differently shaped images {a.shape} and {b.shape}")
    diff = quantize(a).astype(np.float64) - quantize(b).astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)
