"""Full-image capture simulation and restoration.

An image is padded to a multiple of the patch size, each non-overlapping
tile is sensed, every tile is reconstructed by one forward pass, the tiles
are assembled into a blocky image, and one de-block pass runs on the whole
image.
"""

import struct
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import imaging
from .errors import ConfigurationError, FormatError, UsageError
from .sensing import sense_patches

GRID_MAGIC = b"PCSGRID\0"
GRID_VERSION = 1
# magic, version, rows, cols, n, rate, m, phi sha256, original height, original width
_GRID_HEADER = struct.Struct("<8sIIIIdI32sII")

# Cells per forward batch; fixed so that results do not depend on the thread count.
CELL_CHUNK = 64


@dataclass
class MeasurementGrid:
    """Per-tile measurements in row-major grid order; ``values`` is (rows, cols, m)."""

    values: np.ndarray
    patch_size: int
    rate: float
    phi_digest: str
    original_size: tuple

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]

    @property
    def m(self):
        return self.values.shape[2]


def measure_image(image, phi):
    padded, size = imaging.pad_to_multiple(image, phi.patch_size)
    grid = imaging.tile(padded, phi.patch_size)
    values = sense_patches(phi, grid.patches).reshape(grid.rows, grid.cols, phi.m)
    return MeasurementGrid(values, phi.patch_size, phi.rate, phi.digest(), size)


def save_grid(grid, path):
    header = _GRID_HEADER.pack(
        GRID_MAGIC,
        GRID_VERSION,
        grid.rows,
        grid.cols,
        grid.patch_size,
        grid.rate,
        grid.m,
        bytes.fromhex(grid.phi_digest),
        *grid.original_size,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())


def load_grid(path):
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _GRID_HEADER.size:
        raise FormatError("file too short for a measurement-grid header", offset=len(data))
    magic, version, rows, cols, n, rate, m, digest, h, w = _GRID_HEADER.unpack_from(data)
    if magic != GRID_MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != GRID_VERSION:
        raise FormatError(f"unsupported grid version {version}", offset=8)
    need = _GRID_HEADER.size + 8 * rows * cols * m
    if len(data) != need:
        raise FormatError(f"expected {need} bytes, found {len(data)}", offset=min(len(data), need))
    values = np.frombuffer(data, dtype="<f8", offset=_GRID_HEADER.size).astype(np.float64)
    return MeasurementGrid(values.reshape(rows, cols, m), n, rate, digest.hex(), (h, w))


def _check_recon(grid, model):
    d = model.descriptor
    if not d.is_reconstruction:
        raise ConfigurationError(f"{d.kind} is not a reconstruction model")
    if d.patch_size != grid.patch_size or d.fc[0] != grid.m:
        raise ConfigurationError(
            f"model expects n={d.patch_size}, m={d.fc[0]}; grid has n={grid.patch_size}, m={grid.m}"
        )
    if model.phi is not None and model.phi.digest() != grid.phi_digest:
        raise ConfigurationError("grid was measured with a different matrix than the model was trained on")


def reconstruct_grid(grid, recon_model, threads=1, counter=None):
    """Reconstruct every cell independently and assemble the (padded) blocky image."""
    _check_recon(grid, recon_model)
    cells = grid.values.reshape(-1, grid.m)
    chunks = [cells[i : i + CELL_CHUNK] for i in range(0, len(cells), CELL_CHUNK)]

    def run(chunk):
        return recon_model.forward(chunk)[0][:, 0]

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    if counter is not None:
        counter["reconstruct"] += len(cells)
    patches = np.concatenate(parts)
    image = imaging.assemble_nonoverlapping(imaging.PatchGrid(grid.rows, grid.cols, grid.patch_size, patches))
    return np.clip(image, 0.0, 1.0)


def deblock(image, deblock_model, counter=None):
    """One fully convolutional pass over an image of any size, clamped to [0, 1]."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise UsageError(f"expected a single-channel 2-D image, got shape {image.shape}")
    if deblock_model.descriptor.is_reconstruction:
        raise ConfigurationError(f"{deblock_model.descriptor.kind} is not a de-block model")
    out = deblock_model.forward(image[None, None])[0][0, 0]
    if counter is not None:
        counter["deblock"] += 1
    return np.clip(out, 0.0, 1.0)


def check_lineage(grid, deblock_model):
    """A de-block model trained for a measurement matrix only accepts grids from it."""
    meta = deblock_model.metadata
    digest = meta.get("phi_sha256")
    if digest is not None and digest != grid.phi_digest:
        raise ConfigurationError("de-block model was trained for a different measurement matrix")
    rate = meta.get("rate")
    if rate is not None and abs(float(rate) - grid.rate) > 1e-12:
        raise ConfigurationError(f"de-block model was trained at rate {rate}, grid has {grid.rate}")


@dataclass
class RestoreResult:
    image: np.ndarray
    blocky: np.ndarray
    seconds: dict = field(default_factory=dict)
    passes: Counter = field(default_factory=Counter)


def restore(image_or_grid, recon_model, deblock_model=None, phi=None, threads=1):
    """Measure (if given an image), reconstruct, assemble and de-block.

    Returns the final image and the blocky intermediate, both cropped to the
    original size. With ``deblock_model=None`` only the blocky stage runs.
    """
    if isinstance(image_or_grid, MeasurementGrid):
        grid = image_or_grid
    else:
        phi = phi if phi is not None else recon_model.phi
        if phi is None:
            raise ConfigurationError("restoring from an image needs a measurement matrix")
        grid = measure_image(image_or_grid, phi)
    if deblock_model is not None:
        check_lineage(grid, deblock_model)
    passes = Counter()
    seconds = {}
    t0 = time.perf_counter()
    blocky = reconstruct_grid(grid, recon_model, threads, passes)
    seconds["reconstruct"] = time.perf_counter() - t0
    final = blocky
    if deblock_model is not None:
        t0 = time.perf_counter()
        final = deblock(blocky, deblock_model, passes)
        seconds["deblock"] = time.perf_counter() - t0
    # non-iterative: one pass per cell plus at most one whole-image pass
    expected = Counter(reconstruct=grid.rows * grid.cols)
    if deblock_model is not None:
        expected["deblock"] = 1
    if passes != expected:
        raise RuntimeError(f"unexpected forward-pass count {dict(passes)}, want {dict(expected)}")
    return RestoreResult(
        imaging.crop(final, grid.original_size), imaging.crop(blocky, grid.original_size), seconds, passes
    )

