"""Row-orthonormal Gaussian sensing of square image patches.

Patches are vectorised row-major (row 0 left to right, then row 1, ...).
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .container import read_container, write_container
from .errors import ConfigurationError, FormatError, UsageError


@dataclass(frozen=True)
class SensingConfig:
    patch_size: int
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.patch_size < 1:
            raise ConfigurationError(f"patch size must be >= 1, got {self.patch_size}")
        if not 0.0 < self.rate <= 1.0:
            raise ConfigurationError(f"measurement rate must be in (0, 1], got {self.rate}")
        if self.m < 1:
            raise ConfigurationError(
                f"rate {self.rate} gives no measurements for {self.patch_size}x{self.patch_size} patches"
            )

    @property
    def m(self):
        # floor reproduces 256/102/40/10 for n=32; the epsilon guards 0.1*100 style products
        return math.floor(self.rate * self.patch_size**2 + 1e-9)


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    phi: np.ndarray  # (m, n*n)
    patch_size: int
    rate: float
    seed: int

    @property
    def m(self):
        return self.phi.shape[0]

    def digest(self):
        """SHA-256 of the raw little-endian entries; identifies phi in lineage checks."""
        return hashlib.sha256(np.ascontiguousarray(self.phi, dtype="<f8").tobytes()).hexdigest()


def orthonormalize_rows(a):
    """Orthonormal rows spanning the row space of ``a`` (QR of the transpose)."""
    q, r = np.linalg.qr(a.T)
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return np.ascontiguousarray((q * signs).T)


def gen_measurement_matrix(config):
    n2 = config.patch_size**2
    if config.m > n2:
        raise ConfigurationError(f"cannot orthonormalize {config.m} rows in dimension {n2}")
    rng = np.random.default_rng(config.seed)
    gauss = rng.standard_normal((config.m, n2))
    return MeasurementMatrix(orthonormalize_rows(gauss), config.patch_size, config.rate, config.seed)


def sense_patch(phi, patch):
    patch = np.asarray(patch, dtype=np.float64)
    n = phi.patch_size
    if patch.shape != (n, n):
        raise UsageError(f"patch must be {n}x{n}, got {patch.shape}")
    return phi.phi @ patch.reshape(-1)


def sense_patches(phi, patches):
    """Vectorised ``sense_patch`` over a stack of shape (N, n, n)."""
    patches = np.asarray(patches, dtype=np.float64)
    n = phi.patch_size
    if patches.ndim != 3 or patches.shape[1:] != (n, n):
        raise UsageError(f"patches must be (N, {n}, {n}), got {patches.shape}")
    return patches.reshape(len(patches), -1) @ phi.phi.T


def adjoint_reconstruct(phi, y):
    """Baseline estimate phi^T y reshaped to n x n (exact when rate = 1)."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != phi.m:
        raise UsageError(f"measurement length {y.shape[-1]} != {phi.m}")
    n = phi.patch_size
    return (y @ phi.phi).reshape(y.shape[:-1] + (n, n))


def phi_header(phi):
    return {"n": phi.patch_size, "rate": phi.rate, "m": phi.m, "seed": phi.seed, "sha256": phi.digest()}


def save_phi(phi, path, metadata=None):
    header = {"type": "phi", "phi": phi_header(phi), "metadata": metadata or {}}
    write_container(path, header, {"phi": phi.phi})


def phi_from_container(info, array):
    phi = MeasurementMatrix(np.ascontiguousarray(array), int(info["n"]), float(info["rate"]), int(info["seed"]))
    if array.shape != (int(info["m"]), phi.patch_size**2):
        raise FormatError(f"phi shape {array.shape} disagrees with header m={info['m']}, n={info['n']}")
    return phi


def load_phi(path):
    """Read a phi file, or the phi embedded in a reconstruction model file."""
    header, tensors = read_container(path)
    if "phi" not in header or "phi" not in tensors:
        raise FormatError(f"{path} holds no measurement matrix")
    return phi_from_container(header["phi"], tensors["phi"])
