"""Training datasets and the momentum-SGD training loop."""

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import imaging, nn
from .errors import ConfigurationError, NumericalError, UsageError
from .sensing import sense_patches

log = logging.getLogger(__name__)

PROVENANCES = ("reconstruction", "deblock", "jpeg-deblock")

TRAIN_STRIDE = 14
VAL_STRIDE = 21


@dataclass
class PatchDataset:
    """Paired samples: ``inputs`` is (N, m) for reconstruction, else (N, n, n); ``targets`` is (N, n, n)."""

    inputs: np.ndarray
    targets: np.ndarray
    provenance: str
    patch_size: int
    rate: float | None = None

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ConfigurationError(f"unknown provenance {self.provenance!r}")
        n = self.patch_size
        if self.targets.ndim != 3 or self.targets.shape[1:] != (n, n):
            raise ConfigurationError(f"targets must be (N, {n}, {n}), got {self.targets.shape}")
        if len(self.inputs) != len(self.targets):
            raise ConfigurationError(f"{len(self.inputs)} inputs but {len(self.targets)} targets")
        if self.provenance != "reconstruction" and self.inputs.shape[1:] != (n, n):
            raise ConfigurationError(f"de-block inputs must be (N, {n}, {n}), got {self.inputs.shape}")

    def __len__(self):
        return len(self.targets)

    def subset(self, indices):
        indices = np.asarray(indices)
        return PatchDataset(self.inputs[indices], self.targets[indices], self.provenance, self.patch_size, self.rate)

    def save(self, path):
        np.savez(
            path,
            inputs=self.inputs,
            targets=self.targets,
            provenance=self.provenance,
            patch_size=self.patch_size,
            rate=np.nan if self.rate is None else self.rate,
        )

    @classmethod
    def load(cls, path):
        with np.load(path) as f:
            rate = float(f["rate"])
            return cls(
                f["inputs"],
                f["targets"],
                str(f["provenance"]),
                int(f["patch_size"]),
                None if math.isnan(rate) else rate,
            )


def _patches(images, size, stride):
    out = []
    for idx, image in enumerate(images):
        h, w = np.shape(image)
        if h < size or w < size:
            log.warning("skipping image %d: %dx%d is smaller than the %d-pixel patch", idx, h, w, size)
            continue
        out.append(imaging.extract_patches(image, size, stride))
    if not out:
        return np.empty((0, size, size))
    return np.concatenate(out)


def build_recon_dataset(images, phi, size=None, stride=TRAIN_STRIDE):
    """(phi @ vec(patch), patch) pairs for every patch of every image."""
    size = phi.patch_size if size is None else size
    if size != phi.patch_size:
        raise ConfigurationError(f"patch size {size} does not match phi's {phi.patch_size}")
    targets = _patches(images, size, stride)
    return PatchDataset(sense_patches(phi, targets), targets, "reconstruction", size, phi.rate)


def build_blocky_dataset(images, recon_model, phi, stride=TRAIN_STRIDE):
    """Overlapping patches of block-wise reconstructed images paired with clean patches."""
    from .pipeline import measure_image, reconstruct_grid

    d = recon_model.descriptor
    if not d.is_reconstruction:
        raise ConfigurationError("build_blocky_dataset needs a reconstruction model")
    if d.patch_size != phi.patch_size or d.fc[0] != phi.m:
        raise ConfigurationError(
            f"model expects n={d.patch_size}, m={d.fc[0]}; phi has n={phi.patch_size}, m={phi.m}"
        )
    if recon_model.phi is not None and recon_model.phi.digest() != phi.digest():
        raise ConfigurationError("reconstruction model was trained with a different measurement matrix")
    n = phi.patch_size
    blocky, clean = [], []
    for image in images:
        if min(np.shape(image)) < n:
            log.warning("skipping %dx%d image smaller than patch size %d", *np.shape(image), n)
            continue
        grid = measure_image(image, phi)
        blocky.append(imaging.crop(reconstruct_grid(grid, recon_model), np.shape(image)))
        clean.append(image)
    inputs = _patches(blocky, n, stride)
    targets = _patches(clean, n, stride)
    return PatchDataset(inputs, targets, "deblock", n, phi.rate)


def build_pair_dataset(degraded_images, clean_images, size=32, stride=TRAIN_STRIDE):
    """Co-located patches of externally degraded (e.g. JPEG-decoded) and clean images."""
    if len(degraded_images) != len(clean_images):
        raise UsageError(f"{len(degraded_images)} degraded images but {len(clean_images)} clean ones")
    for i, (a, b) in enumerate(zip(degraded_images, clean_images)):
        if np.shape(a) != np.shape(b):
            raise UsageError(f"pair {i}: shapes {np.shape(a)} and {np.shape(b)} differ")
    return PatchDataset(
        _patches(degraded_images, size, stride), _patches(clean_images, size, stride), "jpeg-deblock", size
    )


@dataclass
class TrainSchedule:
    """``lrs`` maps learning-rate groups ("fc", "early", "last") to rates."""

    lrs: dict
    batch_size: int = 128
    epochs: int = 200
    momentum: float = 0.9
    seed: int = 0
    val_interval: int = 1
    chunk_size: int = 16
    threads: int = 1

    def __post_init__(self):
        if self.batch_size < 1 or self.chunk_size < 1 or self.epochs < 0 or self.val_interval < 1:
            raise ConfigurationError("batch size, chunk size and validation interval must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must be in [0, 1), got {self.momentum}")
        for group, lr in self.lrs.items():
            if not lr > 0:
                raise ConfigurationError(f"learning rate for {group!r} must be positive, got {lr}")

    @classmethod
    def for_reconstruction(cls, **kw):
        return cls(lrs={"fc": 1e-5, "early": 1e-5, "last": 1e-6}, **kw)

    @classmethod
    def for_deblock(cls, **kw):
        return cls(lrs={"early": 1e-3, "last": 1e-4}, **kw)


@dataclass
class TrainRecord:
    epoch: int
    loss: float
    val_psnr: float
    seconds: float


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def append(self, record):
        if self.records and record.epoch < self.records[-1].epoch:
            raise ValueError("epochs must be non-decreasing")
        self.records.append(record)

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["epoch", "loss", "val_psnr", "seconds"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.loss), repr(r.val_psnr), f"{r.seconds:.3f}"])


def predict(network, inputs, chunk_size=64):
    """Forward a stack of inputs in fixed-size chunks; returns (N, H, W)."""
    outs = [network.forward(inputs[i : i + chunk_size])[0][:, 0] for i in range(0, len(inputs), chunk_size)]
    if not outs:
        return np.empty((0,) + np.shape(inputs)[1:])
    return np.concatenate(outs)


def validate(network, valset, chunk_size=64):
    """Mean per-patch PSNR over the validation set."""
    if valset is None or len(valset) == 0:
        raise UsageError("validation set is empty")
    _check_provenance(network, valset)
    preds = predict(network, valset.inputs, chunk_size)
    return float(np.mean([imaging.psnr(p, t) for p, t in zip(preds, valset.targets)]))


def _check_provenance(network, dataset):
    recon = network.descriptor.is_reconstruction
    if recon != (dataset.provenance == "reconstruction"):
        raise ConfigurationError(
            f"{network.descriptor.kind} network cannot use a {dataset.provenance} dataset"
        )
    if recon and dataset.inputs.shape[1] != network.descriptor.fc[0]:
        raise ConfigurationError(
            f"dataset has {dataset.inputs.shape[1]} measurements per sample, network expects {network.descriptor.fc[0]}"
        )


def _chunk_grads(network, x, t, k):
    out, caches = network.forward(x, keep_cache=True)
    diff = out - t.reshape(out.shape)
    grads, _ = network.backward((2.0 / k) * diff, caches)
    return float(np.sum(diff * diff)), grads


def train(network, dataset, schedule, valset=None, progress=None):
    """Train a copy of ``network``; returns the best-validation copy and the log.

    Every mini-batch of k samples minimises (1/k) * sum ||f(x_i) - t_i||^2.
    Per-sample work runs in chunks of ``schedule.chunk_size`` (optionally on
    ``schedule.threads`` threads) and chunk gradients are summed in chunk
    order, so results do not depend on the thread count.
    """
    _check_provenance(network, dataset)
    if valset is not None:
        _check_provenance(network, valset)
    if len(dataset) == 0:
        raise UsageError("training set is empty")
    groups = network.descriptor.param_groups()
    missing = sorted({g for g in groups.values() if g not in schedule.lrs})
    if missing:
        raise ConfigurationError(f"schedule has no learning rate for groups {missing}")
    net = network.copy()
    state = nn.OptimState(schedule.momentum, {name: schedule.lrs[g] for name, g in groups.items()})
    rng = np.random.default_rng(schedule.seed)
    trainlog = TrainLog()
    t0 = time.perf_counter()
    best, best_psnr = net.copy(), -math.inf
    if valset is not None:
        best_psnr = validate(net, valset)
        trainlog.append(TrainRecord(0, math.nan, best_psnr, 0.0))
    pool = ThreadPoolExecutor(schedule.threads) if schedule.threads > 1 else None
    try:
        for epoch in range(1, schedule.epochs + 1):
            order = rng.permutation(len(dataset))
            batch_losses = []
            for b, start in enumerate(range(0, len(order), schedule.batch_size)):
                idx = order[start : start + schedule.batch_size]
                k = len(idx)
                x, t = dataset.inputs[idx], dataset.targets[idx]
                pieces = [(x[i : i + schedule.chunk_size], t[i : i + schedule.chunk_size]) for i in range(0, k, schedule.chunk_size)]
                if pool is None:
                    results = [_chunk_grads(net, xc, tc, k) for xc, tc in pieces]
                else:
                    results = list(pool.map(lambda p: _chunk_grads(net, p[0], p[1], k), pieces))
                loss = 0.0
                grads = {name: np.zeros_like(p) for name, p in net.params.items()}
                for sq, g in results:
                    loss += sq
                    for name in grads:
                        grads[name] += g[name]
                loss /= k
                if not math.isfinite(loss):
                    raise NumericalError(f"non-finite loss in epoch {epoch}, batch {b}", batch_index=b, epoch=epoch)
                nn.sgd_step(net.params, grads, state)
                batch_losses.append(loss)
            last = epoch == schedule.epochs
            if epoch % schedule.val_interval == 0 or last:
                val = validate(net, valset) if valset is not None else math.nan
                rec = TrainRecord(epoch, float(np.mean(batch_losses)), val, time.perf_counter() - t0)
                trainlog.append(rec)
                if progress is not None:
                    progress(rec)
                if valset is None or val > best_psnr:
                    best, best_psnr = net.copy(), val
    finally:
        if pool is not None:
            pool.shutdown()
    best.metadata["best_val_psnr"] = best_psnr
    return best, trainlog
