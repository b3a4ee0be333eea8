"""Command-line interface: ``patchcs <subcommand> ...``.

Every output carries a run manifest (argv, config values, seeds, input
hashes). Container outputs embed it in their metadata; other outputs get a
``*.manifest.json`` sidecar. ``patchcs replay`` re-runs a manifest.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical abort,
4 I/O or format error.
"""

import argparse
import contextlib
import csv
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, imaging, models, pipeline, sensing, training
from .container import read_container
from .errors import ConfigurationError, FormatError, PatchCSError, UsageError

log = logging.getLogger("patchcs")

IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm")

# sub-seed offsets from --seed
SEED_INIT = 1
SEED_SHUFFLE = 2

STAGES = ("recon", "deblock", "jpeg-deblock")


# ---------------------------------------------------------------- helpers


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def image_files(paths, suffixes=IMAGE_SUFFIXES):
    """Expand directories to their files with ``suffixes`` (sorted by name); keep files as given."""
    out = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in suffixes))
        else:
            out.append(p)
    return out


def _input_files(paths, suffixes=IMAGE_SUFFIXES):
    files = image_files(paths, suffixes)
    if not files:
        raise UsageError(f"no inputs found in {', '.join(map(str, paths))}")
    return files


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, [])]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{args.command} needs {flags}")


def _exists(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise UsageError(f"no such file or directory: {p}")


def _fmt(v, digits=4):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "-"
        return f"{v:.{digits}f}"
    return str(v)


def print_table(headers, rows, out=None):
    out = out or sys.stdout
    cells = [headers] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    for k, row in enumerate(cells):
        first = row[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        print("  ".join([first] + rest), file=out)
        if k == 0:
            print("  ".join("-" * w for w in widths), file=out)


def write_csv(path, headers, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(headers)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def mean(values):
    return float(np.mean(values)) if values else math.nan


class Run:
    """Manifest bookkeeping for one invocation."""

    def __init__(self, args, argv, config):
        self.args = args
        self.argv = list(argv)
        self.config = dict(config)
        self.inputs = {}

    def use(self, path):
        path = Path(path)
        if path.is_file():
            self.inputs[str(path)] = sha256_file(path)
        return path

    def manifest(self):
        return {
            "tool": "patchcs",
            "version": __version__,
            "command": self.args.command,
            "argv": self.argv,
            "config": self.config,
            "cwd": os.getcwd(),
            "seed": self.args.seed,
            "sub_seeds": {"init": self.args.seed + SEED_INIT, "shuffle": self.args.seed + SEED_SHUFFLE},
            "inputs": dict(sorted(self.inputs.items())),
        }

    def sidecar(self, path):
        with open(str(path) + ".manifest.json", "w") as f:
            json.dump(self.manifest(), f, indent=2, sort_keys=True)
            f.write("\n")


# ---------------------------------------------------------------- subcommands


def cmd_gen_phi(args, run):
    _need(args, "n", "mr", "out")
    if args.n < 8:
        raise ConfigurationError(f"patch size must be >= 8, got {args.n}")
    phi = sensing.gen_measurement_matrix(sensing.SensingConfig(args.n, args.mr, args.seed))
    residual = float(np.abs(phi.phi @ phi.phi.T - np.eye(phi.m)).max())
    sensing.save_phi(phi, args.out, {"manifest": run.manifest()})
    print(f"m = {phi.m}")
    print(f"orthonormality residual = {residual:.3e}")
    print(f"sha256 = {phi.digest()}")


def _load_images(run, paths):
    files = _input_files(paths)
    return files, [imaging.load_image(run.use(f)) for f in files]


def _paired_images(run, clean_paths, degraded_paths):
    clean_files, clean = _load_images(run, clean_paths)
    deg_files, degraded = _load_images(run, degraded_paths)
    by_stem = {f.stem: img for f, img in zip(deg_files, degraded)}
    missing = [f.name for f in clean_files if f.stem not in by_stem]
    if missing or len(deg_files) != len(clean_files):
        raise UsageError(f"degraded and clean image sets do not pair up (unmatched: {missing or 'extra degraded files'})")
    return [by_stem[f.stem] for f in clean_files], clean


def _phi_for(args, run, recon_model=None):
    if args.phi is not None:
        phi = sensing.load_phi(run.use(args.phi))
        if recon_model is not None and recon_model.phi is not None and recon_model.phi.digest() != phi.digest():
            raise ConfigurationError("--phi differs from the matrix the reconstruction model was trained with")
        return phi
    if recon_model is not None and recon_model.phi is not None:
        return recon_model.phi
    raise UsageError(f"{args.command} needs --phi")


def _lineage_phi(args, run, stage):
    """The measurement matrix a stage's data derives from (None for JPEG pairs)."""
    if stage == "recon":
        return _phi_for(args, run)
    if stage == "deblock":
        _need(args, "recon_model")
        return _phi_for(args, run, models.load_model(run.use(args.recon_model)))
    return None


def _build_dataset(args, run, stage, image_paths, degraded_paths, stride):
    if stage == "recon":
        _, imgs = _load_images(run, image_paths)
        return training.build_recon_dataset(imgs, _lineage_phi(args, run, stage), stride=stride)
    if stage == "deblock":
        _need(args, "recon_model")
        recon = models.load_model(run.use(args.recon_model))
        _, imgs = _load_images(run, image_paths)
        return training.build_blocky_dataset(imgs, recon, _phi_for(args, run, recon), stride=stride)
    if not degraded_paths:
        raise UsageError("jpeg-deblock datasets need degraded images (--degraded / --train-degraded / --val-degraded)")
    degraded, clean = _paired_images(run, image_paths, degraded_paths)
    return training.build_pair_dataset(degraded, clean, size=args.n or 32, stride=stride)


def cmd_make_dataset(args, run):
    _need(args, "images", "out")
    _exists(*args.images, args.phi, args.recon_model, *(args.degraded or []))
    ds = _build_dataset(args, run, args.stage, args.images, args.degraded, args.stride)
    ds.save(args.out)
    run.sidecar(args.out)
    print(f"{len(ds)} {ds.provenance} samples -> {args.out}")


def _schedule(args, stage):
    base = training.TrainSchedule.for_reconstruction if stage == "recon" else training.TrainSchedule.for_deblock
    sched = base(
        batch_size=args.batch_size,
        epochs=args.epochs,
        momentum=args.momentum,
        seed=args.seed + SEED_SHUFFLE,
        val_interval=args.val_interval,
        threads=args.threads,
    )
    for group in ("fc", "early", "last"):
        lr = getattr(args, "lr_" + group)
        if lr is not None:
            sched.lrs[group] = lr
    # re-validate overridden rates
    return training.TrainSchedule(**vars(sched))


def _init_spec(args, descriptor):
    spec = models.default_init_spec(descriptor, args.seed + SEED_INIT)
    stds = dict(spec.stds)
    for name in stds:
        if name == "fc" and args.init_std_fc is not None:
            stds[name] = args.init_std_fc
        elif name != "fc" and args.init_std_conv is not None:
            stds[name] = args.init_std_conv
    return models.InitSpec(stds, spec.seed)


def cmd_train(args, run):
    _need(args, "out")
    stage = args.stage
    if (args.dataset is None) == (args.train_images is None):
        raise UsageError("train needs exactly one of --dataset or --train-images")
    _exists(args.dataset, args.valset, args.train_images, args.val_images, args.phi, args.recon_model)
    if args.dataset is not None:
        ds = training.PatchDataset.load(run.use(args.dataset))
    else:
        ds = _build_dataset(args, run, stage, [args.train_images], args.train_degraded and [args.train_degraded], args.train_stride)
    valset = None
    if args.valset is not None:
        valset = training.PatchDataset.load(run.use(args.valset))
    elif args.val_images is not None:
        valset = _build_dataset(args, run, stage, [args.val_images], args.val_degraded and [args.val_degraded], args.val_stride)
    want = {"recon": "reconstruction", "deblock": "deblock", "jpeg-deblock": "jpeg-deblock"}[stage]
    for d in (ds, valset):
        if d is not None and d.provenance != want:
            raise ConfigurationError(f"--stage {stage} cannot train on a {d.provenance} dataset")

    n = ds.patch_size
    if args.n is not None and args.n != n:
        raise ConfigurationError(f"--n {args.n} disagrees with the dataset's patch size {n}")
    rate = ds.rate
    if args.mr is not None and rate is not None and abs(args.mr - rate) > 1e-12:
        raise ConfigurationError(f"--mr {args.mr} disagrees with the dataset's rate {rate}")
    if rate is None:
        rate = args.mr
    phi = _lineage_phi(args, run, stage)
    if stage == "recon":
        if phi.patch_size != n or abs(phi.rate - rate) > 1e-12:
            raise ConfigurationError("--phi does not match the dataset's patch size and rate")
        kind = models.normalize_kind(args.kind) if args.kind else models.kind_for_rate(rate)
    else:
        kind = models.normalize_kind(args.kind) if args.kind else "deblock-resconv"
    descriptor = models.build_descriptor(kind, n, rate)
    if descriptor.is_reconstruction != (stage == "recon"):
        raise ConfigurationError(f"kind {kind} cannot be trained in stage {stage}")

    init = _init_spec(args, descriptor)
    net = models.init_weights(descriptor, init)
    net.phi = phi if stage == "recon" else None
    sched = _schedule(args, stage)
    if not args.quiet:
        print(f"training {kind} (n={n}, rate={rate}) on {len(ds)} samples, lrs {sched.lrs}", file=sys.stderr)

    def progress(rec):
        if not args.quiet:
            print(f"epoch {rec.epoch:4d}  loss {rec.loss:.6g}  val {_fmt(rec.val_psnr)} dB  {rec.seconds:.1f}s", file=sys.stderr)

    best, trainlog = training.train(net, ds, sched, valset, progress)
    best.metadata.update(
        {
            "stage": stage,
            "init_std": init.stds,
            "schedule": {"lrs": sched.lrs, "batch_size": sched.batch_size, "epochs": sched.epochs, "momentum": sched.momentum},
            "manifest": run.manifest(),
        }
    )
    if rate is not None:
        best.metadata["rate"] = rate
    if phi is not None:
        best.metadata["phi_sha256"] = phi.digest()
    models.save_model(best, args.out)
    if args.log is not None:
        trainlog.to_csv(args.log)
        run.sidecar(args.log)
    print(f"best validation PSNR {_fmt(best.metadata['best_val_psnr'])} dB -> {args.out}")


def _out_path(args, src, suffix):
    if args.out is not None:
        return Path(args.out)
    _need(args, "out_dir")
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    return Path(args.out_dir) / (Path(src).stem + suffix)


def cmd_measure(args, run):
    _need(args, "phi", "inputs")
    _exists(args.phi, *args.inputs)
    files = _input_files(args.inputs)
    if args.out is not None and len(files) != 1:
        raise UsageError("--out takes a single image; use --out-dir for several")
    phi = sensing.load_phi(run.use(args.phi))
    for f in files:
        grid = pipeline.measure_image(imaging.load_image(run.use(f)), phi)
        dst = _out_path(args, f, ".grid")
        pipeline.save_grid(grid, dst)
        run.sidecar(dst)
        print(f"{f} -> {dst}: {grid.rows}x{grid.cols} cells of {grid.m} measurements")


def _is_grid(path):
    with open(path, "rb") as f:
        return f.read(len(pipeline.GRID_MAGIC)) == pipeline.GRID_MAGIC


def cmd_restore(args, run):
    _need(args, "recon_model", "inputs", "out_dir")
    if args.deblock_model is None and not args.skip_deblock:
        raise UsageError("restore needs --deblock-model (or --skip-deblock)")
    _exists(args.recon_model, args.deblock_model, args.phi, args.ground_truth, *args.inputs)
    recon = models.load_model(run.use(args.recon_model))
    deb = None if args.skip_deblock else models.load_model(run.use(args.deblock_model))
    phi = sensing.load_phi(run.use(args.phi)) if args.phi else recon.phi
    truth = {}
    if args.ground_truth is not None:
        truth = {f.stem: f for f in image_files([args.ground_truth])}
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for f in _input_files(args.inputs, IMAGE_SUFFIXES + (".grid",)):
        run.use(f)
        if _is_grid(f):
            src = pipeline.load_grid(f)
            reference = imaging.load_image(run.use(truth[f.stem])) if f.stem in truth else None
        else:
            src = imaging.load_image(f)
            reference = imaging.load_image(run.use(truth[f.stem])) if f.stem in truth else src
        res = pipeline.restore(src, recon, deb, phi=phi, threads=args.threads)
        imaging.save_image(res.blocky, out_dir / f"{f.stem}_blocky.pgm")
        if deb is not None:
            imaging.save_image(res.image, out_dir / f"{f.stem}_restored.pgm")
        row = [f.stem]
        if reference is not None:
            row.append(imaging.psnr(res.blocky, reference))
            if deb is not None:
                row.append(imaging.psnr(res.image, reference))
        row.append(res.seconds["reconstruct"])
        if deb is not None:
            row.append(res.seconds["deblock"])
        rows.append((row, reference is not None))
    scored = all(has for _, has in rows)
    headers = ["image"]
    if scored:
        headers += ["Reconstruct"] + (["Block Remove"] if deb is not None else [])
    headers += ["Reconstruct (s)"] + (["Block Remove (s)"] if deb is not None else [])
    table = [r if scored else [r[0]] + r[-(len(headers) - 1) :] for r, _ in rows]
    table.append(["mean"] + [mean([r[i] for r in table]) for i in range(1, len(headers))])
    print_table(headers, table)
    run.sidecar(out_dir / "restore")
    if args.csv is not None:
        write_csv(args.csv, headers, table)
        run.sidecar(args.csv)


def cmd_deblock(args, run):
    _need(args, "model", "inputs")
    _exists(args.model, *args.inputs)
    files = _input_files(args.inputs)
    if args.out is not None and len(files) != 1:
        raise UsageError("--out takes a single image; use --out-dir for several")
    model = models.load_model(run.use(args.model))
    for f in files:
        out = pipeline.deblock(imaging.load_image(run.use(f)), model)
        dst = _out_path(args, f, "_deblocked.pgm")
        imaging.save_image(out, dst)
        run.sidecar(dst)
        print(f"{f} -> {dst}")


def cmd_eval(args, run):
    _need(args, "reference", "test")
    _exists(*args.reference, *args.test)
    refs = image_files(args.reference)
    tests = image_files(args.test)
    if len(args.reference) == 1 and len(args.test) == 1 and Path(args.reference[0]).is_dir() and Path(args.test[0]).is_dir():
        # with a suffix, only files carrying it take part (restore writes _blocky and _restored side by side)
        if args.suffix:
            by_stem = {t.stem[: -len(args.suffix)]: t for t in tests if t.stem.endswith(args.suffix)}
        else:
            by_stem = {t.stem: t for t in tests}
        unmatched = [r.name for r in refs if r.stem not in by_stem]
        if unmatched or len(by_stem) != len(refs):
            raise UsageError(f"reference and test images do not pair up (unmatched: {unmatched or 'extra test files'})")
        pairs = [(r, by_stem[r.stem]) for r in refs]
    else:
        if len(refs) != len(tests):
            raise UsageError(f"{len(refs)} reference images but {len(tests)} test images")
        pairs = list(zip(refs, tests))
    if not pairs:
        raise UsageError("nothing to evaluate")
    rows = []
    for r, t in pairs:
        a, b = imaging.load_image(run.use(r)), imaging.load_image(run.use(t))
        if a.shape != b.shape:
            raise UsageError(f"{r} is {a.shape[0]}x{a.shape[1]} but {t} is {b.shape[0]}x{b.shape[1]}")
        rows.append([r.stem, imaging.psnr(b, a)])
    rows.append(["mean", mean([v for _, v in rows])])
    print_table(["image", "PSNR"], rows)
    if args.csv is not None:
        write_csv(args.csv, ["image", "psnr"], rows)
        run.sidecar(args.csv)


# ---------------------------------------------------------------- parsing


def _common(p):
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--quiet", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="patchcs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"patchcs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-phi", help="generate a row-orthonormal measurement matrix")
    _common(p)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--mr", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_phi)

    p = sub.add_parser("make-dataset", help="build a training or validation dataset (.npz)")
    _common(p)
    p.add_argument("--stage", choices=STAGES, default="recon")
    p.add_argument("--images", nargs="+")
    p.add_argument("--degraded", nargs="+", help="pre-decoded degraded images paired by file stem")
    p.add_argument("--phi")
    p.add_argument("--recon-model")
    p.add_argument("--n", type=int)
    p.add_argument("--stride", type=int, default=training.TRAIN_STRIDE)
    p.add_argument("--out")
    p.set_defaults(func=cmd_make_dataset)

    p = sub.add_parser("train", help="train a reconstruction or de-block network")
    _common(p)
    p.add_argument("--stage", choices=STAGES, default="recon")
    p.add_argument("--kind", help=f"one of {', '.join(models.KINDS)}; chosen from --mr if omitted")
    p.add_argument("--n", type=int)
    p.add_argument("--mr", type=float)
    p.add_argument("--phi")
    p.add_argument("--recon-model")
    p.add_argument("--dataset")
    p.add_argument("--valset")
    p.add_argument("--train-images")
    p.add_argument("--val-images")
    p.add_argument("--train-degraded")
    p.add_argument("--val-degraded")
    p.add_argument("--train-stride", type=int, default=training.TRAIN_STRIDE)
    p.add_argument("--val-stride", type=int, default=training.VAL_STRIDE)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--val-interval", type=int, default=1)
    p.add_argument("--lr-fc", type=float)
    p.add_argument("--lr-early", type=float)
    p.add_argument("--lr-last", type=float)
    p.add_argument("--init-std-fc", type=float)
    p.add_argument("--init-std-conv", type=float)
    p.add_argument("--out")
    p.add_argument("--log", help="CSV training log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("measure", help="sense images patch-wise into measurement-grid files")
    _common(p)
    p.add_argument("inputs", nargs="*")
    p.add_argument("--phi")
    p.add_argument("--out")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("restore", help="reconstruct and de-block images or grid files")
    _common(p)
    p.add_argument("inputs", nargs="*")
    p.add_argument("--recon-model")
    p.add_argument("--deblock-model")
    p.add_argument("--phi")
    p.add_argument("--ground-truth", help="directory of clean images matched by file stem")
    p.add_argument("--skip-deblock", action="store_true")
    p.add_argument("--out-dir")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("deblock", help="run a de-block model on whole images")
    _common(p)
    p.add_argument("inputs", nargs="*")
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_deblock)

    p = sub.add_parser("eval", help="PSNR of test images against references")
    _common(p)
    p.add_argument("--reference", nargs="+")
    p.add_argument("--test", nargs="+")
    p.add_argument("--suffix", default="", help="strip this from test file stems when pairing directories")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest or output file")
    p.add_argument("source", help="*.manifest.json sidecar, or a phi/model file with an embedded manifest")
    p.set_defaults(func=None)
    return parser


def read_config(path):
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _config_defaults(parser, command, config):
    """Convert config values with the subcommand's option types."""
    sub = parser._subparsers._group_actions[0].choices[command]
    actions = {a.dest: a for a in sub._actions}
    out = {}
    for key, raw in config.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise ConfigurationError(f"unknown config key {key!r} for {command}")
        if isinstance(action, argparse._StoreTrueAction):
            out[key] = raw.lower() in ("1", "true", "yes", "on")
        elif action.nargs in ("+", "*"):
            out[key] = raw.split()
        else:
            try:
                out[key] = action.type(raw) if action.type else raw
            except ValueError:
                raise ConfigurationError(f"config key {key!r}: bad value {raw!r}") from None
    sub.set_defaults(**out)


def load_manifest(source):
    source = Path(source)
    if not source.exists():
        raise UsageError(f"no such file: {source}")
    if source.suffix == ".json":
        with open(source) as f:
            try:
                return json.load(f)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{source}: {exc.msg}", offset=exc.pos) from None
    header, _ = read_container(source)
    manifest = header.get("metadata", {}).get("manifest")
    if manifest is None:
        raise FormatError(f"{source} carries no run manifest")
    return manifest


@contextlib.contextmanager
def _cwd(path):
    old = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(old)


def replay(source):
    manifest = load_manifest(source)
    with _cwd(manifest["cwd"]):
        for path, digest in manifest["inputs"].items():
            if not Path(path).is_file() or sha256_file(path) != digest:
                raise ConfigurationError(f"input {path} changed since the recorded run")
        return _run(manifest["argv"], manifest["config"])


def _run(argv, config=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        return replay(args.source)
    config = dict(config or {})
    if args.config is not None:
        _exists(args.config)
        config = read_config(args.config) | config
    if config:
        # flags given on the command line override config-file defaults
        _config_defaults(parser, args.command, config)
        args = parser.parse_args(argv)
    if args.threads < 1:
        raise ConfigurationError(f"--threads must be >= 1, got {args.threads}")
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s: %(message)s")
    run = Run(args, argv, config)
    if args.config is not None:
        run.use(args.config)
    args.func(args, run)
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return _run(argv)
    except PatchCSError as exc:
        print(f"patchcs: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"patchcs: I/O error: {exc}", file=sys.stderr)
        return FormatError.exit_code


if __name__ == "__main__":
    sys.exit(main())
