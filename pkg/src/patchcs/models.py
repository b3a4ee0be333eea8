"""Network architectures as data, initialisation, inference and model files.

A network is an optional fully connected front stage (measurement -> n*n,
reshaped row-major to n x n) followed by a stack of same-padded conv stages.
Residual skips add the output of one stage (or of the conv-stack input, index
-1) to the output of a later stage.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .container import read_container, write_container
from .errors import ConfigurationError, FormatError, UsageError
from .sensing import SensingConfig, phi_from_container, phi_header

KINDS = ("fc1-resconv", "fc2-resconv", "deblock-resconv", "reconnet", "half-reconnet")
_ALIASES = {
    "fc-1-resconv": "fc1-resconv",
    "fc-2-resconv": "fc2-resconv",
    "deblock": "deblock-resconv",
    "deblock-resconv": "deblock-resconv",
    "resconv": "deblock-resconv",
}


@dataclass(frozen=True)
class ConvStage:
    kernel_size: int
    out_channels: int
    relu: bool
    lr_group: str  # "early" or "last"


@dataclass(frozen=True)
class NetworkDescriptor:
    kind: str
    patch_size: int
    rate: float | None
    fc: tuple | None  # (in_len, out_len)
    stages: tuple
    skips: tuple = ()

    def __post_init__(self):
        if not self.stages:
            raise ConfigurationError("a network needs at least one conv stage")
        last = self.stages[-1]
        if last.out_channels != 1 or last.relu:
            raise ConfigurationError("the last conv stage must have one output channel and no ReLU")
        for src, dst in self.skips:
            if not -1 <= src < dst < len(self.stages):
                raise ConfigurationError(f"bad skip {src} -> {dst}")
            src_ch = 1 if src == -1 else self.stages[src].out_channels
            if src_ch != self.stages[dst].out_channels:
                raise ConfigurationError(f"skip {src} -> {dst} joins {src_ch} and {self.stages[dst].out_channels} channels")
        if self.fc is not None and self.fc[1] != self.patch_size**2:
            raise ConfigurationError(f"FC output {self.fc[1]} != patch size squared {self.patch_size**2}")

    @property
    def is_reconstruction(self):
        return self.fc is not None

    def param_shapes(self):
        shapes = {}
        if self.fc is not None:
            m, n2 = self.fc
            shapes["fc.weight"] = (n2, m)
            shapes["fc.bias"] = (n2,)
        in_ch = 1
        for i, st in enumerate(self.stages):
            shapes[f"conv{i}.weight"] = (st.out_channels, in_ch, st.kernel_size, st.kernel_size)
            shapes[f"conv{i}.bias"] = (st.out_channels,)
            in_ch = st.out_channels
        return shapes

    def param_groups(self):
        """Parameter name -> learning-rate group ("fc", "early" or "last")."""
        groups = {}
        if self.fc is not None:
            groups["fc.weight"] = groups["fc.bias"] = "fc"
        for i, st in enumerate(self.stages):
            groups[f"conv{i}.weight"] = groups[f"conv{i}.bias"] = st.lr_group
        return groups

    def stage_names(self):
        return (["fc"] if self.fc is not None else []) + [f"conv{i}" for i in range(len(self.stages))]

    def num_params(self):
        return sum(int(np.prod(s)) for s in self.param_shapes().values())

    def to_dict(self):
        d = asdict(self)
        d["stages"] = [asdict(s) for s in self.stages]
        d["skips"] = [list(s) for s in self.skips]
        d["fc"] = list(self.fc) if self.fc is not None else None
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=d["kind"],
            patch_size=int(d["patch_size"]),
            rate=d["rate"],
            fc=tuple(d["fc"]) if d["fc"] is not None else None,
            stages=tuple(ConvStage(**s) for s in d["stages"]),
            skips=tuple(tuple(s) for s in d["skips"]),
        )


def _resconv(offset):
    stages = (
        ConvStage(11, 64, True, "early"),
        ConvStage(1, 32, True, "early"),
        ConvStage(7, 1, False, "last"),
    )
    return stages, ((offset - 1, offset + 2),)


def normalize_kind(kind):
    k = kind.strip().lower().replace("_", "-")
    k = _ALIASES.get(k, k)
    if k not in KINDS:
        raise ConfigurationError(f"unknown network kind {kind!r}; choose from {', '.join(KINDS)}")
    return k


def kind_for_rate(rate):
    """Depth policy: two cascaded ResConv modules only at very low rates."""
    return "fc2-resconv" if rate <= 0.01 else "fc1-resconv"


def build_descriptor(kind, n=32, rate=None):
    kind = normalize_kind(kind)
    if kind == "deblock-resconv":
        stages, skips = _resconv(0)
        return NetworkDescriptor(kind, n, rate, None, stages, skips)
    if rate is None:
        raise ConfigurationError(f"{kind} needs a measurement rate")
    m = SensingConfig(n, rate).m
    fc = (m, n * n)
    if kind in ("fc1-resconv", "fc2-resconv"):
        stages, skips = (), ()
        for module in range(1 if kind == "fc1-resconv" else 2):
            s, k = _resconv(3 * module)
            stages += s
            skips += k
        return NetworkDescriptor(kind, n, rate, fc, stages, skips)
    block = (
        ConvStage(11, 64, True, "early"),
        ConvStage(1, 32, True, "early"),
        ConvStage(7, 1, True, "last"),
    )
    stages = block * 2 if kind == "reconnet" else block
    stages = stages[:-1] + (ConvStage(7, 1, False, "last"),)
    return NetworkDescriptor(kind, n, rate, fc, stages)


@dataclass
class InitSpec:
    """Per-stage Gaussian standard deviations (stage name -> std); biases start at zero."""

    stds: dict
    seed: int = 0

    def __post_init__(self):
        for name, std in self.stds.items():
            if not std > 0:
                raise ConfigurationError(f"std for {name} must be positive, got {std}")


def default_init_spec(descriptor, seed=0):
    if descriptor.is_reconstruction:
        stds = {name: (0.01 if name == "fc" else 0.1) for name in descriptor.stage_names()}
    else:
        stds = {name: 0.001 for name in descriptor.stage_names()}
    return InitSpec(stds, seed)


class Network:
    def __init__(self, descriptor, params, metadata=None, phi=None):
        shapes = descriptor.param_shapes()
        if set(params) != set(shapes):
            raise ConfigurationError(f"parameters {sorted(params)} do not match {sorted(shapes)}")
        for name, shape in shapes.items():
            if tuple(params[name].shape) != shape:
                raise ConfigurationError(f"{name} has shape {params[name].shape}, want {shape}")
        self.descriptor = descriptor
        self.params = {name: np.ascontiguousarray(params[name], dtype=np.float64) for name in shapes}
        self.metadata = dict(metadata or {})
        self.phi = phi

    @classmethod
    def zeros(cls, descriptor, phi=None):
        return cls(descriptor, {k: np.zeros(s) for k, s in descriptor.param_shapes().items()}, phi=phi)

    def copy(self):
        return Network(self.descriptor, {k: v.copy() for k, v in self.params.items()}, self.metadata, self.phi)

    def _conv(self, i):
        st = self.descriptor.stages[i]
        return nn.ConvLayer(self.params[f"conv{i}.weight"], self.params[f"conv{i}.bias"], st.relu)

    def _fc(self):
        return nn.FCLayer(self.params["fc.weight"], self.params["fc.bias"])

    def prepare_input(self, x):
        """Canonical batch: (B, m) for reconstruction nets, (B, 1, H, W) otherwise."""
        x = np.asarray(x, dtype=np.float64)
        d = self.descriptor
        if d.fc is not None:
            if x.ndim != 2 or x.shape[1] != d.fc[0]:
                raise UsageError(f"expected measurements of shape (B, {d.fc[0]}), got {x.shape}")
            return x
        if x.ndim == 3:
            x = x[:, None]
        if x.ndim != 4 or x.shape[1] != 1 or min(x.shape[2:]) < 1:
            raise UsageError(f"expected images of shape (B, H, W) or (B, 1, H, W), got {x.shape}")
        return x

    def forward(self, x, keep_cache=False):
        """Batched forward pass; returns ``(output (B, 1, H, W), caches)``."""
        x = self.prepare_input(x)
        d = self.descriptor
        caches = {}
        if d.fc is not None:
            z, caches["fc"] = nn.fc_forward(x, self._fc(), keep_cache)
            n = d.patch_size
            z = z.reshape(len(x), 1, n, n)
        else:
            z = x
        skip_src = {s for s, _ in d.skips}
        kept = {-1: z}
        h = z
        for i in range(len(d.stages)):
            h, caches[i] = nn.conv2d_forward(h, self._conv(i), keep_cache)
            for src, dst in d.skips:
                if dst == i:
                    h = nn.residual_add(h, kept[src])
            if i in skip_src:
                kept[i] = h
        return h, (caches if keep_cache else None)

    def backward(self, grad, caches, need_input_grad=False):
        """Parameter gradients (and optionally the input gradient) for dLoss/dOutput = ``grad``."""
        d = self.descriptor
        grads = {}
        pending = {}  # stage index (or -1 for the conv-stack input) -> gradient
        g = grad
        for i in reversed(range(len(d.stages))):
            if i in pending:
                g = g + pending.pop(i)
            for src, dst in d.skips:
                if dst == i:
                    to_out, g = nn.residual_add_backward(g)
                    pending[src] = pending[src] + to_out if src in pending else to_out
            want_dx = i > 0 or d.fc is not None or need_input_grad
            dx, grads[f"conv{i}.weight"], grads[f"conv{i}.bias"] = nn.conv2d_backward(g, caches[i], want_dx)
            g = dx
        if g is not None and -1 in pending:
            g = g + pending.pop(-1)
        if d.fc is not None:
            g, grads["fc.weight"], grads["fc.bias"] = nn.fc_backward(g.reshape(len(g), -1), caches["fc"])
        return grads, g

    def loss_and_grads(self, x, target, need_grads=True):
        """Batch MSE loss and its parameter gradients."""
        out, caches = self.forward(x, keep_cache=need_grads)
        target = np.asarray(target, dtype=np.float64).reshape(out.shape)
        loss, gout = nn.mse_loss(out, target)
        if not need_grads:
            return loss, None
        grads, _ = self.backward(gout, caches)
        return loss, grads


def init_weights(network, spec):
    """Gaussian weights and zero biases; accepts a Network or a NetworkDescriptor."""
    if isinstance(network, NetworkDescriptor):
        descriptor, phi, metadata = network, None, {}
    else:
        descriptor, phi, metadata = network.descriptor, network.phi, network.metadata
    missing = [s for s in descriptor.stage_names() if s not in spec.stds]
    if missing:
        raise ConfigurationError(f"no init std for stages {missing}")
    rng = np.random.default_rng(spec.seed)
    params = {}
    for name, shape in descriptor.param_shapes().items():
        stage, what = name.split(".")
        if what == "weight":
            params[name] = rng.standard_normal(shape) * spec.stds[stage]
        else:
            params[name] = np.zeros(shape)
    metadata = dict(metadata, init_seed=spec.seed)
    return Network(descriptor, params, metadata, phi)


def forward(network, x):
    """Single-sample inference: a length-m measurement or a 2-D image in, a 2-D image out."""
    x = np.asarray(x, dtype=np.float64)
    out, _ = network.forward(x[None])
    return out[0, 0]


def save_model(network, path):
    header = {
        "type": "network",
        "descriptor": network.descriptor.to_dict(),
        "metadata": network.metadata,
    }
    tensors = dict(network.params)
    if network.phi is not None:
        header["phi"] = phi_header(network.phi)
        tensors["phi"] = network.phi.phi
    write_container(path, header, tensors)


def load_model(path):
    header, tensors = read_container(path)
    if header.get("type") != "network":
        raise FormatError(f"{path} is not a model file (type {header.get('type')!r})")
    try:
        descriptor = NetworkDescriptor.from_dict(header["descriptor"])
    except (KeyError, TypeError, ConfigurationError) as exc:
        raise FormatError(f"bad descriptor block: {exc}") from None
    phi = None
    if "phi" in header:
        phi = phi_from_container(header["phi"], tensors.pop("phi"))
    try:
        return Network(descriptor, tensors, header.get("metadata"), phi)
    except ConfigurationError as exc:
        raise FormatError(f"parameters inconsistent with descriptor: {exc}") from None
