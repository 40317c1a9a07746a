"""Run configuration, binary artifact I/O, and manifest bookkeeping.

Configs are line-oriented ``section.key = value`` text.  Snapshots use the
RFS1 binary layout and network checkpoints RFP1, both little-endian and
each carrying a trailing 64-bit FNV-1a hash of the generating config so
artifacts can be traced back to the exact run that produced them.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError, ParameterError
from .lbm.lattice import CS2, tau_from_viscosity
from .lbm.solver import FieldSnapshot
from .pinn.losses import LossWeights
from .pinn.training import TrainConfig
from .surface import FractalSurfaceSpec
from . import autodiff as ad

SNAPSHOT_MAGIC = b"RFS1"
CHECKPOINT_MAGIC = b"RFP1"
ACTIVATION_TAGS = {"tanh": 0, "relu": 1, "elu": 2, "gelu": 3}
_TAG_TO_ACTIVATION = {v: k for k, v in ACTIVATION_TAGS.items()}

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


# --------------------------------------------------------------------------
# Run configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Every knob of the pipeline, flat per section.  ``viscosity`` is the
    canonical flow parameter; the Reynolds number is derived from it."""

    # surface
    amplitude: float
    gamma: float = 1.5
    fractal_dimension: float = 1.5
    n_min: int = 0
    n_max: int = 6
    phase_seed: int = 0
    # lattice
    nx: int = 200
    ny: int = 50
    gap: float = 40.0
    # flow
    inlet_speed: float = 0.05
    viscosity: float = 0.1
    outlet_pressure: float = CS2
    total_steps: int = 10000
    snapshot_interval: int = 1000
    # network
    hidden_layers: int = 8
    hidden_width: int = 128
    activation: str = "tanh"
    kinetic_head: bool = False
    # training
    adam_iters: int = 2000
    lbfgs_iters: int = 500
    learning_rate: float = 1e-3
    lr_decay: float = 0.95
    lr_decay_interval: int = 200
    batch_size: int = 256
    lbfgs_history: int = 20
    w_data: float = 1.0
    w_physics: float = 0.8
    w_cont: float = 0.6
    w_bc: float = 1.2
    w_moment: float = 0.0
    # sampling
    strategy: str = "near_wall_enriched"
    n_collocation: int = 2048
    n_boundary: int = 256
    n_data: int = 2000
    band_fraction: float = 0.4
    # global
    seed: int = 0

    def __post_init__(self):
        if self.viscosity <= 0:
            raise ParameterError("viscosity must be positive")
        if self.gap <= 0:
            raise ParameterError("gap must be positive")
        if self.inlet_speed <= 0:
            raise ParameterError("inlet speed must be positive")
        if self.activation not in ACTIVATION_TAGS:
            raise ParameterError(
                f"activation must be one of {tuple(ACTIVATION_TAGS)}")
        # delegate the remaining domain checks to the owning types
        self.surface_spec()
        self.train_config()

    @property
    def reynolds(self) -> float:
        return self.inlet_speed * self.gap / self.viscosity

    @property
    def tau(self) -> float:
        return tau_from_viscosity(self.viscosity)

    def surface_spec(self, seed_offset: int = 0) -> FractalSurfaceSpec:
        return FractalSurfaceSpec(
            amplitude=self.amplitude, gamma=self.gamma,
            fractal_dimension=self.fractal_dimension,
            n_min=self.n_min, n_max=self.n_max,
            phase_seed=self.phase_seed + seed_offset,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(data=self.w_data, physics=self.w_physics,
                           cont=self.w_cont, bc=self.w_bc,
                           moment=self.w_moment)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            adam_iters=self.adam_iters, lbfgs_iters=self.lbfgs_iters,
            learning_rate=self.learning_rate, lr_decay=self.lr_decay,
            lr_decay_interval=self.lr_decay_interval,
            batch_size=self.batch_size, lbfgs_history=self.lbfgs_history,
            weights=self.loss_weights(), seed=self.seed,
        )


def _parse_bool(text):
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError(f"expected true|false, got {text!r}")


# section -> key -> (attribute, converter); flow.nu / flow.Re handled apart
_SCHEMA = {
    "surface": {
        "amplitude": ("amplitude", float),
        "gamma": ("gamma", float),
        "fractal_dimension": ("fractal_dimension", float),
        "n_min": ("n_min", int),
        "n_max": ("n_max", int),
        "phase_seed": ("phase_seed", int),
    },
    "lattice": {
        "nx": ("nx", int),
        "ny": ("ny", int),
        "H": ("gap", float),
    },
    "flow": {
        "U_i": ("inlet_speed", float),
        "p0": ("outlet_pressure", float),
        "total_steps": ("total_steps", int),
        "snapshot_interval": ("snapshot_interval", int),
    },
    "network": {
        "hidden_layers": ("hidden_layers", int),
        "hidden_width": ("hidden_width", int),
        "activation": ("activation", str),
        "kinetic_head": ("kinetic_head", _parse_bool),
    },
    "training": {
        "adam_iters": ("adam_iters", int),
        "lbfgs_iters": ("lbfgs_iters", int),
        "learning_rate": ("learning_rate", float),
        "lr_decay": ("lr_decay", float),
        "lr_decay_interval": ("lr_decay_interval", int),
        "batch_size": ("batch_size", int),
        "lbfgs_history": ("lbfgs_history", int),
        "w_data": ("w_data", float),
        "w_physics": ("w_physics", float),
        "w_cont": ("w_cont", float),
        "w_bc": ("w_bc", float),
        "w_moment": ("w_moment", float),
    },
    "sampling": {
        "strategy": ("strategy", str),
        "n_collocation": ("n_collocation", int),
        "n_boundary": ("n_boundary", int),
        "n_data": ("n_data", int),
        "band_fraction": ("band_fraction", float),
    },
    "run": {
        "seed": ("seed", int),
    },
}
_REQUIRED = {"surface.amplitude"}
_LINE_RE = re.compile(r"^\s*([A-Za-z_]+)\.([A-Za-z_0-9]+)\s*=\s*(.+?)\s*$")


def parse_config(text: str) -> RunConfig:
    """Parse ``section.key = value`` lines into a validated RunConfig."""
    fields_seen: dict[str, object] = {}
    nu = re_value = None
    nu_line = re_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE_RE.match(line)
        if m is None:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        section, key, value = m.groups()
        if section == "flow" and key in ("nu", "Re"):
            try:
                parsed = float(value)
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: flow.{key}: invalid number {value!r}")
            if key == "nu":
                if nu is not None:
                    raise ConfigError(f"line {lineno}: duplicate key flow.nu")
                nu, nu_line = parsed, lineno
            else:
                if re_value is not None:
                    raise ConfigError(f"line {lineno}: duplicate key flow.Re")
                re_value, re_line = parsed, lineno
            continue
        if section not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")
        if key not in _SCHEMA[section]:
            raise ConfigError(
                f"line {lineno}: unknown key {section}.{key}")
        attr, conv = _SCHEMA[section][key]
        if attr in fields_seen:
            raise ConfigError(f"line {lineno}: duplicate key {section}.{key}")
        try:
            fields_seen[attr] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {section}.{key}: {exc}")

    for full in _REQUIRED:
        section, key = full.split(".")
        attr = _SCHEMA[section][key][0]
        if attr not in fields_seen:
            raise ConfigError(f"missing required key {full}")

    if nu is None and re_value is None:
        raise ConfigError("one of flow.nu or flow.Re is required")
    u = fields_seen.get("inlet_speed", RunConfig.__dataclass_fields__[
        "inlet_speed"].default)
    gap = fields_seen.get("gap", RunConfig.__dataclass_fields__["gap"].default)
    if nu is not None and re_value is not None:
        implied = u * gap / nu
        if abs(implied - re_value) > 1e-9 * max(abs(re_value), 1.0):
            raise ConfigError(
                f"line {re_line}: flow.Re = {re_value} inconsistent with "
                f"flow.nu = {nu} (implies Re = {implied})")
    viscosity = nu if nu is not None else u * gap / re_value
    fields_seen["viscosity"] = viscosity

    try:
        return RunConfig(**fields_seen)
    except ParameterError as exc:
        raise ConfigError(str(exc))


def serialize_config(config: RunConfig) -> str:
    """Canonical text form; parse(serialize(c)) == c.  Derived quantities
    (Re, tau) are echoed as comments."""
    lines = [
        "# roughflow run configuration",
        f"# derived: Re = {config.reynolds!r}, tau = {config.tau!r}",
    ]
    for section, keys in _SCHEMA.items():
        for key, (attr, conv) in keys.items():
            value = getattr(config, attr)
            if conv is _parse_bool:
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{section}.{key} = {value}")
        if section == "flow":
            lines.append(f"flow.nu = {config.viscosity!r}")
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> int:
    """64-bit FNV-1a over the canonical serialized form."""
    return fnv1a64(serialize_config(config).encode("utf-8"))


# --------------------------------------------------------------------------
# Binary readers/writers
# --------------------------------------------------------------------------

class _Reader:
    """Cursor over bytes that reports the offset of any truncation."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated payload: need {n} bytes, have "
                f"{len(self.data) - self.pos}", offset=self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def array(self, count: int) -> np.ndarray:
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64)

    def done(self):
        if self.pos != len(self.data):
            raise FormatError(
                f"{len(self.data) - self.pos} trailing bytes", offset=self.pos)


def write_snapshot(path, snapshot: FieldSnapshot, cfg_hash: int) -> None:
    """RFS1: magic, u32 nx, u32 ny, u64 timestep, f64 c_s^2, then row-major
    f64 arrays rho, u, v, p (x fastest; solid = NaN), then u64 config hash."""
    nx, ny = snapshot.rho.shape
    parts = [SNAPSHOT_MAGIC,
             struct.pack("<IIQd", nx, ny, snapshot.t, CS2)]
    for arr in (snapshot.rho, snapshot.u, snapshot.v, snapshot.p):
        # (nx, ny) with x fastest on disk -> store column-major rows of y
        parts.append(np.ascontiguousarray(arr.T, dtype="<f8").tobytes())
    parts.append(struct.pack("<Q", cfg_hash))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_snapshot(path, expect_shape=None):
    """Returns (FieldSnapshot, config_hash); errors carry byte offsets."""
    with open(path, "rb") as fh:
        rd = _Reader(fh.read())
    magic = rd.take(4)
    if magic != SNAPSHOT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {SNAPSHOT_MAGIC!r}",
                          offset=0)
    nx, ny, t, cs2 = rd.unpack("IIQd")
    if expect_shape is not None and (nx, ny) != tuple(expect_shape):
        raise FormatError(
            f"snapshot grid ({nx}, {ny}) does not match expected "
            f"{tuple(expect_shape)}", offset=4)
    fields = [rd.array(nx * ny).reshape(ny, nx).T for _ in range(4)]
    (cfg_hash,) = rd.unpack("Q")
    rd.done()
    rho, u, v, p = fields
    return FieldSnapshot(t=int(t), rho=rho, u=u, v=v, p=p), cfg_hash


def write_checkpoint(path, params: ad.ParameterSet, seed: int,
                     activation: str, cfg_hash: int) -> None:
    """RFP1: magic, u32 layer count, per layer u32 rows/cols + row-major f64
    weights + f64 biases; trailing u64 seed, u32 activation tag, u64 hash."""
    if activation not in ACTIVATION_TAGS:
        raise ParameterError(f"unknown activation {activation!r}")
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", len(params.weights))]
    for w, b in zip(params.weights, params.biases):
        rows, cols = w.shape
        parts.append(struct.pack("<II", rows, cols))
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    parts.append(struct.pack("<QIQ", seed, ACTIVATION_TAGS[activation],
                             cfg_hash))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_checkpoint(path):
    """Returns (ParameterSet, seed, activation, config_hash)."""
    with open(path, "rb") as fh:
        rd = _Reader(fh.read())
    magic = rd.take(4)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected "
                          f"{CHECKPOINT_MAGIC!r}", offset=0)
    (n_layers,) = rd.unpack("I")
    weights, biases = [], []
    for _ in range(n_layers):
        rows, cols = rd.unpack("II")
        weights.append(rd.array(rows * cols).reshape(rows, cols))
        biases.append(rd.array(cols))
    seed, tag, cfg_hash = rd.unpack("QIQ")
    rd.done()
    if tag not in _TAG_TO_ACTIVATION:
        raise FormatError(f"unknown activation tag {tag}", offset=rd.pos - 12)
    return (ad.ParameterSet(weights=weights, biases=biases), seed,
            _TAG_TO_ACTIVATION[tag], cfg_hash)


# --------------------------------------------------------------------------
# Trained-model persistence (checkpoint + sidecar metadata)
# --------------------------------------------------------------------------

def _format_vector(values):
    return ",".join(repr(float(v)) for v in np.asarray(values).ravel())


def _parse_vector(text):
    return np.array([float(tok) for tok in text.split(",") if tok])


def save_model(path, model, seed: int, cfg_hash: int) -> None:
    """Write an RFP1 checkpoint plus a `<path>.meta` sidecar carrying the
    normalization records needed to rebuild the surrogate."""
    write_checkpoint(path, model.params, seed, model.net_spec.activation,
                     cfg_hash)
    lines = [
        f"reynolds = {model.reynolds!r}",
        f"kinetic_head = {'true' if model.kinetic_head else 'false'}",
        f"in_shift = {_format_vector(model.in_shift)}",
        f"in_scale = {_format_vector(model.in_scale)}",
        f"out_shift = {_format_vector(model.out_shift)}",
        f"out_scale = {_format_vector(model.out_scale)}",
        f"extra_features = {_format_vector(model.extra_features)}",
    ]
    with open(str(path) + ".meta", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    """Returns (PinnModel, seed, config_hash) from checkpoint + sidecar."""
    from .pinn.model import N_MACRO, PinnModel

    params, seed, activation, cfg_hash = read_checkpoint(path)
    meta = {}
    try:
        with open(str(path) + ".meta", encoding="utf-8") as fh:
            for raw in fh:
                if "=" in raw:
                    key, value = raw.split("=", 1)
                    meta[key.strip()] = value.strip()
    except FileNotFoundError:
        raise FormatError(f"missing sidecar {path}.meta", offset=0)
    dims = [w.shape for w in params.weights]
    hidden_widths = {c for _, c in dims[:-1]}
    if len(hidden_widths) != 1:
        raise FormatError("checkpoint hidden widths are not uniform",
                          offset=0)
    kinetic_head = meta.get("kinetic_head") == "true"
    spec = ad.NetworkSpec(
        input_width=dims[0][0],
        hidden_layers=len(dims) - 1,
        hidden_width=hidden_widths.pop(),
        output_width=dims[-1][1],
        activation=activation,
        init_seed=int(seed),
    )
    model = PinnModel(
        net_spec=spec,
        params=params,
        in_shift=_parse_vector(meta["in_shift"]),
        in_scale=_parse_vector(meta["in_scale"]),
        out_shift=_parse_vector(meta["out_shift"]),
        out_scale=_parse_vector(meta["out_scale"]),
        reynolds=float(meta["reynolds"]),
        kinetic_head=kinetic_head,
        extra_features=tuple(_parse_vector(meta.get("extra_features", ""))),
    )
    if model.net_spec.output_width != N_MACRO + (9 if kinetic_head else 0):
        raise FormatError("checkpoint output width disagrees with metadata",
                          offset=0)
    return model, seed, cfg_hash


# --------------------------------------------------------------------------
# Manifests
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Manifest:
    """Paths of a run's snapshots plus the generating config hash."""

    config_hash: int
    paths: tuple
    extras: dict = field(default_factory=dict)


def write_manifest(path, manifest: Manifest) -> None:
    lines = [f"# config_hash = {manifest.config_hash:#018x}"]
    for key, value in sorted(manifest.extras.items()):
        lines.append(f"# {key} = {value}")
    lines.extend(str(p) for p in manifest.paths)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path) -> Manifest:
    cfg_hash = None
    extras = {}
    paths = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*([A-Za-z_0-9]+)\s*=\s*(.+)", line)
                if m:
                    key, value = m.groups()
                    if key == "config_hash":
                        cfg_hash = int(value, 0)
                    else:
                        extras[key] = value
                continue
            paths.append(line)
    if cfg_hash is None:
        raise FormatError("manifest missing config_hash header", offset=0)
    return Manifest(config_hash=cfg_hash, paths=tuple(paths), extras=extras)


def verify_manifest(manifest: Manifest, base_dir) -> list:
    """Cross-check listed snapshots against the manifest's config hash.

    Returns human-readable warnings (missing file, hash mismatch); an empty
    list means every artifact traces to the same config.
    """
    import os

    warnings = []
    for rel in manifest.paths:
        full = os.path.join(base_dir, rel)
        if not os.path.exists(full):
            warnings.append(f"{rel}: listed in manifest but missing")
            continue
        try:
            _, cfg_hash = read_snapshot(full)
        except FormatError as exc:
            warnings.append(f"{rel}: unreadable ({exc})")
            continue
        if cfg_hash != manifest.config_hash:
            warnings.append(
                f"{rel}: config hash {cfg_hash:#018x} does not match "
                f"manifest {manifest.config_hash:#018x}")
    return warnings
