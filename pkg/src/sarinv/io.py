"""Bit-exact file formats and procedural scenes.

Raster format RDF1: 4-byte magic "RDF1", one kind byte (0 = DSM,
1 = specularity map, 2 = SAR amplitudes), u32 little-endian width, u32
little-endian height, then width*height float32 little-endian values in
row-major order. Nothing else; any reader in any language can parse it.

Run configuration is a flat key = value text format. Checkpoints are npz
containers (a zip manifest of named arrays) holding every parameter,
optimizer moment and the loss history in float64, so a resumed run
continues bit-for-bit.
"""

from __future__ import annotations

import io as _stdio
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagic,
    ConfigError,
    DuplicateKey,
    MissingKey,
    NonFiniteValue,
    TruncatedFile,
    UnknownKey,
    UnknownScene,
)
from .geometry import ViewConfig
from .optimize import RunConfig, TrainState
from .scene import DsmSurface, SharpnessParam, SpecularityMap
from .speckle import NoiseConfig

MAGIC = b"RDF1"
KIND_DSM = 0
KIND_THETA = 1
KIND_SAR = 2
_KINDS = (KIND_DSM, KIND_THETA, KIND_SAR)
_HEADER = struct.Struct("<4sBII")


@dataclass
class Raster:
    kind: int
    data: np.ndarray  # float32, shape (height, width)


def write_raster(path, data, kind):
    """Write a 2-d array as RDF1; values are stored as float32."""
    if kind not in _KINDS:
        raise ValueError(f"unknown raster kind {kind}")
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError("raster payload must be 2-d")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"refusing to write non-finite raster to {path}")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, kind, w, h))
        f.write(arr.tobytes())


def read_raster(path) -> Raster:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise TruncatedFile(f"{path}: {len(blob)} bytes is shorter than the header")
    magic, kind, w, h = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if kind not in _KINDS:
        raise BadMagic(f"{path}: unknown kind byte {kind}")
    expected = _HEADER.size + 4 * w * h
    if len(blob) != expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(h, w)
    if not np.all(np.isfinite(data)):
        raise NonFiniteValue(f"{path}: payload contains non-finite values")
    return Raster(kind=int(kind), data=np.ascontiguousarray(data))


def write_text_grid(path, data):
    """Plain-text export: one row per line, repr-exact float columns."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("grid must be 2-d")
    with open(path, "w") as f:
        for row in arr:
            f.write(" ".join(repr(float(v)) for v in row))
            f.write("\n")


# ---------------------------------------------------------------------------
# procedural scenes


def _center_offsets(size):
    """Cell-center coordinates minus 0.5, exactly antisymmetric about center.

    Computed with an integer numerator so offsets negate exactly under
    i -> size-1-i, which makes radial scenes rotate by 90 degrees bitwise.
    """
    i = np.arange(size, dtype=np.float64)
    c = (2.0 * i + 1.0 - size) / (2.0 * size)
    return np.meshgrid(c, c)


def make_scene(name, size=64):
    """Procedural test surfaces; returns (DsmSurface, theta values or None).

    pyramid: square-base pyramid. round_pile: radially symmetric smooth
    mound. fuji: tall smooth cone. fournaise-like: caldera (cone with an
    inner crater). two_region: mound whose left half scatters diffusely
    (theta 1) and right half specularly (theta 4).
    """
    if size < 8:
        raise ValueError("scene size must be >= 8")
    key = str(name).strip().lower().replace("-", "_")
    dx, dy = _center_offsets(size)

    theta = None
    if key == "pyramid":
        rim = np.maximum(np.abs(dx), np.abs(dy))
        h = 0.35 * np.clip(1.0 - rim / 0.4, 0.0, 1.0)
    elif key == "round_pile":
        rho = np.sqrt(dx * dx + dy * dy)
        arg = np.minimum(rho / 0.42, 1.0) * (np.pi / 2.0)
        h = 0.3 * np.cos(arg) ** 2
    elif key == "fuji":
        rho = np.sqrt(dx * dx + dy * dy)
        h = 0.6 * np.clip(1.0 - rho / 0.45, 0.0, 1.0) ** 1.5
    elif key in ("fournaise_like", "fournaise"):
        rho = np.sqrt(dx * dx + dy * dy)
        cone = 0.5 * np.clip(1.0 - rho / 0.45, 0.0, 1.0)
        crater = 0.28 * np.exp(-((rho / 0.08) ** 2))
        h = np.maximum(cone - crater, 0.0)
    elif key == "two_region":
        rho = np.sqrt(dx * dx + dy * dy)
        arg = np.minimum(rho / 0.42, 1.0) * (np.pi / 2.0)
        h = 0.3 * np.cos(arg) ** 2
        theta = np.where(dx < 0.0, 1.0, 4.0)
    else:
        raise UnknownScene(f"unknown scene {name!r}")

    return DsmSurface(heights=h), theta


# ---------------------------------------------------------------------------
# run configuration text format
#
# Flat "key = value" lines; '#' starts a full-line comment; angles are in
# radians so values round-trip exactly through repr(). View blocks use
# view.<index>.<field> with indices contiguous from 0.


def _parse_bool(s):
    if s == "true":
        return True
    if s == "false":
        return False
    raise ConfigError(f"expected true/false, got {s!r}")


def _parse_schedule(s):
    pairs = []
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        step_s, _, lr_s = part.partition(":")
        pairs.append((int(step_s), float(lr_s)))
    if not pairs:
        raise ConfigError("empty lr_schedule")
    return tuple(pairs)


def _fmt_schedule(sched):
    return ",".join(f"{s}:{lr!r}" for s, lr in sched)


def _parse_out_dir(s):
    return s or None


_RUN_KEYS = {
    "steps": (int, str),
    "lr_schedule": (_parse_schedule, _fmt_schedule),
    "plane_batch": (int, str),
    "rays_per_plane": (int, str),
    "reg_weight": (float, repr),
    "learn_theta": (_parse_bool, lambda b: "true" if b else "false"),
    "learn_beta": (_parse_bool, lambda b: "true" if b else "false"),
    "jitter": (_parse_bool, lambda b: "true" if b else "false"),
    "seed": (int, str),
    "grid_size": (int, str),
    "height_init": (float, repr),
    "theta_raw_init": (float, repr),
    "beta_init": (float, repr),
    "beta_mode": (str, str),
    "beta_final": (float, repr),
    "checkpoint_every": (int, str),
    "log_every": (int, str),
    "out_dir": (_parse_out_dir, lambda v: v or ""),
}

_NOISE_KEYS = {
    "seed": (int, str),
    "looks": (int, str),
}

# required view fields have no default
_VIEW_KEYS = {
    "heading": (float, repr, None),
    "incidence": (float, repr, None),
    "n_planes": (int, str, 64),
    "n_range_bins": (int, str, 256),
    "n_rays": (int, str, 256),
    "standoff": (float, repr, 1.0),
    "range_origin": (float, repr, "auto"),
    "range_step": (float, repr, "auto"),
}

_SCENE_KEYS = {
    "scene": (str, str),
    "scene_size": (int, str),
}


@dataclass
class FullConfig:
    """Everything a run needs: solver, views, noise and scene identity."""

    run: RunConfig
    views: list
    noise: NoiseConfig
    scene: str = ""
    scene_size: int = 64


def _build_view(index, fields):
    for name, spec in _VIEW_KEYS.items():
        if len(spec) == 3 and spec[2] is None and name not in fields:
            raise MissingKey(f"view.{index}.{name} is required")
    vals = {}
    for name, spec in _VIEW_KEYS.items():
        default = spec[2]
        vals[name] = fields.get(name, default)
    auto_origin = vals["range_origin"] == "auto"
    auto_step = vals["range_step"] == "auto"
    if auto_origin != auto_step:
        raise ConfigError(
            f"view.{index}: range_origin and range_step must both be given "
            "or both derived"
        )
    if auto_origin:
        return ViewConfig.for_scene(
            azimuth_heading=vals["heading"],
            incidence=vals["incidence"],
            n_planes=vals["n_planes"],
            n_range_bins=vals["n_range_bins"],
            n_rays=vals["n_rays"],
            standoff=vals["standoff"],
        )
    return ViewConfig(
        azimuth_heading=vals["heading"],
        incidence=vals["incidence"],
        n_planes=vals["n_planes"],
        n_range_bins=vals["n_range_bins"],
        range_origin=vals["range_origin"],
        range_step=vals["range_step"],
        n_rays=vals["n_rays"],
        standoff=vals["standoff"],
    )


def parse_config(text, source="<config>") -> FullConfig:
    seen = set()
    run_vals = {}
    noise_vals = {}
    scene_vals = {}
    view_fields = {}

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key = key.strip()
        value = value.strip()
        if key in seen:
            raise DuplicateKey(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)

        try:
            if key.startswith("view."):
                parts = key.split(".")
                if len(parts) != 3 or not parts[1].isdigit():
                    raise UnknownKey(f"{source}:{lineno}: unknown key {key!r}")
                index, fname = int(parts[1]), parts[2]
                if fname not in _VIEW_KEYS:
                    raise UnknownKey(f"{source}:{lineno}: unknown key {key!r}")
                parse = _VIEW_KEYS[fname][0]
                view_fields.setdefault(index, {})[fname] = parse(value)
            elif key.startswith("noise."):
                fname = key[len("noise."):]
                if fname not in _NOISE_KEYS:
                    raise UnknownKey(f"{source}:{lineno}: unknown key {key!r}")
                noise_vals[fname] = _NOISE_KEYS[fname][0](value)
            elif key in _SCENE_KEYS:
                scene_vals[key] = _SCENE_KEYS[key][0](value)
            elif key in _RUN_KEYS:
                run_vals[key] = _RUN_KEYS[key][0](value)
            else:
                raise UnknownKey(f"{source}:{lineno}: unknown key {key!r}")
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc

    if view_fields:
        indices = sorted(view_fields)
        if indices != list(range(len(indices))):
            raise ConfigError(f"{source}: view indices must be contiguous from 0")
        views = [_build_view(i, view_fields[i]) for i in indices]
    else:
        views = []

    try:
        run = RunConfig(**run_vals)
        noise = NoiseConfig(**noise_vals)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return FullConfig(
        run=run,
        views=views,
        noise=noise,
        scene=scene_vals.get("scene", ""),
        scene_size=scene_vals.get("scene_size", 64),
    )


def read_config(path) -> FullConfig:
    with open(path, "r") as f:
        return parse_config(f.read(), source=str(path))


def format_config(cfg: FullConfig) -> str:
    out = _stdio.StringIO()
    out.write("# sarinv run configuration (angles in radians)\n")
    for name, (_, fmt) in _RUN_KEYS.items():
        out.write(f"{name} = {fmt(getattr(cfg.run, name))}\n")
    for name, (_, fmt) in _SCENE_KEYS.items():
        out.write(f"{name} = {fmt(getattr(cfg, name))}\n")
    for name, (_, fmt) in _NOISE_KEYS.items():
        out.write(f"noise.{name} = {fmt(getattr(cfg.noise, name))}\n")
    for i, view in enumerate(cfg.views):
        out.write(f"view.{i}.heading = {view.azimuth_heading!r}\n")
        out.write(f"view.{i}.incidence = {view.incidence!r}\n")
        out.write(f"view.{i}.n_planes = {view.n_planes}\n")
        out.write(f"view.{i}.n_range_bins = {view.n_range_bins}\n")
        out.write(f"view.{i}.n_rays = {view.n_rays}\n")
        out.write(f"view.{i}.standoff = {view.standoff!r}\n")
        out.write(f"view.{i}.range_origin = {view.range_origin!r}\n")
        out.write(f"view.{i}.range_step = {view.range_step!r}\n")
    return out.getvalue()


def write_config(path, cfg: FullConfig):
    with open(path, "w") as f:
        f.write(format_config(cfg))


# ---------------------------------------------------------------------------
# reports and loss curves


def write_report(path, report):
    """Flat key=value lines; arrays are skipped (they get their own files)."""
    with open(path, "w") as f:
        for key in sorted(report):
            value = report[key]
            if isinstance(value, np.ndarray):
                continue
            if isinstance(value, float):
                f.write(f"{key}={value!r}\n")
            else:
                f.write(f"{key}={value}\n")


def read_report(path):
    out = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    out[key] = value
    return out


def write_loss_curve(path, values):
    with open(path, "w") as f:
        for v in values:
            f.write(f"{float(v)!r}\n")


# ---------------------------------------------------------------------------
# checkpoints


def checkpoint_path(out_dir):
    return os.path.join(out_dir, "checkpoint.npz")


def write_checkpoint(path, state: TrainState, run_cfg: RunConfig):
    """Atomic full-precision snapshot of the training state."""
    cfg_text = format_config(
        FullConfig(run=run_cfg, views=[], noise=NoiseConfig())
    )
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        np.savez(
            f,
            heights=state.surface.heights,
            theta_raw=state.spec_map.raw,
            beta_raw=np.float64(state.sharpness.raw),
            m_heights=state.m_heights,
            v_heights=state.v_heights,
            m_theta=state.m_theta,
            v_theta=state.v_theta,
            m_beta=np.float64(state.m_beta),
            v_beta=np.float64(state.v_beta),
            step=np.int64(state.step),
            loss_history=np.asarray(state.loss_history, dtype=np.float64),
            config=np.frombuffer(cfg_text.encode(), dtype=np.uint8),
        )
    os.replace(tmp, path)


def read_checkpoint(path):
    """Load a checkpoint; returns (TrainState, RunConfig stored with it)."""
    with np.load(path, allow_pickle=False) as z:
        state = TrainState(
            surface=DsmSurface(heights=z["heights"].copy()),
            spec_map=SpecularityMap(raw=z["theta_raw"].copy()),
            sharpness=SharpnessParam(raw=float(z["beta_raw"])),
            m_heights=z["m_heights"].copy(),
            v_heights=z["v_heights"].copy(),
            m_theta=z["m_theta"].copy(),
            v_theta=z["v_theta"].copy(),
            m_beta=float(z["m_beta"]),
            v_beta=float(z["v_beta"]),
            step=int(z["step"]),
            loss_history=[float(v) for v in z["loss_history"]],
        )
        cfg_text = z["config"].tobytes().decode()
    run_cfg = parse_config(cfg_text, source=str(path)).run
    return state, run_cfg
