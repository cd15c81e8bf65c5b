"""Pipeline configuration: one flat dataclass, one flat key=value file.

CLI flags override file values which override defaults. The config hash
recorded in run manifests is the sha256 of the canonical sorted
``key=value`` rendering, so identical effective configs hash equally no
matter how they were assembled.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError, IoFailure

TOOL_VERSION = "0.1.0"


@dataclass
class PipelineConfig:
    seed: int = 0
    # dense flow
    flow_levels: int = 4
    flow_smoothness: float = 15.0
    flow_iterations: int = 100
    # motion masking / task geometry
    mask_k: float = 1.0
    min_component: int = 9
    patch_size: int = 128
    # scene-specific training
    eta: float = 0.999
    epochs: int = 3
    batch_size: int = 8
    lr_gen: float = 2e-4
    lr_disc: float = 2e-4
    enc_channels: tuple[int, ...] = (32, 64, 128, 256)
    latent: int = 1024
    disc_channels: tuple[int, ...] = (32, 64, 128)
    train_patch_limit: int = 256
    # texture refinement
    gamma: float = 1e-2
    delta: float = 1e-4
    tex_w: int = 3
    tex_levels: int = 3
    tex_iterations: int = 200
    reassign_interval: int = 50
    search_window: int = 16
    feature_depth: int = 1
    feature_channels: int = 64
    feature_seed: int = 0
    # blending
    blend_radius: int = 5
    component_dilation: int = 2
    # foreground extraction
    fg_tau: float = 30.0
    se_open: int = 3  # square side
    se_close: int = 7  # disk diameter
    fg_otsu: bool = False
    morph_repeats: int = 1
    # metrics
    tau_e: float = 20.0
    # debug dumps (flow magnitude, per-scale texture results); "" = off
    debug_dir: str = ""


def _parse_value(kind, text: str):
    text = text.strip()
    if kind is bool or kind == "bool":
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise InputError(f"not a boolean: {text!r}")
    if kind is int or kind == "int":
        return int(text)
    if kind is float or kind == "float":
        return float(text)
    if str(kind).startswith("tuple"):
        return tuple(int(v) for v in text.split(",") if v.strip())
    return text


def _render_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def config_fields() -> dict[str, type]:
    return {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def load_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{ln}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def build_config(
    file_values: dict[str, str] | None = None, overrides: dict[str, object] | None = None
) -> PipelineConfig:
    """Defaults, then file values, then explicit overrides."""
    kinds = config_fields()
    cfg = PipelineConfig()
    for key, text in (file_values or {}).items():
        if key not in kinds:
            raise InputError(f"unknown config key {key!r}")
        setattr(cfg, key, _parse_value(kinds[key], text))
    for key, value in (overrides or {}).items():
        if key not in kinds:
            raise InputError(f"unknown config key {key!r}")
        if isinstance(value, str):
            value = _parse_value(kinds[key], value)
        setattr(cfg, key, value)
    return cfg


def render_config(cfg: PipelineConfig) -> str:
    lines = [f"{f.name}={_render_value(getattr(cfg, f.name))}" for f in dataclasses.fields(cfg)]
    return "\n".join(lines) + "\n"


def config_hash(cfg: PipelineConfig) -> str:
    canonical = "\n".join(sorted(render_config(cfg).splitlines()))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def write_manifest(cfg: PipelineConfig, out_dir: str | Path, extra: dict | None = None) -> Path:
    """Auditable record of a run: config hash, seed, version."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"config_hash": config_hash(cfg), "seed": cfg.seed, "version": TOOL_VERSION}
    payload.update(extra or {})
    path = out / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    (out / "config.txt").write_text(render_config(cfg))
    return path
