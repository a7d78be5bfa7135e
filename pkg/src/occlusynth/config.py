"""
YAML run configuration for dataset synthesis.

Every key is optional; an empty file (or none at all) gives the default
scene setup and augmentation ranges. Example::

    catalog: objects/          # relative paths resolve against the file
    fg_threshold: 25
    min_area: 64
    width: 640
    height: 480
    n_instances: [1, 8]
    background: [0, 0, 0]      # or a directory of backdrop images
    min_visible_px: 16
    allow_duplicates: true
    master_seed: 0
    augment:
      rotate: [-90, 90]
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .augment import AugmentRanges
from .compositor import SceneConfig
from .ingest import DEFAULT_MIN_AREA, DEFAULT_THRESHOLD


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    catalog: str | None = None
    fg_threshold: int = DEFAULT_THRESHOLD
    min_area: int = DEFAULT_MIN_AREA

    def to_dict(self) -> dict:
        s = self.scene
        bg = s.background if isinstance(s.background, str) else list(s.background)
        return {
            "catalog": self.catalog,
            "fg_threshold": self.fg_threshold,
            "min_area": self.min_area,
            "width": s.width,
            "height": s.height,
            "n_instances": list(s.n_instances),
            "background": bg,
            "min_visible_px": s.min_visible_px,
            "allow_duplicates": s.allow_duplicates,
            "master_seed": s.master_seed,
            "min_in_canvas": s.min_in_canvas,
            "augment": s.augment.to_dict(),
        }


def _int(d, key, lo=None, hi=None):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{key}: {v} outside [{lo}, {hi}]")
    return v


def _pair(d, key):
    v = d[key]
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{key}: expected a [low, high] pair, got {v!r}")
    return tuple(v)


def parse_config(data: dict | None, base_dir: Path | None = None) -> RunConfig:
    """Validate a decoded config mapping; errors name the offending field."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    known = {"catalog", "fg_threshold", "min_area", "width", "height", "n_instances", "background",
             "min_visible_px", "allow_duplicates", "master_seed", "min_in_canvas", "augment"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config fields: {unknown}")

    scene = {}
    for key in ("width", "height"):
        if key in data:
            scene[key] = _int(data, key, 1)
    if "n_instances" in data:
        lo, hi = _pair(data, "n_instances")
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in (lo, hi)) or lo < 0 or lo > hi:
            raise ConfigError(f"n_instances: need integers 0 <= low <= high, got {[lo, hi]}")
        scene["n_instances"] = (lo, hi)
    if "min_visible_px" in data:
        scene["min_visible_px"] = _int(data, "min_visible_px", 0)
    if "master_seed" in data:
        scene["master_seed"] = _int(data, "master_seed", 0, 2 ** 64 - 1)
    if "allow_duplicates" in data:
        if not isinstance(data["allow_duplicates"], bool):
            raise ConfigError(f"allow_duplicates: expected true/false, got {data['allow_duplicates']!r}")
        scene["allow_duplicates"] = data["allow_duplicates"]
    if "min_in_canvas" in data:
        v = data["min_in_canvas"]
        if not isinstance(v, (int, float)) or not 0 < v <= 1:
            raise ConfigError(f"min_in_canvas: expected a number in (0, 1], got {v!r}")
        scene["min_in_canvas"] = float(v)
    if "background" in data:
        bg = data["background"]
        if isinstance(bg, str):
            path = Path(bg)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            scene["background"] = str(path)
        elif (isinstance(bg, (list, tuple)) and len(bg) == 3
              and all(isinstance(c, int) and 0 <= c <= 255 for c in bg)):
            scene["background"] = tuple(bg)
        else:
            raise ConfigError(f"background: expected [r, g, b] in 0..255 or a directory, got {bg!r}")
    if "augment" in data:
        aug = data["augment"]
        if not isinstance(aug, dict):
            raise ConfigError("augment: expected a mapping of field -> [low, high]")
        for key in aug:
            _pair(aug, key)
        try:
            scene["augment"] = AugmentRanges.from_dict(aug)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"augment: {e}") from None

    catalog = data.get("catalog")
    if catalog is not None:
        if not isinstance(catalog, str):
            raise ConfigError(f"catalog: expected a path, got {catalog!r}")
        if base_dir is not None and not Path(catalog).is_absolute():
            catalog = str(base_dir / catalog)
    fg = _int(data, "fg_threshold", 0, 255) if "fg_threshold" in data else DEFAULT_THRESHOLD
    min_area = _int(data, "min_area", 0) if "min_area" in data else DEFAULT_MIN_AREA
    try:
        cfg = SceneConfig(**scene)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return RunConfig(cfg, catalog, fg, min_area)


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML ({e})") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data, path.parent)
