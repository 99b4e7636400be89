"""JSON run configuration with sections ``schedule``, ``scene``, ``edit``, ``mask`` and ``output``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .ito import EditParams
from .pnm import DEFAULT_RANGE
from .scene import SceneConfig, SceneMixture, build_mixture
from .schedule import NoiseSchedule, build_schedule

SECTIONS = ("schedule", "scene", "edit", "mask", "output")
MASK_KEYS = ("tau", "n_seeds", "seeds", "sigma_blur")


class ConfigError(ValueError):
    """Invalid or unreadable configuration document."""


@dataclass(frozen=True)
class OutputConfig:
    """Where and how artifacts are written.

    ``root`` is the parent of per-run directories; ``None`` defers to the
    environment variable or the working directory. ``image_range`` is the
    intensity interval mapped onto the full 16-bit range of image files.
    """

    root: str | None = None
    image_range: tuple[float, float] = DEFAULT_RANGE
    # Corpus and demo inputs are draws from their component rather than its mean.
    sample_inputs: bool = True

    def __post_init__(self) -> None:
        lo, hi = (float(v) for v in self.image_range)
        if not lo < hi:
            raise ConfigError(f"image_range must be increasing, got {self.image_range}")
        object.__setattr__(self, "image_range", (lo, hi))

    def to_dict(self) -> dict:
        return {"root": self.root, "image_range": list(self.image_range), "sample_inputs": self.sample_inputs}


@dataclass(frozen=True)
class RunConfig:
    T: int = 25
    schedule_kind: str = "cosine"
    scene: SceneConfig = field(default_factory=SceneConfig)
    edit: EditParams = field(default_factory=EditParams)
    output: OutputConfig = field(default_factory=OutputConfig)

    def schedule(self) -> NoiseSchedule:
        return build_schedule(self.T, self.schedule_kind)

    def mixture(self) -> SceneMixture:
        return build_mixture(canvas=self.scene)

    def to_dict(self) -> dict:
        e = self.edit.to_dict()
        return {
            "schedule": {"T": self.T, "kind": self.schedule_kind},
            "scene": self.scene.to_dict(),
            "edit": {k: v for k, v in e.items() if k not in MASK_KEYS},
            "mask": {k: e[k] for k in MASK_KEYS},
            "output": self.output.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        """Build from a (possibly partial) document; missing keys take defaults."""
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(d) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        try:
            sched = dict(d.get("schedule", {}))
            extra = set(sched) - {"T", "kind"}
            if extra:
                raise ConfigError(f"unknown schedule keys: {sorted(extra)}")
            mask = dict(d.get("mask", {}))
            extra = set(mask) - set(MASK_KEYS)
            if extra:
                raise ConfigError(f"unknown mask keys: {sorted(extra)}")
            edit = {**d.get("edit", {}), **mask}
            if "seeds" not in mask and "n_seeds" in mask:
                edit["seeds"] = None
            out = dict(d.get("output", {}))
            extra = set(out) - {f.name for f in fields(OutputConfig)}
            if extra:
                raise ConfigError(f"unknown output keys: {sorted(extra)}")
            cfg = cls(
                T=int(sched.get("T", 25)),
                schedule_kind=sched.get("kind", "cosine"),
                scene=SceneConfig.from_dict(d.get("scene", {})),
                edit=EditParams.from_dict(edit),
                output=OutputConfig(**out),
            )
            cfg.schedule()
            cfg.edit.validate(cfg.T)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    def with_edit(self, **changes) -> "RunConfig":
        return replace(self, edit=replace(self.edit, **changes))


def load_config(path: str | Path | None) -> RunConfig:
    """Read a JSON config; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return RunConfig.from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(cfg: RunConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    return path
