"""Synthetic glyph scenes and the exact Gaussian-mixture noise predictor.

Every scene is a class-coloured 5x5 glyph stamped over a fixed structured
background. The data distribution is an isotropic Gaussian mixture with one
component per (class, position) pair, so the Bayes-optimal noise predictor
has a closed form and stands in for a trained conditional network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .schedule import NoiseSchedule, as_latent

GLYPH_SIZE = 5
# Intensity of glyph pixels that lie off the class pattern, relative to the
# class colour. Keeps every footprint pixel distinct from the background.
OFF_PATTERN_SCALE = 0.75

# 5x5 class patterns, one row per string.
GLYPH_PATTERNS = (
    ("#####", "#...#", "#...#", "#...#", "#####"),  # ring
    ("..#..", "..#..", "#####", "..#..", "..#.."),  # plus
    ("#...#", ".#.#.", "..#..", ".#.#.", "#...#"),  # cross
    ("..#..", ".###.", "#####", ".###.", "..#.."),  # diamond
    ("#.#.#", ".#.#.", "#.#.#", ".#.#.", "#.#.#"),  # checker
    ("#####", "#####", ".....", "#####", "#####"),  # bars
)

DEFAULT_PALETTE = (
    (1.0, -1.0, -1.0),
    (-1.0, 1.0, -1.0),
    (-1.0, -1.0, 1.0),
    (1.0, 1.0, -1.0),
    (-1.0, 1.0, 1.0),
    (1.0, -1.0, 1.0),
)


class InconsistentConditionError(ValueError):
    """A condition excludes every mixture component."""


@dataclass(frozen=True)
class Condition:
    """Hard constraint on the object identity and/or its anchor position.

    Both fields ``None`` is the null (unconditional) condition.
    """

    class_id: int | None = None
    layout: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.layout is not None:
            object.__setattr__(self, "layout", (int(self.layout[0]), int(self.layout[1])))

    @classmethod
    def null(cls) -> "Condition":
        return cls()

    @property
    def is_null(self) -> bool:
        return self.class_id is None and self.layout is None

    def admits(self, class_id: int, position: tuple[int, int]) -> bool:
        if self.class_id is not None and self.class_id != class_id:
            return False
        if self.layout is not None and self.layout != tuple(position):
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id,
            "layout": list(self.layout) if self.layout is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Condition":
        layout = d.get("layout")
        return cls(class_id=d.get("class_id"), layout=tuple(layout) if layout is not None else None)

    def __str__(self) -> str:
        parts = []
        if self.class_id is not None:
            parts.append(f"class={self.class_id}")
        if self.layout is not None:
            parts.append(f"at={self.layout[0]},{self.layout[1]}")
        return " ".join(parts) or "null"


@dataclass(frozen=True)
class SceneConfig:
    """Canvas geometry, background and mixture parameters."""

    height: int = 16
    width: int = 16
    channels: int = 3
    n_classes: int = 4
    grid_rows: tuple[int, ...] = (4, 7, 10)
    grid_cols: tuple[int, ...] = (4, 7, 10)
    sigma: float = 0.05
    background_level: float = 0.0
    palette: tuple[tuple[float, ...], ...] = DEFAULT_PALETTE

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid_rows", tuple(int(r) for r in self.grid_rows))
        object.__setattr__(self, "grid_cols", tuple(int(c) for c in self.grid_cols))
        object.__setattr__(self, "palette", tuple(tuple(float(v) for v in p) for p in self.palette))
        if min(self.height, self.width, self.channels) < 1:
            raise ValueError("canvas dimensions must be positive")
        if self.n_classes < 1 or not self.grid_rows or not self.grid_cols:
            raise ValueError("need at least one class and one grid position")
        if self.n_classes > len(self.palette) or self.n_classes > len(GLYPH_PATTERNS):
            raise ValueError(f"at most {min(len(self.palette), len(GLYPH_PATTERNS))} classes supported")
        if any(len(p) != self.channels for p in self.palette):
            raise ValueError("palette entries must have one value per channel")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        for pos in self.positions:
            check_layout(pos, self)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.height, self.width, self.channels)

    @property
    def positions(self) -> list[tuple[int, int]]:
        return [(r, c) for r in self.grid_rows for c in self.grid_cols]

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "channels": self.channels,
            "n_classes": self.n_classes,
            "grid_rows": list(self.grid_rows),
            "grid_cols": list(self.grid_cols),
            "sigma": self.sigma,
            "background_level": self.background_level,
            "palette": [list(p) for p in self.palette],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        known = cls.__dataclass_fields__
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown scene config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "palette" in kwargs:
            kwargs["palette"] = tuple(tuple(p) for p in kwargs["palette"])
        return cls(**kwargs)


def check_layout(layout: tuple[int, int], canvas: SceneConfig) -> None:
    """Raise if a glyph anchored at ``layout`` would leave the canvas."""
    r, c = layout
    half = GLYPH_SIZE // 2
    if not (half <= r < canvas.height - half and half <= c < canvas.width - half):
        raise ValueError(f"layout {layout} puts the glyph outside the {canvas.height}x{canvas.width} canvas")


def footprint(layout: tuple[int, int], canvas: SceneConfig) -> np.ndarray:
    """Boolean ``(H, W)`` map of the glyph footprint anchored (centred) at ``layout``."""
    check_layout(layout, canvas)
    r, c = layout
    half = GLYPH_SIZE // 2
    fp = np.zeros((canvas.height, canvas.width), dtype=bool)
    fp[r - half : r + half + 1, c - half : c + half + 1] = True
    return fp


def background(canvas: SceneConfig) -> np.ndarray:
    """Class-independent background: a diagonal ramp, a channel offset and sparse texels.

    All values are multiples of 1/64 and stay inside [-0.5, 0.55], away
    from every glyph intensity.
    """
    r, c, ch = np.meshgrid(
        np.arange(canvas.height), np.arange(canvas.width), np.arange(canvas.channels), indexing="ij"
    )
    ramp = (r - c) / 64.0 * (16.0 / max(canvas.height, canvas.width))
    offset = (ch - 1) / 16.0
    texel = np.where((3 * r + 5 * c + 2 * ch) % 7 == 0, 0.25, 0.0)
    return ramp + offset + texel + canvas.background_level


def glyph(class_id: int, canvas: SceneConfig) -> np.ndarray:
    """``(5, 5, C)`` glyph tile for one class."""
    if not 0 <= class_id < canvas.n_classes:
        raise ValueError(f"class_id {class_id} outside [0, {canvas.n_classes})")
    pattern = np.array([[ch == "#" for ch in row] for row in GLYPH_PATTERNS[class_id]])
    colour = np.asarray(canvas.palette[class_id])
    scale = np.where(pattern, 1.0, OFF_PATTERN_SCALE)
    return scale[:, :, None] * colour[None, None, :]


def render_scene(class_id: int, layout: tuple[int, int], canvas: SceneConfig | None = None) -> np.ndarray:
    """Mean image of the (class, position) component."""
    canvas = canvas or SceneConfig()
    img = background(canvas)
    fp = footprint(layout, canvas)
    img[fp] = glyph(class_id, canvas).reshape(-1, canvas.channels)
    return img


@dataclass(frozen=True)
class SceneMixture:
    """Condition-indexed isotropic Gaussian mixture over images.

    ``means`` has shape ``(K, H, W, C)``; component ``j`` carries label
    ``(class_ids[j], positions[j])`` and prior weight ``weights[j]``.
    """

    class_ids: np.ndarray
    positions: np.ndarray
    means: np.ndarray
    weights: np.ndarray
    sigma: float
    canvas: SceneConfig = field(default_factory=SceneConfig)

    def __post_init__(self) -> None:
        K = len(self.class_ids)
        if K == 0:
            raise ValueError("mixture needs at least one component")
        if self.means.shape[0] != K or self.positions.shape != (K, 2) or self.weights.shape != (K,):
            raise ValueError("component arrays disagree on the component count")
        if np.any(self.weights <= 0) or not math.isclose(float(self.weights.sum()), 1.0, rel_tol=1e-12):
            raise ValueError("weights must be positive and sum to 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        for arr in (self.class_ids, self.positions, self.means, self.weights):
            arr.setflags(write=False)

    @property
    def n_components(self) -> int:
        return len(self.class_ids)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.means.shape[1:])

    def label(self, j: int) -> tuple[int, tuple[int, int]]:
        return int(self.class_ids[j]), (int(self.positions[j, 0]), int(self.positions[j, 1]))

    def admitted(self, cond: Condition) -> np.ndarray:
        """Boolean mask of the components a condition keeps."""
        keep = np.ones(self.n_components, dtype=bool)
        if cond.class_id is not None:
            keep &= self.class_ids == cond.class_id
        if cond.layout is not None:
            check_layout(cond.layout, self.canvas)
            keep &= (self.positions[:, 0] == cond.layout[0]) & (self.positions[:, 1] == cond.layout[1])
        return keep

    def conditional_weights(self, cond: Condition) -> np.ndarray:
        keep = self.admitted(cond)
        if not keep.any():
            raise InconsistentConditionError(f"condition ({cond}) excludes every mixture component")
        w = np.where(keep, self.weights, 0.0)
        return w / w.sum()


def build_mixture(
    n_classes: int | None = None,
    positions: list[tuple[int, int]] | None = None,
    canvas: SceneConfig | None = None,
    sigma: float | None = None,
) -> SceneMixture:
    """One component per (class, position) pair with uniform priors."""
    canvas = canvas or SceneConfig()
    n_classes = canvas.n_classes if n_classes is None else n_classes
    positions = canvas.positions if positions is None else [tuple(p) for p in positions]
    sigma = canvas.sigma if sigma is None else sigma
    if n_classes < 1 or not positions:
        raise ValueError("need at least one class and one position")
    labels = [(k, p) for k in range(n_classes) for p in positions]
    means = np.stack([render_scene(k, p, canvas) for k, p in labels])
    K = len(labels)
    return SceneMixture(
        class_ids=np.array([k for k, _ in labels]),
        positions=np.array([p for _, p in labels], dtype=int).reshape(K, 2),
        means=means,
        weights=np.full(K, 1.0 / K),
        sigma=float(sigma),
        canvas=canvas,
    )


def _noised_variance(a: float, sigma: float) -> float:
    return a * sigma**2 + 1.0 - a


def responsibilities(
    x_t: np.ndarray, t: int, cond: Condition, mix: SceneMixture, sched: NoiseSchedule
) -> np.ndarray:
    """Posterior component probabilities given the noised latent ``x_t``."""
    x_t = as_latent(x_t, "x_t")
    if x_t.shape != mix.shape:
        raise ValueError(f"latent shape {x_t.shape} does not match mixture shape {mix.shape}")
    if not 1 <= t <= sched.T:
        raise ValueError(f"noise prediction needs 1 <= t <= {sched.T}, got {t}")
    a = sched.alpha_bar[t]
    w = mix.conditional_weights(cond)
    keep = w > 0
    var = _noised_variance(a, mix.sigma)
    diff = x_t[None] - math.sqrt(a) * mix.means[keep]
    sq = np.einsum("kijc,kijc->k", diff, diff)
    logits = np.log(w[keep]) - 0.5 * sq / var
    logits -= logits.max()
    p = np.exp(logits)
    r = np.zeros(mix.n_components)
    r[keep] = p / p.sum()
    return r


def posterior_mean(
    x_t: np.ndarray, t: int, cond: Condition, mix: SceneMixture, sched: NoiseSchedule
) -> np.ndarray:
    """``E[x_0 | x_t, cond]`` under the mixture."""
    r = responsibilities(x_t, t, cond, mix, sched)
    a = sched.alpha_bar[t]
    shrink = math.sqrt(a) * mix.sigma**2 / _noised_variance(a, mix.sigma)
    mu_bar = np.tensordot(r, mix.means, axes=1)
    return mu_bar + shrink * (x_t - math.sqrt(a) * mu_bar)


def predict_eps(
    x_t: np.ndarray, t: int, cond: Condition, mix: SceneMixture, sched: NoiseSchedule
) -> np.ndarray:
    """Bayes-optimal noise estimate ``(x_t - sqrt(ab_t) E[x_0|x_t]) / sqrt(1 - ab_t)``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    x0_hat = posterior_mean(x_t, t, cond, mix, sched)
    a = sched.alpha_bar[t]
    return (x_t - math.sqrt(a) * x0_hat) / math.sqrt(1.0 - a)


def classify(x0: np.ndarray, mix: SceneMixture) -> tuple[int, tuple[int, int]]:
    """Label of the nearest component mean; ties go to the lowest index."""
    x0 = as_latent(x0, "x0")
    if x0.shape != mix.shape:
        raise ValueError(f"image shape {x0.shape} does not match mixture shape {mix.shape}")
    diff = mix.means - x0[None]
    sq = np.einsum("kijc,kijc->k", diff, diff)
    return mix.label(int(np.argmin(sq)))


def sample_scene(
    class_id: int, layout: tuple[int, int], mix: SceneMixture, rng: np.random.Generator
) -> np.ndarray:
    """Draw an image from the (class, position) component."""
    j = np.flatnonzero(mix.admitted(Condition(class_id, layout)))
    if len(j) != 1:
        raise InconsistentConditionError(f"no unique component for class {class_id} at {layout}")
    mean = mix.means[j[0]]
    return mean + mix.sigma * rng.standard_normal(mean.shape)
