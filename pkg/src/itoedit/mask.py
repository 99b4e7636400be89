"""Edit-mask estimation from noise-prediction disagreement between conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sampler import decode_ddim
from .scene import Condition, SceneMixture, predict_eps
from .schedule import NoiseSchedule, as_latent, stochastic_encode

DEFAULT_SIGMA_BLUR = 1.0
TRUNCATE = 4.0


@dataclass(frozen=True)
class EditMask:
    """Soft and thresholded edit-region maps.

    ``raw`` is the seed- and channel-averaged absolute noise difference before
    smoothing and normalisation. ``soft`` is the smoothed map rescaled to a
    maximum of 1 (all zeros when nothing differs); ``binary`` is
    ``soft >= tau``.
    """

    soft: np.ndarray
    binary: np.ndarray
    tau: float
    seeds: tuple[int, ...] = ()
    sigma_blur: float = DEFAULT_SIGMA_BLUR
    raw: np.ndarray | None = None

    @classmethod
    def from_soft(cls, soft: np.ndarray, tau: float, **kwargs) -> "EditMask":
        soft = np.asarray(soft, dtype=np.float64)
        return cls(soft=soft, binary=soft >= tau, tau=tau, **kwargs)

    @classmethod
    def from_binary(cls, binary: np.ndarray, tau: float = 0.5) -> "EditMask":
        """Wrap a user-supplied region as a mask (override path)."""
        b = np.asarray(binary, dtype=bool)
        return cls(soft=b.astype(np.float64), binary=b, tau=tau)

    def with_tau(self, tau: float) -> "EditMask":
        """Re-threshold the same soft map."""
        if not 0.0 < tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {tau}")
        return EditMask.from_soft(self.soft, tau, seeds=self.seeds, sigma_blur=self.sigma_blur, raw=self.raw)

    @property
    def preservation(self) -> np.ndarray:
        """Complement of the binary edit region, as floats."""
        return 1.0 - self.binary.astype(np.float64)

    def sidecar(self) -> dict:
        return {
            "tau": self.tau,
            "seeds": list(self.seeds),
            "sigma_blur": self.sigma_blur,
            "area": int(self.binary.sum()),
        }


def gaussian_kernel(sigma: float, truncate: float = TRUNCATE) -> np.ndarray:
    radius = int(math.ceil(truncate * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (offsets / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(image: np.ndarray, sigma_blur: float) -> np.ndarray:
    """Separable Gaussian blur of a 2-D map with mirrored borders.

    The border is mirrored about the edge (``d c b a | a b c d``), which keeps
    constant maps unchanged. ``sigma_blur = 0`` returns a copy.
    """
    if sigma_blur < 0:
        raise ValueError("sigma_blur must be >= 0")
    out = np.array(image, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {out.shape}")
    if sigma_blur == 0:
        return out
    k = gaussian_kernel(sigma_blur)
    r = len(k) // 2
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (r, r)
        padded = np.pad(out, pad, mode="symmetric")
        n = out.shape[axis]
        acc = np.zeros_like(out)
        for i, w in enumerate(k):
            acc += w * np.take(padded, np.arange(i, i + n), axis=axis)
        out = acc
    return out


def noise_difference(
    x0: np.ndarray,
    cond_o: Condition,
    cond_edit: Condition,
    seed: int,
    t_E: int,
    mix: SceneMixture,
    sched: NoiseSchedule,
) -> np.ndarray:
    """Channel-averaged ``|eps(x_1, 1, edit) - eps(x_1, 1, orig)|`` for one seed.

    The input is noised with the seed's draw, then decoded separately under
    each condition down to ``t = 1``.
    """
    noise = np.random.default_rng(seed).standard_normal(x0.shape)
    x_E = stochastic_encode(x0, t_E, noise, sched)
    eps = []
    for cond in (cond_edit, cond_o):
        x1 = x_E if t_E == 1 else decode_ddim(x_E, t_E, cond, mix, sched, t_end=1).end
        eps.append(predict_eps(x1, 1, cond, mix, sched))
    return np.abs(eps[0] - eps[1]).mean(axis=-1)


def estimate_mask(
    x0: np.ndarray,
    cond_o: Condition,
    cond_edit: Condition,
    mix: SceneMixture,
    sched: NoiseSchedule,
    *,
    t_E: int | None = None,
    seeds: Sequence[int] = tuple(range(10)),
    tau: float = 0.1,
    sigma_blur: float = DEFAULT_SIGMA_BLUR,
) -> EditMask:
    """Estimate which pixels the condition change affects.

    Averages the noise disagreement over ``seeds``, blurs, rescales to a
    maximum of one and thresholds at ``tau``. Identical conditions give the
    all-zero mask.
    """
    x0 = as_latent(x0, "x0")
    if not seeds:
        raise ValueError("need at least one seed")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    t_E = sched.T if t_E is None else t_E
    H, W, _ = x0.shape
    # Fixed summation order (sorted seeds) keeps the result permutation-invariant.
    seeds = tuple(int(s) for s in seeds)
    if cond_o == cond_edit:
        raw = np.zeros((H, W))
    else:
        diffs = [noise_difference(x0, cond_o, cond_edit, s, t_E, mix, sched) for s in sorted(seeds)]
        raw = np.sum(diffs, axis=0) / len(diffs)
    smooth = gaussian_smooth(raw, sigma_blur)
    peak = smooth.max()
    soft = smooth / peak if peak > 0 else np.zeros_like(smooth)
    return EditMask.from_soft(soft, tau, seeds=seeds, sigma_blur=sigma_blur, raw=raw)
