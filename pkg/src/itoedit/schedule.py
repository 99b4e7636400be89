"""Discrete noise schedule and the deterministic DDIM update pair.

Latent images are plain ``float64`` numpy arrays of shape ``(H, W, C)``.
The schedule stores ``alpha_bar[0..T]`` with ``alpha_bar[0] == 1`` so that
index 0 is the clean image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ALPHA_BAR_FLOOR = 1e-5
COSINE_OFFSET = 0.008

SCHEDULE_KINDS = ("cosine", "linear")


def as_latent(x, name: str = "latent") -> np.ndarray:
    """Validate and return ``x`` as a finite ``(H, W, C)`` float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ValueError(f"{name} must have shape (H, W, C), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch between latent and {what}: {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal levels over ``T`` discrete steps."""

    T: int
    alpha_bar: np.ndarray
    kind: str = "custom"

    def __post_init__(self) -> None:
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        if self.T < 1 or ab.shape != (self.T + 1,):
            raise ValueError(f"alpha_bar must have T+1={self.T + 1} entries, got {ab.shape}")
        if ab[0] != 1.0:
            raise ValueError("alpha_bar[0] must be exactly 1")
        if not np.all(np.diff(ab) < 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if not 0.0 < ab[-1] < 1.0:
            raise ValueError("alpha_bar[T] must lie strictly inside (0, 1)")
        ab = ab.copy()
        ab.setflags(write=False)
        object.__setattr__(self, "alpha_bar", ab)

    def encoding_step(self, ratio: float) -> int:
        """Map an encoding ratio in (0, 1] to the timestep index ``round(r*T)``."""
        if not 0.0 < ratio <= 1.0:
            raise ValueError(f"encoding ratio must be in (0, 1], got {ratio}")
        return max(1, int(round(ratio * self.T)))

    def to_dict(self) -> dict:
        return {"T": self.T, "kind": self.kind}


def cosine_alpha_bar(t: float, T: int) -> float:
    """Squared-cosine profile evaluated at (possibly fractional) step ``t``."""
    f = ((t / T) + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * (math.pi / 2.0)
    return max(math.cos(f) ** 2, ALPHA_BAR_FLOOR)


def _floor_tail(ab: np.ndarray) -> np.ndarray:
    """Keep a floored profile strictly decreasing.

    Plain clamping ties every level that falls under the floor. Those levels
    are replaced by a geometric ramp from the last unclamped value down to the
    floor, reached exactly at ``t = T``.
    """
    below = np.flatnonzero(ab <= ALPHA_BAR_FLOOR)
    if below.size == 0:
        return ab
    first = int(below[0])
    n = len(ab) - first
    ab = ab.copy()
    ab[first:] = np.geomspace(ab[first - 1], ALPHA_BAR_FLOOR, n + 1)[1:]
    return ab


def build_schedule(T: int = 25, kind: str = "cosine") -> NoiseSchedule:
    """Build a schedule with ``T`` steps.

    ``cosine`` is the squared-cosine profile, normalised so that
    ``alpha_bar[0] = 1`` exactly, floored at ``1e-5`` (see ``_floor_tail``).
    ``linear`` interpolates ``alpha_bar`` linearly from 1 down to ``1e-3``; it
    exists mainly for tests that want a schedule without a floor.
    """
    if int(T) != T or T < 2:
        raise ValueError(f"T must be an integer >= 2, got {T}")
    T = int(T)
    if kind == "cosine":
        ab = np.array([cosine_alpha_bar(t, T) for t in range(T + 1)])
        # cos^2 of the offset at t=0 is not exactly 1; pin it per the invariant.
        ab[0] = 1.0
        ab = _floor_tail(ab)
    elif kind == "linear":
        ab = np.linspace(1.0, 1e-3, T + 1)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
    return NoiseSchedule(T=T, alpha_bar=ab, kind=kind)


def ddim_coefficients(a_from: float, a_to: float) -> tuple[float, float]:
    """Coefficients ``(c_x, c_eps)`` of the DDIM move between two signal levels.

    The update is ``x_to = c_x * x_from + c_eps * eps``. The same expression
    serves both directions; only the pair of levels is swapped.
    """
    c_x = math.sqrt(a_to / a_from)
    c_eps = math.sqrt(a_to) * (math.sqrt(1.0 / a_to - 1.0) - math.sqrt(1.0 / a_from - 1.0))
    return c_x, c_eps


def ddim_step(x_t: np.ndarray, eps: np.ndarray, t: int, sched: NoiseSchedule) -> np.ndarray:
    """Deterministic denoising move ``x_t -> x_{t-1}``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_same_shape(x_t, eps, "eps")
    if not 1 <= t <= sched.T:
        raise ValueError(f"ddim_step needs 1 <= t <= {sched.T}, got {t}")
    c_x, c_eps = ddim_coefficients(sched.alpha_bar[t], sched.alpha_bar[t - 1])
    return c_x * x_t + c_eps * eps


def ddim_invert_step(x_t: np.ndarray, eps: np.ndarray, t: int, sched: NoiseSchedule) -> np.ndarray:
    """Inversion move ``x_t -> x_{t+1}`` (the DDIM update run towards noise)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_same_shape(x_t, eps, "eps")
    if not 0 <= t <= sched.T - 1:
        raise ValueError(f"ddim_invert_step needs 0 <= t <= {sched.T - 1}, got {t}")
    c_x, c_eps = ddim_coefficients(sched.alpha_bar[t], sched.alpha_bar[t + 1])
    return c_x * x_t + c_eps * eps


def stochastic_encode(x0: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Closed-form forward noising ``sqrt(ab_t) x0 + sqrt(1 - ab_t) noise``."""
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    _check_same_shape(x0, noise, "noise")
    if not 0 <= t <= sched.T:
        raise ValueError(f"t must be in [0, {sched.T}], got {t}")
    a = sched.alpha_bar[t]
    return math.sqrt(a) * x0 + math.sqrt(1.0 - a) * noise
