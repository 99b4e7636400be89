"""Full-trajectory DDIM encoding and conditional decoding."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .scene import Condition, SceneMixture, predict_eps
from .schedule import NoiseSchedule, as_latent, ddim_invert_step, ddim_step

# hook(latent, t) -> latent, called before the denoising step at timestep t.
Hook = Callable[[np.ndarray, int], np.ndarray]


@dataclass
class Trajectory:
    """Latents for a contiguous range of timesteps.

    ``latents[t]`` is the latent at timestep ``t``; for decodes it is the
    latent actually fed to the denoiser, i.e. after any hook ran. ``eps[t]``
    is the noise estimate used to leave timestep ``t``.
    """

    latents: dict[int, np.ndarray]
    condition: Condition
    direction: str
    eps: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def t_lo(self) -> int:
        return min(self.latents)

    @property
    def t_hi(self) -> int:
        return max(self.latents)

    def __getitem__(self, t: int) -> np.ndarray:
        return self.latents[t]

    def __len__(self) -> int:
        return len(self.latents)

    @property
    def start(self) -> np.ndarray:
        return self.latents[self.t_lo if self.direction == "encode" else self.t_hi]

    @property
    def end(self) -> np.ndarray:
        return self.latents[self.t_hi if self.direction == "encode" else self.t_lo]


def _check_level(t_E: int, sched: NoiseSchedule) -> None:
    if not 1 <= t_E <= sched.T:
        raise ValueError(f"encoding level must satisfy 1 <= t_E <= {sched.T}, got {t_E}")


def encode_ddim(
    x0: np.ndarray, t_E: int, cond: Condition, mix: SceneMixture, sched: NoiseSchedule
) -> Trajectory:
    """DDIM-invert ``x0`` up to level ``t_E``, keeping every intermediate latent.

    The noise estimate at ``t = 0`` is taken from the ``t = 1`` predictor, which
    avoids the singular ``1/sqrt(1 - ab_0)`` factor.
    """
    _check_level(t_E, sched)
    x = as_latent(x0, "x0").copy()
    latents = {0: x}
    eps_used = {}
    for t in range(t_E):
        eps = predict_eps(x, max(t, 1), cond, mix, sched)
        eps_used[t] = eps
        x = ddim_invert_step(x, eps, t, sched)
        latents[t + 1] = x
    return Trajectory(latents=latents, condition=cond, direction="encode", eps=eps_used)


def decode_ddim(
    x_tE: np.ndarray,
    t_E: int,
    cond: Condition,
    mix: SceneMixture,
    sched: NoiseSchedule,
    hook: Hook | None = None,
    t_end: int = 0,
) -> Trajectory:
    """Decode ``x_{t_E}`` down to ``x_{t_end}`` under ``cond``.

    ``hook`` runs before every denoising step, so it sees the latent at ``t``
    before the noise is predicted from it.
    """
    _check_level(t_E, sched)
    if not 0 <= t_end < t_E:
        raise ValueError(f"t_end must satisfy 0 <= t_end < t_E, got {t_end}")
    y = as_latent(x_tE, "x_tE").copy()
    latents = {}
    eps_used = {}
    for t in range(t_E, t_end, -1):
        if hook is not None:
            y = as_latent(hook(y, t), "hooked latent")
        latents[t] = y
        eps = predict_eps(y, t, cond, mix, sched)
        eps_used[t] = eps
        y = ddim_step(y, eps, t, sched)
    latents[t_end] = y
    return Trajectory(latents=latents, condition=cond, direction="decode", eps=eps_used)


def replay_decode(traj: Trajectory, sched: NoiseSchedule) -> np.ndarray:
    """Run an encode trajectory backwards reusing its stored noise estimates.

    Exact inverse up to rounding; isolates round-trip drift to the noise
    re-evaluation in a regular decode.
    """
    if traj.direction != "encode":
        raise ValueError("replay_decode expects an encode trajectory")
    y = traj.latents[traj.t_hi]
    for t in range(traj.t_hi, traj.t_lo, -1):
        y = ddim_step(y, traj.eps[t - 1], t, sched)
    return y
