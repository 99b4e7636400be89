"""Inference-time optimisation of intermediate latents.

The edit pipeline has three stages: mask estimation, guidance-image
generation and the final optimised decode. Latents are updated with Adam
on a weighted sum of a masked squared-error preservation loss and a cosine
guidance loss.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .mask import DEFAULT_SIGMA_BLUR, EditMask, estimate_mask
from .sampler import Trajectory, decode_ddim, encode_ddim
from .scene import Condition, SceneMixture
from .schedule import NoiseSchedule, as_latent, stochastic_encode


@dataclass(frozen=True)
class EditParams:
    """Hyperparameters of one edit.

    ``lam`` weighs preservation against guidance, ``gamma`` is the Adam
    learning rate, ``t_u`` the number of optimised decode timesteps and ``k``
    the gradient steps per timestep. ``guidance_t_u``/``guidance_k`` default
    to ``t_u``/``k``.
    """

    lam: float = 0.6
    gamma: float = 0.1
    t_u: int = 15
    k: int = 1
    t_E: int = 25
    tau: float = 0.1
    n_seeds: int = 10
    seeds: tuple[int, ...] | None = None
    sigma_blur: float = DEFAULT_SIGMA_BLUR
    guidance_seed: int = 0
    guidance_t_u: int | None = None
    guidance_k: int | None = None
    # Condition used to DDIM-invert the input: "original" or "null".
    inversion: str = "original"
    # Condition used to DDIM-invert the guidance image: "same" follows
    # ``inversion``; "edit", "original" and "null" pick one explicitly.
    guidance_inversion: str = "same"
    # Fresh Adam moments at every optimised timestep.
    reset_optimizer: bool = True

    def __post_init__(self) -> None:
        if self.seeds is None:
            object.__setattr__(self, "seeds", tuple(range(self.n_seeds)))
        else:
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
            object.__setattr__(self, "n_seeds", len(self.seeds))

    def validate(self, T: int | None = None) -> "EditParams":
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0 <= self.t_u <= self.t_E:
            raise ValueError(f"need 0 <= t_u <= t_E, got t_u={self.t_u}, t_E={self.t_E}")
        if T is not None and not 1 <= self.t_E <= T:
            raise ValueError(f"t_E must be in [1, {T}], got {self.t_E}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1), got {self.tau}")
        if self.n_seeds < 1:
            raise ValueError("need at least one mask seed")
        if self.inversion not in ("original", "null"):
            raise ValueError(f"unknown inversion policy {self.inversion!r}")
        if self.guidance_inversion not in ("same", "edit", "original", "null"):
            raise ValueError(f"unknown guidance inversion policy {self.guidance_inversion!r}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EditParams":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown edit parameter keys: {sorted(unknown)}")
        if d.get("seeds") is not None:
            d["seeds"] = tuple(d["seeds"])
        return cls(**d)


PRESETS = {
    "default": EditParams(),
    # Multi-person real photographs: more optimisation, stricter mask.
    "real-image": EditParams(t_u=20, k=20, tau=0.2),
    # Guidance-only pass that pulls a guidance image back towards the input.
    "refine": EditParams(lam=0.0, t_u=6, k=1),
}


@dataclass
class Adam:
    """Adam state for a single latent tensor."""

    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    step_count: int = 0

    def step(self, y: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(y)
            self.v = np.zeros_like(y)
        self.step_count += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.step_count)
        v_hat = self.v / (1.0 - self.beta2**self.step_count)
        return y - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _as_channel_mask(m: np.ndarray, y: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.shape == y.shape[:2]:
        m = m[:, :, None]
    elif m.shape != y.shape:
        raise ValueError(f"mask shape {m.shape} does not match latent shape {y.shape}")
    if np.any(m < 0) or np.any(m > 1):
        raise ValueError("mask values must lie in [0, 1]")
    return m


def preservation_loss_grad(y: np.ndarray, x: np.ndarray, m: np.ndarray) -> tuple[float, np.ndarray]:
    """``||m*y - m*x||^2`` and its gradient in ``y``.

    ``m`` is the preservation mask (1 where content must be kept), either
    ``(H, W)`` or full latent shape.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if y.shape != x.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {x.shape}")
    m = _as_channel_mask(m, y)
    r = m * (y - x)
    return float(np.sum(r * r)), 2.0 * m * r


def guidance_loss_grad(y: np.ndarray, g: np.ndarray) -> tuple[float, np.ndarray]:
    """Cosine distance ``1 - <y, g> / (|y| |g|)`` over the flattened latent, and its gradient."""
    y = np.asarray(y, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if y.shape != g.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {g.shape}")
    ny = math.sqrt(float(np.sum(y * y)))
    ng = math.sqrt(float(np.sum(g * g)))
    if ny == 0.0 or ng == 0.0:
        raise ValueError("cosine loss is undefined for a zero-norm latent")
    dot = float(np.sum(y * g))
    loss = 1.0 - dot / (ny * ng)
    grad = -(g / (ny * ng) - dot * y / (ny**3 * ng))
    return loss, grad


def ito_update(
    y: np.ndarray,
    x: np.ndarray | None,
    g: np.ndarray | None,
    m: np.ndarray | None,
    params: EditParams,
    opt: Adam | None = None,
) -> np.ndarray:
    """Run ``k`` Adam steps on ``(1 - lam) * L_guide(y, g) + lam * L_pres(y, x, m)``.

    ``m`` is the preservation mask; ``None`` means preserve everywhere. A
    fresh optimiser is created when ``opt`` is not given.
    """
    lam = params.lam
    if lam < 1.0 and g is None:
        raise ValueError("a guidance latent is required when lambda < 1")
    if lam > 0.0 and x is None:
        raise ValueError("a reference latent is required when lambda > 0")
    if m is None and lam > 0.0:
        m = np.ones(np.shape(y)[:2])
    opt = opt if opt is not None else Adam(lr=params.gamma)
    y = np.array(y, dtype=np.float64)
    for _ in range(params.k):
        grad = np.zeros_like(y)
        if lam < 1.0:
            grad += (1.0 - lam) * guidance_loss_grad(y, g)[1]
        if lam > 0.0:
            grad += lam * preservation_loss_grad(y, x, m)[1]
        y = opt.step(y, grad)
    return y


def optimisation_hook(
    params: EditParams,
    t_E: int,
    n_steps: int,
    reference,
    guidance=None,
    preserve: np.ndarray | None = None,
    log: list | None = None,
):
    """Decode hook applying ``ito_update`` on the first ``n_steps`` timesteps.

    ``reference`` and ``guidance`` map a timestep to the latent used by the
    preservation and guidance terms. Adam state is reset at every timestep.
    """
    first_free = t_E - n_steps
    shared = Adam(lr=params.gamma) if not params.reset_optimizer else None

    def hook(y: np.ndarray, t: int) -> np.ndarray:
        if t <= first_free:
            return y
        x_t = reference(t) if reference is not None else None
        g_t = guidance(t) if guidance is not None else None
        opt = shared if shared is not None else Adam(lr=params.gamma)
        y_new = ito_update(y, x_t, g_t, preserve, params, opt)
        if log is not None:
            log.append((t, float(np.abs(y_new - y).mean())))
        return y_new

    return hook


def _inversion_condition(policy: str, cond_o: Condition, cond_edit: Condition) -> Condition:
    return {"original": cond_o, "edit": cond_edit, "null": Condition.null()}[policy]


def generate_guidance(
    x0: np.ndarray,
    cond_edit: Condition,
    mask: EditMask | np.ndarray | None,
    params: EditParams,
    mix: SceneMixture,
    sched: NoiseSchedule,
    seed: int | None = None,
) -> np.ndarray:
    """Guidance image: noise ``x0`` with a random draw, decode under the edit
    condition with preservation-only optimisation.

    The preservation reference at timestep ``t`` is ``x0`` noised to ``t`` with
    the same draw.
    """
    x0 = as_latent(x0, "x0")
    params.validate(sched.T)
    seed = params.guidance_seed if seed is None else seed
    noise = np.random.default_rng(seed).standard_normal(x0.shape)
    preserve = mask.preservation if isinstance(mask, EditMask) else mask
    gparams = replace(params, lam=1.0, k=params.guidance_k or params.k)
    t_u = params.t_u if params.guidance_t_u is None else params.guidance_t_u
    hook = optimisation_hook(
        gparams,
        params.t_E,
        t_u,
        reference=lambda t: stochastic_encode(x0, t, noise, sched),
        preserve=preserve,
    )
    x_E = stochastic_encode(x0, params.t_E, noise, sched)
    return decode_ddim(x_E, params.t_E, cond_edit, mix, sched, hook=hook).end


@dataclass
class EditResult:
    """Edited latent plus the intermediate artifacts of the run."""

    edited: np.ndarray
    mask: EditMask
    guidance: np.ndarray | None = None
    trajectories: dict[str, Trajectory] = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    method: str = "ours"
    guidance_skipped: bool = False


def run_edit(
    x0: np.ndarray,
    cond_o: Condition,
    cond_edit: Condition,
    params: EditParams,
    mix: SceneMixture,
    sched: NoiseSchedule,
    mask: EditMask | None = None,
) -> EditResult:
    """Mask estimation, guidance generation and the optimised edit decode.

    At ``lam == 1`` the guidance stage is skipped entirely. ``mask`` overrides
    the estimated edit mask.
    """
    x0 = as_latent(x0, "x0")
    params.validate(sched.T)
    mix.conditional_weights(cond_o)
    mix.conditional_weights(cond_edit)
    if mask is None:
        mask = estimate_mask(
            x0, cond_o, cond_edit, mix, sched,
            t_E=params.t_E, seeds=params.seeds, tau=params.tau, sigma_blur=params.sigma_blur,
        )
    preserve = mask.preservation
    trajectories = {}

    x_traj = encode_ddim(x0, params.t_E, _inversion_condition(params.inversion, cond_o, cond_edit), mix, sched)
    trajectories["x"] = x_traj

    g0 = None
    g_traj = None
    if params.lam < 1.0:
        g0 = generate_guidance(x0, cond_edit, mask, params, mix, sched)
        policy = params.inversion if params.guidance_inversion == "same" else params.guidance_inversion
        g_cond = _inversion_condition(policy, cond_o, cond_edit)
        g_traj = encode_ddim(g0, params.t_E, g_cond, mix, sched)
        trajectories["g"] = g_traj

    update_log: list = []
    hook = optimisation_hook(
        params,
        params.t_E,
        params.t_u,
        reference=x_traj.latents.__getitem__ if params.lam > 0 else None,
        guidance=g_traj.latents.__getitem__ if g_traj is not None else None,
        preserve=preserve,
        log=update_log,
    )
    y_traj = decode_ddim(x_traj.end, params.t_E, cond_edit, mix, sched, hook=hook)
    trajectories["y"] = y_traj
    return EditResult(
        edited=y_traj.end,
        mask=mask,
        guidance=g0,
        trajectories=trajectories,
        metrics={"update_sizes": update_log},
        method="ours",
        guidance_skipped=g0 is None,
    )


def diffedit_baseline(
    x0: np.ndarray,
    cond_o: Condition,
    cond_edit: Condition,
    params: EditParams,
    mix: SceneMixture,
    sched: NoiseSchedule,
    mask: EditMask | None = None,
) -> EditResult:
    """Decode under the edit condition, hard-blending the inversion trajectory
    back in outside the binary edit region after every step."""
    x0 = as_latent(x0, "x0")
    params.validate(sched.T)
    if mask is None:
        mask = estimate_mask(
            x0, cond_o, cond_edit, mix, sched,
            t_E=params.t_E, seeds=params.seeds, tau=params.tau, sigma_blur=params.sigma_blur,
        )
    x_traj = encode_ddim(x0, params.t_E, _inversion_condition(params.inversion, cond_o, cond_edit), mix, sched)
    m = mask.binary[:, :, None]

    def blend(y: np.ndarray, t: int) -> np.ndarray:
        # Blending the latent entering step t is the same as blending the
        # output of step t+1; the start latent is untouched.
        if t == params.t_E:
            return y
        return np.where(m, y, x_traj[t])

    y_traj = decode_ddim(x_traj.end, params.t_E, cond_edit, mix, sched, hook=blend)
    edited = np.where(m, y_traj.end, x_traj[0])
    y_traj.latents[0] = edited
    return EditResult(
        edited=edited,
        mask=mask,
        trajectories={"x": x_traj, "y": y_traj},
        method="diffedit",
        guidance_skipped=True,
    )


def refine_guidance(
    g0: np.ndarray,
    x0: np.ndarray,
    params: EditParams,
    mix: SceneMixture,
    sched: NoiseSchedule,
    cond_g: Condition | None = None,
    cond_x: Condition | None = None,
) -> np.ndarray:
    """Pull a guidance image back towards the input with a guidance-only pass.

    ``g0`` is inverted and decoded under ``cond_g`` while its latents are
    steered, by cosine similarity, towards the inversion of ``x0`` under
    ``cond_x``. Both default to the null condition.
    """
    params.validate(sched.T)
    cond_g = cond_g or Condition.null()
    cond_x = cond_x or Condition.null()
    g_traj = encode_ddim(g0, params.t_E, cond_g, mix, sched)
    x_traj = encode_ddim(x0, params.t_E, cond_x, mix, sched)
    if params.t_u == 0:
        return decode_ddim(g_traj.end, params.t_E, cond_g, mix, sched).end
    hook = optimisation_hook(
        params,
        params.t_E,
        params.t_u,
        reference=x_traj.latents.__getitem__ if params.lam > 0 else None,
        guidance=x_traj.latents.__getitem__,
    )
    return decode_ddim(g_traj.end, params.t_E, cond_g, mix, sched, hook=hook).end
