"""Disentangled inference-time-optimisation image editing on an analytic diffusion model."""

__version__ = "0.1.0"
