"""Simulation of single-spin detection with a transmission electron beam."""

__version__ = "0.1.0"

from .core import BeamParams, PhysConsts, SpinParams, default_params_200keV, preset  # noqa: E402
from .kernel import KernelContext  # noqa: E402
from .spin import BlochState, PulseParams, detuning_sweep, drive  # noqa: E402

__all__ = [
    "__version__", "BeamParams", "PhysConsts", "SpinParams", "default_params_200keV", "preset",
    "KernelContext", "BlochState", "PulseParams", "detuning_sweep", "drive",
]
