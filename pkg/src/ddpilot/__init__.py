"""Unified delay-Doppler pilot for joint sensing and OFDM communication."""
from ._kernels import BACKEND
from .frame import FrameConfig, Modulation
from .pilot import Pilot2D, PilotSpec, assemble

__version__ = "0.1.0"

__all__ = ["BACKEND", "FrameConfig", "Modulation", "Pilot2D", "PilotSpec", "assemble",
           "__version__"]
