"""Errors-in-variables identification of MISO systems in minimal realisation form."""

__version__ = "0.1.0"

from .lti import Polynomial, TransferFunction, filter, frequency_response, impulse_response, pole_zero  # noqa: E402
from .datasim import Dataset, MisoSystem, NoiseSpec, corrupt, generate_input, simulate_miso  # noqa: E402
from .pipeline import PipelineConfig, identify_miso_minimal  # noqa: E402

__all__ = [
    "Polynomial",
    "TransferFunction",
    "filter",
    "frequency_response",
    "impulse_response",
    "pole_zero",
    "Dataset",
    "MisoSystem",
    "NoiseSpec",
    "corrupt",
    "generate_input",
    "simulate_miso",
    "PipelineConfig",
    "identify_miso_minimal",
]
