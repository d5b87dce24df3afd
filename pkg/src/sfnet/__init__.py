"""Structure-aware Fourier denoising network with its own tensor/autodiff core."""

__version__ = "0.1.0"

from .tensor import Parameter, Tensor, backward  # noqa: F401
from .network import NetworkConfig, build, count_macs  # noqa: F401
