"""Certificates for basic C^1 Lyapunov stability of 1-D linear hyperbolic systems."""

__version__ = "0.1.0"

from .model import GridFunction, SystemSpec, load_spec, save_spec, spec_from_dict  # noqa: E402

__all__ = ["GridFunction", "SystemSpec", "load_spec", "save_spec", "spec_from_dict", "__version__"]
