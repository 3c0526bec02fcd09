"""Numerical laboratory for Brownian sheets and two-parameter integral equations."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
