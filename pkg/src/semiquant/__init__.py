"""Kostant-Souriau quantization and Gutzwiller trace asymptotics on products of spheres."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
