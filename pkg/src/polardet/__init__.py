"""Blind detection of polar-coded control messages."""

from .polar_core import PolarCode, build_code, encode

__version__ = "0.1.0"
__all__ = ["PolarCode", "build_code", "encode", "__version__"]
