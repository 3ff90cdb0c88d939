"""Numerical laboratory for Berezin quantization of the hyperbolic plane under PSL2(Z)."""

from __future__ import annotations

__version__ = "0.1.0"

from . import berg, forms, hyp, kernels, modf, quad, quant, series  # noqa: E402
from ._accel import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__", "berg", "forms", "hyp", "kernels", "modf", "quad", "quant", "series"]
