"""Stencil/GEMM benchmark suite: solvers built from ML-style tensor ops,
a measurement harness with power sampling, and report generation."""

from sgbench.grids import Grid, Mask, Matrix, Precision

__version__ = "0.1.0"

__all__ = ["Grid", "Mask", "Matrix", "Precision", "__version__"]
