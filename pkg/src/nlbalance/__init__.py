"""Solvers and verification harness for 1D hyperbolic balance laws with
nonlocal source terms: wave-front tracking composed with Euler source
steps, plus diagnostics that measure the scheme's contraction, commutation
and convergence estimates."""

from .pcfn import PCFn, ExpKernel, CombinedFn, project, convolve, dilate

__version__ = "0.1.0"

__all__ = ["PCFn", "ExpKernel", "CombinedFn", "project", "convolve", "dilate",
           "__version__"]
