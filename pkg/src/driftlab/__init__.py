"""Nonparametric Bayesian drift estimation for periodic diffusions.

Gaussian-series posteriors over periodized wavelet spaces, Girsanov
likelihood statistics, pseudospectral solvers for the stationary and
Poisson equations of the generator, and simulation diagnostics for the
associated contraction, Bernstein-von Mises and invariant-measure CLT
behaviour.
"""

from .kernels import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
