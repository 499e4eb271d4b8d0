"""Covariance sketching from rank-one quadratic measurements.

Sub-Gaussian sensing ensembles, structured ground-truth generators, convex
recovery solvers (trace / nuclear-norm, Toeplitz-constrained, l1, and
trace + l1 programs plus a POCS baseline), empirical RIP and isotropy
probes, and a Monte Carlo phase-transition bench with a CLI.
"""

from . import bench, rip_probe, sensing, solvers, structures
from .errors import CovsketchError

__all__ = ["bench", "rip_probe", "sensing", "solvers", "structures", "CovsketchError"]
__version__ = "0.1.0"
