"""Exact controls of the semilinear 1D wave equation by a least-squares method.

Main entry points:

* :func:`wavelsq.grid.build_setup` to discretize (0,1) x (0,T) with a control window,
* :func:`wavelsq.hum.steer` for minimal-norm controls of linear problems,
* :func:`wavelsq.lsq.solve` for the damped-Newton least-squares iteration,
* :mod:`wavelsq.baselines` and :mod:`wavelsq.diagnostics` for comparisons and reports.
"""

__version__ = "0.1.0"

from .grid import Setup, StateSlice, build_setup
from .lsq import SolverConfig, solve
from .nonlinearity import Nonlinearity

__all__ = ["Setup", "StateSlice", "build_setup", "SolverConfig", "solve", "Nonlinearity", "__version__"]
