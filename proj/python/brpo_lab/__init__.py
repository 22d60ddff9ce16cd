"""Tabular batch residual policy optimization."""

from ._brpo import *  # noqa: F401,F403
from ._brpo import __doc__  # noqa: F401

__version__ = "0.1.0"
