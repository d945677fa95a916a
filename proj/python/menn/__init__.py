"""Metric embedding for nearest-neighbour classification."""

from ._core import *  # noqa: F401,F403
from ._core import InputError, KernelSpec, SolverConfig

__all__ = [name for name in dir() if not name.startswith("_")]
