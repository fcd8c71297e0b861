"""Behaviour classification and transmission-energy planning for sensor tags."""

__version__ = "0.1.0"

from . import cart, codegen, datamodel, energymodel, evaluation, features  # noqa: F401
