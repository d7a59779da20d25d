"""Bimodal Birnbaum-Saunders distribution: density, fitting, inference, simulation."""

from .bbs import AsnParams, BbsParams  # noqa: F401
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
