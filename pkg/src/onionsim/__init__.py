"""Seed-reproducible simulation of merging-onion routing protocols.

The package models onion encryption as an ideal registry, implements the
tree and butterfly protocols together with a cheap strawman, runs them
round by round against pluggable adversaries, and ships Monte-Carlo
oracles for the combinatorial facts their analysis relies on.
"""

__version__ = "0.1.0"

from .errors import AdversaryPowerError, ConfigError, OnionError  # noqa: E402
from .inputs import SimpleInput, random_simple_input  # noqa: E402
from .protocols import PiButterfly, PiTree, Strawman, make_protocol, make_strawman_protocol  # noqa: E402
from .adversaries import make_strategy  # noqa: E402
from .engine import Execution, run  # noqa: E402

__all__ = [
    "__version__",
    "AdversaryPowerError",
    "ConfigError",
    "OnionError",
    "SimpleInput",
    "random_simple_input",
    "PiButterfly",
    "PiTree",
    "Strawman",
    "make_protocol",
    "make_strawman_protocol",
    "make_strategy",
    "Execution",
    "run",
]
