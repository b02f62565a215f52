# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.


"""The top level module contains a few constants needed throughout
stealthkey, and the base exception for all stealthkey errors (for easier
catching by handlers).

Everything is measured in bits. Divergences that are infinite are returned as
:py:data:`INFINITY` rather than raised, since stealth metrics legitimately
diverge when a codebook leaves the support of the innocent distribution."""


# pylint: disable=cyclic-import, wrong-import-position,invalid-name


__all__ = ["probcore", "special", "sources", "simplex", "degrade", "bounds",
           "protocol", "events", "cli"]


__version__ = "0.1.0"


class StealthKeyException(Exception):
    """The base class for all stealthkey exceptions."""


INFINITY = float("inf")
"""The value returned for divergences with a support violation."""

PROB_TOL = 1e-12
"""Tolerance used when validating that probabilities sum to one."""
