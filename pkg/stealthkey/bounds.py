# -*- coding: utf-8 -*-
# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.

"""Stealthy secret-key capacity bounds and key accounting.

For a source :math:`P_{XYZ}` the stealthy key capacity satisfies

.. math::

    \\max\\{I(X;Y) - I(X;Z), I(Y;X) - I(Y;Z)\\} \\le C
    \\le \\min\\{I(X;Y), I(X;Y|Z)\\}

and collapses to :math:`I(X;Y) - I(X;Z)` when X - Y - Z is Markov. The rest
of the module accounts for the keys a two-phase covert system spends: phase
one keys the stealthy discussion, phase two pays the covert budget.
"""

import logging
import math
from collections import namedtuple

import numpy as np

from stealthkey import StealthKeyException
from stealthkey.degrade import MARKOV_TOL, markov_test
from stealthkey.probcore import array_entropy, marginal_array


log = logging.getLogger(__name__)


CONSISTENCY_TOL = 1e-9


class BoundsError(StealthKeyException):
    """The base class for bound computation errors."""


class NotMarkovError(BoundsError):
    """Raised when a capacity is requested for a non-Markov source."""


class BoundsConsistencyError(BoundsError):
    """Raised when quantities that must agree do not."""


class SkBounds(namedtuple("SkBounds",
                          "lower_xy lower_yx upper_mi upper_cmi")):
    """All four terms of the capacity bounds, in bits.

    :ivar lower_xy:
        :math:`I(X;Y) - I(X;Z)`.

    :ivar lower_yx:
        :math:`I(Y;X) - I(Y;Z)`.

    :ivar upper_mi:
        :math:`I(X;Y)`.

    :ivar upper_cmi:
        :math:`I(X;Y|Z)`.
    """

    __slots__ = ()

    @property
    def lower(self):
        return max(self.lower_xy, self.lower_yx)

    @property
    def upper(self):
        return min(self.upper_mi, self.upper_cmi)

    @property
    def achievable(self):
        """The lower bound clamped at zero; a rate is never negative."""
        return max(self.lower, 0.0)

    def to_dict(self):
        return {"lowerXY": self.lower_xy, "lowerYX": self.lower_yx,
                "upperMI": self.upper_mi, "upperCMI": self.upper_cmi,
                "lower": self.lower, "upper": self.upper,
                "achievable": self.achievable}

    @classmethod
    def from_dict(cls, data):
        return cls(data["lowerXY"], data["lowerYX"], data["upperMI"],
                   data["upperCMI"])


def sk_bounds(joint):
    """Compute :py:class:`SkBounds` for a
    :py:class:`~stealthkey.probcore.JointDist3`."""
    p = joint.probs
    h = {axes: array_entropy(marginal_array(p, "xyz", axes))
         for axes in ("x", "y", "z", "xy", "xz", "yz", "xyz")}
    i_xy = h["x"] + h["y"] - h["xy"]
    i_xz = h["x"] + h["z"] - h["xz"]
    i_yz = h["y"] + h["z"] - h["yz"]
    i_xy_z = h["xz"] + h["yz"] - h["xyz"] - h["z"]
    return SkBounds(i_xy - i_xz, i_xy - i_yz, i_xy, i_xy_z)


def markov_capacity(joint, tol=MARKOV_TOL):
    """The capacity :math:`I(X;Y) - I(X;Z)` of a Markov source.

    :raises NotMarkovError:
        If :math:`I(X;Z|Y)` exceeds ``tol``; no capacity is claimed then.

    :raises BoundsConsistencyError:
        If the capacity disagrees with either bound.
    """
    if not markov_test(joint, tol):
        raise NotMarkovError("X - Y - Z is not a Markov chain")

    bounds = sk_bounds(joint)
    capacity = bounds.lower_xy
    for name, value in (("lower", bounds.lower), ("upper", bounds.upper)):
        if abs(value - capacity) > CONSISTENCY_TOL:
            raise BoundsConsistencyError(
                "Markov capacity {!r} differs from the {} bound {!r}".format(
                    capacity, name, value))

    return capacity


class BudgetParams(namedtuple("BudgetParams", "n xi omega")):
    """Parameters of the covert key budget.

    :ivar n:
        Blocklength, at least 1.

    :ivar xi:
        Slack :math:`\\xi \\in (0, 1)`.

    :ivar omega:
        The value of the scaling sequence :math:`\\omega_n > 0`.
    """

    __slots__ = ()

    def __new__(cls, n, xi, omega):
        if n < 1:
            raise BoundsError("n must be at least 1, got {}".format(n))

        if not 0.0 < xi < 1.0:
            raise BoundsError("xi must lie in (0, 1), got {}".format(xi))

        if not omega > 0.0:
            raise BoundsError("omega must be positive, got {}".format(omega))

        if omega * math.sqrt(n) >= n:
            log.warning("omega * sqrt(n) = %g is not below n = %d; the "
                        "vanishing omega regime does not hold", omega *
                        math.sqrt(n), n)

        return super().__new__(cls, n, xi, omega)

    def to_dict(self):
        return {"n": self.n, "xi": self.xi, "omega": self.omega}


def covert_key_budget(d_z, d_y, params):
    """Key bits a covert phase needs:
    :math:`\\omega_n \\sqrt{n} [(1+\\xi) D_Z - (1-\\xi) D_Y]^+`.

    :param d_z:
        :math:`D(P_Z||Q_Z)` at Willie, in bits.

    :param d_y:
        :math:`D(P_Y||Q_Y)` at Bob, in bits.

    :param params:
        :py:class:`BudgetParams`.
    """
    if d_z < 0 or d_y < 0:
        raise BoundsError("Divergences must be nonnegative")

    excess = (1.0 + params.xi) * d_z - (1.0 - params.xi) * d_y
    return params.omega * math.sqrt(params.n) * max(excess, 0.0)


def sskg_rate_sufficient(n, c=0.0):
    """A sufficient stealthy key rate :math:`1 + c / \\sqrt{n}`.

    ``c`` stands in for the vanishing term's numerator, which is left to the
    caller.
    """
    if n < 1 or c < 0:
        raise BoundsError("Need n >= 1 and c >= 0")

    return 1.0 + c / math.sqrt(n)


class KeySchedule(namedtuple("KeySchedule",
                             "phase1_key_bits phase2_key_bits "
                             "total_generated_bits feasible per_block")):
    """Keys spent and generated over one round of covert communication.

    ``total_generated_bits`` and ``feasible`` are ``None`` when no source was
    given.
    """

    __slots__ = ()

    def to_dict(self):
        return {"phase1KeyBits": self.phase1_key_bits,
                "phase2KeyBits": self.phase2_key_bits,
                "totalGeneratedBits": self.total_generated_bits,
                "feasible": self.feasible,
                "mode": "per-block (non-standard)" if self.per_block else
                        "per-symbol"}

    @classmethod
    def from_dict(cls, data):
        return cls(data["phase1KeyBits"], data["phase2KeyBits"],
                   data["totalGeneratedBits"], data["feasible"],
                   data["mode"] != "per-symbol")


def key_schedule(joint, params, d_z, d_y, per_block=False):
    """Account for the keys of one round.

    Phase one spends one bit per discussion symbol, ``n`` bits in all; with
    ``per_block`` it spends one bit per block instead, which is not part of
    the analysed scheme. Phase two spends :py:func:`covert_key_budget`. The
    source generates ``n`` times the achievable lower bound.

    :param joint:
        The source, or ``None`` for accounting without generation.
    """
    phase1 = 1.0 if per_block else float(params.n)
    phase2 = covert_key_budget(d_z, d_y, params)
    if joint is None:
        return KeySchedule(phase1, phase2, None, None, per_block)

    total = params.n * sk_bounds(joint).achievable
    feasible = bool(total >= phase1 + phase2)
    log.debug("Key schedule: %g + %g needed, %g generated", phase1, phase2,
              total)
    return KeySchedule(phase1, phase2, total, feasible, per_block)


def _default_hu(joint, h_u):
    return math.log2(len(joint.labels_x)) if h_u is None else h_u


def confusion_rate_threshold(joint, h_u=None):
    """:math:`H(U) - H(X|Z)`; the confusion rate must exceed it.

    :param h_u:
        :math:`H(U)`, by default :math:`\\log_2 |\\mathcal{X}|`.
    """
    p = joint.probs
    h_x_given_z = (array_entropy(np.sum(p, axis=1)) -
                   array_entropy(np.sum(p, axis=(0, 1))))
    return _default_hu(joint, h_u) - h_x_given_z


def total_rate_bound(joint, h_u=None):
    """:math:`H(U) - H(X|Y)`, the per-symbol cap on :math:`R + R_1`."""
    p = joint.probs
    h_x_given_y = (array_entropy(np.sum(p, axis=2)) -
                   array_entropy(np.sum(p, axis=(0, 2))))
    return _default_hu(joint, h_u) - h_x_given_y
