# -*- coding: utf-8 -*-
# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.

"""Degradedness of common-randomness triples.

Three relations are decided here, each with a witness where one exists:

* Physical degradedness, the Markov chain X - Y - Z, tested through
  :math:`I(X;Z|Y)`.
* Stochastic degradedness, the existence of a channel W with
  :math:`P_{Z|X} = P_{Y|X} W`, decided by a linear program.
* The usual stochastic order between fading power laws, checked on a grid of
  quantiles and witnessed by the comonotone quantile coupling.

The conceptual wiretap channel, which turns key generation from a Markov
source into wiretap coding, is also built here.
"""

import json
import logging
from collections import namedtuple
from enum import Enum
from itertools import product

import numpy as np

from stealthkey import StealthKeyException
from stealthkey import simplex
from stealthkey.probcore import (AlphabetMismatchError, Channel, JointDist2,
                                 JointDist3, conditional_mutual_information)
from stealthkey.special import GridCcdf, power_inverse_cdf


log = logging.getLogger(__name__)


MARKOV_TOL = 1e-10
"""Default bound on :math:`I(X;Z|Y)` for a triple to count as Markov."""

LP_TOL = 1e-8
"""Default bound on the optimal LP slack for stochastic degradedness."""

ORDER_QUANTILES = 512
"""Quantile points in an order-check grid, split evenly between both laws."""

TAIL_MASS = 1e-6

ORDER_TOL = 1e-12


class DegradednessError(StealthKeyException):
    """The base class for degradedness errors."""


class DegenerateMarginalError(DegradednessError):
    """Raised when some value of X has zero probability and that is not
    allowed."""


class OrderViolationError(DegradednessError):
    """Raised when a coupling is requested for laws that are not ordered.

    :ivar point:
        The first grid point where the order fails.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class GridMismatchError(DegradednessError):
    """Raised when two tabulated CCDFs do not share a grid."""


class Kind(Enum):
    """Degradedness verdicts."""

    PHYSICAL = "Physical"
    STOCHASTIC = "Stochastic"
    NONE = "None"


class DegradednessVerdict(namedtuple("DegradednessVerdict",
                                     "kind witness residual tol")):
    """The outcome of a degradedness test.

    :ivar kind:
        A :py:class:`Kind`.

    :ivar witness:
        A :py:class:`~stealthkey.probcore.Channel` from Y to Z, or ``None``
        when the verdict is :py:attr:`Kind.NONE`.

    :ivar residual:
        The factorization residual (or, for a failed LP, the optimal slack).

    :ivar tol:
        The tolerance the verdict was decided at.
    """

    __slots__ = ()

    @property
    def degraded(self):
        return self.kind is not Kind.NONE

    def to_dict(self):
        data = {"kind": self.kind.value,
                "witness": None,
                "residual": self.residual,
                "tol": self.tol}
        if self.witness is not None:
            witness = self.witness.to_dict()
            data["witness"] = witness["rows"]
            data["labelsY"] = witness["inLabels"]
            data["labelsZ"] = witness["outLabels"]

        return data

    @classmethod
    def from_dict(cls, data):
        witness = None
        if data.get("witness") is not None:
            witness = Channel.from_dict({"inLabels": data["labelsY"],
                                         "outLabels": data["labelsZ"],
                                         "rows": data["witness"]})

        return cls(Kind(data["kind"]), witness, data["residual"], data["tol"])

    def dumps(self):
        return json.dumps(self.to_dict())


def markov_test(joint, tol=MARKOV_TOL):
    """Whether X - Y - Z is a Markov chain, i.e. :math:`I(X;Z|Y) \\le` tol."""
    return conditional_mutual_information(joint, "xz|y") <= tol


def _conditionals(joint, drop_null):
    p_x = joint.probs.sum(axis=(1, 2))
    rows = np.flatnonzero(p_x > 0)
    if rows.size < len(p_x):
        if not drop_null:
            raise DegenerateMarginalError(
                "P_X has zero mass at {}".format(
                    [joint.labels_x[i] for i in np.flatnonzero(p_x <= 0)]))

        log.debug("Dropping %d zero-mass values of X", len(p_x) - rows.size)

    p_yx = joint.probs.sum(axis=2)[rows] / p_x[rows, None]
    p_zx = joint.probs.sum(axis=1)[rows] / p_x[rows, None]
    return p_yx, p_zx


def factorization_residual(joint, witness):
    """:math:`\\max_x \\sum_z |P_{Z|X}(z|x) - \\sum_y P_{Y|X}(y|x) W(z|y)|`
    over the values of X with positive mass."""
    if witness.in_labels != joint.labels_y or \
            witness.out_labels != joint.labels_z:
        raise AlphabetMismatchError("Witness must be a channel from Y to Z")

    p_yx, p_zx = _conditionals(joint, True)
    return float(np.abs(p_zx - p_yx @ witness.rows).sum(axis=1).max())


def stochastic_degradedness_test(joint, tol=LP_TOL, drop_null=True):
    """Search for a row-stochastic W with :math:`P_{Z|X} = P_{Y|X} W`.

    The search is the linear program

    .. math::

        \\min \\sum s^+ + s^- \\quad\\text{s.t.}\\quad
        P_{Y|X} W + s^+ - s^- = P_{Z|X},\\quad W 1 = 1,\\quad W, s^\\pm \\ge 0

    solved by :py:func:`stealthkey.simplex.solve`. The optimal slack is the
    residual.

    :param drop_null:
        Ignore values of X with zero mass rather than raising
        :py:class:`DegenerateMarginalError`.

    :returns:
        A :py:class:`DegradednessVerdict` of kind ``STOCHASTIC`` carrying the
        witness, or of kind ``NONE`` when the residual exceeds ``tol``.
    """
    p_yx, p_zx = _conditionals(joint, drop_null)
    nx, ny = p_yx.shape
    nz = p_zx.shape[1]
    nw = ny * nz
    ns = nx * nz

    a = np.zeros((ns + ny, nw + 2 * ns))
    b = np.zeros(ns + ny)
    for x, z in product(range(nx), range(nz)):
        row = x * nz + z
        for y in range(ny):
            a[row, y * nz + z] = p_yx[x, y]

        a[row, nw + row] = 1.0
        a[row, nw + ns + row] = -1.0
        b[row] = p_zx[x, z]

    for y in range(ny):
        a[ns + y, y * nz:(y + 1) * nz] = 1.0
        b[ns + y] = 1.0

    c = np.concatenate([np.zeros(nw), np.ones(2 * ns)])
    result = simplex.solve(c, a, b)
    residual = max(result.objective, 0.0)
    log.debug("Degradedness LP: residual %g after %d pivots", residual,
              result.iterations)

    if residual > tol:
        return DegradednessVerdict(Kind.NONE, None, residual, tol)

    w = result.x[:nw].reshape(ny, nz)
    w = w / w.sum(axis=1, keepdims=True)
    witness = Channel(joint.labels_y, joint.labels_z, w)
    check = factorization_residual(joint, witness)
    if check > tol:
        raise DegradednessError("Witness failed verification (residual "
                                "{:g})".format(check))

    return DegradednessVerdict(Kind.STOCHASTIC, witness, check, tol)


def classify(joint, markov_tol=MARKOV_TOL, lp_tol=LP_TOL):
    """Physical if Markov (witness :math:`P_{Z|Y}`), otherwise whatever
    :py:func:`stochastic_degradedness_test` decides."""
    if markov_test(joint, markov_tol):
        witness = joint.channel("y", "z")
        return DegradednessVerdict(Kind.PHYSICAL, witness,
                                   factorization_residual(joint, witness),
                                   markov_tol)

    return stochastic_degradedness_test(joint, lp_tol)


def usual_order_check(a, b):
    """Whether :math:`A \\le_{st} B`: B's CCDF is at least A's everywhere on
    the shared grid.

    :raises GridMismatchError:
        If the two grids differ.
    """
    if not np.array_equal(a.xs, b.xs):
        raise GridMismatchError("CCDFs are tabulated on different grids")

    return bool(np.all(b.vals >= a.vals - ORDER_TOL))


def order_grid(spec_x, spec_z, quantiles=ORDER_QUANTILES, tail=TAIL_MASS):
    """The grid used to compare two power laws.

    It is the sorted union of ``quantiles / 2`` evenly spaced quantiles of
    each law, the origin, and the larger of the two points beyond which each
    law has mass ``tail``.
    """
    per_law = quantiles // 2
    levels = np.arange(1, per_law + 1) / (per_law + 1)
    far = max(power_inverse_cdf(spec_x, 1.0 - tail),
              power_inverse_cdf(spec_z, 1.0 - tail))
    return np.unique(np.concatenate([[0.0],
                                     power_inverse_cdf(spec_x, levels),
                                     power_inverse_cdf(spec_z, levels),
                                     [far]]))


def order_violation(spec_x, spec_z, grid=None):
    """The first grid point where the X-power CCDF falls below the Z-power
    CCDF, or ``None`` if the order holds everywhere."""
    if grid is None:
        grid = order_grid(spec_x, spec_z)

    ccdf_x = GridCcdf.from_spec(spec_x, grid)
    ccdf_z = GridCcdf.from_spec(spec_z, grid)
    bad = np.flatnonzero(ccdf_x.vals < ccdf_z.vals - ORDER_TOL)
    return float(grid[bad[0]]) if bad.size else None


def nakagami_order_check(spec_x, spec_z, grid=None):
    """Whether :math:`A_Z^2 \\le_{st} A_X^2`, i.e. Alice's power CCDF
    dominates Willie's on the grid."""
    if grid is None:
        grid = order_grid(spec_x, spec_z)

    return usual_order_check(GridCcdf.from_spec(spec_z, grid),
                             GridCcdf.from_spec(spec_x, grid))


CouplingPair = namedtuple("CouplingPair", "seed uniforms powers_x powers_z")
"""Coupled power draws :math:`(F_X^{-1}(U), F_Z^{-1}(U))` and the uniforms
that produced them."""


def couple_at(spec_x, spec_z, u):
    """The coupled pair at a single uniform level ``u``."""
    return (power_inverse_cdf(spec_x, u), power_inverse_cdf(spec_z, u))


def construct_coupling(spec_x, spec_z, n, seed, grid=None):
    """Draw ``n`` comonotone pairs of squared gains.

    Both coordinates are quantile transforms of the same uniform, so each has
    its own law and :math:`\\hat{A}_X^2 \\ge \\hat{A}_Z^2` holds pairwise
    whenever the laws are ordered.

    :raises OrderViolationError:
        If :py:func:`nakagami_order_check` fails.
    """
    point = order_violation(spec_x, spec_z, grid)
    if point is not None:
        raise OrderViolationError("Laws are not ordered; CCDFs cross at "
                                  "x={:g}".format(point), point)

    uniforms = np.random.default_rng(seed).random(n)
    return CouplingPair(seed, uniforms, power_inverse_cdf(spec_x, uniforms),
                        power_inverse_cdf(spec_z, uniforms))


def _check_group(joint, u_dist):
    if u_dist.labels != joint.labels_x:
        raise AlphabetMismatchError(
            "U must share the alphabet of X: {} vs {}".format(
                list(u_dist.labels), list(joint.labels_x)))


def cwtc_build(joint, u_dist):
    """The single-letter conceptual wiretap channel joint.

    Alice publishes :math:`F = U \\oplus X`, with :math:`\\oplus` addition
    modulo :math:`|\\mathcal{X}|` on label positions. Bob then holds
    :math:`Y' = (Y, F)` and Willie :math:`Z' = (Z, F)`.

    :param u_dist:
        The law of U over the labels of X (uniform for the crypto lemma).

    :returns:
        A :py:class:`~stealthkey.probcore.JointDist3` over ``(U, Y', Z')``,
        whose Y' and Z' labels are ``(y, f)`` and ``(z, f)`` pairs.
    """
    _check_group(joint, u_dist)
    q, ny, nz = joint.shape()
    probs = np.zeros((q, ny, q, nz, q))
    for u, x in product(range(q), repeat=2):
        f = (u + x) % q
        probs[u, :, f, :, f] += u_dist.probs[u] * joint.probs[x]

    return JointDist3(u_dist.labels,
                      product(joint.labels_y, joint.labels_x),
                      product(joint.labels_z, joint.labels_x),
                      probs.reshape(q, ny * q, nz * q))


def cwtc_discussion_joint(joint, u_dist):
    """The joint law of X and the public message :math:`F = U \\oplus X`."""
    _check_group(joint, u_dist)
    p_x = joint.probs.sum(axis=(1, 2))
    q = len(p_x)
    probs = np.zeros((q, q))
    for u, x in product(range(q), repeat=2):
        probs[x, (u + x) % q] += p_x[x] * u_dist.probs[u]

    return JointDist2(joint.labels_x, joint.labels_x, probs)


def cwtc_degraded_check(cwtc_joint, tol=MARKOV_TOL):
    """Whether :math:`I(U;Z'|Y') \\le` tol for a joint from
    :py:func:`cwtc_build`."""
    return markov_test(cwtc_joint, tol)
