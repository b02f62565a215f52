# -*- coding: utf-8 -*-
# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.

"""Special functions and the Nakagami-m fading law.

The fading law is handled in the power domain throughout: if the magnitude
:math:`A` is Nakagami-m with shape ``m`` and spread ``w``, the squared gain
:math:`A^2` is gamma distributed with shape ``m`` and scale ``w / m``, so its
CCDF is :math:`1 - \\gamma(m, m x / w) / \\Gamma(m)`.

Every function here accepts a scalar or a numpy array for its continuous
argument and returns the same kind.
"""

import logging

import numpy as np
from scipy import special as sp

from stealthkey import StealthKeyException


log = logging.getLogger(__name__)


SERIES_EPS = 1e-15
"""Relative stopping threshold of the incomplete gamma expansions."""

FPMIN = 1e-300
"""Floor for the modified Lentz recurrences."""

MAX_EXPANSION_TERMS = 100000

INVERSE_TOL = 1e-12
"""Relative bracket width at which inverse CDF bisection stops."""

INVERSE_MAX_ITER = 200

GRID_TOL = 1e-12


class SpecialFunctionError(StealthKeyException):
    """Raised on domain violations and invalid fading laws."""


def _check_shape(s):
    if not np.isfinite(s) or s <= 0:
        raise SpecialFunctionError("Shape must be positive and finite, got "
                                   "{!r}".format(s))


def _as_array(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise SpecialFunctionError("{} must be nonnegative".format(name))

    return arr


def _result(arr, like):
    if np.ndim(like) == 0:
        return float(arr)

    return arr


def gamma_fn(s):
    """The gamma function :math:`\\Gamma(s)` for real ``s > 0``.

    :raises SpecialFunctionError:
        If ``s <= 0``.
    """
    _check_shape(s)
    return float(sp.gamma(s))


def _prefactor(s, x):
    return np.exp(-x + s * np.log(x) - sp.gammaln(s))


def _series_p(s, x):
    # Regularised lower gamma, valid for 0 < x < s + 1.
    ap = np.full_like(x, s)
    term = np.full_like(x, 1.0 / s)
    total = term.copy()
    for _ in range(MAX_EXPANSION_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if np.all(np.abs(term) < np.abs(total) * SERIES_EPS):
            return total * _prefactor(s, x)

    raise SpecialFunctionError("Gamma series failed to converge for "
                               "s={}".format(s))


def _continued_fraction_q(s, x):
    # Regularised upper gamma by modified Lentz, valid for x >= s + 1.
    b = x + 1.0 - s
    c = np.full_like(x, 1.0 / FPMIN)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, MAX_EXPANSION_TERMS):
        an = -i * (i - s)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < FPMIN, FPMIN, d)
        c = b + an / c
        c = np.where(np.abs(c) < FPMIN, FPMIN, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < SERIES_EPS):
            return _prefactor(s, x) * h

    raise SpecialFunctionError("Gamma continued fraction failed to converge "
                               "for s={}".format(s))


def _regularized(s, x):
    """Return ``(P, Q)`` arrays for the regularised incomplete gamma."""
    _check_shape(s)
    x = np.atleast_1d(_as_array(x, "x"))
    p = np.zeros_like(x)
    q = np.ones_like(x)

    infinite = np.isinf(x)
    p[infinite] = 1.0
    q[infinite] = 0.0

    low = (x > 0) & (x < s + 1.0)
    if low.any():
        p[low] = _series_p(s, x[low])
        q[low] = 1.0 - p[low]

    high = ~infinite & (x >= s + 1.0)
    if high.any():
        q[high] = _continued_fraction_q(s, x[high])
        p[high] = 1.0 - q[high]

    return np.clip(p, 0.0, 1.0), np.clip(q, 0.0, 1.0)


def regularized_gamma_p(s, x):
    """:math:`P(s, x) = \\gamma(s, x) / \\Gamma(s)`."""
    p, _ = _regularized(s, x)
    return _result(p.reshape(np.shape(x)), x)


def regularized_gamma_q(s, x):
    """:math:`Q(s, x) = 1 - P(s, x)`, computed directly in the upper tail."""
    _, q = _regularized(s, x)
    return _result(q.reshape(np.shape(x)), x)


def lower_incomplete_gamma(s, x):
    """The lower incomplete gamma function
    :math:`\\gamma(s, x) = \\int_0^x t^{s-1} e^{-t} dt`.

    A power series is used below ``x = s + 1`` and a continued fraction above
    it.

    :param s:
        Shape, ``s > 0``.

    :param x:
        Upper limit, ``x >= 0``; scalar or array.

    :raises SpecialFunctionError:
        On domain violations.
    """
    p, _ = _regularized(s, x)
    return _result(p.reshape(np.shape(x)) * gamma_fn(s), x)


class NakagamiSpec:
    """A Nakagami-m fading magnitude law.

    :ivar m:
        Shape parameter, ``m > 0``.

    :ivar w:
        Spread parameter :math:`E[A^2]`, ``w > 0``.
    """

    __slots__ = ["m", "w"]

    def __init__(self, m, w):
        if not (np.isfinite(m) and m > 0):
            raise SpecialFunctionError("Nakagami shape m must be positive, "
                                       "got {!r}".format(m))

        if not (np.isfinite(w) and w > 0):
            raise SpecialFunctionError("Nakagami spread w must be positive, "
                                       "got {!r}".format(w))

        self.m = float(m)
        self.w = float(w)

    def power_cdf(self, x):
        """CDF of the squared gain."""
        return regularized_gamma_p(self.m, self.m * _as_array(x, "x") /
                                   self.w)

    def power_ccdf(self, x):
        """CCDF of the squared gain."""
        return nakagami_power_ccdf(self, x)

    def draw_power(self, rng, size=None):
        """Draw squared gains straight from the gamma law."""
        return rng.gamma(self.m, self.w / self.m, size)

    def __eq__(self, other):
        if not isinstance(other, NakagamiSpec):
            return NotImplemented

        return (self.m, self.w) == (other.m, other.w)

    def __hash__(self):
        return hash((NakagamiSpec, self.m, self.w))

    def __repr__(self):
        return "NakagamiSpec(m={!r}, w={!r})".format(self.m, self.w)

    def to_dict(self):
        return {"law": "nakagami", "m": self.m, "w": self.w}


def nakagami_power_ccdf(spec, x):
    """:math:`\\bar{F}_{A^2}(x) = 1 - \\gamma(m, m x / w) / \\Gamma(m)`.

    Equals 1 at ``x = 0`` and decreases strictly in ``x``.
    """
    return regularized_gamma_q(spec.m, spec.m * _as_array(x, "x") / spec.w)


def power_inverse_cdf(spec, u):
    """The quantile function :math:`F_{A^2}^{-1}(u)` of the squared gain.

    Computed by bisection on the CDF. The bracket starts at ``[0, w]`` and is
    doubled until it contains ``u``; bisection stops once the bracket width
    falls below :py:data:`INVERSE_TOL` relative to its upper end, or after
    :py:data:`INVERSE_MAX_ITER` halvings.

    :param u:
        Level(s) in ``[0, 1)``.

    :raises SpecialFunctionError:
        If any level lies outside ``[0, 1)``.
    """
    levels = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(np.isnan(levels)) or np.any(levels < 0) or \
            np.any(levels >= 1):
        raise SpecialFunctionError("Levels must lie in [0, 1)")

    lo = np.zeros_like(levels)
    hi = np.full_like(levels, spec.w)
    for _ in range(2048):
        short = spec.power_cdf(hi) < levels
        if not short.any():
            break

        hi[short] *= 2.0
    else:
        raise SpecialFunctionError("Could not bracket the quantile")

    active = levels > 0
    for i in range(INVERSE_MAX_ITER):
        mid = 0.5 * (lo + hi)
        below = spec.power_cdf(mid) < levels
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all((hi - lo)[active] <= INVERSE_TOL * hi[active]):
            log.debug("Quantile bisection converged after %d steps", i + 1)
            break

    result = np.where(active, 0.5 * (lo + hi), 0.0)
    return _result(result.reshape(np.shape(u)), u)


def sample_power(spec, rng, size=None):
    """Draw squared gains by inverse transform of ``rng.random``.

    :param rng:
        A :py:class:`numpy.random.Generator`.

    :param size:
        Number of draws; ``None`` for a single float.
    """
    return power_inverse_cdf(spec, rng.random(size))


class GridCcdf:
    """A CCDF tabulated on a grid.

    :ivar xs:
        Strictly increasing, nonnegative grid points.

    :ivar vals:
        CCDF values at ``xs``, nonincreasing and within ``[0, 1]``.
    """

    __slots__ = ["xs", "vals"]

    def __init__(self, xs, vals):
        xs = np.array(xs, dtype=float)
        vals = np.array(vals, dtype=float)
        if xs.ndim != 1 or xs.shape != vals.shape or xs.size == 0:
            raise SpecialFunctionError("Grid and values must be nonempty "
                                       "vectors of equal length")

        if np.any(xs < 0) or np.any(np.diff(xs) <= 0):
            raise SpecialFunctionError("Grid must be nonnegative and strictly "
                                       "increasing")

        if np.any(vals < 0) or np.any(vals > 1) or \
                np.any(np.diff(vals) > GRID_TOL):
            raise SpecialFunctionError("CCDF values must be nonincreasing "
                                       "within [0, 1]")

        xs.setflags(write=False)
        vals.setflags(write=False)
        self.xs = xs
        self.vals = vals

    @classmethod
    def from_spec(cls, spec, xs):
        """Tabulate the power CCDF of ``spec`` on ``xs``."""
        xs = np.asarray(xs, dtype=float)
        return cls(xs, nakagami_power_ccdf(spec, xs))

    def __len__(self):
        return len(self.xs)

    def __repr__(self):
        return "GridCcdf(points={})".format(len(self.xs))
