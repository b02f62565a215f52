# -*- coding: utf-8 -*-
# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.

"""A small dense two-phase simplex solver.

Solves ``min c.x subject to A x = b, x >= 0`` on a full tableau. Phase one
puts an artificial variable on every row and minimises their sum; phase two
starts from the feasible basis it leaves behind. Both phases use Bland's
rule (smallest entering index, smallest leaving basic index among ratio ties),
so degenerate problems cannot cycle.

This is meant for the few hundred variables the degradedness test needs, not
for general linear programming.
"""

import logging
from collections import namedtuple

import numpy as np

from stealthkey import StealthKeyException


log = logging.getLogger(__name__)


PIVOT_TOL = 1e-10
"""Entries smaller than this are treated as zero when choosing pivots."""

FEASIBILITY_TOL = 1e-9

MAX_ITERATIONS = 50000


class SimplexError(StealthKeyException):
    """The base class for solver failures."""


class SimplexIterationError(SimplexError):
    """Raised when a phase exceeds its pivot budget."""


class SimplexUnboundedError(SimplexError):
    """Raised when the objective is unbounded below."""


class SimplexInfeasibleError(SimplexError):
    """Raised when phase one cannot drive the artificials to zero."""


LpResult = namedtuple("LpResult", "x objective iterations")
"""An optimal vertex, its objective value, and the total pivot count."""


def _pivot(tableau, row, col):
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])


def _enter(costs, columns):
    candidates = np.flatnonzero(costs[:columns] < -PIVOT_TOL)
    return candidates[0] if candidates.size else -1


def _leave(tableau, col, basis):
    column = tableau[:-1, col]
    positive = column > PIVOT_TOL
    if not positive.any():
        return -1

    ratios = np.full(column.shape, np.inf)
    ratios[positive] = tableau[:-1, -1][positive] / column[positive]
    ties = np.flatnonzero(ratios - ratios.min() <= PIVOT_TOL)
    return min(ties, key=lambda r: basis[r])


def _run(tableau, basis, columns, phase):
    for iteration in range(MAX_ITERATIONS):
        col = _enter(tableau[-1], columns)
        if col < 0:
            log.debug("Phase %d optimal after %d pivots", phase, iteration)
            return iteration

        row = _leave(tableau, col, basis)
        if row < 0:
            raise SimplexUnboundedError("Objective unbounded in phase "
                                        "{}".format(phase))

        _pivot(tableau, row, col)
        basis[row] = col

    raise SimplexIterationError("Phase {} exceeded {} pivots".format(
        phase, MAX_ITERATIONS))


def solve(c, a_eq, b_eq):
    """Minimise ``c.x`` subject to ``a_eq x = b_eq`` and ``x >= 0``.

    :param c:
        Cost vector of length ``n``.

    :param a_eq:
        Constraint matrix of shape ``(m, n)``.

    :param b_eq:
        Right hand side of length ``m``.

    :returns:
        An :py:class:`LpResult`.

    :raises SimplexInfeasibleError:
        If no feasible point exists.

    :raises SimplexUnboundedError:
        If the objective is unbounded below.

    :raises SimplexIterationError:
        If either phase runs out of pivots.
    """
    c = np.asarray(c, dtype=float)
    a = np.array(a_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = a.shape
    if c.shape != (n,) or b.shape != (m,):
        raise SimplexError("Inconsistent problem dimensions")

    negative = b < 0
    a[negative] *= -1.0
    b[negative] *= -1.0

    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[-1, :n] = -a.sum(axis=0)
    tableau[-1, -1] = -b.sum()
    basis = list(range(n, n + m))

    iterations = _run(tableau, basis, n + m, 1)
    infeasibility = -tableau[-1, -1]
    if infeasibility > FEASIBILITY_TOL:
        raise SimplexInfeasibleError("Phase 1 residual {:g}".format(
            infeasibility))

    rows = []
    for r in range(m):
        if basis[r] >= n:
            nonzero = np.flatnonzero(np.abs(tableau[r, :n]) > PIVOT_TOL)
            if not nonzero.size:
                log.debug("Dropping redundant constraint row %d", r)
                continue

            _pivot(tableau, r, nonzero[0])
            basis[r] = nonzero[0]

        rows.append(r)

    phase2 = np.zeros((len(rows) + 1, n + 1))
    phase2[:-1, :n] = tableau[rows, :n]
    phase2[:-1, -1] = tableau[rows, -1]
    phase2[-1, :n] = c
    basis = [basis[r] for r in rows]
    for r, var in enumerate(basis):
        phase2[-1] -= c[var] * phase2[r]

    iterations += _run(phase2, basis, n, 2)

    x = np.zeros(n)
    x[basis] = phase2[:-1, -1]
    x = np.clip(x, 0.0, None)
    return LpResult(x, float(c @ x), iterations)
