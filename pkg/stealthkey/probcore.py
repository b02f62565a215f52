# -*- coding: utf-8 -*-
# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.

"""Finite-alphabet distributions, channels, and exact information measures.

All objects in this module are immutable once constructed, and are validated
at construction time: probabilities must be nonnegative and sum to one within
:py:data:`~stealthkey.PROB_TOL`. Nothing is ever renormalised silently; use
:py:meth:`FiniteDist.normalized` when that is what you want.

Logarithms are base 2 throughout, and :math:`0 \\log 0 = 0`. A divergence with
a support violation is :py:data:`~stealthkey.INFINITY`.

The JSON file format is::

    {"labels": [...], "probs": [...]}
    {"labelsA": [...], "labelsB": [...], "probs": [[...]]}
    {"labelsX": [...], "labelsY": [...], "labelsZ": [...], "probs": [[[...]]]}
    {"inLabels": [...], "outLabels": [...], "rows": [[...]]}

with row-major nesting X→Y→Z. Labels that are tuples are written as lists and
read back as tuples.
"""

import json
import logging
from functools import reduce
from itertools import product

import numpy as np

from stealthkey import INFINITY, PROB_TOL, StealthKeyException


log = logging.getLogger(__name__)


ENUMERATION_GUARD = 2 ** 24
"""Largest alphabet an i.i.d. extension may enumerate."""


class DistributionError(StealthKeyException):
    """The base class for invalid distributions and channels."""


class AlphabetMismatchError(DistributionError):
    """Raised when two objects that must share an alphabet do not."""


class SizeGuardError(DistributionError):
    """Raised when an enumeration would exceed its size guard."""


class DistributionFormatError(DistributionError):
    """Raised when a distribution file cannot be parsed.

    :ivar line:
        Line of the offending input, when known.

    :ivar column:
        Column of the offending input, when known.
    """

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = "line {}, column {}: {}".format(line, column, message)

        super().__init__(message)
        self.line = line
        self.column = column


def _freeze(label):
    if isinstance(label, list):
        return tuple(_freeze(item) for item in label)

    return label


def _thaw(label):
    if isinstance(label, tuple):
        return [_thaw(item) for item in label]

    if isinstance(label, np.generic):
        return label.item()

    return label


def _check_labels(labels, what):
    labels = tuple(_freeze(label) for label in labels)
    if not labels:
        raise DistributionError("{} has an empty alphabet".format(what))

    if len(set(labels)) != len(labels):
        raise DistributionError("{} labels are not distinct".format(what))

    return labels


def _check_array(probs, what):
    arr = np.array(probs, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DistributionError("{} has non-finite entries".format(what))

    if np.any(arr < 0):
        raise DistributionError("{} has negative entries".format(what))

    return arr


def _check_total(arr, what):
    total = float(arr.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise DistributionError(
            "{} probabilities sum to {:.12g} (expected 1 within {:g})".format(
                what, total, PROB_TOL))


def _freeze_array(arr):
    arr.setflags(write=False)
    return arr


def array_entropy(probs):
    """Entropy in bits of the probabilities in an array of any shape."""
    p = np.asarray(probs, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def array_kl(p, q):
    """:math:`D(p||q)` in bits of two arrays laid out alike.

    :returns:
        :py:data:`~stealthkey.INFINITY` when ``p`` puts mass where ``q`` does
        not.
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    mask = p > 0
    if np.any(q[mask] <= 0):
        return INFINITY

    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask]))) + 0.0


def marginal_array(probs, axes, keep):
    """Marginalise an array whose axes are named by ``axes`` onto ``keep``,
    returning the axes in the order given by ``keep``."""
    drop = tuple(i for i, axis in enumerate(axes) if axis not in keep)
    arr = probs.sum(axis=drop) if drop else probs
    remaining = [axis for axis in axes if axis in keep]
    return np.transpose(arr, [remaining.index(axis) for axis in keep])


def _cmi(probs, a, b, c, axes="xyz"):
    """I(A;B|C) of an array with named axes, by the entropy identity."""
    return (array_entropy(marginal_array(probs, axes, a + c)) +
            array_entropy(marginal_array(probs, axes, b + c)) -
            array_entropy(marginal_array(probs, axes, a + b + c)) -
            array_entropy(marginal_array(probs, axes, c)))


def _rows_to_channel(joint, labels_in, labels_out):
    # Conditioning values with zero mass get a uniform row.
    mass = joint.sum(axis=1, keepdims=True)
    rows = np.where(mass > 0, joint / np.where(mass > 0, mass, 1.0),
                    1.0 / joint.shape[1])
    return Channel(labels_in, labels_out, rows)


class FiniteDist:
    """A distribution over a finite alphabet.

    :ivar labels:
        Tuple of distinct, hashable symbol identifiers.

    :ivar probs:
        Read-only numpy array of probabilities, aligned with ``labels``.
    """

    __slots__ = ["labels", "probs", "_index"]

    def __init__(self, labels, probs):
        """Create and validate the distribution.

        :param labels:
            The alphabet. Lists are converted to tuples.

        :param probs:
            Probabilities, one per label.

        :raises DistributionError:
            If the probabilities are invalid.
        """
        self.labels = _check_labels(labels, "FiniteDist")
        probs = _check_array(probs, "FiniteDist")
        if probs.shape != (len(self.labels),):
            raise DistributionError(
                "FiniteDist has {} labels but probs of shape {}".format(
                    len(self.labels), probs.shape))

        _check_total(probs, "FiniteDist")
        self.probs = _freeze_array(probs)
        self._index = {label: i for i, label in enumerate(self.labels)}

    @classmethod
    def normalized(cls, labels, weights):
        """Build a distribution from nonnegative weights by renormalising."""
        weights = _check_array(weights, "FiniteDist weights")
        total = weights.sum()
        if total <= 0:
            raise DistributionError("FiniteDist weights have zero total")

        return cls(labels, weights / total)

    @classmethod
    def uniform(cls, labels):
        """The uniform distribution over ``labels``."""
        labels = list(labels)
        return cls(labels, np.full(len(labels), 1.0 / len(labels)))

    @classmethod
    def point(cls, labels, label):
        """The point mass on ``label``."""
        labels = list(labels)
        probs = np.zeros(len(labels))
        probs[labels.index(label)] = 1.0
        return cls(labels, probs)

    def index(self, label):
        """Position of ``label`` in the alphabet."""
        try:
            return self._index[_freeze(label)]
        except KeyError:
            raise DistributionError("Label not in alphabet: {!r}".format(
                label)) from None

    def prob(self, label):
        """Probability of ``label``."""
        return float(self.probs[self.index(label)])

    def support(self):
        """Labels with positive probability."""
        return tuple(label for label, p in zip(self.labels, self.probs)
                     if p > 0)

    def min_positive(self):
        """Smallest positive probability, the :math:`\\mu` of the typicality
        bounds."""
        return float(self.probs[self.probs > 0].min())

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, FiniteDist):
            return NotImplemented

        return (self.labels == other.labels and
                np.array_equal(self.probs, other.probs))

    __hash__ = None

    def __repr__(self):
        return "FiniteDist(labels={}, probs={})".format(
            list(self.labels), self.probs.tolist())

    def to_dict(self):
        return {"labels": [_thaw(label) for label in self.labels],
                "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(_require(data, "labels"), _require(data, "probs"))


class JointDist2:
    """A joint distribution of two finite random variables A and B.

    :ivar probs:
        Read-only matrix of shape ``(|A|, |B|)``.
    """

    __slots__ = ["labels_a", "labels_b", "probs"]

    def __init__(self, labels_a, labels_b, probs):
        self.labels_a = _check_labels(labels_a, "JointDist2 A")
        self.labels_b = _check_labels(labels_b, "JointDist2 B")
        probs = _check_array(probs, "JointDist2")
        shape = (len(self.labels_a), len(self.labels_b))
        if probs.shape != shape:
            raise DistributionError(
                "JointDist2 expects probs of shape {}, got {}".format(
                    shape, probs.shape))

        _check_total(probs, "JointDist2")
        self.probs = _freeze_array(probs)

    def marginal(self, keep):
        """Marginal of ``"a"`` or ``"b"``, as a :py:class:`FiniteDist`."""
        if keep == "a":
            return FiniteDist(self.labels_a, self.probs.sum(axis=1))

        if keep == "b":
            return FiniteDist(self.labels_b, self.probs.sum(axis=0))

        raise ValueError("keep must be 'a' or 'b', got {!r}".format(keep))

    def transpose(self):
        """The same joint with A and B swapped."""
        return JointDist2(self.labels_b, self.labels_a, self.probs.T)

    def conditional(self):
        """The channel :math:`P_{B|A}`.

        Values of A with zero mass are given a uniform row.
        """
        return _rows_to_channel(self.probs, self.labels_a, self.labels_b)

    def condition(self, axis, label):
        """The conditional distribution of the other variable given
        ``axis == label``."""
        if axis == "a":
            row = self.probs[_position(self.labels_a, label), :]
            labels = self.labels_b
        elif axis == "b":
            row = self.probs[:, _position(self.labels_b, label)]
            labels = self.labels_a
        else:
            raise ValueError("axis must be 'a' or 'b', got {!r}".format(axis))

        mass = row.sum()
        if mass <= 0:
            raise DistributionError("Cannot condition on zero-mass value "
                                    "{!r}".format(label))

        return FiniteDist(labels, row / mass)

    def __eq__(self, other):
        if not isinstance(other, JointDist2):
            return NotImplemented

        return (self.labels_a == other.labels_a and
                self.labels_b == other.labels_b and
                np.array_equal(self.probs, other.probs))

    __hash__ = None

    def __repr__(self):
        return "JointDist2(labels_a={}, labels_b={}, shape={})".format(
            list(self.labels_a), list(self.labels_b), self.probs.shape)

    def to_dict(self):
        return {"labelsA": [_thaw(label) for label in self.labels_a],
                "labelsB": [_thaw(label) for label in self.labels_b],
                "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(_require(data, "labelsA"), _require(data, "labelsB"),
                   _require(data, "probs"))


class JointDist3:
    """A joint distribution :math:`P_{XYZ}` of the common randomness seen by
    Alice (X), Bob (Y), and Willie (Z).

    :ivar probs:
        Read-only tensor of shape ``(|X|, |Y|, |Z|)``.
    """

    __slots__ = ["labels_x", "labels_y", "labels_z", "probs"]

    def __init__(self, labels_x, labels_y, labels_z, probs):
        self.labels_x = _check_labels(labels_x, "JointDist3 X")
        self.labels_y = _check_labels(labels_y, "JointDist3 Y")
        self.labels_z = _check_labels(labels_z, "JointDist3 Z")
        probs = _check_array(probs, "JointDist3")
        shape = (len(self.labels_x), len(self.labels_y), len(self.labels_z))
        if probs.shape != shape:
            raise DistributionError(
                "JointDist3 expects probs of shape {}, got {}".format(
                    shape, probs.shape))

        _check_total(probs, "JointDist3")
        self.probs = _freeze_array(probs)

    @classmethod
    def from_channels(cls, p_x, chan_y, chan_z):
        """A triple where Y and Z are conditionally independent given X.

        :param p_x:
            :py:class:`FiniteDist` of X.

        :param chan_y:
            :py:class:`Channel` :math:`P_{Y|X}`.

        :param chan_z:
            :py:class:`Channel` :math:`P_{Z|X}`.
        """
        _same_alphabet(p_x.labels, chan_y.in_labels, "P_X vs P_Y|X")
        _same_alphabet(p_x.labels, chan_z.in_labels, "P_X vs P_Z|X")
        probs = (p_x.probs[:, None, None] * chan_y.rows[:, :, None] *
                 chan_z.rows[:, None, :])
        return cls(p_x.labels, chan_y.out_labels, chan_z.out_labels, probs)

    @classmethod
    def cascade(cls, p_x, chan_xy, chan_yz):
        """A physically degraded triple X - Y - Z."""
        _same_alphabet(p_x.labels, chan_xy.in_labels, "P_X vs P_Y|X")
        _same_alphabet(chan_xy.out_labels, chan_yz.in_labels,
                       "P_Y|X vs P_Z|Y")
        probs = (p_x.probs[:, None, None] * chan_xy.rows[:, :, None] *
                 chan_yz.rows[None, :, :])
        return cls(p_x.labels, chan_xy.out_labels, chan_yz.out_labels, probs)

    def _labels(self, axis):
        return {"x": self.labels_x, "y": self.labels_y,
                "z": self.labels_z}[axis]

    def shape(self):
        """Alphabet sizes ``(|X|, |Y|, |Z|)``."""
        return self.probs.shape

    def marginal(self, keep):
        """Marginalise onto the axes named in ``keep``.

        :param keep:
            One or two of ``"x"``, ``"y"``, ``"z"``; the order is kept, so
            ``"zy"`` gives a :py:class:`JointDist2` with A = Z and B = Y.

        :returns:
            A :py:class:`FiniteDist` or a :py:class:`JointDist2`.
        """
        _check_axes(keep, 1, 2)
        arr = marginal_array(self.probs, "xyz", keep)
        if len(keep) == 1:
            return FiniteDist(self._labels(keep), arr)

        return JointDist2(self._labels(keep[0]), self._labels(keep[1]), arr)

    def permute(self, order):
        """Reorder the axes, e.g. ``"xzy"`` swaps the roles of Y and Z."""
        _check_axes(order, 3, 3)
        return JointDist3(*(self._labels(axis) for axis in order),
                          marginal_array(self.probs, "xyz", order))

    def channel(self, given, target):
        """The conditional channel :math:`P_{target|given}` between two axes.

        Zero-mass conditioning values are given a uniform row.
        """
        _check_axes(given + target, 2, 2)
        return _rows_to_channel(marginal_array(self.probs, "xyz",
                                               given + target),
                                self._labels(given), self._labels(target))

    def condition(self, axis, label):
        """The :py:class:`JointDist2` of the other two axes (in XYZ order)
        given ``axis == label``."""
        _check_axes(axis, 1, 1)
        rest = "".join(a for a in "xyz" if a != axis)
        arr = np.take(marginal_array(self.probs, "xyz", axis + rest),
                      _position(self._labels(axis), label), axis=0)
        mass = arr.sum()
        if mass <= 0:
            raise DistributionError("Cannot condition on zero-mass value "
                                    "{!r}".format(label))

        return JointDist2(self._labels(rest[0]), self._labels(rest[1]),
                          arr / mass)

    def __eq__(self, other):
        if not isinstance(other, JointDist3):
            return NotImplemented

        return (self.labels_x == other.labels_x and
                self.labels_y == other.labels_y and
                self.labels_z == other.labels_z and
                np.array_equal(self.probs, other.probs))

    __hash__ = None

    def __repr__(self):
        return "JointDist3(shape={})".format(self.probs.shape)

    def to_dict(self):
        return {"labelsX": [_thaw(label) for label in self.labels_x],
                "labelsY": [_thaw(label) for label in self.labels_y],
                "labelsZ": [_thaw(label) for label in self.labels_z],
                "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(_require(data, "labelsX"), _require(data, "labelsY"),
                   _require(data, "labelsZ"), _require(data, "probs"))


class Channel:
    """A row-stochastic conditional distribution (a discrete memoryless
    channel), e.g. :math:`P_{Y|X}` or the equivalent channel
    :math:`P_{ZF|U}` to Willie.

    :ivar rows:
        Read-only matrix of shape ``(|in|, |out|)``; row ``i`` is the output
        distribution given input ``in_labels[i]``.
    """

    __slots__ = ["in_labels", "out_labels", "rows"]

    def __init__(self, in_labels, out_labels, rows):
        self.in_labels = _check_labels(in_labels, "Channel input")
        self.out_labels = _check_labels(out_labels, "Channel output")
        rows = _check_array(rows, "Channel")
        shape = (len(self.in_labels), len(self.out_labels))
        if rows.shape != shape:
            raise DistributionError(
                "Channel expects rows of shape {}, got {}".format(
                    shape, rows.shape))

        sums = rows.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
        if bad.size:
            raise DistributionError(
                "Channel row {!r} sums to {:.12g}".format(
                    self.in_labels[bad[0]], sums[bad[0]]))

        self.rows = _freeze_array(rows)

    @classmethod
    def identity(cls, labels):
        """The noiseless channel over ``labels``."""
        labels = list(labels)
        return cls(labels, labels, np.eye(len(labels)))

    def row(self, label):
        """Output distribution given input ``label``."""
        return FiniteDist(self.out_labels,
                          self.rows[_position(self.in_labels, label)])

    def apply(self, p_in):
        """Output distribution when the input follows ``p_in``."""
        _same_alphabet(p_in.labels, self.in_labels, "input vs channel")
        return FiniteDist(self.out_labels, p_in.probs @ self.rows)

    def joint(self, p_in):
        """The joint :py:class:`JointDist2` of input and output."""
        _same_alphabet(p_in.labels, self.in_labels, "input vs channel")
        return JointDist2(self.in_labels, self.out_labels,
                          p_in.probs[:, None] * self.rows)

    def compose(self, other):
        """The channel ``self`` followed by ``other``."""
        _same_alphabet(self.out_labels, other.in_labels, "channel chain")
        return Channel(self.in_labels, other.out_labels,
                       self.rows @ other.rows)

    def __eq__(self, other):
        if not isinstance(other, Channel):
            return NotImplemented

        return (self.in_labels == other.in_labels and
                self.out_labels == other.out_labels and
                np.array_equal(self.rows, other.rows))

    __hash__ = None

    def __repr__(self):
        return "Channel(in={}, out={})".format(list(self.in_labels),
                                               list(self.out_labels))

    def to_dict(self):
        return {"inLabels": [_thaw(label) for label in self.in_labels],
                "outLabels": [_thaw(label) for label in self.out_labels],
                "rows": self.rows.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(_require(data, "inLabels"), _require(data, "outLabels"),
                   _require(data, "rows"))


def _require(data, key):
    try:
        return data[key]
    except (KeyError, TypeError):
        raise DistributionFormatError("missing key {!r}".format(key)) \
            from None


def _position(labels, label):
    try:
        return labels.index(_freeze(label))
    except ValueError:
        raise DistributionError("Label not in alphabet: {!r}".format(
            label)) from None


def _same_alphabet(first, second, what):
    if tuple(first) != tuple(second):
        raise AlphabetMismatchError("Alphabet mismatch ({}): {} vs {}".format(
            what, list(first), list(second)))


def _check_axes(axes, low, high):
    if (not low <= len(axes) <= high or len(set(axes)) != len(axes) or
            any(axis not in "xyz" for axis in axes)):
        raise ValueError("Invalid axis selection: {!r}".format(axes))


def entropy(dist):
    """Shannon entropy :math:`H(P) = -\\sum p \\log_2 p` in bits.

    :param dist:
        A :py:class:`FiniteDist`. Joint distributions are accepted too, and
        give the joint entropy.
    """
    return array_entropy(dist.probs)


def mutual_information(joint):
    """:math:`I(A;B) = H(A) + H(B) - H(A,B)` of a :py:class:`JointDist2`."""
    return (array_entropy(joint.probs.sum(axis=1)) +
            array_entropy(joint.probs.sum(axis=0)) -
            array_entropy(joint.probs))


def conditional_mutual_information(joint, pattern="xy|z"):
    """Conditional mutual information of a :py:class:`JointDist3`.

    :param pattern:
        Which variables to pair and which to condition on, e.g. ``"xy|z"``
        for :math:`I(X;Y|Z)` or ``"xz|y"`` for :math:`I(X;Z|Y)`.
    """
    try:
        pair, given = pattern.split("|")
    except ValueError:
        raise ValueError("Pattern must look like 'xy|z', got {!r}".format(
            pattern)) from None

    _check_axes(pair + given, 3, 3)
    if len(pair) != 2:
        raise ValueError("Pattern must pair two variables: {!r}".format(
            pattern))

    return _cmi(joint.probs, pair[0], pair[1], given)


def kl_divergence(p, q):
    """Kullback-Leibler divergence :math:`D(P||Q)` in bits.

    :returns:
        :py:data:`~stealthkey.INFINITY` when P puts mass where Q does not.

    :raises AlphabetMismatchError:
        If the alphabets differ.
    """
    _same_alphabet(p.labels, q.labels, "divergence")
    return array_kl(p.probs, q.probs)


def conditional_kl(p_cond, q, p_weight):
    """Conditional divergence
    :math:`D(P_{Z|K}||Q_Z|P_K) = \\sum_k P_K(k) D(P_{Z|K=k}||Q_Z)`.

    :param p_cond:
        :py:class:`Channel` :math:`P_{Z|K}`.

    :param q:
        :py:class:`FiniteDist` :math:`Q_Z` over the channel output alphabet.

    :param p_weight:
        :py:class:`FiniteDist` :math:`P_K` over the channel input alphabet.
    """
    _same_alphabet(p_cond.out_labels, q.labels, "channel output vs Q")
    _same_alphabet(p_cond.in_labels, p_weight.labels, "channel input vs P_K")
    total = 0.0
    for weight, row in zip(p_weight.probs, p_cond.rows):
        if weight > 0:
            total += weight * array_kl(row, q.probs)

    return total


def marginalize(joint, keep):
    """Marginal of a joint distribution; see :py:meth:`JointDist3.marginal`
    and :py:meth:`JointDist2.marginal`."""
    return joint.marginal(keep)


def condition(joint, axis, label):
    """Bayes conditioning of a joint distribution on one variable."""
    return joint.condition(axis, label)


def _letters(dist):
    if isinstance(dist, FiniteDist):
        return list(dist.labels), dist.probs

    if isinstance(dist, JointDist2):
        return list(product(dist.labels_a, dist.labels_b)), dist.probs.ravel()

    if isinstance(dist, JointDist3):
        return (list(product(dist.labels_x, dist.labels_y, dist.labels_z)),
                dist.probs.ravel())

    raise TypeError("Expected a distribution, got {}".format(
        type(dist).__name__))


def iid_extend(dist, n):
    """The product distribution :math:`P^n` over length-``n`` strings.

    Joint distributions are extended letter-wise, so the labels are tuples of
    joint letters.

    :raises SizeGuardError:
        If the extended alphabet exceeds :py:data:`ENUMERATION_GUARD`.
    """
    if n < 1:
        raise ValueError("n must be at least 1, got {}".format(n))

    letters, probs = _letters(dist)
    if len(letters) ** n > ENUMERATION_GUARD:
        raise SizeGuardError("|alphabet|^n = {}^{} exceeds the guard "
                             "{}".format(len(letters), n, ENUMERATION_GUARD))

    extended = reduce(np.multiply.outer, [probs] * n).ravel()
    return FiniteDist(list(product(letters, repeat=n)), extended)


_KINDS = (("labels", FiniteDist), ("labelsA", JointDist2),
          ("labelsX", JointDist3), ("inLabels", Channel))


def from_dict(data):
    """Rebuild whichever distribution object ``data`` describes."""
    if isinstance(data, dict):
        for key, kind in _KINDS:
            if key in data:
                return kind.from_dict(data)

    raise DistributionFormatError("Unrecognised distribution object; expected "
                                  "one of the keys {}".format(
                                      [key for key, _ in _KINDS]))


def loads(text):
    """Parse a distribution from JSON text."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise DistributionFormatError(e.msg, e.lineno, e.colno) from None

    return from_dict(data)


def load(path):
    """Read a distribution file."""
    with open(path, "r", encoding="utf-8") as f:
        return loads(f.read())


def dumps(obj):
    """Serialise a distribution object to JSON text."""
    return json.dumps(obj.to_dict())


def dump(obj, path):
    """Write a distribution object to ``path``."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(obj))
        f.write("\n")
