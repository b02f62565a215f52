# -*- coding: utf-8 -*-
# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.

"""Sources of common randomness.

Two kinds of source live here: small discrete triples used as fixtures (the
binary symmetric cascade and friends), and Maurer's fast fading Gaussian
satellite model::

    X = A_X S,    Y = X + N_Y,    Z = A_Z S + N_Z

where the noises have unit variance and the fades are redrawn for every
symbol. Satellite samples are turned into finite distributions by
quantization and histogramming.
"""

import csv
import logging
from itertools import product

import numpy as np
from scipy.stats import norm

from stealthkey.probcore import (Channel, DistributionError,
                                 DistributionFormatError, FiniteDist,
                                 JointDist3)
from stealthkey.special import NakagamiSpec


log = logging.getLogger(__name__)


CHUNK_SIZE = 2 ** 16
"""Symbols drawn per derived generator when sampling the satellite model."""

DEFAULT_BINS = 16


class SourceError(DistributionError):
    """Raised for invalid source, fade, or quantizer parameters."""


def binary_symmetric_channel(p):
    """The binary symmetric channel with crossover probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise SourceError("Crossover must lie in [0, 1], got {!r}".format(p))

    return Channel([0, 1], [0, 1], [[1.0 - p, p], [p, 1.0 - p]])


def bsc_cascade(p, q):
    """Uniform binary X through a crossover-``p`` channel to Y, then Y through
    a crossover-``q`` channel to Z. Physically degraded by construction."""
    return JointDist3.cascade(FiniteDist.uniform([0, 1]),
                              binary_symmetric_channel(p),
                              binary_symmetric_channel(q))


def eve_copies_alice():
    """X uniform binary, Z = X, and Y independent uniform binary."""
    probs = np.zeros((2, 2, 2))
    for x, y in product(range(2), repeat=2):
        probs[x, y, x] = 0.25

    return JointDist3([0, 1], [0, 1], [0, 1], probs)


def conditionally_independent(p_x, chan_y, chan_z):
    """Y and Z observed through separate channels from X.

    Such a triple is stochastically degraded whenever ``chan_z`` factors
    through ``chan_y``, without being a Markov chain in general.
    """
    return JointDist3.from_channels(p_x, chan_y, chan_z)


def random_joint3(rng, sizes=None):
    """A JointDist3 drawn from the flat Dirichlet law.

    :param rng:
        A :py:class:`numpy.random.Generator`.

    :param sizes:
        Alphabet sizes ``(|X|, |Y|, |Z|)``; drawn from ``2..4`` if ``None``.
    """
    if sizes is None:
        sizes = tuple(int(k) for k in rng.integers(2, 5, size=3))

    probs = rng.dirichlet(np.ones(int(np.prod(sizes)))).reshape(sizes)
    return JointDist3(range(sizes[0]), range(sizes[1]), range(sizes[2]),
                      probs)


class ConstantFade:
    """A fade that is always the magnitude ``a``."""

    __slots__ = ["a"]

    def __init__(self, a):
        if not (np.isfinite(a) and a >= 0):
            raise SourceError("Constant fade must be nonnegative, got "
                              "{!r}".format(a))

        self.a = float(a)

    def draw_power(self, rng, size=None):
        # pylint: disable=unused-argument
        if size is None:
            return self.a * self.a

        return np.full(size, self.a * self.a)

    def __eq__(self, other):
        if not isinstance(other, ConstantFade):
            return NotImplemented

        return self.a == other.a

    def __hash__(self):
        return hash((ConstantFade, self.a))

    def __repr__(self):
        return "ConstantFade(a={!r})".format(self.a)

    def to_dict(self):
        return {"law": "const", "a": self.a}


def parse_fade(text):
    """Parse ``nakagami:m,w`` or ``const:a`` into a fade law."""
    law, _, args = text.partition(":")
    try:
        values = [float(v) for v in args.split(",")]
    except ValueError:
        raise SourceError("Bad fade parameters: {!r}".format(text)) from None

    if law == "nakagami" and len(values) == 2:
        return NakagamiSpec(*values)

    if law == "const" and len(values) == 1:
        return ConstantFade(values[0])

    raise SourceError("Fade must be 'nakagami:m,w' or 'const:a', got "
                      "{!r}".format(text))


def fade_from_dict(data):
    """Inverse of the fade laws' ``to_dict``."""
    if data.get("law") == "nakagami":
        return NakagamiSpec(data["m"], data["w"])

    if data.get("law") == "const":
        return ConstantFade(data["a"])

    raise SourceError("Unknown fade law: {!r}".format(data))


class SatelliteSpec:
    """Parameters of the satellite model.

    :ivar source_variance:
        Variance of the common source S.

    :ivar fade_x:
        Fade law of :math:`A_X` (a :py:class:`NakagamiSpec` or
        :py:class:`ConstantFade`).

    :ivar fade_z:
        Fade law of :math:`A_Z`.
    """

    __slots__ = ["source_variance", "fade_x", "fade_z"]

    def __init__(self, source_variance, fade_x, fade_z):
        if not (np.isfinite(source_variance) and source_variance > 0):
            raise SourceError("Source variance must be positive, got "
                              "{!r}".format(source_variance))

        for fade in (fade_x, fade_z):
            if not hasattr(fade, "draw_power"):
                raise SourceError("Not a fade law: {!r}".format(fade))

        self.source_variance = float(source_variance)
        self.fade_x = fade_x
        self.fade_z = fade_z

    def __repr__(self):
        return "SatelliteSpec(source_variance={!r}, fade_x={!r}, " \
               "fade_z={!r})".format(self.source_variance, self.fade_x,
                                     self.fade_z)

    def to_dict(self):
        return {"sourceVariance": self.source_variance,
                "fadeX": self.fade_x.to_dict(),
                "fadeZ": self.fade_z.to_dict()}


class SampleSet:
    """Real-valued observations ``(x_i, y_i, z_i)`` of Alice, Bob and
    Willie."""

    __slots__ = ["xs", "ys", "zs"]

    def __init__(self, xs, ys, zs):
        xs, ys, zs = (np.array(v, dtype=float) for v in (xs, ys, zs))
        if not xs.ndim == ys.ndim == zs.ndim == 1:
            raise SourceError("Samples must be vectors")

        if not len(xs) == len(ys) == len(zs):
            raise SourceError("Sample vectors differ in length")

        if len(xs) < 1:
            raise SourceError("A sample set needs at least one sample")

        for v in (xs, ys, zs):
            v.setflags(write=False)

        self.xs = xs
        self.ys = ys
        self.zs = zs

    @property
    def n(self):
        return len(self.xs)

    def columns(self):
        return (self.xs, self.ys, self.zs)

    def slice(self, start, stop):
        return SampleSet(self.xs[start:stop], self.ys[start:stop],
                         self.zs[start:stop])

    def __len__(self):
        return len(self.xs)

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented

        return all(np.array_equal(a, b) for a, b in
                   zip(self.columns(), other.columns()))

    __hash__ = None


def satellite_sample(spec, n, seed):
    """Draw ``n`` independent symbols from the satellite model.

    The index range is split into chunks of :py:data:`CHUNK_SIZE`, each with
    its own generator spawned from ``seed``, so the output depends only on
    ``(spec, n, seed)``.
    """
    if n < 1:
        raise SourceError("n must be at least 1, got {}".format(n))

    starts = range(0, n, CHUNK_SIZE)
    children = np.random.SeedSequence(seed).spawn(len(starts))
    xs = np.empty(n)
    ys = np.empty(n)
    zs = np.empty(n)
    sigma = np.sqrt(spec.source_variance)
    for start, child in zip(starts, children):
        stop = min(start + CHUNK_SIZE, n)
        size = stop - start
        rng = np.random.default_rng(child)
        s = rng.normal(0.0, sigma, size)
        a_x = np.sqrt(spec.fade_x.draw_power(rng, size))
        a_z = np.sqrt(spec.fade_z.draw_power(rng, size))
        xs[start:stop] = a_x * s
        ys[start:stop] = xs[start:stop] + rng.standard_normal(size)
        zs[start:stop] = a_z * s + rng.standard_normal(size)

    log.debug("Drew %d satellite symbols in %d chunks", n, len(starts))
    return SampleSet(xs, ys, zs)


class QuantizerSpec:
    """Per-coordinate bin boundaries.

    :ivar edges:
        Three strictly increasing arrays of interior edges, for x, y and z.
        A coordinate with ``k`` edges has ``k + 1`` bins; values beyond the
        outermost edges fall in the end bins.
    """

    __slots__ = ["edges"]

    def __init__(self, edges):
        edges = tuple(np.array(e, dtype=float) for e in edges)
        if len(edges) != 3:
            raise SourceError("Need edges for exactly three coordinates")

        for e in edges:
            if e.ndim != 1 or e.size < 1:
                raise SourceError("Each coordinate needs at least 2 bins")

            if np.any(np.diff(e) <= 0) or not np.all(np.isfinite(e)):
                raise SourceError("Quantizer edges must be finite and "
                                  "strictly increasing")

            e.setflags(write=False)

        self.edges = edges

    @property
    def bin_counts(self):
        return tuple(len(e) + 1 for e in self.edges)

    def bin_index(self, coordinate, values):
        """Bin indices of ``values`` along ``coordinate`` (0, 1 or 2)."""
        return np.searchsorted(self.edges[coordinate], values, side="right")

    def to_dict(self):
        return {"edges": [e.tolist() for e in self.edges]}


def gaussian_quantizer(samples, bins=DEFAULT_BINS):
    """Edges that would make each coordinate's bins equiprobable if it were
    Gaussian with its sample mean and standard deviation.

    Equiprobable edges for ``2k`` bins contain those for ``k``, so refining
    by powers of two nests the partitions.
    """
    if bins < 2:
        raise SourceError("Need at least 2 bins, got {}".format(bins))

    levels = norm.ppf(np.arange(1, bins) / bins)
    edges = []
    for column in samples.columns():
        std = float(np.std(column))
        if std == 0.0:
            log.debug("Degenerate coordinate, using unit spread for edges")
            std = 1.0

        edges.append(float(np.mean(column)) + std * levels)

    return QuantizerSpec(edges)


def quantize(samples, quantizer):
    """The empirical joint distribution of bin indices.

    :returns:
        A :py:class:`~stealthkey.probcore.JointDist3` whose labels are bin
        indices.
    """
    sizes = quantizer.bin_counts
    index = tuple(quantizer.bin_index(i, column)
                  for i, column in enumerate(samples.columns()))
    flat = np.ravel_multi_index(index, sizes)
    counts = np.bincount(flat, minlength=int(np.prod(sizes))).reshape(sizes)
    return JointDist3(range(sizes[0]), range(sizes[1]), range(sizes[2]),
                      counts / counts.sum())


def quantize_batches(samples, quantizer, batches):
    """Quantize ``batches`` contiguous, near-equal slices separately, for
    batch-means error estimates of plug-in quantities."""
    if not 1 <= batches <= samples.n:
        raise SourceError("Need between 1 and n batches, got {}".format(
            batches))

    bounds = np.linspace(0, samples.n, batches + 1).astype(int)
    return [quantize(samples.slice(start, stop), quantizer)
            for start, stop in zip(bounds[:-1], bounds[1:])]


def empirical_dist(samples, labels=None):
    """Relative frequencies of a sequence of symbols.

    :param labels:
        The alphabet to report against. Defaults to the observed symbols in
        order of first appearance.
    """
    samples = list(samples)
    if not samples:
        raise SourceError("Cannot estimate from an empty sample")

    if labels is None:
        labels = list(dict.fromkeys(samples))

    position = {label: i for i, label in enumerate(labels)}
    counts = np.zeros(len(position))
    try:
        for symbol in samples:
            counts[position[symbol]] += 1
    except KeyError as e:
        raise SourceError("Symbol {!r} is not in the alphabet".format(
            e.args[0])) from None

    return FiniteDist.normalized(labels, counts)


def write_csv(samples, path):
    """Write a :py:class:`SampleSet` as CSV with header ``x,y,z``."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y", "z"])
        for row in zip(*(c.tolist() for c in samples.columns())):
            writer.writerow([repr(v) for v in row])


def read_csv(path):
    """Read a :py:class:`SampleSet` written by :py:func:`write_csv`."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["x", "y", "z"]:
            raise DistributionFormatError("expected header x,y,z", 1, 1)

        rows = []
        for row in reader:
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DistributionFormatError(
                    "non-numeric sample", reader.line_num, 1) from None

            if len(row) != 3:
                raise DistributionFormatError("expected three columns",
                                              reader.line_num, 1)

    if not rows:
        raise DistributionFormatError("no samples", 2, 1)

    return SampleSet(*np.array(rows).T)
