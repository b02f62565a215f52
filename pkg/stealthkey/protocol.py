# -*- coding: utf-8 -*-
# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.

"""Small-blocklength simulation of stealthy key generation.

Alice draws a codeword :math:`U^n(m, w)` from a wiretap codebook with
:math:`L = 2^{\\lceil nR \\rceil}` bins of :math:`L_1 =
2^{\\lceil nR_1 \\rceil}` codewords each, and publishes
:math:`F^n = U^n \\oplus X^n`. Bob decodes :math:`(m, w)` from
:math:`(Y^n, F^n)` by maximum likelihood and keeps the bin index as his key;
Willie sees :math:`(Z^n, F^n)`.

Every quantity can be computed exactly by enumeration while the codebook and
alphabets are small (see :py:data:`EXACT_GUARD`), or estimated by Monte Carlo
beyond that. Single-letter channels use output index ``f * |O| + o``, and
length-``n`` outputs are ordered with the first symbol most significant.
"""

import logging
import math
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from functools import reduce
from itertools import product

import numpy as np
from scipy.special import logsumexp

from stealthkey import StealthKeyException
from stealthkey.bounds import confusion_rate_threshold, sk_bounds
from stealthkey.events import Signal
from stealthkey.probcore import (ENUMERATION_GUARD, AlphabetMismatchError,
                                 Channel, DistributionError, FiniteDist,
                                 JointDist2, array_entropy, array_kl)


log = logging.getLogger(__name__)


EXACT_GUARD = 2 ** 30
"""Largest :math:`L L_1 |\\mathcal{A}|^{3n}` run exactly."""

TYPICALITY_GUARD = 2 ** 20
"""Largest number of joint sequences the typicality split enumerates."""

DEFAULT_DELTA = 0.2

TIE_TOL = 1e-9
"""Relative likelihood gap below which decoder candidates tie."""

MC_BATCH_ELEMENTS = 2 ** 22

TYPICALITY_SLACK = 1e-12


class ProtocolError(StealthKeyException):
    """The base class for protocol errors."""


class GuardExceededError(ProtocolError):
    """Raised when an exact computation would exceed its size guard."""


class CodebookError(ProtocolError):
    """Raised for malformed codebooks and codebook parameters."""


def _ceil_bits(n, rate):
    return int(math.ceil(round(n * rate, 12)))


def _sequence_probs(letters, n):
    return reduce(np.multiply.outer, [letters] * n).ravel()


def _sequence_sums(letters, n):
    return reduce(np.add.outer, [letters] * n).ravel()


def _split(arr, n, q, k):
    """Reorder the last axis of ``arr``, indexed by ``n`` letters of
    ``(f, o)``, into an ``(f^n, o^n)`` pair of axes."""
    lead = arr.shape[:-1]
    arr = arr.reshape(lead + (q, k) * n)
    offset = len(lead)
    order = (list(range(offset)) +
             [offset + 2 * i for i in range(n)] +
             [offset + 2 * i + 1 for i in range(n)])
    return np.transpose(arr, order).reshape(lead + (q ** n, k ** n))


def cwtc_channel(joint, side):
    """The single-letter channel from U to a terminal's view of the
    discussion.

    :param side:
        ``"bob"`` for :math:`P_{YF|U}` or ``"willie"`` for
        :math:`P_{ZF|U}`.

    :returns:
        A :py:class:`~stealthkey.probcore.Channel` whose outputs are
        ``(f, o)`` label pairs, with
        :math:`W(f, o | u) = P_{XO}(f \\ominus u, o)`.
    """
    if side == "bob":
        p_xo, labels_o = joint.probs.sum(axis=2), joint.labels_y
    elif side == "willie":
        p_xo, labels_o = joint.probs.sum(axis=1), joint.labels_z
    else:
        raise ValueError("side must be 'bob' or 'willie', got {!r}".format(
            side))

    q, k = p_xo.shape
    rows = np.zeros((q, q * k))
    for u, f in product(range(q), repeat=2):
        rows[u, f * k:(f + 1) * k] = p_xo[(f - u) % q]

    return Channel(joint.labels_x, product(joint.labels_x, labels_o), rows)


class CodebookSpec(namedtuple("CodebookSpec",
                              "n rate rate1 alphabet_size seed")):
    """Codebook parameters.

    :ivar n:
        Blocklength.

    :ivar rate:
        Key rate R in bits per symbol.

    :ivar rate1:
        Confusion rate :math:`R_1` in bits per symbol.

    :ivar alphabet_size:
        Largest alphabet of the source; it sizes the exact-mode guard.

    :ivar seed:
        Seed of the codeword draw.
    """

    __slots__ = ()

    def __new__(cls, n, rate, rate1, alphabet_size, seed=0):
        if n < 1:
            raise CodebookError("n must be at least 1, got {}".format(n))

        if rate < 0 or rate1 < 0:
            raise CodebookError("Rates must be nonnegative")

        if alphabet_size < 1:
            raise CodebookError("Alphabet size must be positive")

        return super().__new__(cls, n, rate, rate1, alphabet_size, seed)

    @property
    def size(self):
        """Number of bins L."""
        return 2 ** _ceil_bits(self.n, self.rate)

    @property
    def size1(self):
        """Codewords per bin :math:`L_1`."""
        return 2 ** _ceil_bits(self.n, self.rate1)

    def exact_cost(self):
        return self.size * self.size1 * self.alphabet_size ** (3 * self.n)

    def fits_exact(self, guard=EXACT_GUARD):
        return self.exact_cost() <= guard

    def to_dict(self):
        return {"n": self.n, "R": self.rate, "R1": self.rate1,
                "alphabetSize": self.alphabet_size, "seed": self.seed,
                "L": self.size, "L1": self.size1}

    @classmethod
    def from_dict(cls, data):
        return cls(data["n"], data["R"], data["R1"], data["alphabetSize"],
                   data["seed"])


class Codebook:
    """An immutable wiretap codebook.

    :ivar spec:
        The :py:class:`CodebookSpec`.

    :ivar p_u:
        The codeword symbol law; its labels are the codeword alphabet.

    :ivar words:
        Read-only integer array of shape ``(L, L1, n)`` holding label
        positions. Codeword ``(m, w)`` has flat index ``m * L1 + w``.
    """

    __slots__ = ["spec", "p_u", "words"]

    def __init__(self, spec, p_u, words):
        words = np.array(words, dtype=np.int64)
        shape = (spec.size, spec.size1, spec.n)
        if words.shape != shape:
            raise CodebookError("Codebook words must have shape {}, got "
                                "{}".format(shape, words.shape))

        if np.any(words < 0) or np.any(words >= len(p_u)):
            raise CodebookError("Codeword symbol outside the alphabet")

        words.setflags(write=False)
        self.spec = spec
        self.p_u = p_u
        self.words = words

    @property
    def labels(self):
        return self.p_u.labels

    @property
    def count(self):
        return self.spec.size * self.spec.size1

    def flat(self):
        """Codewords as a ``(L * L1, n)`` array."""
        return self.words.reshape(self.count, self.spec.n)

    def word(self, m, w):
        """Codeword ``(m, w)`` as a tuple of labels."""
        return tuple(self.labels[i] for i in self.words[m, w])

    def word_dist(self):
        """Law of the transmitted codeword when ``(m, w)`` is uniform, as a
        :py:class:`~stealthkey.probcore.FiniteDist` over label tuples."""
        q, n = len(self.labels), self.spec.n
        if q ** n > ENUMERATION_GUARD:
            raise GuardExceededError("Too many sequences to tabulate")

        index = np.ravel_multi_index(self.flat().T, (q,) * n)
        counts = np.bincount(index, minlength=q ** n)
        return FiniteDist.normalized(product(self.labels, repeat=n), counts)

    def __repr__(self):
        return "Codebook(L={}, L1={}, n={})".format(
            self.spec.size, self.spec.size1, self.spec.n)


def generate_codebook(spec, p_u, exact=False):
    """Draw every codeword symbol i.i.d. from ``p_u``.

    :param exact:
        Refuse specs beyond :py:data:`EXACT_GUARD`.

    :raises GuardExceededError:
        If ``exact`` and the codebook is too large.
    """
    if exact and not spec.fits_exact():
        raise GuardExceededError("Codebook exceeds the exact-mode guard "
                                 "({} > {})".format(spec.exact_cost(),
                                                    EXACT_GUARD))

    rng = np.random.default_rng(spec.seed)
    words = rng.choice(len(p_u), size=(spec.size, spec.size1, spec.n),
                       p=p_u.probs)
    return Codebook(spec, p_u, words)


def codeword_likelihoods(channel, words, workers=None):
    """:math:`W^n(o^n | u^n)` for every codeword and every output sequence.

    Output sequences are split into blocks by their leading symbol; blocks
    are computed on up to ``workers`` threads and concatenated in order, so
    the result does not depend on the worker count.

    :param words:
        Integer array ``(codewords, n)`` of input positions.

    :returns:
        Array of shape ``(codewords, |out|^n)``.
    """
    words = np.asarray(words)
    rows = channel.rows
    count, n = words.shape
    tail = np.ones((count, 1))
    for i in range(1, n):
        tail = (tail[:, :, None] * rows[words[:, i]][:, None, :]).reshape(
            count, -1)

    lead = rows[words[:, 0]]

    def block(symbol):
        return lead[:, symbol, None] * tail

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(block, range(rows.shape[1])))
    else:
        blocks = [block(symbol) for symbol in range(rows.shape[1])]

    return np.concatenate(blocks, axis=1)


class ProtocolReport(namedtuple("ProtocolReport",
                                "spec mode pe uniformity_gap eff_secrecy "
                                "non_confusion non_stealth combined_metric "
                                "discussion_divergence trials stderr "
                                "plug_in degenerate")):
    """Measured constraints of one simulated configuration. Divergences are
    in bits for the whole block.

    :ivar mode:
        ``"exact"`` or ``"monte-carlo"``.

    :ivar pe:
        Probability that Bob's key differs from Alice's.

    :ivar uniformity_gap:
        :math:`\\log_2 L - H(K)`.

    :ivar eff_secrecy:
        :math:`D(P_{KZ^nF} || P_K Q_{Z^nF})`.

    :ivar non_confusion:
        :math:`I(K; Z^n F)`.

    :ivar non_stealth:
        :math:`D(P_{Z^nF} || Q_{Z^nF})`.

    :ivar combined_metric:
        :math:`D(P_{KZ^nF} || U_K Q_{Z^nF})` with :math:`U_K` uniform.

    :ivar discussion_divergence:
        :math:`D(P_{F^n} || Q_{F^n})`.

    :ivar stderr:
        Standard errors keyed like the JSON fields, or ``None`` when exact
        or degenerate.
    """

    __slots__ = ()

    def to_dict(self):
        return {"spec": self.spec.to_dict(),
                "mode": self.mode,
                "pe": self.pe,
                "uniformityGap": self.uniformity_gap,
                "effSecrecy": self.eff_secrecy,
                "nonConfusion": self.non_confusion,
                "nonStealth": self.non_stealth,
                "combinedMetric": self.combined_metric,
                "discussionDivergence": self.discussion_divergence,
                "trials": self.trials,
                "stderr": self.stderr,
                "pluginEstimates": self.plug_in,
                "degenerate": self.degenerate}

    @classmethod
    def from_dict(cls, data):
        return cls(CodebookSpec.from_dict(data["spec"]), data["mode"],
                   data["pe"], data["uniformityGap"], data["effSecrecy"],
                   data["nonConfusion"], data["nonStealth"],
                   data["combinedMetric"], data["discussionDivergence"],
                   data["trials"], data["stderr"], data["pluginEstimates"],
                   data["degenerate"])


def _floor(value):
    # Divergences of exactly enumerated laws; rounding may dip below zero.
    return max(value, 0.0)


def _check_codebook(joint, codebook):
    if codebook.labels != joint.labels_x:
        raise AlphabetMismatchError("Codebook alphabet must be the alphabet "
                                    "of X")


def _error_probability(s_bob, size1):
    count = s_bob.shape[0]
    best = s_bob.max(axis=0)
    winner = np.argmax(s_bob >= best * (1.0 - TIE_TOL), axis=0)
    sent = np.arange(count) // size1
    correct = sent[:, None] == (winner // size1)[None, :]
    return min(max(1.0 - float((s_bob * correct).sum()) / count, 0.0), 1.0)


def run_protocol_exact(joint, codebook, workers=None):
    """Evaluate a codebook on a source by full enumeration.

    Bob decodes by maximum likelihood; ties go to the smallest flat index
    ``m * L1 + w``.

    :param workers:
        Threads used for likelihood enumeration.

    :raises GuardExceededError:
        If :math:`L L_1 |\\mathcal{A}|^{3n}` exceeds :py:data:`EXACT_GUARD`.
    """
    _check_codebook(joint, codebook)
    spec = codebook.spec
    n, size, size1 = spec.n, spec.size, spec.size1
    cost = size * size1 * max(joint.shape()) ** (3 * n)
    if cost > EXACT_GUARD:
        raise GuardExceededError("Exact run needs {} > {} evaluations".format(
            cost, EXACT_GUARD))

    q, _, kz = joint.shape()
    words = codebook.flat()
    pe = _error_probability(
        codeword_likelihoods(cwtc_channel(joint, "bob"), words, workers),
        size1)

    willie = cwtc_channel(joint, "willie")
    likelihoods = codeword_likelihoods(willie, words, workers)
    target = _sequence_probs(codebook.p_u.probs @ willie.rows, n)
    p_ko = likelihoods.reshape(size, size1, -1).mean(axis=1)
    p_ko /= p_ko.sum()

    p_k = p_ko.sum(axis=1)
    p_k /= p_k.sum()
    p_o = p_ko.sum(axis=0)
    eff = _floor(array_kl(p_ko, np.outer(p_k, target)))
    gap = _floor(math.log2(size) - array_entropy(p_k))
    p_f = _split(p_o, n, q, kz).sum(axis=1)
    q_f = _split(target, n, q, kz).sum(axis=1)
    log.debug("Exact run n=%d L=%d L1=%d: pe=%g eff=%g", n, size, size1, pe,
              eff)
    return ProtocolReport(
        spec, "exact", pe, gap, eff,
        _floor(array_kl(p_ko, np.outer(p_k, p_o))),
        _floor(array_kl(p_o, target)),
        _floor(array_kl(p_ko, np.outer(np.full(size, 1.0 / size), target))),
        _floor(array_kl(p_f, q_f)), None, None, False, False)


def _log(values):
    with np.errstate(divide="ignore"):
        return np.log(values)


def _mean_and_error(samples):
    samples = np.concatenate(samples)
    mean = float(np.mean(samples))
    if len(samples) < 2 or not np.isfinite(mean):
        return mean, None

    return mean, float(np.std(samples, ddof=1) / math.sqrt(len(samples)))


def run_protocol_mc(joint, codebook, trials, seed):
    """Estimate a codebook's report by sampling ``trials`` key generations.

    Each trial draws ``(m, w)`` uniformly and ``n`` source symbols, then
    decodes as :py:func:`run_protocol_exact` does. Divergences are averaged
    log-likelihood ratios over the sampled ``(k, z^n, f^n)``, reported with
    their standard errors and flagged as plug-in estimates.
    """
    if trials < 1:
        raise ProtocolError("trials must be at least 1, got {}".format(
            trials))

    _check_codebook(joint, codebook)
    spec = codebook.spec
    n, size, size1 = spec.n, spec.size, spec.size1
    q, ky, kz = joint.shape()
    count = codebook.count
    flat = codebook.flat()

    willie = cwtc_channel(joint, "willie")
    log_bob = _log(cwtc_channel(joint, "bob").rows)
    log_willie = _log(willie.rows)
    f_given_u = willie.rows.reshape(q, q, kz).sum(axis=2)
    log_f_given_u = _log(f_given_u)
    log_q1 = _log(codebook.p_u.probs @ willie.rows)
    log_q_f1 = _log(codebook.p_u.probs @ f_given_u)
    cells = joint.probs.ravel()
    log_tie = math.log1p(-TIE_TOL)

    batch = max(1, MC_BATCH_ELEMENTS // (count * n))
    starts = range(0, trials, batch)
    children = np.random.SeedSequence(seed).spawn(len(starts))
    errors = []
    eff, conf, stealth, disc = [], [], [], []
    for start, child in zip(starts, children):
        rng = np.random.default_rng(child)
        size_b = min(batch, trials - start)
        sent = rng.integers(count, size=size_b)
        m = sent // size1
        x, y, z = np.unravel_index(rng.choice(cells.size, size=(size_b, n),
                                              p=cells), joint.shape())
        f = (flat[sent] + x) % q

        ll_bob = log_bob[flat[None, :, :], (f * ky + y)[:, None, :]].sum(
            axis=2)
        best = ll_bob.max(axis=1, keepdims=True)
        winner = np.argmax(ll_bob >= best + log_tie, axis=1)
        errors.append((winner // size1 != m).astype(float))

        o_w = f * kz + z
        ll_w = log_willie[flat[None, :, :], o_w[:, None, :]].sum(axis=2)
        in_bin = ll_w.reshape(size_b, size, size1)[np.arange(size_b), m]
        log_p_given_m = logsumexp(in_bin, axis=1) - math.log(size1)
        log_p = logsumexp(ll_w, axis=1) - math.log(count)
        log_q = log_q1[o_w].sum(axis=1)
        log_pf = logsumexp(
            log_f_given_u[flat[None, :, :], f[:, None, :]].sum(axis=2),
            axis=1) - math.log(count)
        log_qf = log_q_f1[f].sum(axis=1)

        with np.errstate(invalid="ignore"):
            eff.append((log_p_given_m - log_q) / math.log(2))
            conf.append((log_p_given_m - log_p) / math.log(2))
            stealth.append((log_p - log_q) / math.log(2))
            disc.append((log_pf - log_qf) / math.log(2))

    pe, _ = _mean_and_error(errors)
    degenerate = trials < 2
    if degenerate:
        log.warning("Monte Carlo run with %d trial(s) has no error estimate",
                    trials)

    estimates = {"effSecrecy": _mean_and_error(eff),
                 "nonConfusion": _mean_and_error(conf),
                 "nonStealth": _mean_and_error(stealth),
                 "discussionDivergence": _mean_and_error(disc)}
    stderr = None
    if not degenerate:
        stderr = {key: value[1] for key, value in estimates.items()}
        stderr["pe"] = math.sqrt(pe * (1.0 - pe) / trials)
        stderr["combinedMetric"] = stderr["effSecrecy"]

    # K is the uniform bin index, so the uniformity gap is exactly zero.
    gap = 0.0
    return ProtocolReport(spec, "monte-carlo", pe, gap,
                          estimates["effSecrecy"][0],
                          estimates["nonConfusion"][0],
                          estimates["nonStealth"][0],
                          estimates["effSecrecy"][0] + gap,
                          estimates["discussionDivergence"][0], trials,
                          stderr, True, degenerate)


def _sequence_dist(channel_labels, n, probs):
    return FiniteDist(product(channel_labels, repeat=n), probs)


def induced_output_dist(codebook, channel):
    """The output law :math:`P_{Z^nF}` when a uniformly chosen codeword is
    sent through ``channel``.

    :returns:
        A :py:class:`~stealthkey.probcore.FiniteDist` over tuples of output
        labels.
    """
    if channel.in_labels != codebook.labels:
        raise AlphabetMismatchError("Channel input must be the codeword "
                                    "alphabet")

    n = codebook.spec.n
    _enumeration_guard(len(channel.out_labels) ** n)
    probs = codeword_likelihoods(channel, codebook.flat()).mean(axis=0)
    return _sequence_dist(channel.out_labels, n, probs)


def target_output_dist(p_u, channel, n):
    """The output law :math:`Q_{Z^nF}` when every symbol of U is i.i.d.
    ``p_u``."""
    _enumeration_guard(len(channel.out_labels) ** n)
    return _sequence_dist(channel.out_labels, n,
                          _sequence_probs(channel.apply(p_u).probs, n))


def _enumeration_guard(size):
    if size > ENUMERATION_GUARD:
        raise GuardExceededError("Enumeration of {} outcomes exceeds the "
                                 "guard {}".format(size, ENUMERATION_GUARD))


def discussion_split(dist):
    """Regroup a law over sequences of ``(f, o)`` pairs into a
    :py:class:`~stealthkey.probcore.JointDist2` over ``(f^n, o^n)``."""
    f_index, o_index, cells = {}, {}, []
    for label in dist.labels:
        f_seq = tuple(pair[0] for pair in label)
        o_seq = tuple(pair[1] for pair in label)
        cells.append((f_index.setdefault(f_seq, len(f_index)),
                      o_index.setdefault(o_seq, len(o_index))))

    probs = np.zeros((len(f_index), len(o_index)))
    for (i, j), p in zip(cells, dist.probs):
        probs[i, j] += p

    return JointDist2(f_index, o_index, probs)


Decomposition = namedtuple("Decomposition", "d_f d_z_given_f total")
"""The chain rule split of an output divergence over the discussion."""


def stealth_decomposition_check(induced, target):
    """Split :math:`D(P_{Z^nF} || Q_{Z^nF})` into
    :math:`D(P_F || Q_F)` and :math:`D(P_{Z^n|F} || Q_{Z^n|F} | P_F)`.

    :param induced:
        Law over ``(f, o)`` pair sequences, e.g. from
        :py:func:`induced_output_dist`.

    :param target:
        Law over the same labels, e.g. from :py:func:`target_output_dist`.

    :returns:
        A :py:class:`Decomposition`.
    """
    if induced.labels != target.labels:
        raise AlphabetMismatchError("Induced and target laws differ in "
                                    "alphabet")

    p = discussion_split(induced).probs
    q = discussion_split(target).probs
    p_f, q_f = p.sum(axis=1), q.sum(axis=1)
    conditional = 0.0
    for row in np.flatnonzero(p_f > 0):
        if q_f[row] <= 0:
            conditional = math.inf
            break

        conditional += p_f[row] * array_kl(p[row] / p_f[row],
                                           q[row] / q_f[row])

    return Decomposition(_floor(array_kl(p_f, q_f)), _floor(conditional),
                         _floor(array_kl(p.ravel(), q.ravel())))


def ratio_identity_gap(p_u, joint, n):
    """Largest disagreement between
    :math:`P_{Z^nF|U^n} / Q_{Z^nF}` and :math:`P_{F|Z^nU^n} / Q_F` over
    points of positive probability. The common factor :math:`1/L_1` is
    dropped."""
    q, _, kz = joint.shape()
    willie = cwtc_channel(joint, "willie")
    if p_u.labels != willie.in_labels:
        raise AlphabetMismatchError("U must share the alphabet of X")

    w = willie.rows.reshape(q, q, kz)
    q1 = (p_u.probs @ willie.rows).reshape(q, kz)
    q_f = q1.sum(axis=1)
    z_given_u = w.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = w / q1[None, :, :]
        rhs = (w / z_given_u) / q_f[None, :, None]

    mass = p_u.probs[:, None, None] * w
    _enumeration_guard(mass.size ** n)
    mass = _sequence_probs(mass.ravel(), n)
    lhs = _sequence_probs(np.nan_to_num(lhs.ravel()), n)
    rhs = _sequence_probs(np.nan_to_num(rhs.ravel()), n)
    positive = mass > 0
    if not positive.any():
        return 0.0

    return float(np.max(np.abs(lhs[positive] - rhs[positive])))


def discussion_joint(joint, word_dist):
    """Exact law of :math:`(F^n, X^n)` when the codeword follows
    ``word_dist``.

    :param word_dist:
        A :py:class:`~stealthkey.probcore.FiniteDist` over n-tuples of X
        labels, such as :py:meth:`Codebook.word_dist` or
        ``iid_extend(p_u, n)``.
    """
    labels = joint.labels_x
    q = len(labels)
    n = len(word_dist.labels[0])
    _enumeration_guard(q ** (2 * n))
    position = {label: i for i, label in enumerate(labels)}
    shape = (q,) * n
    words = np.zeros(q ** n)
    try:
        for word, p in zip(word_dist.labels, word_dist.probs):
            words[np.ravel_multi_index([position[s] for s in word],
                                       shape)] += p
    except (KeyError, TypeError, ValueError):
        raise DistributionError("Codeword law must be over n-tuples of X "
                                "labels") from None

    digits = np.array(np.unravel_index(np.arange(q ** n), shape))
    u_digits = (digits[:, :, None] - digits[:, None, :]) % q
    u_index = np.ravel_multi_index(tuple(u_digits), shape)
    p_xn = _sequence_probs(joint.probs.sum(axis=(1, 2)), n)
    probs = words[u_index] * p_xn[None, :]
    sequences = list(product(labels, repeat=n))
    return JointDist2(sequences, sequences, probs)


def crypto_lemma_gap(discussion):
    """How far a :py:func:`discussion_joint` is from the crypto lemma.

    :returns:
        ``(uniformity, independence)``: the largest deviation of
        :math:`P_{F^n}` from uniform, and of :math:`P_{F^nX^n}` from
        :math:`P_{F^n} P_{X^n}`.
    """
    p = discussion.probs
    p_f, p_x = p.sum(axis=1), p.sum(axis=0)
    return (float(np.max(np.abs(p_f - 1.0 / len(p_f)))),
            float(np.max(np.abs(p - np.outer(p_f, p_x)))))


Estimate = namedtuple("Estimate", "value stderr mode trials")
"""A value in bits, its standard error (``None`` when exact), how it was
obtained, and the number of samples."""


def _joint_letters(p_u, channel):
    if p_u.labels != channel.in_labels:
        raise AlphabetMismatchError("Input law and channel differ in "
                                    "alphabet")

    p1 = p_u.probs[:, None] * channel.rows
    q1 = p_u.probs @ channel.rows
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log2(channel.rows) - np.log2(q1)[None, :]

    return p1.ravel(), np.where(p1 > 0, ratio, -np.inf).ravel()


def _resolvability_terms(log_ratios, size1):
    return np.logaddexp2(log_ratios - math.log2(size1), 0.0)


def resolvability_rhs_estimate(p_u, channel, size1, n, trials=None, seed=0):
    """The random-coding resolvability bound
    :math:`E[\\log_2(P_{Z^nF|U^n} / (L_1 Q_{Z^nF}) + 1)]` with
    :math:`U^n \\sim P_U^n`.

    :param size1:
        :math:`L_1`, the number of codewords per bin.

    :param trials:
        ``None`` to enumerate exactly, otherwise the Monte Carlo sample
        count.

    :returns:
        An :py:class:`Estimate`.
    """
    p1, log_ratio = _joint_letters(p_u, channel)
    if trials is None:
        _enumeration_guard(len(p1) ** n)
        terms = (_sequence_probs(p1, n) *
                 _resolvability_terms(_sequence_sums(log_ratio, n), size1))
        return Estimate(float(terms.sum()), None, "exact", None)

    if trials < 1:
        raise ProtocolError("trials must be at least 1")

    batch = max(1, MC_BATCH_ELEMENTS // n)
    starts = range(0, trials, batch)
    samples = []
    for start, child in zip(starts,
                            np.random.SeedSequence(seed).spawn(len(starts))):
        rng = np.random.default_rng(child)
        letters = rng.choice(len(p1), size=(min(batch, trials - start), n),
                             p=p1)
        samples.append(_resolvability_terms(log_ratio[letters].sum(axis=1),
                                            size1))

    value, stderr = _mean_and_error(samples)
    return Estimate(value, stderr, "monte-carlo", trials)


class TypicalityParams(namedtuple("TypicalityParams", "delta eps")):
    """Robust typicality parameters.

    :ivar delta:
        Relative deviation :math:`\\delta > 0`.

    :ivar eps:
        The typicality :math:`\\epsilon`; defaults to ``delta``.
    """

    __slots__ = ()

    def __new__(cls, delta=DEFAULT_DELTA, eps=None):
        if not delta > 0:
            raise ProtocolError("delta must be positive, got {}".format(
                delta))

        return super().__new__(cls, delta, delta if eps is None else eps)

    def eps_prime(self, h_u):
        """:math:`\\epsilon' = \\epsilon (1 + H(U))`."""
        return self.eps * (1.0 + h_u)


def robust_typical(seq, dist, delta):
    """Whether :math:`|N(a|s)/n - P(a)| \\le \\delta P(a)` for every symbol.

    A symbol of probability zero makes any sequence containing it atypical.
    """
    counts = np.zeros(len(dist))
    for symbol in seq:
        counts[dist.index(symbol)] += 1

    freq = counts / max(len(seq), 1)
    return bool(np.all(np.abs(freq - dist.probs) <=
                       delta * dist.probs + TYPICALITY_SLACK))


def _letter_counts(letters, n):
    counts = np.zeros((1, letters), dtype=np.int32)
    eye = np.eye(letters, dtype=np.int32)
    for _ in range(n):
        counts = (counts[:, None, :] + eye[None, :, :]).reshape(-1, letters)

    return counts


def d1_d2_split(p_u, channel, size1, n, params):
    """Split the exact resolvability bound into its jointly typical part
    :math:`d_1` and the rest :math:`d_2`.

    Typicality is judged on the joint letters :math:`(u, o)` against
    :math:`P_U W`.

    :param params:
        :py:class:`TypicalityParams`.

    :raises GuardExceededError:
        If more than :py:data:`TYPICALITY_GUARD` sequences would be
        enumerated.
    """
    p1, log_ratio = _joint_letters(p_u, channel)
    if len(p1) ** n > TYPICALITY_GUARD:
        raise GuardExceededError("Typicality split over {}^{} sequences "
                                 "exceeds the guard".format(len(p1), n))

    terms = (_sequence_probs(p1, n) *
             _resolvability_terms(_sequence_sums(log_ratio, n), size1))
    freq = _letter_counts(len(p1), n) / n
    typical = np.all(np.abs(freq - p1) <= params.delta * p1 +
                     TYPICALITY_SLACK, axis=1)
    return float(terms[typical].sum()), float(terms[~typical].sum())


def chernoff_single_bound(dist, label, delta, n):
    """:math:`e^{-\\delta^2 P(a) n / 3}`, bounding the chance that symbol
    ``label`` deviates from its mean count by a factor ``delta``."""
    p = dist.prob(label)
    if p <= 0:
        raise ProtocolError("Symbol {!r} has zero probability".format(label))

    return math.exp(-delta * delta * p * n / 3.0)


def nontypical_prob_bound(support_size, mu, delta, n):
    """:math:`2 |S| e^{-\\delta^2 \\mu n / 3}`; not capped at one."""
    return 2.0 * support_size * math.exp(-delta * delta * mu * n / 3.0)


def analytic_d1_bound(rate1, i_fuz, eps_prime, n):
    """:math:`\\log_2(2^{-n(R_1 - I - \\epsilon')} + 1)`."""
    return float(np.logaddexp2(-n * (rate1 - i_fuz - eps_prime), 0.0))


def analytic_d2_bound(support_size, mu_zuf, mu_f, delta, n):
    """:math:`2 |S_{ZUF}| e^{-\\delta^2 \\mu_{ZUF} n / 3}
    \\log_2(1 / \\mu_f + 1)`."""
    return (nontypical_prob_bound(support_size, mu_zuf, delta, n) *
            math.log2(1.0 / mu_f + 1.0))


D2Inputs = namedtuple("D2Inputs", "support_size mu_zuf mu_f")


def d2_bound_inputs(p_u, channel, n, q=None):
    """Gather the arguments of :py:func:`analytic_d2_bound`.

    :param q:
        Size of the discussion alphabet when ``channel`` is a
        :py:func:`cwtc_channel`; :math:`\\mu_f` then comes from the
        discussion marginal. Otherwise the whole output is used.
    """
    p1, _ = _joint_letters(p_u, channel)
    q1 = p_u.probs @ channel.rows
    if q is not None:
        q1 = q1.reshape(q, -1).sum(axis=1)

    return D2Inputs(int(np.count_nonzero(p1)), float(p1[p1 > 0].min()),
                    float(q1[q1 > 0].min()) ** n)


SWEEP_FIELDS = ("n", "R", "R1", "codebook", "mode", "pe", "effSecrecy",
                "effSecrecyPerSymbol", "d1", "d2", "lower", "upper")


class SweepRow(namedtuple("SweepRow",
                          "n rate rate1 codebook mode pe eff_secrecy "
                          "eff_secrecy_per_symbol d1 d2 lower upper")):
    """One codebook's outcome in a :py:class:`Sweep`."""

    __slots__ = ()

    def to_dict(self):
        return dict(zip(SWEEP_FIELDS, self))


class Sweep:
    """Run many random codebooks over blocklengths and confusion rates.

    Each configuration runs exactly while it fits :py:data:`EXACT_GUARD`; in
    ``"auto"`` mode larger ones switch to Monte Carlo, announcing it through
    :py:attr:`mode_switched`. Every finished codebook is announced through
    :py:attr:`progress` as ``(sweep, done, total, row)``.

    :ivar progress:
        :py:class:`~stealthkey.events.Signal` called per codebook.

    :ivar mode_switched:
        :py:class:`~stealthkey.events.Signal` called as
        ``(sweep, spec, mode)`` when auto mode leaves exact enumeration.
    """

    # pylint: disable=too-many-arguments,too-many-instance-attributes
    def __init__(self, joint, ns, rate, rate1s, codebooks=1, mode="auto",
                 trials=10000, delta=DEFAULT_DELTA, seed=0, workers=None):
        if mode not in ("auto", "exact", "mc"):
            raise ProtocolError("mode must be auto, exact or mc")

        if codebooks < 1:
            raise ProtocolError("Need at least one codebook")

        self.joint = joint
        self.ns = list(ns)
        self.rate = rate
        self.rate1s = list(rate1s)
        self.codebooks = codebooks
        self.mode = mode
        self.trials = trials
        self.params = TypicalityParams(delta)
        self.seed = seed
        self.workers = workers

        self.progress = Signal("progress")
        self.mode_switched = Signal("mode_switched")

    @classmethod
    def around_threshold(cls, joint, ns, rate, offsets, **kwargs):
        """A sweep whose confusion rates sit at ``offsets`` from the
        confusion threshold, clamped at zero."""
        threshold = confusion_rate_threshold(joint)
        return cls(joint, ns, rate,
                   [max(threshold + offset, 0.0) for offset in offsets],
                   **kwargs)

    def _mode_for(self, spec):
        if spec.fits_exact():
            return "mc" if self.mode == "mc" else "exact"

        if self.mode == "exact":
            raise GuardExceededError("n={} R1={} exceeds the exact-mode "
                                     "guard".format(spec.n, spec.rate1))

        if self.mode == "auto":
            log.warning("n=%d R1=%g exceeds the exact-mode guard; switching "
                        "to Monte Carlo", spec.n, spec.rate1)
            self.mode_switched.call(self, spec, "mc")

        return "mc"

    def _typicality_split(self, p_u, channel, size1, n):
        try:
            return d1_d2_split(p_u, channel, size1, n, self.params)
        except GuardExceededError:
            log.debug("Skipping the typicality split at n=%d", n)
            return None, None

    def run(self):
        """Run every configuration.

        :returns:
            A list of :py:class:`SweepRow`.
        """
        joint = self.joint
        p_u = FiniteDist.uniform(joint.labels_x)
        willie = cwtc_channel(joint, "willie")
        bounds = sk_bounds(joint)
        alphabet = max(joint.shape())
        total = len(self.ns) * len(self.rate1s) * self.codebooks
        rows = []
        for n in self.ns:
            for j, rate1 in enumerate(self.rate1s):
                base = CodebookSpec(n, self.rate, rate1, alphabet)
                mode = self._mode_for(base)
                d1, d2 = self._typicality_split(p_u, willie, base.size1, n)
                for k in range(self.codebooks):
                    seed = int(np.random.SeedSequence(
                        [self.seed, n, j, k]).generate_state(1)[0])
                    codebook = generate_codebook(base._replace(seed=seed),
                                                 p_u)
                    if mode == "exact":
                        report = run_protocol_exact(joint, codebook,
                                                    self.workers)
                    else:
                        report = run_protocol_mc(joint, codebook,
                                                 self.trials, seed)

                    row = SweepRow(n, self.rate, rate1, k, report.mode,
                                   report.pe, report.eff_secrecy,
                                   report.eff_secrecy / n, d1, d2,
                                   bounds.lower, bounds.upper)
                    rows.append(row)
                    self.progress.call(self, len(rows), total, row)

        return rows
