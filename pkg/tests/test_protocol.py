import json
import math
import unittest

import numpy as np

from stealthkey import probcore, protocol, sources
from stealthkey.bounds import confusion_rate_threshold
from stealthkey.probcore import Channel, FiniteDist
from stealthkey.protocol import (Codebook, CodebookSpec, ProtocolReport,
                                 TypicalityParams)


UNIFORM = FiniteDist.uniform([0, 1])


def complete_codebook(n=2):
    spec = CodebookSpec(n, 0.5, 0.5, 2)
    words = [[[0, 0], [0, 1]], [[1, 0], [1, 1]]]
    return Codebook(spec, UNIFORM, words)


class TestCodebook(unittest.TestCase):

    def test_sizes(self):
        spec = CodebookSpec(8, 0.125, 0.42, 2)
        self.assertEqual(spec.size, 2)
        self.assertEqual(spec.size1, 16)
        self.assertEqual(spec.exact_cost(), 2 ** 29)
        self.assertTrue(spec.fits_exact())
        self.assertEqual(CodebookSpec(10, 0.1, 0.0, 2).size, 2)
        self.assertEqual(CodebookSpec(3, 1 / 3, 0.0, 2).size, 2)

    def test_trivial(self):
        codebook = protocol.generate_codebook(CodebookSpec(3, 0.0, 0.0, 2),
                                              UNIFORM)
        self.assertEqual(codebook.count, 1)
        self.assertEqual(codebook.words.shape, (1, 1, 3))

    def test_reproducible(self):
        spec = CodebookSpec(4, 0.5, 0.5, 2, seed=9)
        first = protocol.generate_codebook(spec, UNIFORM)
        second = protocol.generate_codebook(spec, UNIFORM)
        np.testing.assert_array_equal(first.words, second.words)
        self.assertEqual(len(first.word(1, 2)), 4)

    def test_symbol_law(self):
        p_u = FiniteDist([0, 1, 2], [0.0, 0.25, 0.75])
        codebook = protocol.generate_codebook(
            CodebookSpec(4, 2.0, 2.0, 3, seed=1), p_u)
        self.assertFalse(np.any(codebook.words == 0))
        self.assertAlmostEqual(float(np.mean(codebook.words == 2)), 0.75,
                               delta=0.03)

    def test_guard(self):
        spec = CodebookSpec(11, 0.0, 0.0, 2)
        self.assertFalse(spec.fits_exact())
        with self.assertRaises(protocol.GuardExceededError):
            protocol.generate_codebook(spec, UNIFORM, exact=True)

        protocol.generate_codebook(spec, UNIFORM)

    def test_invalid(self):
        with self.assertRaises(protocol.CodebookError):
            CodebookSpec(0, 0.5, 0.5, 2)

        with self.assertRaises(protocol.CodebookError):
            CodebookSpec(2, -0.5, 0.5, 2)

        with self.assertRaises(protocol.CodebookError):
            Codebook(CodebookSpec(2, 0.5, 0.5, 2), UNIFORM, [[[0, 0]]])

        with self.assertRaises(protocol.CodebookError):
            Codebook(CodebookSpec(1, 0.0, 0.0, 2), UNIFORM, [[[2]]])

    def test_word_dist(self):
        dist = complete_codebook().word_dist()
        np.testing.assert_allclose(dist.probs, 0.25)
        self.assertEqual(dist.labels[1], (0, 1))

    def test_read_only(self):
        with self.assertRaises(ValueError):
            complete_codebook().words[0, 0, 0] = 1


class TestCwtcChannel(unittest.TestCase):

    def test_rows(self):
        joint = sources.bsc_cascade(0.1, 0.2)
        bob = protocol.cwtc_channel(joint, "bob")
        self.assertEqual(bob.rows.shape, (2, 4))
        self.assertEqual(bob.out_labels[1], (0, 1))
        p_xy = joint.probs.sum(axis=2)
        # W(f, y | u) = P_XY(f - u, y)
        self.assertAlmostEqual(bob.rows[1, 0], p_xy[1, 0], places=15)
        self.assertAlmostEqual(bob.rows[1, 3], p_xy[0, 1], places=15)

    def test_side(self):
        with self.assertRaises(ValueError):
            protocol.cwtc_channel(sources.bsc_cascade(0.1, 0.2), "eve")

    def test_likelihood_workers(self):
        joint = sources.bsc_cascade(0.1, 0.2)
        willie = protocol.cwtc_channel(joint, "willie")
        words = protocol.generate_codebook(CodebookSpec(4, 0.5, 0.5, 2, 3),
                                           UNIFORM).flat()
        serial = protocol.codeword_likelihoods(willie, words)
        threaded = protocol.codeword_likelihoods(willie, words, workers=3)
        np.testing.assert_array_equal(serial, threaded)
        np.testing.assert_allclose(serial.sum(axis=1), 1.0, atol=1e-12)


class TestExactRun(unittest.TestCase):

    def setUp(self):
        self.joint = sources.bsc_cascade(0.1, 0.2)

    def test_single_codeword(self):
        codebook = protocol.generate_codebook(CodebookSpec(2, 0.0, 0.0, 2),
                                              UNIFORM)
        report = protocol.run_protocol_exact(self.joint, codebook)
        self.assertAlmostEqual(report.pe, 0.0, places=12)
        self.assertEqual(report.uniformity_gap, 0.0)
        threshold = confusion_rate_threshold(self.joint)
        self.assertAlmostEqual(report.eff_secrecy, 2 * threshold, places=12)
        self.assertAlmostEqual(report.non_confusion, 0.0, places=12)

    def test_single_codeword_lengths(self):
        for n in (1, 2, 3, 4):
            for p, q in ((0.1, 0.2), (0.3, 0.05), (0.0, 0.5), (0.45, 0.45)):
                joint = sources.bsc_cascade(p, q)
                for seed in range(5):
                    codebook = protocol.generate_codebook(
                        CodebookSpec(n, 0.0, 0.0, 2, seed=seed), UNIFORM)
                    report = protocol.run_protocol_exact(joint, codebook)
                    self.assertEqual(report.uniformity_gap, 0.0)
                    for value in (report.eff_secrecy, report.non_confusion,
                                  report.non_stealth, report.combined_metric,
                                  report.discussion_divergence):
                        self.assertGreaterEqual(value, 0.0)

                    self.assertAlmostEqual(report.non_confusion, 0.0,
                                           delta=1e-12)

    def test_noiseless_bob(self):
        joint = sources.bsc_cascade(0.0, 0.2)
        report = protocol.run_protocol_exact(joint, complete_codebook())
        self.assertAlmostEqual(report.pe, 0.0, places=12)

    def test_independent_bob(self):
        spec = CodebookSpec(1, 1.0, 0.0, 2)
        codebook = Codebook(spec, UNIFORM, [[[0]], [[1]]])
        report = protocol.run_protocol_exact(sources.eve_copies_alice(),
                                             codebook)
        # Every codeword ties; the first bin always wins.
        self.assertAlmostEqual(report.pe, 0.5, places=12)

    def test_identities(self):
        for n in (1, 2, 3):
            for k in range(20):
                codebook = protocol.generate_codebook(
                    CodebookSpec(n, 0.5, 0.5, 2, seed=100 * n + k), UNIFORM)
                report = protocol.run_protocol_exact(self.joint, codebook)
                self.assertTrue(0.0 <= report.pe <= 1.0)
                for value in (report.eff_secrecy, report.non_confusion,
                              report.non_stealth, report.combined_metric,
                              report.discussion_divergence):
                    self.assertGreaterEqual(value, 0.0)

                self.assertAlmostEqual(
                    report.non_confusion + report.non_stealth,
                    report.eff_secrecy, delta=1e-12)
                self.assertAlmostEqual(
                    report.eff_secrecy + report.uniformity_gap,
                    report.combined_metric, delta=1e-9)

                willie = protocol.cwtc_channel(self.joint, "willie")
                parts = protocol.stealth_decomposition_check(
                    protocol.induced_output_dist(codebook, willie),
                    protocol.target_output_dist(UNIFORM, willie, n))
                self.assertAlmostEqual(parts.d_f + parts.d_z_given_f,
                                       parts.total, delta=1e-12)
                self.assertAlmostEqual(parts.total, report.non_stealth,
                                       delta=1e-12)
                self.assertAlmostEqual(parts.d_f,
                                       report.discussion_divergence,
                                       delta=1e-12)

    def test_uniform_discussion(self):
        codebook = protocol.generate_codebook(CodebookSpec(2, 0.5, 0.5, 2, 4),
                                              UNIFORM)
        report = protocol.run_protocol_exact(self.joint, codebook)
        # X is uniform here, so F is uniform whatever the codebook.
        self.assertAlmostEqual(report.discussion_divergence, 0.0, places=12)

    def test_guard(self):
        codebook = protocol.generate_codebook(CodebookSpec(11, 0.0, 0.0, 2),
                                              UNIFORM)
        with self.assertRaises(protocol.GuardExceededError):
            protocol.run_protocol_exact(self.joint, codebook)

    def test_alphabet(self):
        codebook = Codebook(CodebookSpec(1, 0.0, 0.0, 2),
                            FiniteDist.uniform("ab"), [[[0]]])
        with self.assertRaises(probcore.AlphabetMismatchError):
            protocol.run_protocol_exact(self.joint, codebook)

    def test_round_trip(self):
        report = protocol.run_protocol_exact(self.joint, complete_codebook())
        data = json.loads(json.dumps(report.to_dict()))
        self.assertEqual(data["mode"], "exact")
        self.assertEqual(data["spec"]["L1"], 2)
        self.assertEqual(ProtocolReport.from_dict(data), report)


class TestMonteCarlo(unittest.TestCase):

    def setUp(self):
        self.joint = sources.bsc_cascade(0.1, 0.2)
        self.codebook = protocol.generate_codebook(
            CodebookSpec(2, 0.5, 0.5, 2, seed=1), UNIFORM)

    def test_matches_exact(self):
        exact = protocol.run_protocol_exact(self.joint, self.codebook)
        mc = protocol.run_protocol_mc(self.joint, self.codebook, 20000, 0)
        self.assertEqual(mc.mode, "monte-carlo")
        self.assertTrue(mc.plug_in)
        self.assertFalse(mc.degenerate)
        for name, key in (("pe", "pe"), ("eff_secrecy", "effSecrecy"),
                          ("non_stealth", "nonStealth"),
                          ("non_confusion", "nonConfusion")):
            error = mc.stderr[key]
            self.assertAlmostEqual(getattr(mc, name), getattr(exact, name),
                                   delta=4 * error + 1e-9)

    def test_reproducible(self):
        first = protocol.run_protocol_mc(self.joint, self.codebook, 500, 7)
        second = protocol.run_protocol_mc(self.joint, self.codebook, 500, 7)
        self.assertEqual(first, second)

    def test_degenerate(self):
        with self.assertLogs("stealthkey.protocol", "WARNING"):
            report = protocol.run_protocol_mc(self.joint, self.codebook, 1, 0)

        self.assertTrue(report.degenerate)
        self.assertIsNone(report.stderr)

    def test_invalid_trials(self):
        with self.assertRaises(protocol.ProtocolError):
            protocol.run_protocol_mc(self.joint, self.codebook, 0, 0)

    def test_round_trip(self):
        report = protocol.run_protocol_mc(self.joint, self.codebook, 100, 2)
        data = json.loads(json.dumps(report.to_dict()))
        self.assertEqual(ProtocolReport.from_dict(data), report)


class TestOutputs(unittest.TestCase):

    def setUp(self):
        self.joint = sources.bsc_cascade(0.1, 0.2)
        self.willie = protocol.cwtc_channel(self.joint, "willie")

    def test_single_codeword(self):
        codebook = Codebook(CodebookSpec(1, 0.0, 0.0, 2), UNIFORM, [[[1]]])
        induced = protocol.induced_output_dist(codebook, self.willie)
        np.testing.assert_allclose(induced.probs, self.willie.rows[1],
                                   atol=1e-15)

    def test_equal_laws(self):
        target = protocol.target_output_dist(UNIFORM, self.willie, 2)
        parts = protocol.stealth_decomposition_check(target, target)
        self.assertEqual(tuple(parts), (0.0, 0.0, 0.0))

    def test_complete_codebook(self):
        induced = protocol.induced_output_dist(complete_codebook(),
                                               self.willie)
        target = protocol.target_output_dist(UNIFORM, self.willie, 2)
        parts = protocol.stealth_decomposition_check(induced, target)
        self.assertAlmostEqual(parts.total, 0.0, places=12)

    def test_mismatch(self):
        target = protocol.target_output_dist(UNIFORM, self.willie, 1)
        other = protocol.target_output_dist(UNIFORM, self.willie, 2)
        with self.assertRaises(probcore.AlphabetMismatchError):
            protocol.stealth_decomposition_check(target, other)

    def test_split(self):
        target = protocol.target_output_dist(UNIFORM, self.willie, 2)
        split = protocol.discussion_split(target)
        self.assertEqual(split.probs.shape, (4, 4))
        np.testing.assert_allclose(split.probs.sum(axis=1), 0.25)

    def test_ratio_identity(self):
        for n in (1, 2, 3):
            self.assertLess(protocol.ratio_identity_gap(UNIFORM, self.joint,
                                                        n), 1e-12)


class TestCryptoLemma(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(8)
        self.joints = [sources.bsc_cascade(0.1, 0.2),
                       sources.random_joint3(rng, (2, 2, 3))]

    def test_uniform_codewords(self):
        for joint in self.joints:
            for n in (1, 2, 3):
                disc = protocol.discussion_joint(
                    joint, probcore.iid_extend(UNIFORM, n))
                uniformity, independence = protocol.crypto_lemma_gap(disc)
                self.assertLess(uniformity, 1e-12)
                self.assertLess(independence, 1e-12)

    def test_complete_codebook(self):
        for joint in self.joints:
            disc = protocol.discussion_joint(joint,
                                             complete_codebook().word_dist())
            self.assertLess(max(protocol.crypto_lemma_gap(disc)), 1e-12)

    def test_bad_word_law(self):
        with self.assertRaises(probcore.DistributionError):
            protocol.discussion_joint(self.joints[0],
                                      FiniteDist.uniform([("a",), ("b",)]))


class TestResolvability(unittest.TestCase):

    def setUp(self):
        self.joint = sources.bsc_cascade(0.1, 0.2)
        self.willie = protocol.cwtc_channel(self.joint, "willie")

    def test_deterministic(self):
        estimate = protocol.resolvability_rhs_estimate(
            UNIFORM, Channel.identity([0, 1]), 1, 1)
        self.assertAlmostEqual(estimate.value, math.log2(3), places=12)
        self.assertIsNone(estimate.stderr)
        self.assertEqual(estimate.mode, "exact")

    def test_huge_l1(self):
        estimate = protocol.resolvability_rhs_estimate(
            UNIFORM, self.willie, 2 ** 40, 2)
        self.assertLess(estimate.value, 1e-9)

    def test_monte_carlo(self):
        exact = protocol.resolvability_rhs_estimate(UNIFORM, self.willie, 2,
                                                    2)
        mc = protocol.resolvability_rhs_estimate(UNIFORM, self.willie, 2, 2,
                                                 trials=20000, seed=3)
        self.assertEqual(mc.trials, 20000)
        self.assertAlmostEqual(mc.value, exact.value,
                               delta=4 * mc.stderr + 1e-12)

    def test_partition(self):
        for n in (2, 4):
            total = protocol.resolvability_rhs_estimate(UNIFORM, self.willie,
                                                        2, n).value
            inputs = protocol.d2_bound_inputs(UNIFORM, self.willie, n, q=2)
            for delta in (0.1, 0.2, 0.5):
                d1, d2 = protocol.d1_d2_split(UNIFORM, self.willie, 2, n,
                                              TypicalityParams(delta))
                self.assertAlmostEqual(d1 + d2, total, delta=1e-12)
                bound = protocol.analytic_d2_bound(
                    inputs.support_size, inputs.mu_zuf, inputs.mu_f, delta,
                    n)
                self.assertLessEqual(d2, bound)

    def test_everything_typical(self):
        d1, d2 = protocol.d1_d2_split(UNIFORM, self.willie, 2, 2,
                                      TypicalityParams(1e6))
        total = protocol.resolvability_rhs_estimate(UNIFORM, self.willie, 2,
                                                    2).value
        self.assertEqual(d2, 0.0)
        self.assertAlmostEqual(d1, total, delta=1e-12)

    def test_exact_types(self):
        d1, d2 = protocol.d1_d2_split(UNIFORM, Channel.identity([0, 1]), 1,
                                      2, TypicalityParams(1e-9))
        self.assertAlmostEqual(d1, 0.5 * math.log2(5), places=12)
        self.assertAlmostEqual(d2, 0.5 * math.log2(5), places=12)

    def test_guard(self):
        with self.assertRaises(protocol.GuardExceededError):
            protocol.d1_d2_split(UNIFORM, self.willie, 2, 7,
                                 TypicalityParams())

    def test_inputs(self):
        inputs = protocol.d2_bound_inputs(UNIFORM, self.willie, 3, q=2)
        self.assertEqual(inputs.support_size, 8)
        self.assertAlmostEqual(inputs.mu_zuf, 0.5 * 0.5 * 0.26, places=15)
        self.assertAlmostEqual(inputs.mu_f, 0.125, places=15)


class TestTypicality(unittest.TestCase):

    def test_params(self):
        params = TypicalityParams(0.2)
        self.assertEqual(params.eps, 0.2)
        self.assertAlmostEqual(params.eps_prime(1.0), 0.4, places=15)
        self.assertEqual(TypicalityParams(0.2, 0.05).eps, 0.05)
        with self.assertRaises(protocol.ProtocolError):
            TypicalityParams(0.0)

    def test_robust_typical(self):
        self.assertTrue(protocol.robust_typical([0, 1] * 5, UNIFORM, 0.01))
        self.assertFalse(protocol.robust_typical([1] * 6 + [0] * 4, UNIFORM,
                                                 0.1))
        dist = FiniteDist("abc", [0.5, 0.5, 0.0])
        self.assertFalse(protocol.robust_typical("abac", dist, 10.0))
        self.assertTrue(protocol.robust_typical("abab", dist, 0.01))

    def test_chernoff(self):
        dist = FiniteDist([0, 1], [0.5, 0.5])
        self.assertEqual(protocol.chernoff_single_bound(dist, 0, 0.0, 100),
                         1.0)
        self.assertAlmostEqual(protocol.chernoff_single_bound(dist, 0, 0.1,
                                                              600),
                               math.exp(-1.0), places=15)
        self.assertLess(protocol.chernoff_single_bound(dist, 0, 0.1, 700),
                        protocol.chernoff_single_bound(dist, 0, 0.1, 600))
        with self.assertRaises(protocol.ProtocolError):
            protocol.chernoff_single_bound(FiniteDist([0, 1], [1.0, 0.0]), 1,
                                           0.1, 10)

    def test_nontypical_bound(self):
        self.assertEqual(protocol.nontypical_prob_bound(3, 0.2, 0.1, 0), 6.0)
        self.assertAlmostEqual(protocol.nontypical_prob_bound(2, 0.5, 0.1,
                                                              600),
                               4 * math.exp(-1.0), places=14)

    def test_nontypical_sampled(self):
        rng = np.random.default_rng(12)
        n, delta = 200, 0.3
        ones = rng.binomial(n, 0.5, size=10 ** 4)
        atypical = np.mean(np.abs(ones / n - 0.5) > delta * 0.5)
        self.assertLessEqual(atypical,
                             protocol.nontypical_prob_bound(2, 0.5, delta, n))

    def test_d1_bound(self):
        self.assertAlmostEqual(protocol.analytic_d1_bound(0.5, 0.3, 0.2, 10),
                               1.0, places=12)
        self.assertAlmostEqual(protocol.analytic_d1_bound(1.5, 0.3, 0.2, 10),
                               math.log2(1.0 + 2.0 ** -10), places=12)


class TestSweep(unittest.TestCase):

    def setUp(self):
        self.joint = sources.bsc_cascade(0.1, 0.2)

    def _mean_eff(self, rows, n):
        return np.mean([row.eff_secrecy_per_symbol for row in rows
                        if row.n == n])

    def test_threshold_trend(self):
        sweep = protocol.Sweep.around_threshold(self.joint, [2, 4, 6, 8],
                                                0.125, [0.25], codebooks=32)
        rows = sweep.run()
        self.assertEqual(len(rows), 4 * 32)
        self.assertTrue(all(row.mode == "exact" for row in rows))
        self.assertLess(self._mean_eff(rows, 8), self._mean_eff(rows, 2))

    def test_below_threshold(self):
        sweep = protocol.Sweep.around_threshold(self.joint, [2, 4, 6, 8],
                                                0.125, [-0.25], codebooks=8)
        self.assertListEqual(sweep.rate1s, [0.0])
        threshold = confusion_rate_threshold(self.joint)
        for row in sweep.run():
            self.assertAlmostEqual(row.eff_secrecy_per_symbol, threshold,
                                   places=12)

    def test_progress(self):
        sweep = protocol.Sweep(self.joint, [2], 0.5, [0.0, 0.5], codebooks=2)
        seen = []
        sweep.progress.add(lambda sender, done, total, row:
                           seen.append((done, total)))
        rows = sweep.run()
        self.assertListEqual(seen, [(1, 4), (2, 4), (3, 4), (4, 4)])
        self.assertEqual(rows[0].to_dict()["effSecrecyPerSymbol"],
                         rows[0].eff_secrecy / 2)
        self.assertIsNotNone(rows[0].d1)

    def test_reproducible(self):
        first = protocol.Sweep(self.joint, [3], 0.34, [0.34], codebooks=2,
                               seed=5).run()
        second = protocol.Sweep(self.joint, [3], 0.34, [0.34], codebooks=2,
                                seed=5).run()
        self.assertListEqual(first, second)

    def test_auto_switch(self):
        sweep = protocol.Sweep(self.joint, [11], 0.125, [0.0], trials=200)
        switched = []
        sweep.mode_switched.add(lambda sender, spec, mode:
                                switched.append(mode))
        with self.assertLogs("stealthkey.protocol", "WARNING"):
            rows = sweep.run()

        self.assertListEqual(switched, ["mc"])
        self.assertEqual(rows[0].mode, "monte-carlo")
        self.assertIsNone(rows[0].d1)

    def test_exact_refuses(self):
        sweep = protocol.Sweep(self.joint, [11], 0.125, [0.0], mode="exact")
        with self.assertRaises(protocol.GuardExceededError):
            sweep.run()

    def test_invalid(self):
        with self.assertRaises(protocol.ProtocolError):
            protocol.Sweep(self.joint, [2], 0.5, [0.5], mode="fast")


if __name__ == '__main__':
    unittest.main()
