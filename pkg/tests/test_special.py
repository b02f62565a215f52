import math
import unittest

import numpy as np
from scipy.special import gammainc, gammaincc
from scipy.stats import kstest

from stealthkey import special
from stealthkey.special import GridCcdf, NakagamiSpec


class TestIncompleteGamma(unittest.TestCase):

    def test_against_scipy(self):
        xs = np.array([0.0, 1e-8, 0.1, 0.5, 1.0, 2.5, 4.0, 10.0, 60.0])
        for s in (0.3, 1.0, 2.0, 4.5, 20.0):
            np.testing.assert_allclose(special.regularized_gamma_p(s, xs),
                                       gammainc(s, xs), rtol=1e-10,
                                       atol=1e-14)
            np.testing.assert_allclose(special.regularized_gamma_q(s, xs),
                                       gammaincc(s, xs), rtol=1e-9,
                                       atol=1e-14)

    def test_exponential(self):
        for x in (0.0, 0.3, 1.0, 7.0):
            self.assertAlmostEqual(special.regularized_gamma_p(1.0, x),
                                   1.0 - math.exp(-x), places=13)

    def test_scalar_in_scalar_out(self):
        self.assertIsInstance(special.regularized_gamma_p(2.0, 1.0), float)
        out = special.regularized_gamma_q(2.0, [1.0, 2.0])
        self.assertEqual(out.shape, (2,))

    def test_limits(self):
        self.assertEqual(special.regularized_gamma_p(3.0, 0.0), 0.0)
        self.assertEqual(special.regularized_gamma_q(3.0, math.inf), 0.0)

    def test_lower(self):
        # gamma(2, x) = 1 - (1 + x) e^{-x}
        self.assertAlmostEqual(special.lower_incomplete_gamma(2.0, 1.5),
                               1.0 - 2.5 * math.exp(-1.5), places=13)

    def test_gamma_fn(self):
        self.assertAlmostEqual(special.gamma_fn(5.0), 24.0, places=10)
        self.assertAlmostEqual(special.gamma_fn(0.5), math.sqrt(math.pi),
                               places=12)

    def test_domain(self):
        with self.assertRaises(special.SpecialFunctionError):
            special.regularized_gamma_p(0.0, 1.0)

        with self.assertRaises(special.SpecialFunctionError):
            special.regularized_gamma_p(1.0, -1.0)

        with self.assertRaises(special.SpecialFunctionError):
            special.gamma_fn(-2.0)


class TestNakagami(unittest.TestCase):

    def test_invalid(self):
        with self.assertRaises(special.SpecialFunctionError):
            NakagamiSpec(0.0, 1.0)

        with self.assertRaises(special.SpecialFunctionError):
            NakagamiSpec(1.0, -1.0)

    def test_rayleigh_ccdf(self):
        spec = NakagamiSpec(1.0, 3.0)
        xs = np.array([0.0, 0.5, 3.0, 12.0])
        np.testing.assert_allclose(special.nakagami_power_ccdf(spec, xs),
                                   np.exp(-xs / 3.0), rtol=1e-12)
        self.assertEqual(spec.power_ccdf(0.0), 1.0)

    def test_ccdf_decreasing(self):
        spec = NakagamiSpec(2.5, 1.5)
        vals = spec.power_ccdf(np.linspace(0.0, 10.0, 200))
        self.assertTrue(np.all(np.diff(vals) < 0))

    def test_inverse(self):
        spec = NakagamiSpec(1.0, 3.0)
        self.assertAlmostEqual(special.power_inverse_cdf(spec, 0.5),
                               3.0 * math.log(2.0), places=9)
        self.assertEqual(special.power_inverse_cdf(spec, 0.0), 0.0)
        levels = np.array([0.01, 0.3, 0.9, 0.999999])
        spec = NakagamiSpec(3.0, 2.0)
        np.testing.assert_allclose(
            spec.power_cdf(special.power_inverse_cdf(spec, levels)), levels,
            rtol=1e-9)

    def test_inverse_domain(self):
        spec = NakagamiSpec(1.0, 1.0)
        with self.assertRaises(special.SpecialFunctionError):
            special.power_inverse_cdf(spec, 1.0)

        with self.assertRaises(special.SpecialFunctionError):
            special.power_inverse_cdf(spec, -0.1)

    def test_sampling(self):
        spec = NakagamiSpec(2.0, 3.0)
        rng = np.random.default_rng(7)
        draws = special.sample_power(spec, rng, 20000)
        self.assertGreater(kstest(draws, spec.power_cdf).pvalue, 1e-4)
        direct = spec.draw_power(np.random.default_rng(8), 20000)
        self.assertAlmostEqual(float(np.mean(direct)), 3.0, delta=0.1)

    def test_equality(self):
        self.assertEqual(NakagamiSpec(1, 2), NakagamiSpec(1.0, 2.0))
        self.assertNotEqual(NakagamiSpec(1, 2), NakagamiSpec(2, 1))
        self.assertEqual(len({NakagamiSpec(1, 2), NakagamiSpec(1.0, 2.0)}), 1)


class TestGridCcdf(unittest.TestCase):

    def test_from_spec(self):
        ccdf = GridCcdf.from_spec(NakagamiSpec(1.0, 1.0), [0.0, 1.0, 2.0])
        self.assertEqual(len(ccdf), 3)
        self.assertAlmostEqual(ccdf.vals[1], math.exp(-1.0), places=12)

    def test_validation(self):
        with self.assertRaises(special.SpecialFunctionError):
            GridCcdf([0.0, 0.0], [1.0, 0.5])

        with self.assertRaises(special.SpecialFunctionError):
            GridCcdf([0.0, 1.0], [0.5, 0.6])

        with self.assertRaises(special.SpecialFunctionError):
            GridCcdf([0.0, 1.0], [1.0])

        with self.assertRaises(special.SpecialFunctionError):
            GridCcdf([-1.0, 1.0], [1.0, 0.5])


if __name__ == '__main__':
    unittest.main()
