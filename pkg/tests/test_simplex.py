import unittest

import numpy as np
from scipy.optimize import linprog

from stealthkey import simplex


class TestSimplex(unittest.TestCase):

    def test_small(self):
        # min -x - y  s.t.  x + 2y + s1 = 4,  3x + y + s2 = 6
        c = [-1.0, -1.0, 0.0, 0.0]
        a = [[1.0, 2.0, 1.0, 0.0], [3.0, 1.0, 0.0, 1.0]]
        b = [4.0, 6.0]
        result = simplex.solve(c, a, b)
        self.assertAlmostEqual(result.objective, -2.8, places=9)
        np.testing.assert_allclose(result.x[:2], [1.6, 1.2], atol=1e-9)

    def test_negative_rhs(self):
        # x - y = -1 with x, y >= 0; min x + y
        result = simplex.solve([1.0, 1.0], [[1.0, -1.0]], [-1.0])
        self.assertAlmostEqual(result.objective, 1.0, places=9)
        np.testing.assert_allclose(result.x, [0.0, 1.0], atol=1e-9)

    def test_redundant_rows(self):
        a = [[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]
        result = simplex.solve([1.0, 2.0, 3.0], a, [1.0, 2.0])
        self.assertAlmostEqual(result.objective, 1.0, places=9)

    def test_infeasible(self):
        with self.assertRaises(simplex.SimplexInfeasibleError):
            simplex.solve([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])

    def test_unbounded(self):
        with self.assertRaises(simplex.SimplexUnboundedError):
            simplex.solve([-1.0, 0.0], [[1.0, -1.0]], [1.0])

    def test_dimensions(self):
        with self.assertRaises(simplex.SimplexError):
            simplex.solve([1.0], [[1.0, 1.0]], [1.0])

    def test_degenerate(self):
        # A degenerate vertex at the origin; Bland's rule must not cycle.
        c = [-0.75, 20.0, -0.5, 6.0, 0.0, 0.0, 0.0]
        a = [[0.25, -8.0, -1.0, 9.0, 1.0, 0.0, 0.0],
             [0.5, -12.0, -0.5, 3.0, 0.0, 1.0, 0.0],
             [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]]
        b = [0.0, 0.0, 1.0]
        result = simplex.solve(c, a, b)
        self.assertAlmostEqual(result.objective, -1.25, places=9)

    def test_against_linprog(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m, n = 4, 9
            a = rng.uniform(0.0, 1.0, (m, n))
            x0 = rng.uniform(0.0, 1.0, n)
            b = a @ x0
            c = rng.uniform(-1.0, 1.0, n) + 1.5
            expected = linprog(c, A_eq=a, b_eq=b, bounds=(0, None),
                               method="highs")
            result = simplex.solve(c, a, b)
            self.assertAlmostEqual(result.objective, expected.fun, places=7)
            np.testing.assert_allclose(a @ result.x, b, atol=1e-8)
            self.assertTrue(np.all(result.x >= 0.0))


if __name__ == '__main__':
    unittest.main()
