from math import factorial

import numpy as np
from django.test import SimpleTestCase

from cutfem.exceptions import ConfigInvalid
from cutfem.quadrature import line_rule, map_line_rule, map_triangle_rule, triangle_rule


def monomial_integral(a, b):
    # int_{unit triangle} x^a y^b
    return factorial(a) * factorial(b) / factorial(a + b + 2)


class TriangleRuleTests(SimpleTestCase):
    def test_weights_and_points(self):
        for degree in (1, 2, 4, 6):
            bary, weights = triangle_rule(degree)
            self.assertAlmostEqual(weights.sum(), 1.0, places=14)
            self.assertTrue(np.all(weights > 0))
            self.assertTrue(np.all(bary >= 0))
            np.testing.assert_allclose(bary.sum(axis=1), 1.0, atol=1e-14)

    def test_exact_for_monomials(self):
        corners = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
        for degree in (1, 2, 4, 6):
            points, weights = map_triangle_rule(corners, degree)
            x, y = points[0, :, 0], points[0, :, 1]
            for a in range(degree + 1):
                for b in range(degree + 1 - a):
                    with self.subTest(degree=degree, a=a, b=b):
                        value = np.sum(weights[0] * x**a * y**b)
                        self.assertAlmostEqual(value, monomial_integral(a, b), places=12)

    def test_odd_degrees_round_up(self):
        self.assertEqual(len(triangle_rule(3)[1]), len(triangle_rule(4)[1]))
        self.assertEqual(len(triangle_rule(5)[1]), len(triangle_rule(6)[1]))

    def test_unsupported_degree(self):
        with self.assertRaises(ConfigInvalid):
            triangle_rule(7)

    def test_mapping_ignores_orientation(self):
        ccw = np.array([[[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]])
        cw = ccw[:, [0, 2, 1]]
        self.assertAlmostEqual(map_triangle_rule(ccw, 2)[1].sum(), 1.0, places=14)
        self.assertAlmostEqual(map_triangle_rule(cw, 2)[1].sum(), 1.0, places=14)


class LineRuleTests(SimpleTestCase):
    def test_exact_on_unit_interval(self):
        for degree in range(1, 8):
            points, weights = line_rule(degree)
            self.assertTrue(np.all((points > 0) & (points < 1)))
            for k in range(degree + 1):
                self.assertAlmostEqual(np.sum(weights * points**k), 1 / (k + 1), places=13)

    def test_mapped_segment_length(self):
        points, weights = map_line_rule(np.array([[[0.0, 0.0], [3.0, 4.0]]]), 4)
        self.assertAlmostEqual(weights.sum(), 5.0, places=13)
        np.testing.assert_allclose(points[0, :, 1] / points[0, :, 0], 4 / 3)
