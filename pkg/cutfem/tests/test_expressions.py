import numpy as np
from django.test import SimpleTestCase

from cutfem.exceptions import ExpressionParseError
from cutfem.expressions import X, Y, Expression, parse


class ParseTests(SimpleTestCase):
    def test_power_is_right_associative(self):
        self.assertEqual(float(Expression.from_source("2^3^2")(0.0, 0.0)), 512.0)

    def test_precedence(self):
        self.assertEqual(float(Expression.from_source("1 + 2*3^2 - 8/4")(0.0, 0.0)), 17.0)
        self.assertEqual(float(Expression.from_source("-2^2")(0.0, 0.0)), -4.0)

    def test_min_and_max_are_elementwise(self):
        x = np.array([0.0, 1.0, 2.0])
        y = np.array([1.5, 0.5, 2.5])
        np.testing.assert_array_equal(Expression.from_source("min(x, y)")(x, y), [0.0, 0.5, 2.0])
        np.testing.assert_array_equal(Expression.from_source("max(x, 1)")(x, y), [1.0, 1.0, 2.0])

    def test_time_and_functions(self):
        value = Expression.from_source("exp(-t)*cos(pi*x) + sqrt(abs(y))")(1.0, -4.0, 1.0)
        self.assertAlmostEqual(float(value), -np.exp(-1.0) + 2.0, places=14)

    def test_unknown_identifier(self):
        with self.assertRaises(ExpressionParseError):
            parse("z + 1")

    def test_python_power_operator(self):
        with self.assertRaises(ExpressionParseError):
            parse("x**2")

    def test_empty_and_malformed(self):
        for source in ("", "   ", "sin(", "x +", "1 $ 2"):
            with self.subTest(source=source):
                with self.assertRaises(ExpressionParseError):
                    parse(source)


class ExpressionTests(SimpleTestCase):
    def test_derivative(self):
        expression = Expression.from_source("x^2*y")
        self.assertAlmostEqual(float(expression.diff(X)(2.0, 3.0)), 12.0)
        self.assertAlmostEqual(float(expression.diff(Y)(2.0, 3.0)), 4.0)
        self.assertIsNone(expression.diff(X).source)

    def test_constants_broadcast(self):
        x = np.zeros((4, 3))
        self.assertEqual(Expression.from_source("1")(x, x).shape, (4, 3))

    def test_is_zero(self):
        self.assertTrue(Expression.from_source("0").is_zero)
        self.assertTrue(Expression.from_source("x - x").is_zero)
        self.assertFalse(Expression.from_source("x").is_zero)

    def test_source_is_kept(self):
        self.assertEqual(str(Expression.from_source("sin(x)*exp(-t)")), "sin(x)*exp(-t)")
