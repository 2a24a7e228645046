import json
import math

import numpy as np
from django.test import SimpleTestCase

from cutfem.analysis import (
    EMPTY_CELL,
    StudySettings,
    convergence_study,
    eoc_table,
    error_norms,
    mass_trace,
    solution_difference,
)
from cutfem.exceptions import MeshMismatch, NoExactSolution, NonPositiveError
from cutfem.stepper import StepConfig, run

from .utils import DATA_DIR, square_mesh, stationary_case


def reference_table():
    data = json.loads((DATA_DIR / "example1_ie_l2h1.json").read_text(encoding="utf-8"))
    table = eoc_table(data["errors"], data["lt_levels"], data["lx_levels"], norm=data["norm"])
    return data, table


class EocTests(SimpleTestCase):
    def test_rates(self):
        table = eoc_table([[0.4, 0.1], [0.2, 0.05]])
        np.testing.assert_allclose(table.eoc_x[1:], [2.0])
        np.testing.assert_allclose(table.eoc_t[1:], [1.0])
        np.testing.assert_allclose(table.eoc_xt[1:], [math.log2(0.4 / 0.05)])
        self.assertTrue(math.isnan(table.eoc_x[0]))

    def test_constant_errors_have_rate_zero(self):
        table = eoc_table(np.full((3, 3), 0.7))
        np.testing.assert_allclose(table.eoc_x[1:], 0.0)
        np.testing.assert_allclose(table.eoc_t[1:], 0.0)

    def test_non_positive_errors(self):
        for errors in ([[0.1, 0.0]], [[0.1, -1.0]], [[np.nan, 0.1]]):
            with self.subTest(errors=errors):
                with self.assertRaises(NonPositiveError):
                    eoc_table(errors)

    def test_reference_margins(self):
        data, table = reference_table()
        for name in ("eoc_x", "eoc_t", "eoc_xt"):
            expected = np.array([np.nan if v is None else v for v in data[name]])
            with self.subTest(margin=name):
                self.assertTrue(math.isnan(getattr(table, name)[0]))
                np.testing.assert_allclose(getattr(table, name)[1:], expected[1:], atol=1e-3)

    def test_double_time_diagonal(self):
        _, table = reference_table()
        eoc_xtt = table.eoc_xtt
        self.assertTrue(math.isnan(eoc_xtt[0]))
        # Lt = 2 Lx stays inside the grid for Lx <= 3 only
        for lx in (1, 2, 3):
            expected = math.log2(table.error(2 * lx - 2, lx - 1) / table.error(2 * lx, lx))
            self.assertAlmostEqual(eoc_xtt[lx], expected, places=12)
        self.assertTrue(np.all(np.isnan(eoc_xtt[4:])))

    def test_csv_layout(self):
        table = eoc_table([[0.4, 0.1], [0.2, 0.05]], lt_levels=[2, 3], lx_levels=[0, 1])
        lines = table.to_csv().splitlines()
        self.assertEqual(lines[0], "Lt\\Lx,0,1,eoc_t")
        self.assertEqual(lines[1], f"2,4.000000e-01,1.000000e-01,{EMPTY_CELL}")
        self.assertEqual(lines[2], "3,2.000000e-01,5.000000e-02,1.000")
        self.assertEqual(lines[3], f"eoc_x,{EMPTY_CELL},2.000,{EMPTY_CELL}")
        self.assertEqual(len(lines), 6)
        self.assertTrue(lines[5].startswith("eoc_xtt,"))

    def test_as_dict_uses_null_for_missing_rates(self):
        table = eoc_table([[0.4, 0.1], [0.2, 0.05]])
        data = table.as_dict()
        self.assertIsNone(data["eoc_x"][0])
        self.assertEqual(data["eoc_x"][1], 2.0)
        self.assertEqual(data["errors"], [[0.4, 0.1], [0.2, 0.05]])


class ErrorNormTests(SimpleTestCase):
    def setUp(self):
        self.mesh = square_mesh(8)

    def test_zero_error_for_an_exact_constant(self):
        case = stationary_case(exact="1", initial="1")
        trace = run(case, self.mesh, StepConfig(dt=0.25))
        report = error_norms(trace)
        self.assertLess(report.l2l2, 1e-10)
        self.assertLess(report.l2h1, 1e-10)
        self.assertLess(report.linfl2, 1e-10)
        self.assertEqual(len(report.step_l2), 4)

    def test_constant_offset(self):
        case = stationary_case(exact="0", initial="2")
        trace = run(case, self.mesh, StepConfig(dt=0.25))
        report = error_norms(trace)
        area = trace.slices[-1].measure
        self.assertAlmostEqual(report.l2l2, 2 * math.sqrt(case.T * area), places=8)
        self.assertAlmostEqual(report.linfl2, 2 * math.sqrt(area), places=8)
        self.assertLess(report.l2h1, 1e-8)
        self.assertEqual(report.norm("L2L2"), report.l2l2)
        with self.assertRaises(ValueError):
            report.norm("H1H1")

    def test_no_exact_solution(self):
        trace = run(stationary_case(), self.mesh, StepConfig(dt=0.5))
        with self.assertRaises(NoExactSolution):
            error_norms(trace)
        masses, deviation = mass_trace(trace)
        self.assertEqual(len(masses), 3)
        self.assertLess(deviation, 1e-10)

    def test_solution_difference(self):
        case = stationary_case(initial="1 + x")
        implicit = run(case, self.mesh, StepConfig(dt=0.25))
        bdf2 = run(case, self.mesh, StepConfig(dt=0.25, scheme="bdf2"))
        self.assertAlmostEqual(solution_difference(implicit, implicit), 0.0, places=14)
        self.assertGreater(solution_difference(implicit, bdf2), 0.0)
        other = run(case, square_mesh(6), StepConfig(dt=0.25))
        with self.assertRaises(MeshMismatch):
            solution_difference(implicit, other)


class StudyTests(SimpleTestCase):
    def test_grid_layout(self):
        case = stationary_case(exact="0", initial="2", h0=0.5, dt0=0.5)
        result = convergence_study(case, [0, 1], [0, 1], norms=("L2L2",), study=StudySettings())
        self.assertEqual(set(result.tables), {"L2L2"})
        np.testing.assert_allclose(result.tables["L2L2"].eoc_t[1:], 0.0, atol=1e-8)
        self.assertEqual(len(result.reports), 4)
        self.assertEqual(result.mass.errors.shape, (2, 2))

    def test_time_step_override(self):
        case = stationary_case(dt0=0.5)
        self.assertAlmostEqual(StudySettings().time_step(case, 1), 0.25)
        self.assertAlmostEqual(StudySettings(dt_div=10).time_step(case, 1), 0.05)
