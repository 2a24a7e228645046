import dataclasses
import math
import re
import warnings

import numpy as np
from django.test import SimpleTestCase

from cutfem.analysis import StudySettings, mass_trace
from cutfem.assembly import FormVariant, GhostVariant
from cutfem.cases import builtin_case, case_from_data
from cutfem.exceptions import (
    ConfigInvalid,
    InclusionViolated,
    SingularMatrix,
    TimestepRestrictionWarning,
)
from cutfem.fespace import FeSpace, interpolate
from cutfem.geometry import LevelSetField, classify, interpolate_levelset
from cutfem.linalg import estimate_condition
from cutfem.mesh import mesh_for_level
from cutfem.stepper import (
    GammaScaling,
    Scheme,
    StepConfig,
    build_system,
    check_inclusion,
    compute_strip_width,
    discrete_mass,
    discrete_time_step_bound,
    energy_norm,
    run,
    stabilization_weight,
    step,
    strip_layers,
)

from .utils import l2_norm, square_mesh, stationary_case, vertex_values

DIAGNOSTICS_LINE = re.compile(
    r"^step=1 t=0\.25 delta_h=0\.000000e\+00 K=1 gamma_s=1 "
    r"xi_h_dt=1\.250000e-01 residual=\S+ included=1$"
)


def translating_case():
    """A disk moving right with a constant divergence-free velocity."""
    return case_from_data(
        {
            "name": "translating_disk",
            "box": [-1, 1, -1, 1],
            "T": 1.0,
            "alpha": 0.3,
            "phi": "sqrt((x - 0.3*t)^2 + y^2) - 0.5",
            "velocity": ["0.3", "0"],
            "div_velocity": "0",
            "w_inf": 0.3,
            "initial": "1",
        }
    )


class StripWidthTests(SimpleTestCase):
    def test_strip_width(self):
        case = builtin_case("example1_travel")
        self.assertAlmostEqual(compute_strip_width(case, 0.1), 0.2)
        self.assertAlmostEqual(compute_strip_width(case, 0.1, "bdf2"), 0.4)

    def test_layers_and_weight(self):
        self.assertEqual(strip_layers(0.0, 0.1), 1)
        self.assertEqual(strip_layers(0.25, 0.1), 3)
        self.assertEqual(strip_layers(0.5, 0.1), 5)
        self.assertEqual(stabilization_weight(0.1, 0.2), 1.0)
        self.assertEqual(stabilization_weight(0.25, 0.1, c_gamma=2.0), 6.0)
        self.assertEqual(
            stabilization_weight(0.25, 0.1, c_gamma=2.0, scaling=GammaScaling.CONSTANT), 2.0
        )
        with self.assertRaises(ValueError):
            strip_layers(0.1, 0.0)


class StepConfigTests(SimpleTestCase):
    def test_variants_are_parsed(self):
        config = StepConfig(dt=0.1, scheme="bdf2", ghost="djump", form="skew")
        self.assertIs(config.scheme, Scheme.BDF2)
        self.assertIs(config.ghost, GhostVariant.DJUMP)
        self.assertIs(config.form, FormVariant.SKEW)

    def test_invalid_values(self):
        for kwargs in (
            {"dt": 0.0},
            {"dt": 0.1, "scheme": "rk4"},
            {"dt": 0.1, "c_gamma": -1.0},
            {"dt": 0.1, "delta_h": -0.1},
            {"dt": 0.1, "solver": "cg"},
            {"dt": 0.1, "quadrature_degree": 9},
        ):
            with self.subTest(**kwargs):
                with self.assertRaises(ConfigInvalid):
                    StepConfig(**kwargs)

    def test_from_settings(self):
        config = StepConfig.from_settings(0.05, ghost="lps", c_gamma=None)
        self.assertIs(config.ghost, GhostVariant.LPS)
        self.assertEqual(config.c_gamma, 1.0)
        self.assertEqual(config.quadrature_degree, 4)

    def test_notes(self):
        self.assertEqual(StepConfig(dt=0.1).notes, [])
        self.assertEqual(len(StepConfig(dt=0.1, scheme="bdf2", conservative=True).notes), 2)


class InclusionTests(SimpleTestCase):
    def setUp(self):
        self.mesh = square_mesh(16)

    def disk(self, centre, delta_h):
        values = vertex_values(self.mesh, lambda x, y: np.hypot(x - centre, y) - 0.5)
        return classify(LevelSetField(mesh=self.mesh, t=0.0, vertex_values=values), delta_h)

    def test_small_move_inside_the_strip(self):
        self.assertTrue(check_inclusion(self.disk(0.0, 0.2), self.disk(0.1, 0.2)))

    def test_large_move(self):
        self.assertFalse(check_inclusion(self.disk(0.0, 0.0), self.disk(0.4, 0.0)))

    def test_violation_stops_the_run(self):
        case = builtin_case("example1_travel")
        mesh = mesh_for_level(case.box, case.h0, 2)
        with self.assertRaises(InclusionViolated):
            run(case, mesh, StepConfig(dt=0.1, delta_h=0.0))


class ConstantPreservationTests(SimpleTestCase):
    def test_constants_survive_every_variant(self):
        case = translating_case()
        mesh = square_mesh(12)
        for scheme in Scheme:
            for ghost in GhostVariant:
                for form in FormVariant:
                    with self.subTest(scheme=scheme, ghost=ghost, form=form):
                        config = StepConfig(dt=0.1, scheme=scheme, ghost=ghost, form=form)
                        trace = run(case, mesh, config)
                        self.assertEqual(trace.num_steps, 10)
                        final = trace.final
                        np.testing.assert_allclose(
                            final.coefficients[final.active_mask], 1.0, atol=1e-10
                        )


class DirichletTests(SimpleTestCase):
    def test_linear_solution_is_reproduced_with_nitsche(self):
        exact = "1 + x + 2*y"
        case = stationary_case(alpha=1.0, exact=exact, initial=exact, dirichlet=exact)
        mesh = square_mesh(10)
        trace = run(case, mesh, StepConfig(dt=0.25, nitsche=True))
        final = trace.final
        x, y = mesh.vertices[final.active_mask].T
        np.testing.assert_allclose(final.coefficients[final.active_mask], 1 + x + 2 * y, atol=1e-8)

    def test_constant_data_agrees_with_natural_condition(self):
        case = stationary_case(alpha=1.0, dirichlet="1")
        mesh = square_mesh(10)
        natural = run(case, mesh, StepConfig(dt=0.25)).final
        weak = run(case, mesh, StepConfig(dt=0.25, nitsche=True)).final
        np.testing.assert_allclose(weak.coefficients, natural.coefficients, atol=1e-8)


class ConservationTests(SimpleTestCase):
    def test_mass_is_conserved(self):
        case = builtin_case("example3_mass")
        for scheme in ("ie", "bdf2"):
            with self.subTest(scheme=scheme):
                study = StudySettings(options={"conservative": True, "scheme": scheme})
                trace = study.run(case, 0, 0)
                masses, deviation = mass_trace(trace)
                self.assertLess(deviation, 1e-9 * abs(masses[0]))
                self.assertTrue(all(d.multiplier is not None for d in trace.diagnostics))

    def test_conservative_step_needs_previous_mass(self):
        case = stationary_case()
        mesh = square_mesh(8)
        space = FeSpace(mesh)
        domain_slice = classify(interpolate_levelset(case, mesh, 0.0), 0.0)
        u0 = interpolate(space, case.initial, 0.0, domain_slice)
        with self.assertRaises(ConfigInvalid):
            build_system(case, domain_slice, space, StepConfig(dt=0.1, conservative=True), 0.1, u0)


class RunTests(SimpleTestCase):
    def setUp(self):
        self.case = stationary_case(alpha=1.0)
        self.mesh = square_mesh(8)

    def test_diagnostics_line(self):
        with self.assertLogs("cutfem.diagnostics", "INFO") as logs:
            run(self.case, self.mesh, StepConfig(dt=0.25))
        lines = [record.getMessage() for record in logs.records]
        self.assertEqual(len(lines), 4)
        self.assertRegex(lines[0], DIAGNOSTICS_LINE)

    def test_time_step_restriction_warning(self):
        case = stationary_case(alpha=1.0, T=4.0)
        with self.assertWarns(TimestepRestrictionWarning):
            run(case, self.mesh, StepConfig(dt=2.0))

    def test_no_warning_below_the_bound(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", TimestepRestrictionWarning)
            run(self.case, self.mesh, StepConfig(dt=0.25))

    def test_runs_are_deterministic(self):
        case = builtin_case("example1_travel")
        mesh = mesh_for_level(case.box, case.h0, 0)
        first = run(case, mesh, StepConfig(dt=0.1)).final
        second = run(case, mesh, StepConfig(dt=0.1)).final
        np.testing.assert_array_equal(first.coefficients, second.coefficients)

    def test_zero_steps(self):
        trace = run(self.case, self.mesh, StepConfig(dt=0.25), num_steps=0)
        self.assertEqual(len(trace), 1)
        self.assertEqual(trace.num_steps, 0)

    def test_dt_must_divide_final_time(self):
        with self.assertRaises(ConfigInvalid):
            run(self.case, self.mesh, StepConfig(dt=0.3))

    def test_single_step(self):
        domain_slice = classify(interpolate_levelset(self.case, self.mesh, 0.0), 0.0)
        space = FeSpace(self.mesh)
        u0 = interpolate(space, self.case.initial, 0.0, domain_slice)
        u1 = step(u0, domain_slice, StepConfig(dt=0.25), self.case, 0.25)
        np.testing.assert_allclose(u1.coefficients[u1.active_mask], 1.0, atol=1e-10)
        self.assertAlmostEqual(
            discrete_mass(u1, domain_slice), domain_slice.measure, places=10
        )

    def test_energy_norm_of_one(self):
        domain_slice = classify(interpolate_levelset(self.case, self.mesh, 0.0), 0.1)
        space = FeSpace(self.mesh)
        u = interpolate(space, self.case.initial, 0.0, domain_slice)
        self.assertAlmostEqual(
            energy_norm(u, domain_slice, space, self.case, 1.0),
            math.sqrt(domain_slice.measure),
            places=10,
        )

    def test_time_step_bound_without_flow(self):
        domain_slice = classify(interpolate_levelset(self.case, self.mesh, 0.0), 0.0)
        self.assertAlmostEqual(discrete_time_step_bound(self.case, domain_slice), 0.5)

    def test_skew_bound_includes_the_interface_flux(self):
        case = translating_case()
        domain_slice = classify(interpolate_levelset(case, self.mesh, 0.0), 0.0)
        implementation = discrete_time_step_bound(case, domain_slice, "impl")
        skew = discrete_time_step_bound(case, domain_slice, "skew")
        self.assertAlmostEqual(implementation, 0.15)
        self.assertGreater(skew, implementation)
        self.assertLessEqual(skew, 0.15 + 0.3**2 / (8 * 0.3) + 1e-12)


class TopologyChangeTests(SimpleTestCase):
    """Colliding and separating circles on the coarse T/10 schedule."""

    def run_case(self, case):
        study = StudySettings()
        return run(case, study.mesh(case, 0), study.config(case, 0))

    def test_norms_stay_bounded_through_the_collision(self):
        case = builtin_case("example4_topology")
        trace = self.run_case(case)
        self.assertTrue(trace.config.conservative)
        self.assertEqual(trace.num_steps, 10)
        self.assertAlmostEqual(trace.times[-1], case.T, places=12)
        norms = [l2_norm(u, s) for u, s in zip(trace.solutions, trace.slices)]
        self.assertGreater(norms[0], 0.0)
        self.assertLessEqual(max(norms), 10 * norms[0])

    def test_non_zero_mass_is_conserved_through_the_collision(self):
        # u0 = 2 on the upper circle and 1 on the lower one
        case = dataclasses.replace(
            builtin_case("example4_topology"),
            initial=lambda x, y, t=0.0: np.where(np.asarray(y) > 0, 2.0, 1.0),
        )
        trace = self.run_case(case)
        masses, deviation = mass_trace(trace)
        self.assertGreater(masses[0], 0.5)
        self.assertLessEqual(deviation, 1e-9 * (1 + abs(masses[0])))


class CutRobustnessTests(SimpleTestCase):
    """Condition numbers across small shifts of a disk relative to the mesh."""

    def conditions(self, gamma_s):
        mesh = square_mesh(16)
        space = FeSpace(mesh)
        cell = 2.0 / 16
        config = StepConfig(dt=0.1)
        estimates = []
        for k in range(11):
            case = stationary_case(radius=0.61)
            centre = k * cell / 10
            values = vertex_values(mesh, lambda x, y: np.hypot(x - centre, y - 0.03) - 0.61)
            domain_slice = classify(LevelSetField(mesh=mesh, t=0.1, vertex_values=values), 0.0)
            u0 = interpolate(space, case.initial, 0.0, domain_slice)
            system = build_system(case, domain_slice, space, config, 0.1, u0, gamma_s=gamma_s)
            try:
                estimates.append(estimate_condition(system.matrix))
            except SingularMatrix:
                estimates.append(math.inf)
        return np.array(estimates)

    def test_stabilized_conditioning_is_insensitive_to_the_cut(self):
        stabilized = self.conditions(1.0)
        self.assertTrue(np.all(np.isfinite(stabilized)))
        self.assertLessEqual(stabilized.max() / stabilized.min(), 100.0)
        unstabilized = self.conditions(0.0)
        self.assertGreaterEqual(unstabilized.max(), 10 * stabilized.max())
