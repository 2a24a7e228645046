import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from cutfem.exceptions import ConfigInvalid, DegenerateElement, NonManifold
from cutfem.mesh import (
    LOCAL_EDGES,
    Box,
    build_structured_mesh,
    make_mesh,
    mesh_for_level,
    read_mesh,
    refine_uniform,
    write_mesh,
)

from .utils import square_mesh


class StructuredMeshTests(SimpleTestCase):
    def test_counts_and_topology(self):
        mesh = build_structured_mesh(Box(0, 1, 0, 1), 2)
        self.assertEqual(mesh.num_vertices, 9)
        self.assertEqual(mesh.num_triangles, 8)
        self.assertEqual(mesh.num_facets, 16)
        self.assertEqual(len(mesh.boundary_facets), 8)
        self.assertEqual(mesh.euler_characteristic(), 2)
        self.assertAlmostEqual(mesh.h, np.sqrt(2) / 2)

    def test_triangles_are_counterclockwise_and_cover_the_box(self):
        mesh = square_mesh(5)
        self.assertTrue(np.all(mesh.signed_areas > 0))
        self.assertAlmostEqual(mesh.signed_areas.sum(), 4.0, places=12)

    def test_element_facets_match_local_edges(self):
        mesh = square_mesh(3, pattern="crisscross")
        for t in range(mesh.num_triangles):
            for k in range(3):
                edge = sorted(mesh.triangles[t, LOCAL_EDGES[k]])
                self.assertEqual(edge, list(mesh.facets[mesh.element_facets[t, k]]))
                self.assertIn(t, mesh.facet_elements[mesh.element_facets[t, k]])

    def test_crisscross_pattern(self):
        mesh = build_structured_mesh(Box(0, 1, 0, 1), 1, pattern="crisscross")
        self.assertEqual(mesh.num_vertices, 5)
        self.assertEqual(mesh.num_triangles, 4)
        np.testing.assert_allclose(mesh.vertices[-1], [0.5, 0.5])

    def test_unknown_pattern(self):
        with self.assertRaises(ConfigInvalid):
            build_structured_mesh(Box(0, 1, 0, 1), 2, pattern="hexagonal")

    def test_empty_box(self):
        with self.assertRaises(ConfigInvalid):
            Box(1.0, 0.0, 0.0, 1.0)

    def test_level_counts(self):
        box = Box(-0.7, 0.9, -0.7, 0.7)
        self.assertEqual(mesh_for_level(box, 0.2, 0).num_triangles, 8 * 7 * 2)
        self.assertEqual(mesh_for_level(box, 0.2, 1).num_triangles, 8 * 7 * 2 * 4)


class JitterTests(SimpleTestCase):
    def test_reproducible_and_boundary_fixed(self):
        a = square_mesh(6, jitter=0.2, seed=7)
        b = square_mesh(6, jitter=0.2, seed=7)
        c = square_mesh(6, jitter=0.2, seed=8)
        plain = square_mesh(6)
        np.testing.assert_array_equal(a.vertices, b.vertices)
        self.assertFalse(np.array_equal(a.vertices, c.vertices))
        on_boundary = np.isclose(np.abs(plain.vertices).max(axis=1), 1.0)
        np.testing.assert_array_equal(a.vertices[on_boundary], plain.vertices[on_boundary])
        self.assertTrue(np.all(a.signed_areas > 0))

    def test_amplitude_limit(self):
        with self.assertRaises(ConfigInvalid):
            square_mesh(4, jitter=0.3)


class MakeMeshTests(SimpleTestCase):
    def test_clockwise_triangles_are_flipped(self):
        mesh = make_mesh([[0, 0], [0, 1], [1, 0]], [[0, 1, 2]])
        self.assertGreater(mesh.signed_areas[0], 0)

    def test_degenerate_triangle(self):
        with self.assertRaises(DegenerateElement):
            make_mesh([[0, 0], [1, 0], [2, 0]], [[0, 1, 2]])

    def test_non_manifold_facet(self):
        vertices = [[0, 0], [1, 0], [0.5, 1], [0.5, -1], [0.5, 2]]
        with self.assertRaises(NonManifold):
            make_mesh(vertices, [[0, 1, 2], [0, 3, 1], [0, 1, 4]])

    def test_quasi_uniformity_bound(self):
        vertices = [[0, 0], [1, 0], [0, 1], [10, 0]]
        triangles = [[0, 1, 2], [1, 3, 2]]
        make_mesh(vertices, triangles)
        with self.assertRaises(DegenerateElement):
            make_mesh(vertices, triangles, rho_max=3.0)

    def test_vertices_outside_box(self):
        with self.assertRaises(ConfigInvalid):
            make_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], box=Box(0, 0.5, 0, 0.5))


class RefinementTests(SimpleTestCase):
    def test_red_refinement(self):
        mesh = square_mesh(4)
        fine = refine_uniform(mesh)
        self.assertEqual(fine.num_triangles, 4 * mesh.num_triangles)
        self.assertAlmostEqual(fine.signed_areas.sum(), mesh.signed_areas.sum(), places=12)
        self.assertAlmostEqual(fine.h, mesh.h / 2, places=12)
        np.testing.assert_array_equal(fine.vertices[: mesh.num_vertices], mesh.vertices)
        self.assertEqual(fine.euler_characteristic(), 2)


class MeshFileTests(SimpleTestCase):
    def test_write_then_read(self):
        mesh = square_mesh(3, jitter=0.1, seed=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "mesh.txt"
            write_mesh(mesh, path)
            self.assertTrue(path.read_text().startswith("VERTICES 16\n"))
            again = read_mesh(path)
        np.testing.assert_array_equal(again.vertices, mesh.vertices)
        np.testing.assert_array_equal(again.triangles, mesh.triangles)

    def test_read_reorients_clockwise_triangles(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "mesh.txt"
            path.write_text("VERTICES 3\n0 0\n0 1\n1 0\nTRIANGLES 1\n0 1 2\n")
            mesh = read_mesh(path)
        self.assertGreater(mesh.signed_areas[0], 0)

    def test_malformed_files(self):
        bodies = [
            "VERTS 3\n0 0\n",
            "VERTICES 3\n0 0\n0 1\n",
            "VERTICES 3\n0 0\n0 1\n1 0\nTRIANGLES 1\n0 1 5\n",
            "VERTICES 3\n0 0\n0 1\n1 0\nTRIANGLES 1\n0 1 x\n",
        ]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "mesh.txt"
            for body in bodies:
                path.write_text(body)
                with self.subTest(body=body), self.assertRaises(ConfigInvalid):
                    read_mesh(path)
