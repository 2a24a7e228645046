"""Time-independent background triangulation of the box and its facet topology."""
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import ConfigInvalid, DegenerateElement, NonManifold

logger = logging.getLogger(__name__)

# local edge k joins local vertices k and k+1; the opposite vertex is k+2
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])

JITTER_LIMIT = 0.3
JITTER_RETRIES = 4


@dataclass(frozen=True, eq=False)
class Box:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ConfigInvalid(f"Empty box {self.as_tuple()}.")

    @property
    def area(self):
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    @property
    def lengths(self):
        return self.xmax - self.xmin, self.ymax - self.ymin

    def as_tuple(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    def contains(self, points, tol=1e-12):
        points = np.asarray(points, dtype=float)
        scale = max(self.lengths)
        return (
            (points[..., 0] >= self.xmin - tol * scale)
            & (points[..., 0] <= self.xmax + tol * scale)
            & (points[..., 1] >= self.ymin - tol * scale)
            & (points[..., 1] <= self.ymax + tol * scale)
        )


@dataclass(frozen=True, eq=False)
class BackgroundMesh:
    """Counterclockwise triangulation of ``box`` with facet/neighbor topology.

    ``facet_elements[f]`` holds the one or two triangles adjacent to facet
    ``f`` (``-1`` marks the missing neighbor of a boundary facet) and
    ``element_facets[t, k]`` is the facet of local edge ``k`` of triangle ``t``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    facets: np.ndarray
    facet_elements: np.ndarray
    element_facets: np.ndarray
    box: Box

    def __post_init__(self):
        for array in (
            self.vertices,
            self.triangles,
            self.facets,
            self.facet_elements,
            self.element_facets,
        ):
            array.setflags(write=False)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    @property
    def num_facets(self):
        return len(self.facets)

    @cached_property
    def corners(self):
        """Vertex coordinates per triangle, shape ``(nt, 3, 2)``."""
        return self.vertices[self.triangles]

    @cached_property
    def signed_areas(self):
        return _signed_areas(self.corners)

    @property
    def areas(self):
        return self.signed_areas

    @cached_property
    def diameters(self):
        c = self.corners
        edges = c[:, [1, 2, 0]] - c
        return np.linalg.norm(edges, axis=2).max(axis=1)

    @property
    def h(self):
        return float(self.diameters.max()) if self.num_triangles else 0.0

    @property
    def h_min(self):
        return float(self.diameters.min()) if self.num_triangles else 0.0

    @cached_property
    def bary_gradients(self):
        """Constant gradients of the barycentric coordinates, ``(nt, 3, 2)``."""
        c = self.corners
        d1 = c[:, 1] - c[:, 0]
        d2 = c[:, 2] - c[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        r1 = np.stack([d2[:, 1], -d2[:, 0]], axis=1) / det[:, None]
        r2 = np.stack([-d1[:, 1], d1[:, 0]], axis=1) / det[:, None]
        return np.stack([-r1 - r2, r1, r2], axis=1)

    @cached_property
    def bary_constants(self):
        """``lambda_i(x) = bary_constants[t, i] + bary_gradients[t, i] . x``."""
        p0 = self.corners[:, 0]
        const = -np.einsum("tid,td->ti", self.bary_gradients, p0)
        const[:, 0] += 1.0
        return const

    def barycentric(self, elements, points):
        """Barycentric coordinates of ``points (..., 2)`` w.r.t. ``elements (...)``.

        Points outside the element give the affine extension, which the
        direct ghost penalty relies on.
        """
        elements = np.asarray(elements)
        grads = self.bary_gradients[elements]
        consts = self.bary_constants[elements]
        return consts + np.einsum("...id,...d->...i", grads, points)

    @property
    def boundary_facets(self):
        return np.flatnonzero(self.facet_elements[:, 1] < 0)

    @property
    def interior_facets(self):
        return np.flatnonzero(self.facet_elements[:, 1] >= 0)

    def euler_characteristic(self):
        """V - E + (T + 1); equals 2 for a simply connected box mesh."""
        return self.num_vertices - self.num_facets + self.num_triangles + 1

    def quasi_uniformity(self):
        return self.h / self.h_min if self.num_triangles else 1.0


def _signed_areas(corners):
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def facet_topology(triangles):
    """Return ``(facets, facet_elements, element_facets)`` for a triangle list.

    Facets are keyed by the sorted vertex pair and numbered in lexicographic
    order of that key, so the numbering does not depend on triangle order.
    """
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    nt = len(triangles)
    if nt == 0:
        return (
            np.zeros((0, 2), dtype=np.int64),
            np.zeros((0, 2), dtype=np.int64),
            np.zeros((0, 3), dtype=np.int64),
        )
    edges = np.sort(triangles[:, LOCAL_EDGES].reshape(-1, 2), axis=1)
    facets, inverse, counts = np.unique(
        edges, axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    if counts.max() > 2:
        bad = facets[np.argmax(counts)]
        raise NonManifold(
            f"Facet {tuple(bad)} is shared by {counts.max()} triangles."
        )
    order = np.argsort(inverse, kind="stable")
    sorted_facets = inverse[order]
    owner = order // 3
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_facets[1:] != sorted_facets[:-1]
    facet_elements = np.full((len(facets), 2), -1, dtype=np.int64)
    facet_elements[sorted_facets[first], 0] = owner[first]
    facet_elements[sorted_facets[~first], 1] = owner[~first]
    return facets, facet_elements, inverse.reshape(nt, 3)


def _orient(vertices, triangles):
    triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if len(triangles) == 0:
        return triangles
    areas = _signed_areas(vertices[triangles])
    flip = areas < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return triangles


def make_mesh(vertices, triangles, box=None, rho_max=None, orient=True):
    """Assemble a :class:`BackgroundMesh`.

    With ``orient`` clockwise triangles are flipped; without it they are
    reported as degenerate.
    """
    vertices = np.array(vertices, dtype=float).reshape(-1, 2)
    if orient:
        triangles = _orient(vertices, triangles)
    else:
        triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if box is None:
        box = Box(
            float(vertices[:, 0].min()),
            float(vertices[:, 0].max()),
            float(vertices[:, 1].min()),
            float(vertices[:, 1].max()),
        )
    if len(triangles):
        areas = _signed_areas(vertices[triangles])
        if np.any(areas <= 0):
            raise DegenerateElement(
                f"{int(np.sum(areas <= 0))} triangles have non-positive area."
            )
    if not np.all(box.contains(vertices)):
        raise ConfigInvalid("Mesh vertices lie outside the background box.")
    facets, facet_elements, element_facets = facet_topology(triangles)
    mesh = BackgroundMesh(
        vertices=vertices,
        triangles=triangles,
        facets=facets,
        facet_elements=facet_elements,
        element_facets=element_facets,
        box=box,
    )
    if rho_max is not None and mesh.quasi_uniformity() > rho_max:
        raise DegenerateElement(
            f"Mesh is not quasi-uniform: h/h_min = {mesh.quasi_uniformity():.3f} "
            f"exceeds {rho_max}."
        )
    return mesh


def _grid_counts(n):
    if np.ndim(n) == 0:
        nx = ny = int(n)
    else:
        nx, ny = (int(k) for k in n)
    if nx < 1 or ny < 1:
        raise ConfigInvalid(f"Need at least one subdivision per axis, got {n}.")
    return nx, ny


def _structured_topology(box, nx, ny, pattern):
    xs = np.linspace(box.xmin, box.xmax, nx + 1)
    ys = np.linspace(box.ymin, box.ymax, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    a = j * (nx + 1) + i
    b = a + 1
    c = b + nx + 1
    d = a + nx + 1
    if pattern == "diagonal":
        triangles = np.concatenate(
            [np.column_stack([a, b, c]), np.column_stack([a, c, d])]
        )
    elif pattern == "crisscross":
        m = len(vertices) + np.arange(nx * ny)
        centres = 0.5 * (vertices[a] + vertices[c])
        vertices = np.concatenate([vertices, centres])
        triangles = np.concatenate(
            [
                np.column_stack([a, b, m]),
                np.column_stack([b, c, m]),
                np.column_stack([c, d, m]),
                np.column_stack([d, a, m]),
            ]
        )
    else:
        raise ConfigInvalid(f"Unknown mesh pattern '{pattern}'.")
    return vertices, triangles


def build_structured_mesh(
    box, n, jitter=0.0, seed=0, pattern="diagonal", rho_max=3.0
):
    """Split an ``n x n`` (or ``(nx, ny)``) grid of ``box`` into triangles.

    With ``jitter > 0`` interior vertices move by up to ``jitter`` times the
    cell size in each direction, drawn from ``seed``. A draw that folds a
    triangle is retried with half the amplitude.
    """
    if not isinstance(box, Box):
        box = Box(*box)
    nx, ny = _grid_counts(n)
    if not 0.0 <= jitter < JITTER_LIMIT:
        raise ConfigInvalid(
            f"Jitter amplitude must lie in [0, {JITTER_LIMIT}), got {jitter}."
        )
    vertices, triangles = _structured_topology(box, nx, ny, pattern)
    if jitter == 0.0:
        return make_mesh(vertices, triangles, box=box, rho_max=rho_max)

    cell = min(box.lengths[0] / nx, box.lengths[1] / ny)
    on_boundary = (
        np.isclose(vertices[:, 0], box.xmin)
        | np.isclose(vertices[:, 0], box.xmax)
        | np.isclose(vertices[:, 1], box.ymin)
        | np.isclose(vertices[:, 1], box.ymax)
    )
    amplitude = jitter
    for attempt in range(JITTER_RETRIES + 1):
        rng = np.random.default_rng(seed)
        shift = rng.uniform(-1.0, 1.0, size=vertices.shape) * amplitude * cell
        shift[on_boundary] = 0.0
        moved = vertices + shift
        try:
            return make_mesh(
                moved, triangles, box=box, rho_max=rho_max, orient=False
            )
        except DegenerateElement:
            logger.warning(
                "Jittered mesh degenerated (attempt %d, amplitude %.3g); retrying.",
                attempt + 1,
                amplitude,
            )
            amplitude *= 0.5
    raise DegenerateElement(
        f"Could not jitter a {nx}x{ny} mesh without folding triangles."
    )


def refine_uniform(mesh):
    """Red refinement: every triangle splits into four through edge midpoints."""
    nv = mesh.num_vertices
    midpoints = 0.5 * (mesh.vertices[mesh.facets[:, 0]] + mesh.vertices[mesh.facets[:, 1]])
    vertices = np.concatenate([mesh.vertices, midpoints])
    t = mesh.triangles
    m01, m12, m20 = (nv + mesh.element_facets[:, k] for k in range(3))
    triangles = np.concatenate(
        [
            np.column_stack([t[:, 0], m01, m20]),
            np.column_stack([m01, t[:, 1], m12]),
            np.column_stack([m20, m12, t[:, 2]]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    return make_mesh(vertices, triangles, box=mesh.box)


def mesh_for_level(box, h0, level, jitter=0.0, seed=0, pattern="diagonal", rho_max=3.0):
    """Level-0 mesh with about ``h0`` cells, refined ``level`` times."""
    if h0 <= 0:
        raise ConfigInvalid(f"Initial mesh size must be positive, got {h0}.")
    if not isinstance(box, Box):
        box = Box(*box)
    counts = tuple(max(1, int(np.ceil(length / h0 - 1e-9))) for length in box.lengths)
    mesh = build_structured_mesh(
        box, counts, jitter=jitter, seed=seed, pattern=pattern, rho_max=rho_max
    )
    for _ in range(int(level)):
        mesh = refine_uniform(mesh)
    return mesh


def write_mesh(mesh, path):
    lines = [f"VERTICES {mesh.num_vertices}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.vertices)
    lines.append(f"TRIANGLES {mesh.num_triangles}")
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh(path, box=None):
    tokens = Path(path).read_text(encoding="utf-8").split()
    try:
        if tokens[0] != "VERTICES":
            raise ValueError("missing VERTICES header")
        nv = int(tokens[1])
        vertices = np.array(tokens[2 : 2 + 2 * nv], dtype=float).reshape(nv, 2)
        pos = 2 + 2 * nv
        if tokens[pos] != "TRIANGLES":
            raise ValueError("missing TRIANGLES header")
        nt = int(tokens[pos + 1])
        triangles = np.array(
            tokens[pos + 2 : pos + 2 + 3 * nt], dtype=np.int64
        ).reshape(nt, 3)
    except (IndexError, ValueError) as e:
        raise ConfigInvalid(f"Malformed mesh file {path}: {e}") from e
    if len(triangles) and (triangles.min() < 0 or triangles.max() >= nv):
        raise ConfigInvalid(f"Mesh file {path} references unknown vertices.")
    if box is not None and not isinstance(box, Box):
        box = Box(*box)
    return make_mesh(vertices, triangles, box=box)
