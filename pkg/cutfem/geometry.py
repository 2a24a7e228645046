"""Discrete level-set geometry on the background mesh.

The P1 interpolant of the level set defines the discrete domain as the set
where it is negative. Elements are classified from their vertex values,
cut elements are split exactly into triangles along the zero line, and the
active mesh, the boundary strip and the ghost-facet set follow from the
strip half-width ``delta_h``.
"""
import enum
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import EmptyRule, MeshMismatch, NonFinite
from .quadrature import map_line_rule, map_triangle_rule

logger = logging.getLogger(__name__)

DEFAULT_TIE_BREAK = 1e-14


class ElementClass(enum.IntEnum):
    INSIDE = 0
    CUT = 1
    OUTSIDE = 2


@dataclass(frozen=True, eq=False)
class LevelSetField:
    mesh: object
    t: float
    vertex_values: np.ndarray

    def __post_init__(self):
        if self.vertex_values.shape != (self.mesh.num_vertices,):
            raise MeshMismatch(
                f"Level set has {self.vertex_values.size} values for "
                f"{self.mesh.num_vertices} vertices."
            )
        if not np.all(np.isfinite(self.vertex_values)):
            raise NonFinite(f"Level set is not finite at t={self.t}.")
        self.vertex_values.setflags(write=False)

    @property
    def element_values(self):
        return self.vertex_values[self.mesh.triangles]

    def gradients(self, elements=None):
        """Constant gradient of the P1 level set on ``elements``."""
        if elements is None:
            elements = np.arange(self.mesh.num_triangles)
        values = self.vertex_values[self.mesh.triangles[elements]]
        return np.einsum("ei,eid->ed", values, self.mesh.bary_gradients[elements])


@dataclass(frozen=True, eq=False)
class QuadRule:
    """A batch of quadrature rules, one row per integration part.

    ``elements[p]`` is the background triangle that owns part ``p``; the
    rows of ``points (p, q, 2)`` and ``weights (p, q)`` live inside it.
    Interface rules also carry the constant unit normal of each part.
    """

    elements: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray = None

    @property
    def total_weight(self):
        return float(self.weights.sum())

    def __len__(self):
        return len(self.elements)

    def integrate(self, values):
        """Sum ``values (p, q)`` against the weights."""
        return float(np.sum(self.weights * values))


@dataclass(frozen=True, eq=False)
class CutGeometry:
    """Exact decomposition of the cut elements of a slice.

    The negative side of every cut element is one triangle or a
    quadrilateral split into two; ``sub_owner`` maps each sub-triangle back
    to its element. ``segments[c]`` is the zero-line piece of ``elements[c]``
    and ``normals[c]`` its unit normal towards increasing level set.
    """

    elements: np.ndarray
    sub_triangles: np.ndarray
    sub_owner: np.ndarray
    segments: np.ndarray
    normals: np.ndarray

    @property
    def sub_owner_elements(self):
        return self.elements[self.sub_owner]


def _empty_cut():
    return CutGeometry(
        elements=np.zeros(0, dtype=np.int64),
        sub_triangles=np.zeros((0, 3, 2)),
        sub_owner=np.zeros(0, dtype=np.int64),
        segments=np.zeros((0, 2, 2)),
        normals=np.zeros((0, 2)),
    )


def _crossing(xa, xb, va, vb):
    s = np.clip(va / (va - vb), 0.0, 1.0)
    return xa + s[:, None] * (xb - xa)


def decompose_cut_elements(corners, values, negative, gradients):
    """Split cut triangles along the zero line of their linear level set.

    ``corners (m, 3, 2)`` and ``values (m, 3)`` describe the elements,
    ``negative (m, 3)`` the tie-broken vertex signs. Every row must have
    mixed signs.
    """
    m = len(corners)
    if m == 0:
        empty = _empty_cut()
        return empty.sub_triangles, empty.sub_owner, empty.segments, empty.normals
    n_neg = negative.sum(axis=1)
    lonely_negative = n_neg == 1
    lonely_mask = np.where(lonely_negative[:, None], negative, ~negative)
    i = np.argmax(lonely_mask, axis=1)
    j = (i + 1) % 3
    k = (i + 2) % 3
    rows = np.arange(m)
    xi, xj, xk = corners[rows, i], corners[rows, j], corners[rows, k]
    vi, vj, vk = values[rows, i], values[rows, j], values[rows, k]
    pij = _crossing(xi, xj, vi, vj)
    pik = _crossing(xi, xk, vi, vk)

    tri = np.flatnonzero(lonely_negative)
    quad = np.flatnonzero(~lonely_negative)
    sub_triangles = np.concatenate(
        [
            np.stack([xi[tri], pij[tri], pik[tri]], axis=1),
            np.stack([pij[quad], xj[quad], xk[quad]], axis=1),
            np.stack([pij[quad], xk[quad], pik[quad]], axis=1),
        ]
    )
    sub_owner = np.concatenate([tri, quad, quad])
    order = np.argsort(sub_owner, kind="stable")

    norms = np.linalg.norm(gradients, axis=1)
    normals = gradients / np.where(norms > 0, norms, 1.0)[:, None]
    segments = np.stack([pij, pik], axis=1)
    return sub_triangles[order], sub_owner[order], segments, normals


@dataclass(frozen=True, eq=False)
class DomainSlice:
    """Geometric state of one time level.

    ``classes`` holds an :class:`ElementClass` code per background triangle,
    ``active`` marks the extended mesh within ``delta_h`` of the domain and
    ``strip`` the elements within ``delta_h`` of its boundary.
    """

    levelset: LevelSetField
    delta_h: float
    classes: np.ndarray
    active: np.ndarray
    strip: np.ndarray
    ghost_facets: np.ndarray
    cut: CutGeometry

    def __post_init__(self):
        for array in (self.classes, self.active, self.strip, self.ghost_facets):
            array.setflags(write=False)

    @property
    def mesh(self):
        return self.levelset.mesh

    @property
    def t(self):
        return self.levelset.t

    @property
    def inside_elements(self):
        return np.flatnonzero(self.classes == ElementClass.INSIDE)

    @property
    def cut_elements(self):
        return self.cut.elements

    @property
    def active_elements(self):
        return np.flatnonzero(self.active)

    @cached_property
    def intersecting(self):
        """Elements meeting the open discrete domain (some vertex value < 0)."""
        return self.levelset.element_values.min(axis=1) < 0

    def volume_parts(self):
        """Owner elements and corners of every piece of the discrete domain."""
        inside = self.inside_elements
        owners = np.concatenate([inside, self.cut.sub_owner_elements])
        corners = np.concatenate([self.mesh.corners[inside], self.cut.sub_triangles])
        return owners, corners

    def volume_rule(self, degree=4):
        owners, corners = self.volume_parts()
        points, weights = map_triangle_rule(corners, degree)
        return QuadRule(elements=owners, points=points, weights=weights)

    def interface_rule(self, degree=4):
        points, weights = map_line_rule(self.cut.segments, degree)
        return QuadRule(
            elements=self.cut.elements,
            points=points,
            weights=weights,
            normals=self.cut.normals,
        )

    @property
    def measure(self):
        return domain_measure(self)


def interpolate_levelset(case, mesh, t):
    """Nodal interpolant of ``case.phi`` at time ``t``."""
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    values = np.broadcast_to(
        np.asarray(case.phi(x, y, t), dtype=float), x.shape
    ).copy()
    if not np.all(np.isfinite(values)):
        bad = np.flatnonzero(~np.isfinite(values))[0]
        raise NonFinite(
            f"Level set of '{case.name}' is not finite at vertex {bad} "
            f"{tuple(mesh.vertices[bad])}, t={t}."
        )
    return LevelSetField(mesh=mesh, t=float(t), vertex_values=values)


def negative_vertices(levelset, tie_break=DEFAULT_TIE_BREAK):
    """Vertex signs with values ``|v| < tie_break * h`` counted as negative."""
    return levelset.vertex_values < tie_break * levelset.mesh.h


def classify(levelset, delta_h, tie_break=DEFAULT_TIE_BREAK):
    """Build the :class:`DomainSlice` of ``levelset`` for strip width ``delta_h``."""
    if delta_h < 0:
        raise ValueError(f"delta_h must be non-negative, got {delta_h}")
    mesh = levelset.mesh
    values = levelset.element_values
    negative = negative_vertices(levelset, tie_break)[mesh.triangles]
    n_neg = negative.sum(axis=1)
    classes = np.full(mesh.num_triangles, ElementClass.CUT, dtype=np.int8)
    classes[n_neg == 3] = ElementClass.INSIDE
    classes[n_neg == 0] = ElementClass.OUTSIDE

    vmin = values.min(axis=1)
    vmax = values.max(axis=1)
    is_cut = classes == ElementClass.CUT
    active = (vmin <= delta_h) | (classes != ElementClass.OUTSIDE)
    strip = (active & (vmax >= -delta_h)) | is_cut

    cut_elements = np.flatnonzero(is_cut)
    if len(cut_elements):
        sub_triangles, sub_owner, segments, normals = decompose_cut_elements(
            mesh.corners[cut_elements],
            values[cut_elements],
            negative[cut_elements],
            levelset.gradients(cut_elements),
        )
        cut = CutGeometry(
            elements=cut_elements,
            sub_triangles=sub_triangles,
            sub_owner=sub_owner,
            segments=segments,
            normals=normals,
        )
    else:
        cut = _empty_cut()

    facets = _ghost_facet_mask(mesh, active, strip)
    logger.debug(
        "t=%.6g: %d inside, %d cut, %d active, %d strip, %d ghost facets",
        levelset.t,
        int(np.sum(classes == ElementClass.INSIDE)),
        len(cut_elements),
        int(active.sum()),
        int(strip.sum()),
        len(facets),
    )
    return DomainSlice(
        levelset=levelset,
        delta_h=float(delta_h),
        classes=classes,
        active=active,
        strip=strip,
        ghost_facets=facets,
        cut=cut,
    )


def _ghost_facet_mask(mesh, active, strip):
    left = mesh.facet_elements[:, 0]
    right = mesh.facet_elements[:, 1]
    interior = right >= 0
    right = np.where(interior, right, left)
    chosen = (
        interior
        & (left != right)
        & active[left]
        & active[right]
        & (strip[left] | strip[right])
    )
    return np.flatnonzero(chosen)


def ghost_facets(domain_slice, mesh=None):
    """Facets between two active elements at least one of which is in the strip."""
    mesh = domain_slice.mesh if mesh is None else mesh
    if mesh is not domain_slice.mesh:
        raise MeshMismatch("Slice was classified on a different mesh.")
    return _ghost_facet_mask(mesh, domain_slice.active, domain_slice.strip)


def _element_pieces(levelset, element, tie_break):
    mesh = levelset.mesh
    values = levelset.vertex_values[mesh.triangles[element]]
    negative = values < tie_break * mesh.h
    if negative.all():
        return ElementClass.INSIDE, mesh.corners[element][None], None, None
    if not negative.any():
        return ElementClass.OUTSIDE, None, None, None
    subs, _, segments, normals = decompose_cut_elements(
        mesh.corners[element][None],
        values[None],
        negative[None],
        levelset.gradients(np.array([element])),
    )
    return ElementClass.CUT, subs, segments, normals


def cut_volume_quadrature(element, levelset, degree=4, tie_break=DEFAULT_TIE_BREAK):
    """Quadrature on the negative part of one element, exact to ``degree``."""
    kind, pieces, _, _ = _element_pieces(levelset, element, tie_break)
    if kind == ElementClass.OUTSIDE:
        raise EmptyRule(f"Element {element} lies outside the domain.")
    points, weights = map_triangle_rule(pieces, degree)
    return QuadRule(
        elements=np.full(len(pieces), element, dtype=np.int64),
        points=points,
        weights=weights,
    )


def interface_quadrature(element, levelset, degree=4, tie_break=DEFAULT_TIE_BREAK):
    """Gauss rule on the zero-line segment of a cut element, with its normal."""
    kind, _, segments, normals = _element_pieces(levelset, element, tie_break)
    if kind != ElementClass.CUT:
        raise EmptyRule(f"Element {element} is not cut by the interface.")
    points, weights = map_line_rule(segments, degree)
    return QuadRule(
        elements=np.array([element], dtype=np.int64),
        points=points,
        weights=weights,
        normals=normals,
    )


def domain_measure(domain_slice):
    """Area of the discrete domain, summed over its exact polygonal pieces."""
    _, corners = domain_slice.volume_parts()
    if len(corners) == 0:
        return 0.0
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    return float(0.5 * np.sum(np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])))
