"""P1 Lagrange space on the background mesh and its per-slice restrictions."""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigInvalid, InactiveElement, MeshMismatch, NonFinite

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FeSpace:
    mesh: object
    degree: int = 1

    def __post_init__(self):
        if self.degree != 1:
            raise ConfigInvalid(f"Only P1 elements are supported, got degree {self.degree}.")

    @property
    def num_dofs(self):
        return self.mesh.num_vertices

    def zero(self):
        return FeFunction(
            space=self,
            coefficients=np.zeros(self.num_dofs),
            active_mask=np.zeros(self.num_dofs, dtype=bool),
        )

    def check_slice(self, domain_slice):
        if domain_slice.mesh is not self.mesh:
            raise MeshMismatch("Slice and space live on different meshes.")


@dataclass(frozen=True, eq=False)
class FeFunction:
    """Coefficients over all background vertices; only ``active_mask`` is meaningful."""

    space: FeSpace
    coefficients: np.ndarray
    active_mask: np.ndarray

    def __post_init__(self):
        if self.coefficients.shape != (self.space.num_dofs,):
            raise MeshMismatch(
                f"Expected {self.space.num_dofs} coefficients, got {self.coefficients.shape}."
            )
        self.coefficients.setflags(write=False)
        self.active_mask.setflags(write=False)

    @property
    def mesh(self):
        return self.space.mesh

    def masked(self):
        """Coefficients with every inactive entry set to zero."""
        return np.where(self.active_mask, self.coefficients, 0.0)

    def _check_elements(self, elements):
        elements = np.atleast_1d(np.asarray(elements))
        dofs = self.mesh.triangles[elements]
        covered = self.active_mask[dofs].all(axis=-1)
        if not np.all(covered):
            bad = elements[~covered][0]
            raise InactiveElement(f"Element {bad} is not active for this function.")
        return dofs

    def values_at(self, elements, points):
        """Values at ``points (..., 2)`` located in ``elements (...)``."""
        dofs = self._check_elements(np.ravel(elements)).reshape(np.shape(elements) + (3,))
        bary = self.mesh.barycentric(elements, points)
        return np.einsum("...i,...i->...", bary, self.coefficients[dofs])

    def gradients_at(self, elements):
        """Constant gradients on ``elements``, shape ``(m, 2)``."""
        elements = np.atleast_1d(np.asarray(elements))
        dofs = self._check_elements(elements)
        return np.einsum(
            "ei,eid->ed", self.coefficients[dofs], self.mesh.bary_gradients[elements]
        )

    def quadrature_values(self, rule):
        """Values at every point of a :class:`~cutfem.geometry.QuadRule`, ``(p, q)``."""
        elements = np.broadcast_to(rule.elements[:, None], rule.weights.shape)
        return self.values_at(elements, rule.points)


def active_dofs(space, domain_slice):
    """Indices of the vertices of active elements, sorted."""
    space.check_slice(domain_slice)
    return np.unique(space.mesh.triangles[domain_slice.active].ravel())


def active_mask(space, domain_slice):
    mask = np.zeros(space.num_dofs, dtype=bool)
    mask[active_dofs(space, domain_slice)] = True
    return mask


def evaluate(u, element, point):
    return float(u.values_at(np.array([element]), np.asarray(point, dtype=float)[None])[0])


def evaluate_gradient(u, element, point=None):
    """Gradient of ``u`` on ``element``; P1 gradients do not depend on ``point``."""
    return u.gradients_at(np.array([element]))[0]


def interpolate(space, g, t, domain_slice):
    """Lagrange interpolant of ``g(x, y, t)`` on the active vertices of a slice."""
    mask = active_mask(space, domain_slice)
    coefficients = np.zeros(space.num_dofs)
    if mask.any():
        x, y = space.mesh.vertices[mask, 0], space.mesh.vertices[mask, 1]
        values = np.broadcast_to(np.asarray(g(x, y, t), dtype=float), x.shape)
        if not np.all(np.isfinite(values)):
            raise NonFinite(f"Interpolated function is not finite at t={t}.")
        coefficients[mask] = values
    return FeFunction(space=space, coefficients=coefficients, active_mask=mask)
