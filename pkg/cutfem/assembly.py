"""Bilinear and linear forms of the cut P1 method on one :class:`DomainSlice`.

Every form is integrated element by element into global triplets and the
result is restricted to the active DOFs of the slice, numbered in
increasing vertex order (see :func:`cutfem.fespace.active_dofs`).
"""
import enum
import logging

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigInvalid, MissingDirichletData, NonFinite
from .fespace import active_dofs
from .quadrature import map_triangle_rule

logger = logging.getLogger(__name__)


class FormVariant(str, enum.Enum):
    IMPLEMENTATION = "impl"
    SKEW = "skew"


class GhostVariant(str, enum.Enum):
    DIRECT = "dir"
    LPS = "lps"
    DJUMP = "djump"


def parse_variant(enum_cls, value):
    try:
        return enum_cls(value)
    except ValueError as e:
        choices = ", ".join(v.value for v in enum_cls)
        raise ConfigInvalid(f"Unknown {enum_cls.__name__} '{value}' (choose {choices}).") from e


def _field(fn, x, y, t):
    return _checked(fn(x, y, t), np.shape(x), t)


def _checked(values, shape, t):
    values = np.broadcast_to(np.asarray(values, dtype=float), shape)
    if not np.all(np.isfinite(values)):
        raise NonFinite(f"Coefficient function is not finite at t={t}.")
    return values


def _velocity(case, x, y, t):
    wx, wy = case.velocity(x, y, t)
    return _checked(wx, np.shape(x), t), _checked(wy, np.shape(x), t)


def _global_matrix(dofs, local, n):
    """Scatter local matrices ``(m, k, k)`` with DOF lists ``(m, k)`` into CSR."""
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _global_vector(dofs, local, n):
    return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=n)


def restrict(matrix, dofs):
    return matrix[dofs][:, dofs].tocsr()


def _volume_data(domain_slice, degree):
    rule = domain_slice.volume_rule(degree)
    mesh = domain_slice.mesh
    elements = np.broadcast_to(rule.elements[:, None], rule.weights.shape)
    bary = mesh.barycentric(elements, rule.points)
    return rule, bary, mesh.triangles[rule.elements]


def _check(space, domain_slice):
    space.check_slice(domain_slice)
    return active_dofs(space, domain_slice)


def assemble_mass(domain_slice, space, degree=2):
    """``M[i, j] = int_{Omega_h} phi_i phi_j``."""
    active = _check(space, domain_slice)
    rule, bary, dofs = _volume_data(domain_slice, max(degree, 2))
    local = np.einsum("pq,pqi,pqj->pij", rule.weights, bary, bary)
    return restrict(_global_matrix(dofs, local, space.num_dofs), active)


def assemble_stiffness(domain_slice, space):
    """``K[i, j] = int_{Omega_h} grad phi_i . grad phi_j``."""
    active = _check(space, domain_slice)
    mesh = domain_slice.mesh
    owners, corners = domain_slice.volume_parts()
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    areas = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    grads = mesh.bary_gradients[owners]
    local = np.einsum("p,pid,pjd->pij", areas, grads, grads)
    return restrict(_global_matrix(mesh.triangles[owners], local, space.num_dofs), active)


def _convection_local(rule, bary, grads, wx, wy):
    # B[i, j] = int (w . grad phi_j) phi_i
    w_dot_grad = wx[:, :, None] * grads[:, None, :, 0] + wy[:, :, None] * grads[:, None, :, 1]
    return np.einsum("pq,pqi,pqj->pij", rule.weights, bary, w_dot_grad)


def assemble_diffusion_convection(
    domain_slice, space, case, t, variant=FormVariant.IMPLEMENTATION, degree=4
):
    """Diffusion, convection and reaction-by-divergence on the discrete domain.

    ``IMPLEMENTATION``: ``alpha grad u . grad v + (w . grad u) v + div(w) u v``.
    ``SKEW``: the convection as half-difference, half the divergence term and
    half the outflow ``(w . n) u v`` on the interface.
    """
    variant = FormVariant(variant)
    active = _check(space, domain_slice)
    mesh = domain_slice.mesh
    rule, bary, dofs = _volume_data(domain_slice, degree)
    x, y = rule.points[..., 0], rule.points[..., 1]
    grads = mesh.bary_gradients[rule.elements]
    areas = rule.weights.sum(axis=1)

    local = case.alpha * np.einsum("p,pid,pjd->pij", areas, grads, grads)
    wx, wy = _velocity(case, x, y, t)
    div = _field(case.div_velocity, x, y, t)
    convection = _convection_local(rule, bary, grads, wx, wy)
    reaction = np.einsum("pq,pq,pqi,pqj->pij", rule.weights, div, bary, bary)
    if variant is FormVariant.IMPLEMENTATION:
        local = local + convection + reaction
    else:
        local = local + 0.5 * (convection - convection.transpose(0, 2, 1)) + 0.5 * reaction
    matrix = _global_matrix(dofs, local, space.num_dofs)

    if variant is FormVariant.SKEW and len(domain_slice.cut.elements):
        matrix = matrix + _outflow_matrix(domain_slice, space, case, t, degree)
    return restrict(matrix, active)


def _interface_data(domain_slice, degree):
    rule = domain_slice.interface_rule(degree)
    mesh = domain_slice.mesh
    elements = np.broadcast_to(rule.elements[:, None], rule.weights.shape)
    bary = mesh.barycentric(elements, rule.points)
    return rule, bary, mesh.triangles[rule.elements]


def _outflow_matrix(domain_slice, space, case, t, degree):
    rule, bary, dofs = _interface_data(domain_slice, degree)
    x, y = rule.points[..., 0], rule.points[..., 1]
    wx, wy = _velocity(case, x, y, t)
    wn = wx * rule.normals[:, None, 0] + wy * rule.normals[:, None, 1]
    local = 0.5 * np.einsum("pq,pq,pqi,pqj->pij", rule.weights, wn, bary, bary)
    return _global_matrix(dofs, local, space.num_dofs)


def _patch(mesh, facets):
    """Elements on both sides of ``facets`` and the 6 local DOF slots."""
    left = mesh.facet_elements[facets, 0]
    right = mesh.facet_elements[facets, 1]
    dofs = np.concatenate([mesh.triangles[left], mesh.triangles[right]], axis=1)
    return left, right, dofs


def _patch_rule(mesh, left, right, degree):
    """Quadrature over each two-element patch, ``(f, 2q, 2)`` points."""
    pl, wl = map_triangle_rule(mesh.corners[left], degree)
    pr, wr = map_triangle_rule(mesh.corners[right], degree)
    return np.concatenate([pl, pr], axis=1), np.concatenate([wl, wr], axis=1)


def _direct_local(mesh, left, right):
    points, weights = _patch_rule(mesh, left, right, 2)
    # u1 - u2 with both element polynomials extended over the whole patch
    lam_left = mesh.barycentric(np.broadcast_to(left[:, None], weights.shape), points)
    lam_right = mesh.barycentric(np.broadcast_to(right[:, None], weights.shape), points)
    psi = np.concatenate([lam_left, -lam_right], axis=2)
    return np.einsum("fq,fqa,fqb->fab", weights, psi, psi) / mesh.h**2


def _lps_local(mesh, left, right):
    points, weights = _patch_rule(mesh, left, right, 2)
    nq = weights.shape[1] // 2
    lam_left = mesh.barycentric(np.broadcast_to(left[:, None], weights.shape), points)
    lam_right = mesh.barycentric(np.broadcast_to(right[:, None], weights.shape), points)
    on_left = np.zeros(weights.shape, dtype=bool)
    on_left[:, :nq] = True
    # piecewise FE basis on the patch: each element's hats vanish on the other element
    chi = np.concatenate(
        [lam_left * on_left[..., None], lam_right * ~on_left[..., None]], axis=2
    )
    centre = np.einsum("fq,fqd->fd", weights, points) / weights.sum(axis=1)[:, None]
    scaled = (points - centre[:, None, :]) / mesh.h
    poly = np.concatenate([np.ones(weights.shape + (1,)), scaled], axis=2)

    mass = np.einsum("fq,fqa,fqb->fab", weights, chi, chi)
    gram = np.einsum("fq,fqk,fql->fkl", weights, poly, poly)
    mixed = np.einsum("fq,fqk,fqa->fka", weights, poly, chi)
    projected = np.einsum("fka,fkb->fab", mixed, np.linalg.solve(gram, mixed))
    local = mass - projected
    return 0.5 * (local + local.transpose(0, 2, 1)) / mesh.h**2


def _facet_geometry(mesh, facets):
    a = mesh.vertices[mesh.facets[facets, 0]]
    b = mesh.vertices[mesh.facets[facets, 1]]
    tangent = b - a
    length = np.linalg.norm(tangent, axis=1)
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / length[:, None]
    return length, normal


def _djump_local(mesh, facets, left, right):
    length, normal = _facet_geometry(mesh, facets)
    jump = np.concatenate(
        [
            np.einsum("fid,fd->fi", mesh.bary_gradients[left], normal),
            -np.einsum("fid,fd->fi", mesh.bary_gradients[right], normal),
        ],
        axis=1,
    )
    return mesh.h * length[:, None, None] * jump[:, :, None] * jump[:, None, :]


def ghost_penalty_local(mesh, facets, variant=GhostVariant.DIRECT):
    """Local 6x6 ghost-penalty matrices and DOF slots for ``facets``."""
    variant = GhostVariant(variant)
    facets = np.asarray(facets, dtype=np.int64)
    left, right, dofs = _patch(mesh, facets)
    if len(facets) == 0:
        return dofs, np.zeros((0, 6, 6))
    if variant is GhostVariant.DIRECT:
        local = _direct_local(mesh, left, right)
    elif variant is GhostVariant.LPS:
        local = _lps_local(mesh, left, right)
    else:
        local = _djump_local(mesh, facets, left, right)
    return dofs, local


def assemble_ghost_penalty(domain_slice, space, variant=GhostVariant.DIRECT, facets=None):
    """Unscaled ghost penalty ``s_h`` summed over the ghost facets of the slice."""
    active = _check(space, domain_slice)
    if facets is None:
        facets = domain_slice.ghost_facets
    dofs, local = ghost_penalty_local(domain_slice.mesh, facets, variant)
    return restrict(_global_matrix(dofs, local, space.num_dofs), active)


def assemble_source(domain_slice, space, f, t, degree=4):
    """``b[i] = int_{Omega_h} f phi_i`` for ``f(x, y, t)``."""
    active = _check(space, domain_slice)
    rule, bary, dofs = _volume_data(domain_slice, degree)
    values = _field(f, rule.points[..., 0], rule.points[..., 1], t)
    local = np.einsum("pq,pq,pqi->pi", rule.weights, values, bary)
    return _global_vector(dofs, local, space.num_dofs)[active]


def assemble_constraint_vector(domain_slice, space):
    """``c[i] = int_{Omega_h} phi_i``; ``c . u`` is the discrete mass of ``u``."""
    return assemble_source(domain_slice, space, lambda x, y, t: 1.0, domain_slice.t, degree=1)


def nitsche_penalty(case, h, lambda0):
    return lambda0 * case.alpha / h


def assemble_nitsche(domain_slice, space, case, t, lambda0=10.0, degree=4):
    """Nitsche terms for ``u = g_D`` on the interface.

    Returns the matrix of
    ``int_Gamma -(grad u . n) v - (grad v . n) u + lambda_h u v`` and the
    vector of ``int_Gamma g_D (-grad v . n + lambda_h v + (w . n) v / 2)``,
    with ``lambda_h = lambda0 * alpha / h``.
    """
    if case.dirichlet is None:
        raise MissingDirichletData(f"Case '{case.name}' has no Dirichlet data.")
    active = _check(space, domain_slice)
    mesh = domain_slice.mesh
    n = space.num_dofs
    if len(domain_slice.cut.elements) == 0:
        return sp.csr_matrix((len(active), len(active))), np.zeros(len(active))
    penalty = nitsche_penalty(case, mesh.h, lambda0)
    rule, bary, dofs = _interface_data(domain_slice, degree)
    x, y = rule.points[..., 0], rule.points[..., 1]
    dn = np.einsum("pid,pd->pi", mesh.bary_gradients[rule.elements], rule.normals)
    lengths = rule.weights.sum(axis=1)

    weighted = np.einsum("pq,pqi->pi", rule.weights, bary)
    local = -weighted[:, :, None] * dn[:, None, :] - dn[:, :, None] * weighted[:, None, :]
    local = local + penalty * np.einsum("pq,pqi,pqj->pij", rule.weights, bary, bary)

    g = _field(case.dirichlet, x, y, t)
    wx, wy = _velocity(case, x, y, t)
    wn = wx * rule.normals[:, None, 0] + wy * rule.normals[:, None, 1]
    rhs = (
        -np.einsum("pq,pq->p", rule.weights, g)[:, None] * dn
        + np.einsum("pq,pq,pqi->pi", rule.weights, g * (penalty + 0.5 * wn), bary)
    )
    logger.debug(
        "Nitsche terms on %d cut elements, interface length %.6g, lambda_h=%.6g",
        len(rule),
        lengths.sum(),
        penalty,
    )
    matrix = restrict(_global_matrix(dofs, local, n), active)
    return matrix, _global_vector(dofs, rhs, n)[active]
