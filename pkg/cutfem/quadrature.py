"""Reference quadrature rules on the unit simplex and on [0, 1]."""
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import ConfigInvalid


def _orbit_3(weight):
    return [((1 / 3, 1 / 3, 1 / 3), weight)]


def _orbit_21(a, weight):
    b = 1.0 - 2.0 * a
    return [((a, a, b), weight), ((a, b, a), weight), ((b, a, a), weight)]


def _orbit_111(a, b, weight):
    c = 1.0 - a - b
    return [
        ((a, b, c), weight),
        ((a, c, b), weight),
        ((b, a, c), weight),
        ((b, c, a), weight),
        ((c, a, b), weight),
        ((c, b, a), weight),
    ]


# Dunavant symmetric rules, weights relative to the element area
_TRIANGLE_RULES = {
    1: _orbit_3(1.0),
    2: _orbit_21(1 / 6, 1 / 3),
    4: _orbit_21(0.445948490915965, 0.223381589678011)
    + _orbit_21(0.091576213509771, 0.109951743655322),
    6: _orbit_21(0.249286745170910, 0.116786275726379)
    + _orbit_21(0.063089014491502, 0.050844906370207)
    + _orbit_111(0.053145049844817, 0.310352451033784, 0.082851075618374),
}


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Return ``(barycentric, weights)`` exact for total degree ``degree``.

    ``barycentric`` has shape ``(q, 3)``; ``weights`` sum to one so that
    multiplying by the element area gives physical weights.
    """
    supported = sorted(_TRIANGLE_RULES)
    chosen = next((d for d in supported if d >= max(int(degree), 1)), None)
    if chosen is None:
        raise ConfigInvalid(
            f"Triangle quadrature of degree {degree} is not available "
            f"(maximum {supported[-1]})."
        )
    rule = _TRIANGLE_RULES[chosen]
    points = np.array([p for p, _ in rule], dtype=float)
    weights = np.array([w for _, w in rule], dtype=float)
    points.setflags(write=False)
    weights = weights / weights.sum()
    weights.setflags(write=False)
    return points, weights


@lru_cache(maxsize=None)
def line_rule(degree):
    """Gauss-Legendre rule on [0, 1], exact for polynomials of ``degree``."""
    npoints = max(1, (int(degree) + 2) // 2)
    nodes, weights = leggauss(npoints)
    points = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


def map_triangle_rule(corners, degree):
    """Map the reference rule onto physical triangles.

    ``corners`` is ``(m, 3, 2)``; returns points ``(m, q, 2)`` and weights
    ``(m, q)`` (absolute areas, so orientation does not matter).
    """
    bary, ref_weights = triangle_rule(degree)
    corners = np.asarray(corners, dtype=float)
    points = np.einsum("qi,mid->mqd", bary, corners)
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    areas = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return points, areas[:, None] * ref_weights[None, :]


def map_line_rule(endpoints, degree):
    """Map the Gauss rule onto segments ``(k, 2, 2)``; returns points and weights."""
    s, ref_weights = line_rule(degree)
    endpoints = np.asarray(endpoints, dtype=float)
    a, b = endpoints[:, 0], endpoints[:, 1]
    points = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    lengths = np.linalg.norm(b - a, axis=1)
    return points, lengths[:, None] * ref_weights[None, :]
