"""Small builders shared by the test modules."""
import math
from pathlib import Path

import numpy as np

from cutfem.cases import case_from_data
from cutfem.mesh import build_structured_mesh, make_mesh

DATA_DIR = Path(__file__).resolve().parent / "data"

UNIT_TRIANGLE = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]


def single_triangle():
    return make_mesh(UNIT_TRIANGLE, [[0, 1, 2]])


def square_mesh(n, half_width=1.0, **kwargs):
    return build_structured_mesh((-half_width, half_width, -half_width, half_width), n, **kwargs)


def stationary_case(radius=0.6, alpha=1.0, T=1.0, **fields):
    """A disk that does not move, no convection; ``fields`` adds expressions."""
    data = {
        "name": "stationary_disk",
        "box": [-1, 1, -1, 1],
        "T": T,
        "alpha": alpha,
        "phi": f"x^2 + y^2 - {radius * radius!r}",
    }
    data.update(fields)
    data.setdefault("initial", "1")
    return case_from_data(data)


def l2_norm(u, domain_slice, degree=4):
    rule = domain_slice.volume_rule(degree)
    if len(rule) == 0:
        return 0.0
    return math.sqrt(rule.integrate(u.quadrature_values(rule) ** 2))


def vertex_values(mesh, fn):
    return np.asarray(fn(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float)
