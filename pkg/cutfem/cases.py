"""Benchmark problems and the case-file loader.

A case bundles the analytic data of one moving-domain problem. Every field
is a vectorized callable of ``(x, y, t)``; the velocity returns its two
components. Expression-backed cases also keep their source strings so they
can be written back to a case file.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import sympy
import yaml
from rest_framework import serializers as drf_serializers

from .exceptions import ConfigInvalid, MissingField, UnknownCase
from .expressions import T as TIME, X, Y, Expression
from .mesh import Box
from .serializers import CaseFileSerializer

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class VectorField:
    x: Expression
    y: Expression

    def __call__(self, x, y, t=0.0):
        return self.x(x, y, t), self.y(x, y, t)

    @property
    def is_zero(self):
        return self.x.is_zero and self.y.is_zero


@dataclass(frozen=True, eq=False)
class ProblemCase:
    name: str
    box: Box
    T: float
    alpha: float
    phi: object
    velocity: object
    div_velocity: object
    w_inf: float
    initial: object
    exact: object = None
    exact_gradient: object = None
    source: object = None
    dirichlet: object = None
    h0: float = None
    dt0: float = None
    conservative: bool = False
    expressions: dict = None
    notes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigInvalid(f"Diffusivity must be positive, got {self.alpha}.")
        if not self.T > 0:
            raise ConfigInvalid(f"Final time must be positive, got {self.T}.")
        if self.w_inf < 0:
            raise ConfigInvalid(f"w_inf must be non-negative, got {self.w_inf}.")

    @property
    def has_exact(self):
        return self.exact is not None

    @property
    def serializable(self):
        return self.expressions is not None

    def rhs(self, x, y, t):
        if self.source is None:
            return np.zeros(np.shape(x))
        return self.source(x, y, t)


def _at_initial_time(expression):
    return lambda x, y, t=0.0: expression(x, y, 0.0)


def _zero(x, y, t=0.0):
    return np.zeros(np.shape(x))


# Example 1: a circle of radius R traveling along x with rho(t) = (sin(2 pi t)/pi, 0)
TRAVEL_RADIUS = 0.5
TRAVEL_CENTER = "sin(2*pi*t)/pi"
TRAVEL_DISTANCE = f"sqrt((x - {TRAVEL_CENTER})^2 + y^2)"


def _travel_offset(x, y, t):
    return x - np.sin(2 * np.pi * t) / np.pi, y


def _travel_exact_gradient(x, y, t):
    # grad of 1/2 + 1/2 cos(k r) with sin(k r)/r written through sinc
    k = np.pi / TRAVEL_RADIUS
    dx, dy = _travel_offset(x, y, t)
    r = np.hypot(dx, dy)
    scale = -0.5 * k**2 * np.sinc(k * r / np.pi)
    return scale * dx, scale * dy


def _travel_source(alpha):
    def source(x, y, t):
        # the exact solution is transported with w, so only diffusion remains
        k = np.pi / TRAVEL_RADIUS
        dx, dy = _travel_offset(x, y, t)
        r = np.hypot(dx, dy)
        return alpha * (0.5 * k**2 * np.cos(k * r) + 0.5 * k**2 * np.sinc(k * r / np.pi))

    return source


def _example1():
    sources = {
        "phi": f"{TRAVEL_DISTANCE} - {TRAVEL_RADIUS}",
        "velocity": ["2*cos(2*pi*t)", "0"],
        "div_velocity": "0",
        "exact": f"cos(pi/(2*{TRAVEL_RADIUS})*{TRAVEL_DISTANCE})^2",
    }
    case = _expression_case(
        name="example1_travel",
        box=(-0.7, 0.9, -0.7, 0.7),
        T=0.2,
        alpha=1.0,
        w_inf=2.0,
        sources=sources,
        h0=0.2,
        dt0=0.1,
        derive_source=False,
    )
    return replace(
        case,
        exact_gradient=_travel_exact_gradient,
        source=_travel_source(case.alpha),
        dirichlet=case.exact,
        notes=(
            "exact solution uses R = R0 = 0.5",
            "w_inf = 2 is the time maximum of |w . n|, so delta_h = 2 dt",
        ),
    )


def _radial_case(name, sign, r0):
    alpha = 0.2
    radius = f"{r0}*exp({'' if sign > 0 else '-'}t)"
    sources = {
        "phi": f"sqrt(x^2 + y^2) - {radius}",
        "velocity": ["x", "y"] if sign > 0 else ["-x", "-y"],
        "div_velocity": "2" if sign > 0 else "-2",
        "exact": f"cos(pi*sqrt(x^2 + y^2)/({radius}))",
    }

    def radius_at(t):
        return r0 * np.exp(sign * t)

    def exact_gradient(x, y, t):
        a = np.pi / radius_at(t)
        z = a * np.hypot(x, y)
        scale = -(a**2) * np.sinc(z / np.pi)
        return scale * x, scale * y

    def source(x, y, t):
        a = np.pi / radius_at(t)
        z = a * np.hypot(x, y)
        return 2 * sign * np.cos(z) + alpha * a**2 * (np.cos(z) + np.sinc(z / np.pi))

    case = _expression_case(
        name=name,
        box=(-1.25, 1.25, -1.25, 1.25),
        T=math.log(2.0),
        alpha=alpha,
        w_inf=1.0,
        sources=sources,
        h0=0.4,
        dt0=0.5,
        derive_source=False,
    )
    return replace(
        case,
        exact_gradient=exact_gradient,
        source=source,
        dirichlet=case.exact,
        notes=("dt0 = 0.5 does not divide T = ln 2; levels use dt = T / (2 * 2^Lt)",),
    )


def _example3():
    sources = {
        "phi": f"{TRAVEL_DISTANCE} - {TRAVEL_RADIUS}",
        "velocity": ["2*cos(2*pi*t)", "0"],
        "div_velocity": "0",
        "initial": f"sin(pi*{TRAVEL_DISTANCE})",
        "source": "0",
    }
    return _expression_case(
        name="example3_mass",
        box=(-0.7, 0.9, -0.7, 0.7),
        T=0.2,
        alpha=0.1,
        w_inf=2.0,
        sources=sources,
        h0=0.2,
        dt0=0.1,
    )


# Example 4: two circles meet at t = T/2 and separate again
TOPOLOGY_T = 1.5
TOPOLOGY_RADIUS = 0.5


def _topology_phi(x, y, t):
    lower = np.hypot(x, y - (t - 0.75))
    upper = np.hypot(x, y - (0.75 - t))
    return np.minimum(lower, upper) - TOPOLOGY_RADIUS


def _topology_velocity(x, y, t):
    y = np.asarray(y, dtype=float)
    first_half = t <= TOPOLOGY_T / 2
    up = ((y > 0) & first_half) | ((y < 0) & (not first_half))
    return np.zeros(np.shape(y)), np.where(up, 1.0, -1.0)


def _topology_initial(x, y, t=0.0):
    return np.where(np.asarray(y) > 0, 1.0, -1.0)


def _example4():
    return ProblemCase(
        name="example4_topology",
        box=Box(-1.0, 1.0, -1.5, 1.5),
        T=TOPOLOGY_T,
        alpha=0.1,
        phi=_topology_phi,
        velocity=_topology_velocity,
        div_velocity=_zero,
        w_inf=1.0,
        initial=_topology_initial,
        source=_zero,
        h0=0.07,
        dt0=TOPOLOGY_T / 10,
        conservative=True,
        notes=(
            "circle radius R = 0.5 and box (-1,1)x(-1.5,1.5) are implementation choices",
            "vertical velocity is +1 for y > 0 while t <= T/2 and reversed afterwards; "
            "this sign is kept as given and opposes the motion of the circle centres",
        ),
    )


BUILTIN_CASES = {
    "example1_travel": _example1,
    "example2_grow": lambda: _radial_case("example2_grow", +1, 0.5),
    "example2_shrink": lambda: _radial_case("example2_shrink", -1, 1.0),
    "example3_mass": _example3,
    "example4_topology": _example4,
}


def builtin_case(name):
    try:
        factory = BUILTIN_CASES[name]
    except KeyError:
        raise UnknownCase(
            f"Unknown case '{name}' (choose {', '.join(sorted(BUILTIN_CASES))})."
        ) from None
    return factory()


def manufactured_source(exact, velocity, alpha):
    """``f = du/dt + div(u w) - alpha * laplace(u)`` as an expression."""
    u = exact.expr
    expr = (
        sympy.diff(u, TIME)
        + sympy.diff(u * velocity.x.expr, X)
        + sympy.diff(u * velocity.y.expr, Y)
        - alpha * (sympy.diff(u, X, 2) + sympy.diff(u, Y, 2))
    )
    return Expression(expr=expr)


def _expression_case(
    name, box, T, alpha, w_inf, sources, h0=None, dt0=None, conservative=False,
    derive_source=True,
):
    compiled = {}
    for key in ("phi", "div_velocity", "initial", "exact", "source", "dirichlet"):
        if sources.get(key) is not None:
            compiled[key] = Expression.from_source(sources[key])
    velocity_sources = sources.get("velocity") or ["0", "0"]
    velocity = VectorField(*(Expression.from_source(s) for s in velocity_sources))

    if "phi" not in compiled:
        raise MissingField(f"Case '{name}' has no level set 'phi'.")
    if "div_velocity" not in compiled:
        if not velocity.is_zero:
            raise MissingField(f"Case '{name}' has a velocity but no 'div_velocity'.")
        compiled["div_velocity"] = Expression.from_source("0")
    if w_inf is None:
        if not velocity.is_zero:
            raise MissingField(f"Case '{name}' has a velocity but no 'w_inf'.")
        w_inf = 0.0

    exact = compiled.get("exact")
    initial = compiled.get("initial")
    if initial is None:
        if exact is None:
            raise MissingField(f"Case '{name}' needs 'initial' or 'exact'.")
        initial = exact
    source = compiled.get("source")
    if source is None and exact is not None and derive_source:
        source = manufactured_source(exact, velocity, alpha)
        logger.debug("Derived source for '%s': %s", name, source.expr)

    exact_gradient = None
    if exact is not None:
        gx, gy = exact.diff(X), exact.diff(Y)
        exact_gradient = lambda x, y, t: (gx(x, y, t), gy(x, y, t))  # noqa: E731

    serial = {
        "name": name,
        "box": list(box.as_tuple() if isinstance(box, Box) else box),
        "T": T,
        "alpha": alpha,
        "w_inf": w_inf,
        "velocity": list(velocity_sources),
        "conservative": conservative,
        **{k: v for k, v in sources.items() if k != "velocity" and v is not None},
    }
    if h0 is not None:
        serial["h0"] = h0
    if dt0 is not None:
        serial["dt0"] = dt0

    return ProblemCase(
        name=name,
        box=box if isinstance(box, Box) else Box(*box),
        T=float(T),
        alpha=float(alpha),
        phi=compiled["phi"],
        velocity=velocity,
        div_velocity=compiled["div_velocity"],
        w_inf=float(w_inf),
        initial=_at_initial_time(initial),
        exact=exact,
        exact_gradient=exact_gradient,
        source=source,
        dirichlet=compiled.get("dirichlet"),
        h0=h0,
        dt0=dt0,
        conservative=conservative,
        expressions=serial,
    )


def case_from_data(data):
    """Build a case from a validated mapping (see ``CaseFileSerializer``)."""
    serializer = CaseFileSerializer(data=data)
    if not serializer.is_valid():
        raise _validation_error(serializer.errors)
    values = serializer.validated_data
    sources = {
        key: values.get(key)
        for key in ("phi", "velocity", "div_velocity", "initial", "exact", "source", "dirichlet")
    }
    return _expression_case(
        name=values["name"],
        box=tuple(values["box"]),
        T=values["T"],
        alpha=values["alpha"],
        w_inf=values.get("w_inf"),
        sources=sources,
        h0=values.get("h0"),
        dt0=values.get("dt0"),
        conservative=values["conservative"],
    )


def _validation_error(errors):
    codes = drf_serializers.ValidationError(errors).get_codes()
    flat = [
        (key, code)
        for key, value in codes.items()
        for code in (value if isinstance(value, list) else [value])
    ]
    missing = sorted(key for key, code in flat if code == "required")
    if missing:
        return MissingField(f"Case file is missing {', '.join(missing)}.")
    details = "; ".join(f"{key}: {' '.join(map(str, msgs))}" for key, msgs in errors.items())
    return ConfigInvalid(f"Invalid case file: {details}")


def load_case(path):
    """Read a YAML case file."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigInvalid(f"Cannot read case file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigInvalid(f"Case file {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigInvalid(f"Case file {path} must contain a mapping.")
    data.setdefault("name", path.stem)
    return case_from_data(data)


def dump_case(case, path):
    if not case.serializable:
        raise ConfigInvalid(f"Case '{case.name}' is not expression-backed and cannot be written.")
    # closed-form builtin sources are re-derived from the exact solution on load
    data = dict(case.expressions)
    Path(path).write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")


def resolve_case(name_or_path):
    """A builtin name or the path of a case file."""
    if name_or_path in BUILTIN_CASES:
        return builtin_case(name_or_path)
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") or path.exists():
        if not path.exists():
            raise ConfigInvalid(f"Case file {path} does not exist.")
        return load_case(path)
    return builtin_case(name_or_path)


def base_steps(case):
    """Number of time steps at level 0: ``ceil(T / dt0)``."""
    dt0 = case.dt0 if case.dt0 is not None else case.T / 2
    return max(1, math.ceil(case.T / dt0 - 1e-9))


def time_step_for_level(case, level):
    return case.T / (base_steps(case) * 2 ** int(level))


def mesh_size(case):
    if case.h0 is not None:
        return case.h0
    return min(case.box.lengths) / 8
