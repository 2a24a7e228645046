"""Time loop of the Eulerian cut finite element method.

Every step classifies the background mesh against the level set at the new
time, assembles the stabilized implicit Euler or BDF2 system on the active
DOFs and solves it. The previous solutions are reused as background
coefficient vectors, which is valid as long as the new discrete domain lies
inside the previous extended (active) region.
"""
import enum
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .assembly import (
    FormVariant,
    GhostVariant,
    assemble_constraint_vector,
    assemble_diffusion_convection,
    assemble_ghost_penalty,
    assemble_mass,
    assemble_nitsche,
    assemble_source,
    assemble_stiffness,
    parse_variant,
)
from .exceptions import (
    ConfigInvalid,
    InclusionViolated,
    MeshMismatch,
    TimestepRestrictionWarning,
)
from .fespace import FeFunction, FeSpace, active_dofs, active_mask, interpolate
from .geometry import DEFAULT_TIE_BREAK, classify, interpolate_levelset
from .linalg import (
    SOLVERS,
    as_csr,
    bordered_matrix,
    dump_matrix,
    estimate_condition,
    relative_residual,
    solve,
    solve_bordered,
)

logger = logging.getLogger(__name__)
diagnostics_logger = logging.getLogger("cutfem.diagnostics")


class Scheme(str, enum.Enum):
    IE = "ie"
    BDF2 = "bdf2"


class GammaScaling(str, enum.Enum):
    STRIP = "strip"
    CONSTANT = "constant"


@dataclass(frozen=True)
class StepConfig:
    dt: float
    scheme: Scheme = Scheme.IE
    ghost: GhostVariant = GhostVariant.DIRECT
    form: FormVariant = FormVariant.IMPLEMENTATION
    c_gamma: float = 1.0
    gamma_scaling: GammaScaling = GammaScaling.STRIP
    conservative: bool = False
    delta_h: float = None
    solver: str = "lu"
    solver_tol: float = 1e-10
    nitsche: bool = False
    nitsche_lambda0: float = 10.0
    quadrature_degree: int = 4
    estimate_condition: bool = False
    condition_iterations: int = 50
    tie_break: float = DEFAULT_TIE_BREAK
    matrix_dir: str = None

    def __post_init__(self):
        for name, enum_cls in (
            ("scheme", Scheme),
            ("ghost", GhostVariant),
            ("form", FormVariant),
            ("gamma_scaling", GammaScaling),
        ):
            object.__setattr__(self, name, parse_variant(enum_cls, getattr(self, name)))
        if not self.dt > 0:
            raise ConfigInvalid(f"Time step must be positive, got {self.dt}.")
        if not self.c_gamma > 0:
            raise ConfigInvalid(f"c_gamma must be positive, got {self.c_gamma}.")
        if self.delta_h is not None and self.delta_h < 0:
            raise ConfigInvalid(f"delta_h must be non-negative, got {self.delta_h}.")
        if self.solver not in SOLVERS:
            raise ConfigInvalid(f"Unknown solver '{self.solver}' (choose {', '.join(SOLVERS)}).")
        if not self.solver_tol > 0:
            raise ConfigInvalid(f"Solver tolerance must be positive, got {self.solver_tol}.")
        if not 1 <= self.quadrature_degree <= 6:
            raise ConfigInvalid(
                f"Quadrature degree must lie in 1..6, got {self.quadrature_degree}."
            )

    @classmethod
    def from_settings(cls, dt, **overrides):
        """Config with defaults from ``settings.CUTMOVE``; ``None`` overrides are ignored."""
        from django.conf import settings

        defaults = settings.CUTMOVE
        values = {
            "scheme": defaults["SCHEME"],
            "ghost": defaults["GHOST"],
            "form": defaults["FORM"],
            "c_gamma": defaults["C_GAMMA"],
            "gamma_scaling": defaults["GAMMA_SCALING"],
            "solver": defaults["SOLVER"],
            "solver_tol": defaults["SOLVER_TOL"],
            "nitsche_lambda0": defaults["NITSCHE_LAMBDA0"],
            "quadrature_degree": defaults["QUADRATURE_DEGREE"],
            "condition_iterations": defaults["CONDITION_ITERATIONS"],
            "tie_break": defaults["TIE_BREAK"],
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(dt=dt, **values)

    @property
    def notes(self):
        notes = []
        if self.scheme is Scheme.BDF2:
            notes.append("BDF2 starts with one implicit Euler step of the same size.")
            if self.conservative:
                notes.append("Conservative BDF2 enforces mass(u^n) = mass(u^{n-1}).")
        return notes


@dataclass
class Diagnostics:
    """What one completed step reports on the diagnostics channel."""

    step: int
    t: float
    delta_h: float
    K: int
    gamma_s: float
    xi_h: float
    xi_h_dt: float
    included: bool
    residual: float
    mass: float
    condition: float = None
    multiplier: float = None

    def line(self):
        return (
            f"step={self.step} t={self.t:.10g} delta_h={self.delta_h:.6e} K={self.K} "
            f"gamma_s={self.gamma_s:.6g} xi_h_dt={self.xi_h_dt:.6e} "
            f"residual={self.residual:.3e} included={int(self.included)}"
        )

    def as_dict(self):
        return asdict(self)


@dataclass(eq=False)
class SolutionTrace:
    case: object
    space: FeSpace
    config: StepConfig
    times: list = field(default_factory=list)
    slices: list = field(default_factory=list)
    solutions: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def mesh(self):
        return self.space.mesh

    @property
    def num_steps(self):
        return len(self.times) - 1

    @property
    def final(self):
        return self.solutions[-1]

    def __len__(self):
        return len(self.times)

    def states(self):
        return zip(self.times, self.slices, self.solutions)

    def append(self, t, domain_slice, u, diagnostics=None):
        if self.times and not t > self.times[-1]:
            raise ValueError(f"Time {t} does not advance past {self.times[-1]}.")
        self.times.append(float(t))
        self.slices.append(domain_slice)
        self.solutions.append(u)
        if diagnostics is not None:
            self.diagnostics.append(diagnostics)


@dataclass(frozen=True, eq=False)
class StepSystem:
    """Assembled step system on the active DOFs ``dofs`` of one slice."""

    matrix: object
    rhs: np.ndarray
    dofs: np.ndarray
    gamma_s: float
    K: int
    constraint: np.ndarray = None
    constraint_rhs: float = None

    @property
    def full_matrix(self):
        if self.constraint is None:
            return self.matrix
        return bordered_matrix(self.matrix, self.constraint)

    @property
    def full_rhs(self):
        if self.constraint is None:
            return self.rhs
        return np.append(self.rhs, self.constraint_rhs)


@dataclass(frozen=True, eq=False)
class StepOutcome:
    solution: FeFunction
    system: StepSystem
    residual: float
    multiplier: float = None
    condition: float = None


def compute_strip_width(case, dt, scheme=Scheme.IE):
    """``delta_h = w_inf * dt``, doubled for BDF2 which reads two slices back."""
    scheme = parse_variant(Scheme, scheme)
    factor = 2.0 if scheme is Scheme.BDF2 else 1.0
    return factor * case.w_inf * dt


def strip_layers(delta_h, h):
    """Strip thickness in element layers, at least one."""
    if not h > 0:
        raise ValueError(f"Mesh size must be positive, got {h}")
    return max(1, math.ceil(delta_h / h))


def stabilization_weight(delta_h, h, c_gamma=1.0, scaling=GammaScaling.STRIP):
    scaling = parse_variant(GammaScaling, scaling)
    if scaling is GammaScaling.CONSTANT:
        return float(c_gamma)
    return float(c_gamma * strip_layers(delta_h, h))


def discrete_mass(u, domain_slice):
    """``int_{Omega_h} u`` over the discrete domain of ``domain_slice``."""
    dofs = active_dofs(u.space, domain_slice)
    return float(assemble_constraint_vector(domain_slice, u.space) @ u.masked()[dofs])


def discrete_time_step_bound(case, domain_slice, form=FormVariant.IMPLEMENTATION, t=None, degree=4):
    """``xi_h`` such that the step system is coercive for ``dt < 1 / xi_h``."""
    form = parse_variant(FormVariant, form)
    t = domain_slice.t if t is None else t
    rule = domain_slice.volume_rule(degree)
    div_max = 0.0
    if len(rule):
        div = case.div_velocity(rule.points[..., 0], rule.points[..., 1], t)
        div_max = float(np.max(np.abs(div)))
    boundary = 0.0
    if form is FormVariant.SKEW and len(domain_slice.cut_elements):
        interface = domain_slice.interface_rule(degree)
        wx, wy = case.velocity(interface.points[..., 0], interface.points[..., 1], t)
        wn = (
            np.asarray(wx) * interface.normals[:, None, 0]
            + np.asarray(wy) * interface.normals[:, None, 1]
        )
        boundary = float(np.max(np.abs(wn))) ** 2 / (4 * case.alpha)
    return 0.5 * (div_max + case.alpha + boundary)


def check_inclusion(slice_prev, slice_curr):
    """Whether every element meeting the new domain was active before."""
    if slice_prev.mesh is not slice_curr.mesh:
        raise MeshMismatch("Inclusion check needs two slices of the same mesh.")
    return bool(np.all(slice_prev.active[slice_curr.intersecting]))


def _as_history(previous):
    if isinstance(previous, FeFunction):
        return [previous]
    history = list(previous)
    if not history:
        raise ValueError("A step needs at least one previous solution.")
    return history


def build_system(
    case, domain_slice, space, config, t, previous, gamma_s=None, previous_mass=None
):
    """Assemble the step matrix and right-hand side without solving.

    ``previous`` lists the earlier solutions, most recent first. BDF2 uses
    the second one when present and falls back to implicit Euler otherwise.
    """
    history = _as_history(previous)
    dofs = active_dofs(space, domain_slice)
    degree = config.quadrature_degree
    dt = config.dt
    K = strip_layers(domain_slice.delta_h, space.mesh.h)
    if gamma_s is None:
        gamma_s = stabilization_weight(
            domain_slice.delta_h, space.mesh.h, config.c_gamma, config.gamma_scaling
        )

    mass = assemble_mass(domain_slice, space)
    matrix = assemble_diffusion_convection(domain_slice, space, case, t, config.form, degree)
    if gamma_s:
        matrix = matrix + gamma_s * assemble_ghost_penalty(domain_slice, space, config.ghost)
    rhs = assemble_source(domain_slice, space, case.rhs, t, degree)

    u1 = history[0].masked()[dofs]
    if config.scheme is Scheme.BDF2 and len(history) > 1:
        u2 = history[1].masked()[dofs]
        matrix = matrix + (1.5 / dt) * mass
        rhs = rhs + mass @ (4 * u1 - u2) / (2 * dt)
    else:
        matrix = matrix + mass / dt
        rhs = rhs + mass @ u1 / dt

    if config.nitsche:
        nitsche_matrix, nitsche_rhs = assemble_nitsche(
            domain_slice, space, case, t, config.nitsche_lambda0, degree
        )
        matrix = matrix + nitsche_matrix
        rhs = rhs + nitsche_rhs

    constraint = None
    if config.conservative:
        if previous_mass is None:
            raise ConfigInvalid("The conservative step needs the previous mass.")
        constraint = assemble_constraint_vector(domain_slice, space)
    return StepSystem(
        matrix=as_csr(matrix),
        rhs=rhs,
        dofs=dofs,
        gamma_s=gamma_s,
        K=K,
        constraint=constraint,
        constraint_rhs=previous_mass,
    )


def solve_step(
    case, domain_slice, space, config, t, previous, previous_mass=None, gamma_s=None
):
    system = build_system(
        case, domain_slice, space, config, t, previous,
        gamma_s=gamma_s, previous_mass=previous_mass,
    )
    multiplier = None
    if system.constraint is not None:
        x, multiplier = solve_bordered(
            system.matrix,
            system.constraint,
            system.rhs,
            system.constraint_rhs,
            tol=config.solver_tol,
            method=config.solver,
        )
        residual = relative_residual(
            system.full_matrix, np.append(x, multiplier), system.full_rhs
        )
    else:
        x = solve(system.matrix, system.rhs, tol=config.solver_tol, method=config.solver)
        residual = relative_residual(system.matrix, x, system.rhs)

    condition = None
    if config.estimate_condition:
        condition = estimate_condition(system.full_matrix, config.condition_iterations)

    coefficients = np.zeros(space.num_dofs)
    coefficients[system.dofs] = x
    solution = FeFunction(
        space=space, coefficients=coefficients, active_mask=active_mask(space, domain_slice)
    )
    return StepOutcome(
        solution=solution,
        system=system,
        residual=float(residual),
        multiplier=multiplier,
        condition=condition,
    )


def step(previous, domain_slice, config, case, t, previous_mass=None):
    """Advance to ``t`` on ``domain_slice`` and return the new solution."""
    history = _as_history(previous)
    return solve_step(
        case, domain_slice, history[0].space, config, t, history, previous_mass=previous_mass
    ).solution


def energy_norm(u, domain_slice, space, case, gamma_s, ghost=GhostVariant.DIRECT):
    """``(alpha/2 |grad u|^2 + |u|^2 + gamma_s s_h(u, u))^(1/2)`` on the discrete domain."""
    dofs = active_dofs(space, domain_slice)
    v = u.masked()[dofs]
    value = (
        0.5 * case.alpha * v @ (assemble_stiffness(domain_slice, space) @ v)
        + v @ (assemble_mass(domain_slice, space) @ v)
        + gamma_s * v @ (assemble_ghost_penalty(domain_slice, space, ghost) @ v)
    )
    return math.sqrt(max(float(value), 0.0))


def _number_of_steps(case, dt):
    n_steps = round(case.T / dt)
    if n_steps < 1 or abs(n_steps * dt - case.T) > 1e-12 * case.T:
        raise ConfigInvalid(f"T={case.T} is not an integer multiple of dt={dt}.")
    return n_steps


def run(case, mesh, config, num_steps=None):
    """Integrate ``case`` on ``mesh`` from ``t = 0`` to ``T``.

    With ``num_steps`` the loop stops at ``num_steps * dt`` and ``T`` need
    not be a multiple of ``dt``.
    """
    dt = config.dt
    n_steps = _number_of_steps(case, dt) if num_steps is None else int(num_steps)
    if n_steps < 0:
        raise ConfigInvalid(f"Number of steps must be non-negative, got {n_steps}.")
    space = FeSpace(mesh)
    delta_h = config.delta_h
    if delta_h is None:
        delta_h = compute_strip_width(case, dt, config.scheme)

    def slice_at(t):
        return classify(interpolate_levelset(case, mesh, t), delta_h, config.tie_break)

    trace = SolutionTrace(case=case, space=space, config=config)
    slice0 = slice_at(0.0)
    trace.append(0.0, slice0, interpolate(space, case.initial, 0.0, slice0))
    mass = discrete_mass(trace.final, slice0)
    logger.info(
        "Running '%s': %d steps of dt=%.6g, %d triangles, h=%.4g, delta_h=%.4g",
        case.name, n_steps, dt, mesh.num_triangles, mesh.h, delta_h,
    )

    warned = False
    for n in range(1, n_steps + 1):
        t = n * dt
        domain_slice = slice_at(t)
        previous_slices = trace.slices[-2:] if config.scheme is Scheme.BDF2 else trace.slices[-1:]
        if not all(check_inclusion(prev, domain_slice) for prev in previous_slices):
            raise InclusionViolated(
                f"Step {n} (t={t:.6g}): the domain left the previous active region; "
                f"increase delta_h (currently {delta_h:.4g}) or reduce dt."
            )

        xi_h = discrete_time_step_bound(
            case, domain_slice, config.form, t, config.quadrature_degree
        )
        if xi_h * dt >= 1 and not warned:
            message = (
                f"dt={dt:.4g} violates the time-step restriction dt < 1/xi_h = "
                f"{1 / xi_h:.4g} at step {n}."
            )
            logger.warning(message)
            warnings.warn(message, TimestepRestrictionWarning, stacklevel=2)
            warned = True

        history = list(reversed(trace.solutions[-2:]))
        outcome = solve_step(
            case, domain_slice, space, config, t, history,
            previous_mass=mass if config.conservative else None,
        )
        mass = discrete_mass(outcome.solution, domain_slice)
        if config.matrix_dir is not None:
            dump_matrix(
                outcome.system.full_matrix,
                Path(config.matrix_dir) / f"step_{n:04d}.mtx",
                comment=f"{case.name} step {n} t={t:.10g}",
            )

        diagnostics = Diagnostics(
            step=n,
            t=t,
            delta_h=delta_h,
            K=outcome.system.K,
            gamma_s=outcome.system.gamma_s,
            xi_h=xi_h,
            xi_h_dt=xi_h * dt,
            included=True,
            residual=outcome.residual,
            mass=mass,
            condition=outcome.condition,
            multiplier=outcome.multiplier,
        )
        trace.append(t, domain_slice, outcome.solution, diagnostics)
        diagnostics_logger.info(diagnostics.line())
        logger.debug("Step %d/%d done, mass %.10g", n, n_steps, mass)
    return trace
