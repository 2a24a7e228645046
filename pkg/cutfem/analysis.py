"""Space-time error norms, mass traces and experimental orders of convergence."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cases import mesh_size, time_step_for_level
from .exceptions import MeshMismatch, NoExactSolution, NonPositiveError
from .mesh import mesh_for_level
from .stepper import StepConfig, discrete_mass, run, strip_layers

logger = logging.getLogger(__name__)

NORMS = ("L2L2", "L2H1", "LinfL2")
EMPTY_CELL = "---"


@dataclass(frozen=True)
class ErrorReport:
    l2l2: float
    l2h1: float
    linfl2: float
    step_l2: tuple
    step_h1: tuple
    masses: tuple
    mass_deviation: float

    def norm(self, name):
        try:
            return {"L2L2": self.l2l2, "L2H1": self.l2h1, "LinfL2": self.linfl2}[name]
        except KeyError:
            raise ValueError(f"Unknown norm '{name}' (choose {', '.join(NORMS)})") from None

    def as_dict(self):
        return {
            "l2l2": self.l2l2,
            "l2h1": self.l2h1,
            "linfl2": self.linfl2,
            "step_l2": list(self.step_l2),
            "step_h1": list(self.step_h1),
            "masses": list(self.masses),
            "mass_deviation": self.mass_deviation,
        }


def mass_trace(trace):
    """Masses ``U_h^k`` of every state and ``max_k |U_h^k - U_h^0|``."""
    masses = np.array([discrete_mass(u, s) for _, s, u in trace.states()])
    deviation = float(np.max(np.abs(masses - masses[0]))) if len(masses) else 0.0
    return masses, deviation


def _step_errors(u, domain_slice, case, t, degree):
    rule = domain_slice.volume_rule(degree)
    if len(rule) == 0:
        return 0.0, 0.0
    x, y = rule.points[..., 0], rule.points[..., 1]
    diff = u.quadrature_values(rule) - case.exact(x, y, t)
    gradients = u.gradients_at(rule.elements)
    gx, gy = case.exact_gradient(x, y, t)
    grad_diff = (gradients[:, None, 0] - gx) ** 2 + (gradients[:, None, 1] - gy) ** 2
    return rule.integrate(diff**2), rule.integrate(grad_diff)


def error_norms(trace, case=None, degree=6):
    """Discrete space-time errors of ``trace`` against the exact solution.

    The sums run over the steps ``n >= 1``; the initial interpolant is not
    counted.
    """
    case = trace.case if case is None else case
    if not case.has_exact:
        raise NoExactSolution(f"Case '{case.name}' has no exact solution.")
    step_l2, step_h1 = [], []
    l2l2 = l2h1 = 0.0
    for n in range(1, len(trace)):
        dt = trace.times[n] - trace.times[n - 1]
        e2, g2 = _step_errors(
            trace.solutions[n], trace.slices[n], case, trace.times[n], degree
        )
        step_l2.append(math.sqrt(e2))
        step_h1.append(math.sqrt(g2))
        l2l2 += dt * e2
        l2h1 += dt * g2
    masses, deviation = mass_trace(trace)
    return ErrorReport(
        l2l2=math.sqrt(l2l2),
        l2h1=math.sqrt(l2h1),
        linfl2=max(step_l2, default=0.0),
        step_l2=tuple(step_l2),
        step_h1=tuple(step_h1),
        masses=tuple(float(m) for m in masses),
        mass_deviation=deviation,
    )


def _rates(coarse, fine):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(np.asarray(coarse, dtype=float) / np.asarray(fine, dtype=float))


def _cell(value, fmt):
    if value is None or not np.isfinite(value):
        return EMPTY_CELL
    return fmt % value


@dataclass(frozen=True, eq=False)
class EocTable:
    """Errors ``errors[i, j]`` at time level ``lt_levels[i]`` and space level ``lx_levels[j]``.

    The margins follow the usual table layout: ``eoc_x`` along the finest
    time row, ``eoc_t`` down the finest space column, ``eoc_xt`` along the
    diagonal ``Lt = Lx`` and ``eoc_xtt`` along ``Lt = 2 Lx``. Entries that
    have no predecessor are NaN.
    """

    errors: np.ndarray
    lt_levels: tuple
    lx_levels: tuple
    norm: str = ""

    def __post_init__(self):
        errors = np.asarray(self.errors, dtype=float)
        if errors.ndim != 2 or errors.shape != (len(self.lt_levels), len(self.lx_levels)):
            raise ValueError(
                f"Error grid of shape {errors.shape} does not match "
                f"{len(self.lt_levels)} x {len(self.lx_levels)} levels"
            )
        object.__setattr__(self, "errors", errors)
        object.__setattr__(self, "lt_levels", tuple(int(v) for v in self.lt_levels))
        object.__setattr__(self, "lx_levels", tuple(int(v) for v in self.lx_levels))

    def error(self, lt, lx):
        if lt not in self.lt_levels or lx not in self.lx_levels:
            return math.nan
        return self.errors[self.lt_levels.index(lt), self.lx_levels.index(lx)]

    @property
    def eoc_x(self):
        row = self.errors[-1]
        return np.concatenate([[math.nan], _rates(row[:-1], row[1:])])

    @property
    def eoc_t(self):
        column = self.errors[:, -1]
        return np.concatenate([[math.nan], _rates(column[:-1], column[1:])])

    def _diagonal_rates(self, time_factor):
        rates = []
        for lx in self.lx_levels:
            coarse = self.error(time_factor * (lx - 1), lx - 1)
            fine = self.error(time_factor * lx, lx)
            rates.append(float(_rates(coarse, fine)))
        return np.array(rates)

    @property
    def eoc_xt(self):
        return self._diagonal_rates(1)

    @property
    def eoc_xtt(self):
        return self._diagonal_rates(2)

    def to_csv(self):
        header = ["Lt\\Lx", *map(str, self.lx_levels), "eoc_t"]
        lines = [",".join(header)]
        for lt, row, rate in zip(self.lt_levels, self.errors, self.eoc_t):
            cells = [_cell(v, "%.6e") for v in row]
            lines.append(",".join([str(lt), *cells, _cell(rate, "%.3f")]))
        for name in ("eoc_x", "eoc_xt", "eoc_xtt"):
            cells = [_cell(v, "%.3f") for v in getattr(self, name)]
            lines.append(",".join([name, *cells, EMPTY_CELL]))
        return "\n".join(lines) + "\n"

    def as_dict(self):
        def plain(values):
            return [None if not np.isfinite(v) else float(v) for v in values]

        return {
            "norm": self.norm,
            "lx_levels": list(self.lx_levels),
            "lt_levels": list(self.lt_levels),
            "errors": [list(map(float, row)) for row in self.errors],
            "eoc_x": plain(self.eoc_x),
            "eoc_t": plain(self.eoc_t),
            "eoc_xt": plain(self.eoc_xt),
            "eoc_xtt": plain(self.eoc_xtt),
        }


def eoc_table(errors, lt_levels=None, lx_levels=None, norm=""):
    """Validate a positive error grid and wrap it in an :class:`EocTable`."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 2 or errors.size == 0:
        raise ValueError(f"Expected a non-empty 2D error grid, got shape {errors.shape}")
    if not np.all(np.isfinite(errors)) or np.any(errors <= 0):
        raise NonPositiveError("EOCs need finite, strictly positive errors.")
    lt_levels = range(errors.shape[0]) if lt_levels is None else lt_levels
    lx_levels = range(errors.shape[1]) if lx_levels is None else lx_levels
    return EocTable(errors=errors, lt_levels=lt_levels, lx_levels=lx_levels, norm=norm)


def solution_difference(trace_a, trace_b, degree=4):
    """``||u_a^N - u_b^N||`` on the final discrete domain shared by both traces."""
    slice_a, slice_b = trace_a.slices[-1], trace_b.slices[-1]
    same_mesh = np.array_equal(trace_a.mesh.vertices, trace_b.mesh.vertices) and np.array_equal(
        trace_a.mesh.triangles, trace_b.mesh.triangles
    )
    if not same_mesh or not np.array_equal(
        slice_a.levelset.vertex_values, slice_b.levelset.vertex_values
    ):
        raise MeshMismatch("Traces do not end on the same discrete domain.")
    u_a, u_b = trace_a.final, trace_b.final
    rule = slice_a.volume_rule(degree)
    if len(rule) == 0:
        return 0.0
    diff = u_a.quadrature_values(rule) - u_b.quadrature_values(rule)
    return math.sqrt(rule.integrate(diff**2))


@dataclass(frozen=True)
class StudySettings:
    """Everything a refinement study holds fixed across its grid cells."""

    options: dict = field(default_factory=dict)
    jitter: float = 0.0
    seed: int = 0
    pattern: str = "diagonal"
    rho_max: float = 3.0
    dt_div: int = None

    def mesh(self, case, lx):
        return mesh_for_level(
            case.box, mesh_size(case), lx,
            jitter=self.jitter, seed=self.seed, pattern=self.pattern, rho_max=self.rho_max,
        )

    def time_step(self, case, lt):
        if self.dt_div is not None:
            return case.T / (self.dt_div * 2 ** int(lt))
        return time_step_for_level(case, lt)

    def config(self, case, lt):
        options = dict(self.options)
        options.setdefault("conservative", case.conservative)
        return StepConfig(dt=self.time_step(case, lt), **options)

    def run(self, case, lx, lt):
        return run(case, self.mesh(case, lx), self.config(case, lt))


@dataclass(frozen=True, eq=False)
class ConvergenceResult:
    tables: dict
    mass: EocTable
    reports: dict


def _grid_run(case, study, lx, lt, degree):
    logger.info("Running '%s' at Lx=%d, Lt=%d", case.name, lx, lt)
    trace = study.run(case, lx, lt)
    if case.has_exact:
        report = error_norms(trace, case, degree)
        return report, report.mass_deviation
    return None, mass_trace(trace)[1]


def _map_cells(fn, cells, threads):
    if threads <= 1:
        return [fn(*cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(lambda cell: fn(*cell), cells))


def convergence_study(case, lx_levels, lt_levels, study=None, norms=NORMS, threads=1, degree=6):
    """Run every ``(Lt, Lx)`` cell and collect one table per norm.

    Cells are independent and may run in parallel; results keep grid order.
    """
    study = StudySettings() if study is None else study
    lx_levels, lt_levels = list(lx_levels), list(lt_levels)
    if not lx_levels or not lt_levels:
        raise ValueError("Level ranges must not be empty")
    cells = [(lx, lt) for lt in lt_levels for lx in lx_levels]
    results = _map_cells(
        lambda lx, lt: _grid_run(case, study, lx, lt, degree), cells, threads
    )
    shape = (len(lt_levels), len(lx_levels))
    reports = {cell: report for cell, (report, _) in zip(cells, results)}
    masses = np.array([deviation for _, deviation in results]).reshape(shape)
    mass = EocTable(errors=masses, lt_levels=lt_levels, lx_levels=lx_levels, norm="mass")
    tables = {}
    if case.has_exact:
        for name in norms:
            grid = np.array([reports[cell].norm(name) for cell in cells]).reshape(shape)
            tables[name] = eoc_table(grid, lt_levels, lx_levels, norm=name)
    return ConvergenceResult(tables=tables, mass=mass, reports=reports)


@dataclass(frozen=True, eq=False)
class StabilizationTable:
    """L2(L2) errors per ``(scaling, c_gamma)`` row and space level, with the strip layers."""

    lx_levels: tuple
    lt: int
    layers: tuple
    rows: dict

    def to_csv(self):
        lines = [",".join(["scaling", "c_gamma", *map(str, self.lx_levels)])]
        lines.append(",".join(["K", EMPTY_CELL, *map(str, self.layers)]))
        for (scaling, c_gamma), errors in self.rows.items():
            cells = [_cell(v, "%.6e") for v in errors]
            lines.append(",".join([scaling, "%g" % c_gamma, *cells]))
        return "\n".join(lines) + "\n"


def stabilization_study(
    case, lx_levels, lt, c_gammas, scalings=("strip", "constant"), study=None, threads=1,
    degree=6,
):
    """L2(L2) error of ``case`` for each stabilization constant and scaling."""
    if not case.has_exact:
        raise NoExactSolution(f"Case '{case.name}' has no exact solution.")
    study = StudySettings() if study is None else study
    lx_levels = list(lx_levels)
    variants = [(str(s), float(c)) for s in scalings for c in c_gammas]
    cells = [(variant, lx) for variant in variants for lx in lx_levels]

    def cell_error(variant, lx):
        scaling, c_gamma = variant
        options = {**study.options, "c_gamma": c_gamma, "gamma_scaling": scaling}
        trace = replace(study, options=options).run(case, lx, lt)
        layer = strip_layers(trace.slices[-1].delta_h, trace.mesh.h)
        return error_norms(trace, case, degree).l2l2, layer

    results = _map_cells(cell_error, cells, threads)
    rows = {variant: [] for variant in variants}
    layers = {}
    for (variant, lx), (error, layer) in zip(cells, results):
        rows[variant].append(error)
        layers[lx] = layer
    return StabilizationTable(
        lx_levels=tuple(lx_levels),
        lt=int(lt),
        layers=tuple(layers[lx] for lx in lx_levels),
        rows=rows,
    )
