import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from cutfem.analysis import StudySettings
from cutfem.exceptions import ConfigInvalid, CutFemError
from cutfem.serializers import (
    FORMS,
    GAMMA_SCALINGS,
    GHOSTS,
    PATTERNS,
    SCHEMES,
    SOLVER_CHOICES,
    RunMetadataSerializer,
)
from cutfem.utilities import versions, write_json

logger = logging.getLogger("cutfem.commands")


def validated(serializer_class, data):
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        details = "; ".join(
            f"{key}: {' '.join(map(str, messages))}"
            for key, messages in serializer.errors.items()
        )
        raise ConfigInvalid(f"Invalid options: {details}")
    return serializer.validated_data


class SolverCommand(BaseCommand):
    """Shared flags of the commands that run the solver.

    Subclasses implement ``run_command(values)`` and get the validated
    options; a :class:`CutFemError` becomes a ``CommandError`` with the exit
    code of its category.
    """

    options_serializer = None

    def add_arguments(self, parser):
        parser.add_argument("case", help="Builtin case name or path of a YAML case file.")
        parser.add_argument("--Lx", default="0", help="Space refinement level.")
        parser.add_argument("--Lt", default="0", help="Time refinement level.")
        parser.add_argument("--scheme", choices=SCHEMES)
        parser.add_argument("--ghost", choices=GHOSTS)
        parser.add_argument("--form", choices=FORMS)
        parser.add_argument("--cgamma", help="Stabilization constant c_gamma.")
        parser.add_argument("--gamma-scaling", choices=GAMMA_SCALINGS)
        parser.add_argument(
            "--conservative",
            action="store_true",
            default=None,
            help="Enforce mass conservation with a Lagrange multiplier.",
        )
        parser.add_argument("--dt-div", help="Base time step T/n instead of the case's dt0.")
        parser.add_argument("--jitter", default="0", help="Random vertex perturbation, < 0.3.")
        parser.add_argument("--seed", default="0")
        parser.add_argument("--pattern", choices=PATTERNS)
        parser.add_argument("--nitsche", action="store_true", help="Impose g_D weakly on the interface.")
        parser.add_argument("--lambda0", help="Nitsche penalty constant.")
        parser.add_argument("--solver", choices=SOLVER_CHOICES)
        parser.add_argument("--condition", action="store_true", help="Record condition estimates.")
        parser.add_argument("--dump-matrices", action="store_true")
        parser.add_argument("--out", help="Output directory.")

    def option_data(self, options):
        defaults = settings.CUTMOVE
        data = {
            "Lx": options["Lx"],
            "Lt": options["Lt"],
            "scheme": options["scheme"] or defaults["SCHEME"],
            "ghost": options["ghost"] or defaults["GHOST"],
            "form": options["form"] or defaults["FORM"],
            "cgamma": options["cgamma"] if options["cgamma"] is not None else defaults["C_GAMMA"],
            "gamma_scaling": options["gamma_scaling"] or defaults["GAMMA_SCALING"],
            "conservative": bool(options["conservative"]),
            "jitter": options["jitter"],
            "seed": options["seed"],
            "pattern": options["pattern"] or defaults["MESH_PATTERN"],
            "nitsche": options["nitsche"],
            "lambda0": (
                options["lambda0"] if options["lambda0"] is not None
                else defaults["NITSCHE_LAMBDA0"]
            ),
            "solver": options["solver"] or defaults["SOLVER"],
            "condition": options["condition"],
            "dump_matrices": options["dump_matrices"],
            "out": str(options["out"] or settings.CUTMOVE_OUTPUT_DIR),
        }
        if options["dt_div"] is not None:
            data["dt_div"] = options["dt_div"]
        return data

    def study_settings(self, values, **extra):
        defaults = settings.CUTMOVE
        step_options = {
            "scheme": values["scheme"],
            "ghost": values["ghost"],
            "form": values["form"],
            "c_gamma": values["cgamma"],
            "gamma_scaling": values["gamma_scaling"],
            "solver": values["solver"],
            "solver_tol": defaults["SOLVER_TOL"],
            "nitsche": values["nitsche"],
            "nitsche_lambda0": values["lambda0"],
            "quadrature_degree": defaults["QUADRATURE_DEGREE"],
            "estimate_condition": values["condition"],
            "condition_iterations": defaults["CONDITION_ITERATIONS"],
            "tie_break": defaults["TIE_BREAK"],
            **extra,
        }
        # the flag only switches conservation on; otherwise the case decides
        if values["conservative"]:
            step_options["conservative"] = True
        return StudySettings(
            options=step_options,
            jitter=values["jitter"],
            seed=values["seed"],
            pattern=values["pattern"],
            rho_max=defaults["RHO_MAX"],
            dt_div=values.get("dt_div"),
        )

    def write_metadata(self, path, case, values, notes=()):
        data = {
            "command": self.command_name,
            "case": case.name,
            "created": timezone.now(),
            "options": {key: value for key, value in values.items() if key != "case"},
            "quadrature_degree": settings.CUTMOVE["QUADRATURE_DEGREE"],
            "error_quadrature_degree": settings.CUTMOVE["ERROR_QUADRATURE_DEGREE"],
            "notes": [*case.notes, *notes],
            "versions": versions(),
        }
        write_json(path, RunMetadataSerializer, data)

    def handle(self, *args, **options):
        try:
            values = validated(self.options_serializer, self.option_data(options))
            values["case"] = options["case"]
            self.run_command(values)
        except CutFemError as e:
            logger.error("%s: %s", type(e).__name__, e)
            raise CommandError(str(e), returncode=e.exit_code) from e

    def run_command(self, values):
        raise NotImplementedError
