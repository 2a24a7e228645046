from django.conf import settings

from cutfem.analysis import convergence_study, stabilization_study
from cutfem.cases import resolve_case
from cutfem.management.base import SolverCommand
from cutfem.serializers import NORMS, ConvergenceOptionsSerializer, EocTableSerializer
from cutfem.utilities import output_dir, thread_count, write_json, write_text

EOC_T_NOTE = "eoc_t is computed down the finest space column, eoc_x along the finest time row."


class Command(SolverCommand):
    help = "Run a refinement study over --Lx a:b and --Lt c:d and write one table per norm."
    command_name = "convergence"
    options_serializer = ConvergenceOptionsSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--norms", default=",".join(NORMS), help="Comma separated norms.")
        parser.add_argument(
            "--cgamma-list",
            help="Comma separated c_gamma values; runs the stabilization study instead.",
        )

    def option_data(self, options):
        data = super().option_data(options)
        data["norms"] = options["norms"]
        if options["cgamma_list"]:
            data["cgamma_list"] = options["cgamma_list"]
        return data

    def run_command(self, values):
        case = resolve_case(values["case"])
        out = output_dir(values["out"])
        study = self.study_settings(values)
        degree = settings.CUTMOVE["ERROR_QUADRATURE_DEGREE"]
        notes = [EOC_T_NOTE, *study.config(case, values["Lt"][0]).notes]

        if values.get("cgamma_list"):
            table = stabilization_study(
                case,
                values["Lx"],
                values["Lt"][0],
                values["cgamma_list"],
                study=study,
                threads=thread_count(),
                degree=degree,
            )
            write_text(out / "stabilization.csv", table.to_csv())
            self.write_metadata(out / "metadata.json", case, values, notes)
            self.stdout.write(self.style.SUCCESS(f"Stabilization study written to {out}"))
            return

        result = convergence_study(
            case,
            values["Lx"],
            values["Lt"],
            study=study,
            norms=values["norms"],
            threads=thread_count(),
            degree=degree,
        )
        for name, table in result.tables.items():
            write_text(out / f"{name}.csv", table.to_csv())
            write_json(out / f"{name}.json", EocTableSerializer, table.as_dict())
        if not case.has_exact:
            write_text(out / "mass.csv", result.mass.to_csv())
        self.write_metadata(out / "metadata.json", case, values, notes)
        self.stdout.write(
            self.style.SUCCESS(
                f"{len(result.reports)} runs of '{case.name}' finished, tables in {out}"
            )
        )
