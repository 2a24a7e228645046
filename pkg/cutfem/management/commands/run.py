from django.conf import settings

from cutfem.analysis import error_norms, mass_trace
from cutfem.cases import resolve_case
from cutfem.management.base import SolverCommand
from cutfem.serializers import ErrorReportSerializer, RunOptionsSerializer
from cutfem.stepper import run
from cutfem.utilities import (
    diagnostics_file,
    mass_csv,
    output_dir,
    save_trace,
    write_json,
    write_text,
)


class Command(SolverCommand):
    help = "Run one simulation at space level --Lx and time level --Lt."
    command_name = "run"
    options_serializer = RunOptionsSerializer

    def run_command(self, values):
        case = resolve_case(values["case"])
        out = output_dir(values["out"])
        extra = {}
        if values["dump_matrices"]:
            extra["matrix_dir"] = str(output_dir(out / "matrices"))
        study = self.study_settings(values, **extra)
        mesh = study.mesh(case, values["Lx"])
        config = study.config(case, values["Lt"])

        with diagnostics_file(out / "diagnostics.log"):
            trace = run(case, mesh, config)

        masses, deviation = mass_trace(trace)
        write_text(out / "mass.csv", mass_csv(trace.times, masses))
        save_trace(trace, out / "trace.npz")
        if case.has_exact:
            report = error_norms(trace, case, settings.CUTMOVE["ERROR_QUADRATURE_DEGREE"])
            write_json(out / "errors.json", ErrorReportSerializer, report.as_dict())
            self.stdout.write(
                f"L2L2={report.l2l2:.6e} L2H1={report.l2h1:.6e} LinfL2={report.linfl2:.6e}"
            )
        self.write_metadata(out / "metadata.json", case, values, config.notes)
        self.stdout.write(
            self.style.SUCCESS(
                f"{case.name}: {trace.num_steps} steps, mass deviation {deviation:.3e}, "
                f"results in {out}"
            )
        )
