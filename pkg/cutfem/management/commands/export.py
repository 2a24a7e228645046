from django.core.management.base import BaseCommand, CommandError

from cutfem.exceptions import CutFemError
from cutfem.utilities import load_trace, write_text


class Command(BaseCommand):
    help = "Write the vertex table 'x y phi u active' of one step of a saved trace."

    def add_arguments(self, parser):
        parser.add_argument("--trace", required=True, help="trace.npz written by 'run'.")
        parser.add_argument("--step", type=int, required=True)
        parser.add_argument("--out", required=True, help="Output file.")

    def handle(self, *args, **options):
        try:
            snapshot = load_trace(options["trace"])
            write_text(options["out"], snapshot.export_field(options["step"]))
        except CutFemError as e:
            raise CommandError(str(e), returncode=e.exit_code) from e
        self.stdout.write(f"Step {options['step']} of '{snapshot.case}' written to {options['out']}")
