import logging
import platform
from contextlib import contextmanager
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
from django.conf import settings
from rest_framework.renderers import JSONRenderer

from .exceptions import ConfigInvalid, IndexOutOfRange

logger = logging.getLogger(__name__)

PACKAGES = ("numpy", "scipy", "sympy", "Django", "djangorestframework", "PyYAML")


def output_dir(path=None):
    """The output directory, created if needed; defaults to ``CUTMOVE_OUTPUT_DIR``."""
    path = Path(path) if path else Path(settings.CUTMOVE_OUTPUT_DIR)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigInvalid(f"Cannot create output directory {path}: {e}") from e
    return path


def thread_count():
    return max(1, int(settings.CUTMOVE_THREADS))


def versions():
    found = {"python": platform.python_version()}
    for package in PACKAGES:
        try:
            found[package] = version(package)
        except PackageNotFoundError:
            found[package] = "unknown"
    return found


def write_text(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def render_json(serializer_class, data):
    serializer = serializer_class(instance=data)
    return JSONRenderer().render(serializer.data, renderer_context={"indent": 2})


def write_json(path, serializer_class, data):
    Path(path).write_bytes(render_json(serializer_class, data) + b"\n")


def mass_csv(times, masses):
    lines = ["step,t,mass"]
    lines += [f"{n},{t:.17g},{m:.17g}" for n, (t, m) in enumerate(zip(times, masses))]
    return "\n".join(lines) + "\n"


@contextmanager
def diagnostics_file(path):
    """Copy the diagnostics channel into ``path`` while the block runs."""
    channel = logging.getLogger("cutfem.diagnostics")
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(message)s"))
    handler.setLevel(logging.INFO)
    previous_level = channel.level
    channel.addHandler(handler)
    if channel.getEffectiveLevel() > logging.INFO:
        channel.setLevel(logging.INFO)
    try:
        yield handler
    finally:
        channel.removeHandler(handler)
        channel.setLevel(previous_level)
        handler.close()


@dataclass(frozen=True, eq=False)
class TraceSnapshot:
    """What ``save_trace`` keeps of a run: geometry, times and per-step fields."""

    case: str
    vertices: np.ndarray
    triangles: np.ndarray
    times: np.ndarray
    levelsets: np.ndarray
    coefficients: np.ndarray
    active: np.ndarray

    @property
    def num_states(self):
        return len(self.times)

    def export_field(self, step):
        """Vertex table ``x y phi u active`` of state ``step``; inactive ``u`` is 0."""
        if not 0 <= step < self.num_states:
            raise IndexOutOfRange(
                f"Step {step} is out of range; the trace has states 0..{self.num_states - 1}."
            )
        active = self.active[step]
        u = np.where(active, self.coefficients[step], 0.0)
        lines = ["x y phi u active"]
        for (x, y), phi, value, flag in zip(self.vertices, self.levelsets[step], u, active):
            lines.append(f"{x:.17g} {y:.17g} {phi:.17g} {value:.17g} {int(flag)}")
        return "\n".join(lines) + "\n"


def snapshot(trace):
    return TraceSnapshot(
        case=trace.case.name,
        vertices=trace.mesh.vertices,
        triangles=trace.mesh.triangles,
        times=np.array(trace.times),
        levelsets=np.array([s.levelset.vertex_values for s in trace.slices]),
        coefficients=np.array([u.coefficients for u in trace.solutions]),
        active=np.array([u.active_mask for u in trace.solutions]),
    )


def save_trace(trace, path):
    snap = snapshot(trace)
    with open(path, "wb") as handle:
        np.savez_compressed(
            handle,
            case=np.array(snap.case),
            vertices=snap.vertices,
            triangles=snap.triangles,
            times=snap.times,
            levelsets=snap.levelsets,
            coefficients=snap.coefficients,
            active=snap.active,
        )


def load_trace(path):
    try:
        with np.load(path, allow_pickle=False) as data:
            return TraceSnapshot(
                case=str(data["case"]),
                vertices=data["vertices"],
                triangles=data["triangles"],
                times=data["times"],
                levelsets=data["levelsets"],
                coefficients=data["coefficients"],
                active=data["active"].astype(bool),
            )
    except FileNotFoundError as e:
        raise ConfigInvalid(f"Trace file {path} does not exist.") from e
    except (OSError, ValueError, KeyError) as e:
        raise ConfigInvalid(f"Cannot read trace file {path}: {e}") from e
