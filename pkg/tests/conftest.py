import numpy as np
import pytest

from polarcue.depthloss.geometry import CameraIntrinsics, Pose
from polarcue.synthscene import Plane, SceneSpec, Texture, render


def single_plane_scene(normal=(0.2, -0.3, -1.0), point=(0, 0, 4.0), size=24, specular=True, frames=None):
    k = CameraIntrinsics.centered(size, size, size)
    plane = Plane.through(normal, point, texture=Texture("noise", scale=0.5, base=0.5, contrast=0.3, seed=3),
                          specular=specular, dop=0.8 if specular else 0.1)
    return SceneSpec("plane", size, size, k, (plane,), frames or (Pose.identity(),))


@pytest.fixture
def specular_plane():
    spec = single_plane_scene()
    return spec, render(spec)


def plane_depth_map(normal, point, k, shape):
    """Depth of the plane ``n . X = n . point`` along each pixel ray, written independently."""
    n = np.asarray(normal, float) / np.linalg.norm(normal)
    d = n @ np.asarray(point, float)
    v, u = np.mgrid[0:shape[0], 0:shape[1]].astype(float)
    return d / (n[0] * (u - k.cx) / k.fx + n[1] * (v - k.cy) / k.fy + n[2])


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, printed in the terminal summary."""
    def record(number, name, ok, detail, seconds):
        status = "PASS" if ok else "FAIL"
        _ACCEPTANCE_LINES.append((number, f"[{status}] criterion {number:>2} {name}: {detail} ({seconds:.1f} s)"))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
