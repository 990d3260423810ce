import json
import os

import pytest
from hypothesis import HealthCheck, settings

from scenetext.providers import HashEmbedder
from scenetext.scene import CameraPose, Scene, SceneObject, Vec3
from scenetext.synthetic import generate_synthetic_scene

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FORWARD_Y = CameraPose(Vec3(0, -5, 1), Vec3(0, 1, 0), Vec3(0, 0, 1))


def box(oid, label, centroid, size=(1, 1, 1)):
    return SceneObject(oid, label, Vec3.of(centroid), Vec3.of(size))


def make_scene(objects, camera=FORWARD_Y, scene_id="s"):
    return Scene(scene_id, tuple(objects), camera)


@pytest.fixture
def camera():
    return FORWARD_Y


@pytest.fixture
def embedder():
    return HashEmbedder(32)


@pytest.fixture(scope="session")
def scene20():
    return generate_synthetic_scene(11, 20)


@pytest.fixture
def write_json(tmp_path):
    def _write(name, obj):
        path = tmp_path / name
        path.write_text(json.dumps(obj), encoding="utf-8")
        return path

    return _write


_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.outcome != "passed":
        _acceptance[name] = "FAIL" if report.failed else ("PASS" if report.passed else report.outcome.upper())


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        terminalreporter.write_line(f"{_acceptance[name]:<5} {name}")
