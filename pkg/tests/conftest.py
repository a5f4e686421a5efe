import numpy as np
import pytest

from satrdo.denoise import DenoiserSpec
from satrdo.saturation import DetectionConfig, run_detection
from satrdo.ugc_synth import SynthSpec, make_pristine_frames, synthesize_ugc

FIXTURE_SEED = 0
SEVERITY = 25


@pytest.fixture(scope="session")
def pristine():
    return make_pristine_frames(count=10, seed=FIXTURE_SEED)


@pytest.fixture(scope="session")
def ugc(pristine):
    return synthesize_ugc(pristine, SynthSpec(severity_qv=SEVERITY))


@pytest.fixture(scope="session")
def deblock_report(ugc):
    return run_detection(ugc, DenoiserSpec("deblock", 20), DetectionConfig(jobs=1))


@pytest.fixture(scope="session")
def gaussian_report(ugc):
    return run_detection(ugc, DenoiserSpec("gaussian", 1.5), DetectionConfig(jobs=1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_acceptance_lines = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.passed else "FAIL"
        detail = getattr(item, "acceptance_detail", "")
        _acceptance_lines.append(f"[{status}] {marker.args[0]}: {detail}".rstrip(": "))


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
