import pytest

from dtnopt.trace import TraceSample


def static_trace(points, duration=100.0):
    """Nodes that never move: one sample each at t=0 and at ``duration``."""
    out = [TraceSample(0.0, n, float(x), float(y)) for n, (x, y) in points.items()]
    out += [TraceSample(float(duration), n, float(x), float(y)) for n, (x, y) in points.items()]
    return out


def scripted_trace(frames, period=1.0):
    """``frames[k]`` maps node -> (x, y) at time ``k * period``."""
    out = []
    for k, frame in enumerate(frames):
        out += [TraceSample(k * period, n, float(x), float(y)) for n, (x, y) in frame.items()]
    return out


@pytest.fixture
def two_close():
    return static_trace({"0": (0, 0), "1": (5, 0)}, duration=10)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
