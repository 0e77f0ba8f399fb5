import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write(tmp_path):
    """Write text to a file under tmp_path and return its path."""

    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" in props and getattr(rep, "when", "") in ("call", "setup"):
                lines.append(props["criterion"])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines), key=lambda s: int(s.split()[0])):
            number, status, detail = line.split(" ", 2)
            terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
