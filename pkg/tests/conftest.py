import pytest

from afcsim import pipeline
from afcsim.config import load_config

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def prepared(cfg):
    """(unprepared, pit) fields for the bundled schedule; about 4 s, so built once."""
    return pipeline.prepare_pit(cfg)


@pytest.fixture(scope="session")
def pit(prepared):
    return prepared[1]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<3} {'PASS' if ok else 'FAIL'}  {detail}")
