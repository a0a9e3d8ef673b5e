import json
from pathlib import Path

import pytest

from sddvs.experiments import default_config, run_experiment

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())

_acceptance = {}


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


@pytest.fixture(scope="session")
def acceptance_log():
    """Criterion number -> (passed, detail); printed at the end of the run."""
    return _acceptance


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_acceptance):
        ok, detail = _acceptance[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    """Desk-scale runs shared by the acceptance and CLI tests (built lazily)."""
    cache = {}

    def get(name, **over):
        key = (name, repr(sorted(over.items())))
        if key not in cache:
            cfg = default_config(name).with_(**over)
            out = tmp_path_factory.mktemp(f"{name}_run")
            cache[key] = (run_experiment(cfg, str(out)), out, cfg)
        return cache[key]

    return get
