import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fgpd import synth  # noqa: E402


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """40 training and 20 test synthetic images with their manifests."""
    out = tmp_path_factory.mktemp("corpus")
    return synth.generate_corpus(out, n_train=40, n_test=20, seed=7)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
