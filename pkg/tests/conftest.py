import numpy as np
import pytest

from repairlab import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=kernels.available_backends)
def backend(request):
    prev = kernels.backend()
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(prev)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, name, secs, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'} {name} "
                                    f"({secs:.1f} s) {detail}")
