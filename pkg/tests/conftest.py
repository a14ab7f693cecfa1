import pytest

from obukhov import (ValidationMode, build_barriers, build_ladder, figure2_params,
                     integrate_backward_galerkin)
from obukhov.cli import STRICT_PARAMS

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def strict_ladder():
    return build_ladder(STRICT_PARAMS, ValidationMode.STRICT_VISCOUS)


@pytest.fixture(scope="session")
def strict_envelope(strict_ladder):
    return build_barriers(strict_ladder)


@pytest.fixture(scope="session")
def strict_runs(strict_ladder):
    return {mode: integrate_backward_galerkin(strict_ladder, mode=mode)
            for mode in ("inviscid", "viscous-masked")}


@pytest.fixture(scope="session")
def fig2_ladder():
    return build_ladder(figure2_params(K=12))


@pytest.fixture(scope="session")
def fig2_backward(fig2_ladder):
    return integrate_backward_galerkin(fig2_ladder, mode="viscous-masked")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
