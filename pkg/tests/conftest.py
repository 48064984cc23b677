import math

import pytest

from hardstop import (CantileverBeam, ContactAnalysis, DirectionGrid, HardStopPair,
                      TorusCapProfile)

ACCEPTANCE_LINES: list[str] = []


def reference_pair() -> HardStopPair:
    stage = TorusCapProfile(11.4, 4.0, 10.18, math.radians(-0.2), 29.1)
    ground = TorusCapProfile(11.4, 4.0, 12.129, math.radians(-9.0))
    return HardStopPair(stage, ground, z_ab=0.6645, z_oa=2.0, z_Lo=9.0)


def demo_beam(axial_force: float = 1000.0) -> CantileverBeam:
    """Round titanium-like rod sized so the reference pair fits its fatigue space."""
    return CantileverBeam(length=100.0, modulus=113800.0, diameter=4.0,
                          axial_force=axial_force)


@pytest.fixture(scope="session")
def pair():
    return reference_pair()


@pytest.fixture(scope="session")
def analysis(pair):
    return ContactAnalysis(pair)


@pytest.fixture(scope="session")
def coarse_analysis(pair):
    return ContactAnalysis(pair, min_points=20000)


@pytest.fixture(scope="session")
def coarse_hs(coarse_analysis):
    return coarse_analysis.boundary_field(DirectionGrid(24, 4))


@pytest.fixture(scope="session")
def beam():
    return demo_beam()


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
