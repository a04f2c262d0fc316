from __future__ import annotations

import pytest

from threedpg.config import HyperConfig, OuConfig, ScheduleConfig


@pytest.fixture
def tiny_hyper() -> HyperConfig:
    """Small nets and a short warm-up so runner-level tests take seconds."""
    return HyperConfig(minibatch=16, replay_size=500, tau_soft=0.05, actor_hidden=(8,), critic_hidden=(16, 8),
                       schedules=ScheduleConfig(scale=50.0), ou=OuConfig(sigma=0.3))


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line ``criterion N: PASS|FAIL (detail)`` and return the verdict."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
