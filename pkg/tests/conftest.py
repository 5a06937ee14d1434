import pytest

from dungeonforge import _kernel

_criterion_lines: list[tuple[int, str]] = []


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    """Force every jitted kernel through compilation (or the disk cache) once."""
    _kernel.warmup()


def record_criterion(number: int, passed: bool, detail: str) -> bool:
    """Queue one acceptance line for the terminal summary; returns `passed`."""
    line = f"CRITERION {number} {'PASS' if passed else 'FAIL'}: {detail}"
    _criterion_lines.append((number, line))
    return passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_criterion_lines):
            terminalreporter.write_line(line)
