import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from memtbwp.netlist import load_netlist  # noqa: E402


@pytest.fixture
def ml():
    return load_netlist("ml_parallel.net")


@pytest.fixture
def mrl():
    return load_netlist("mrl.net")


@pytest.fixture
def neural():
    return load_netlist("neural.net")


# ---------------------------------------------------------------------------
# acceptance bookkeeping: one pass/fail line per criterion in the summary

ACCEPTANCE: dict[int, dict] = {}


def record_criterion(number: int, ok: bool, detail: str = "") -> None:
    entry = ACCEPTANCE.setdefault(number, {"ok": True, "details": []})
    entry["ok"] = entry["ok"] and ok
    if detail:
        entry["details"].append(detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        entry = ACCEPTANCE[n]
        status = "PASS" if entry["ok"] else "FAIL"
        detail = "; ".join(entry["details"])
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}".rstrip())
