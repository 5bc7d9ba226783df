import os
import re

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# check key (leading criterion number) -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def _number(key):
    return int(re.match(r"\d+", key).group())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    groups = {}
    for key, (ok, detail) in ACCEPTANCE.items():
        groups.setdefault(_number(key), []).append((key, ok, detail))
    for n in sorted(groups):
        checks = sorted(groups[n])
        ok = all(c[1] for c in checks)
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}")
        for key, sub_ok, detail in checks:
            terminalreporter.write_line(f"    [{'pass' if sub_ok else 'FAIL'}] {key}: {detail}")


@pytest.fixture
def acceptance():
    def record(key, ok, detail):
        ACCEPTANCE[key] = (bool(ok), detail)
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


@pytest.fixture
def tmp_out(tmp_path, monkeypatch):
    monkeypatch.setenv("LEVYESCAPE_OUTPUT", str(tmp_path / "out"))
    return tmp_path / "out"
