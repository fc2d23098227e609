import re

import pytest
from hypothesis import settings

from fpia.corpus import toy_qubo

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_VERDICTS: dict[str, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def toy():
    return toy_qubo()


@pytest.fixture
def verdict():
    """``verdict("6a", ok, detail)`` records one acceptance check and returns ``ok``."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        crit = re.match(r"\d+", label).group()
        _VERDICTS.setdefault(crit, []).append((label, bool(ok), detail))
        print(f"criterion {label}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_VERDICTS, key=int):
        parts = _VERDICTS[crit]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{label}: {'ok' if good else 'FAIL'} {d}".strip() for label, good, d in parts)
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'} | {detail}")
