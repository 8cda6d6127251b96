import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from prunekit import ParameterStore  # noqa: E402


def snapshot(store: ParameterStore):
    """Everything observable about a store, in comparable form."""
    def tensors(d):
        return [(k, v.dtype.str, v.shape, v.tobytes()) for k, v in d.items()]

    def hook(h):
        inner = getattr(h, "methods", None)
        return (id(h), type(h).__name__, tuple(id(m) for m in inner) if inner is not None else None)

    return (
        tensors(store.params),
        tensors(store.buffers),
        [(k, hook(h)) for k, h in store.hooks.items()],
        tensors(store.attrs),
        repr(store.history),
        dict(store.metadata),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_criteria = []


@pytest.fixture
def criterion(request):
    """Record a one-line verdict for an acceptance criterion."""
    entry = {"label": None, "detail": ""}

    def record(label, detail=""):
        entry["label"], entry["detail"] = label, detail

    yield record
    if entry["label"] is not None:
        call = getattr(request.node, "rep_call", None)
        ok = call is not None and call.passed
        _criteria.append(f"[{'PASS' if ok else 'FAIL'}] {entry['label']}  {entry['detail']}".rstrip())


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in _criteria:
            terminalreporter.write_line(line)
