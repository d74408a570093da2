import os

import numpy as np
import pytest

from kdvcn.lattice import Grid, GridFunction

LONG = os.environ.get("KDVCN_LONG") == "1"


def pytest_collection_modifyitems(config, items):
    if LONG:
        return
    skip = pytest.mark.skip(reason="opt-in long study; set KDVCN_LONG=1")
    for item in items:
        if "optin" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session", autouse=True)
def reference_cache(tmp_path_factory, request):
    """Fine-grid references persist in the pytest cache unless KDVCN_CACHE is set."""
    if os.environ.get("KDVCN_CACHE"):
        yield os.environ["KDVCN_CACHE"]
        return
    path = str(request.config.cache.mkdir("kdvcn-references"))
    os.environ["KDVCN_CACHE"] = path
    yield path
    os.environ.pop("KDVCN_CACHE", None)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_gf(rng, n=None, dx=None, x_left=0.0):
    n = n or int(rng.integers(8, 200))
    dx = dx or float(rng.uniform(0.05, 1.0))
    return GridFunction(Grid(n, dx, x_left), rng.standard_normal(n))


# acceptance outcomes, printed as one line per criterion after the run
ACCEPTANCE: dict = {}
CRITERIA = [str(i) for i in range(1, 11)]


@pytest.fixture
def accept():
    def record(label, ok, detail=""):
        ACCEPTANCE.setdefault(label, []).append((bool(ok), detail))
        return ok
    return record


def _sort_key(label):
    head = label.split()[0]
    return (int("".join(c for c in head if c.isdigit()) or 0), label)


def pytest_terminal_summary(terminalreporter):
    if not any(k.split()[0] in CRITERIA for k in ACCEPTANCE) and "test_acceptance" not in str(
            terminalreporter.config.args):
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    labels = sorted(set(ACCEPTANCE) | set(CRITERIA), key=_sort_key)
    for label in labels:
        entries = ACCEPTANCE.get(label)
        if not entries:
            tr.write_line(f"criterion {label}: NOT RUN (opt-in or deselected)")
            continue
        ok = all(e[0] for e in entries)
        detail = "; ".join(e[1] for e in entries if e[1])
        tr.write_line(f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}")
