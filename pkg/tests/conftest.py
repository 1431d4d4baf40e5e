from pathlib import Path

import pytest

from tempinv.canon import canonicalize
from tempinv.oracle import build_task
from tempinv.pddl import parse_domain, parse_problem

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


def read_fixture(name: str) -> str:
    return (FIXTURES / name).read_text()


def load(name: str):
    raw = parse_domain(read_fixture(name))
    return raw, canonicalize(raw)


def load_task(domain_name: str, problem_name: str, **kw):
    raw, dom = load(domain_name)
    prob = parse_problem(read_fixture(problem_name), raw)
    return dom, prob, build_task(dom, prob, **kw)


@pytest.fixture(scope="session")
def floortile():
    return load("floortile.pddl")[1]


@pytest.fixture(scope="session")
def depot():
    return load("depot.pddl")[1]


@pytest.fixture(scope="session")
def floortile_mutated():
    return load("floortile_mutated.pddl")[1]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        status, title, detail = RESULTS[number]
        terminalreporter.write_line(f"{status} criterion {number:2d}: {title}: {detail}")
