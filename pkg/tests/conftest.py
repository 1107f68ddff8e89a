from __future__ import annotations

import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def demo_source() -> str:
    return (FIXTURES / "scale_rows.mini").read_text()


@pytest.fixture(scope="session")
def demo_program(demo_source):
    from zigzag.lang import parse

    return parse(demo_source)
