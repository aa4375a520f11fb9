"""Shared fixtures: sample rendered histories and their parsed contexts."""

from pathlib import Path

import pytest

from attnpress import parse_generation_document, parse_selection_document

FIXTURES = Path(__file__).parent / "fixtures"


def read_fixture(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8").rstrip("\n")


@pytest.fixture(scope="session")
def movie_document():
    return read_fixture("movie_history.txt")


@pytest.fixture(scope="session")
def movie_context(movie_document):
    return parse_selection_document(movie_document)


@pytest.fixture(scope="session")
def paper_document():
    return read_fixture("paper_history.txt")


@pytest.fixture(scope="session")
def paper_context(paper_document):
    return parse_generation_document(paper_document)
