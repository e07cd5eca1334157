from pathlib import Path

import pytest

from corpus_fixtures import make_corpus, make_story

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def conformance_corpus():
    rosters = {
        "A": ("Tom", "People"),
        "B": ("Mary", "Tom"),
        "C": ("Sam", "Dogs"),
        "D": ("Anna Lee", "Max"),
    }
    stories = []
    for sid, roster in rosters.items():
        texts = [f"{sid} placeholder line {i} ." for i in range(5)]
        stories.append(make_story(sid, texts, roster))
    return make_corpus(stories)
