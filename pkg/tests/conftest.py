import numpy as np
import pytest

from grounded_choice.embeddings import EmbeddingSpace, ImageVectorStore


def pytest_runtest_makereport(item, call):
    if call.when == "call" and item.module.__name__.endswith("test_acceptance"):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        item.config._acceptance = getattr(item.config, "_acceptance", [])
        item.config._acceptance.append((doc, call.excinfo is None))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = getattr(config, "_acceptance", [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for doc, ok in rows:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {doc}")


@pytest.fixture
def tiny_space():
    return EmbeddingSpace(["a", "b"], [[1.0, 0.0], [0.0, 1.0]], name="tiny")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_store(rng):
    ids = [f"id{i:02d}" for i in range(20)]
    return ImageVectorStore(ids, rng.normal(size=(20, 6)))
