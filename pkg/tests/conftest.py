import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--extended",
        action="store_true",
        default=False,
        help="run the multi-hour cascade verification runs",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--extended"):
        return
    skip_ext = pytest.mark.skip(reason="pass --extended to run")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip_ext)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
