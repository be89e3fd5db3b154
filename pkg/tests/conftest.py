import pytest


def pytest_addoption(parser):
    parser.addoption("--run-learning", action="store_true", default=False,
                     help="run the long end-to-end learning criteria (tens of CPU minutes per env)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-learning"):
        return
    skip = pytest.mark.skip(reason="long training run; pass --run-learning to enable")
    for item in items:
        if "learning" in item.keywords:
            item.add_marker(skip)
