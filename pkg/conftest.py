import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="jalankan reproduksi eksperimen (lambat)")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: reproduksi eksperimen skala desk, butuh --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="butuh --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
