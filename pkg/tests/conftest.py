import os

import pytest


def pytest_collection_modifyitems(config, items):
    if os.environ.get("CYLHEAT_EXTENDED"):
        return
    skip = pytest.mark.skip(reason="extended check; set CYLHEAT_EXTENDED=1 to run")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)
