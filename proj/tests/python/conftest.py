import os
import pathlib

import pytest


@pytest.fixture(scope="session")
def tgc_bin():
    path = os.environ.get("TGC_BIN")
    if not path:
        pytest.skip("TGC_BIN not set")
    return path


@pytest.fixture(scope="session")
def schema_dir():
    return pathlib.Path(os.environ.get("TGC_SCHEMA_DIR", pathlib.Path(__file__).parents[2] / "schemas"))


@pytest.fixture(scope="session")
def demo_dir():
    return pathlib.Path(os.environ.get("TGC_DEMO_DIR", pathlib.Path(__file__).parents[2] / "data" / "demo"))
