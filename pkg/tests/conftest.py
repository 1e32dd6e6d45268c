import os

import pytest


@pytest.fixture(scope="session", autouse=True)
def _private_cache(tmp_path_factory):
    # keep the operator cache of the test session away from the user's
    old = os.environ.get("HCSOLVE_CACHE_DIR")
    os.environ["HCSOLVE_CACHE_DIR"] = str(tmp_path_factory.mktemp("opcache"))
    yield
    if old is None:
        os.environ.pop("HCSOLVE_CACHE_DIR", None)
    else:
        os.environ["HCSOLVE_CACHE_DIR"] = old
