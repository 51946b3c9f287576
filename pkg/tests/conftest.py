import os
from pathlib import Path

import pytest

from heckeqf import eigenforms

FULL_DEPTH = eigenforms.DEFAULT_DEPTH
SMALL_DEPTH = 10 ** 4
LABELS = tuple(item.label for item in eigenforms.CATALOG)


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory) -> Path:
    """Coefficient cache shared by the session; HECKEQF_TEST_CACHE reuses one across runs."""
    env = os.environ.get("HECKEQF_TEST_CACHE")
    if env:
        Path(env).mkdir(parents=True, exist_ok=True)
        return Path(env)
    return tmp_path_factory.mktemp("coeff_cache")


@pytest.fixture(scope="session")
def small_forms():
    return {label: eigenforms.load_entry(label, SMALL_DEPTH, use_cache=False) for label in LABELS}


@pytest.fixture(scope="session")
def full_forms(cache_dir):
    return {label: eigenforms.load_entry(label, FULL_DEPTH, cache_dir) for label in LABELS}
