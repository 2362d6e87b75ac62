import os
import tempfile
from pathlib import Path

import pytest

os.environ["ISOPATCH_TYPECHECKING"] = "crash"


def pytest_configure(config):
    """Register custom markers."""
    config.addinivalue_line(
        "markers",
        "basic: mark test as a fast test of a single building block",
    )
    config.addinivalue_line(
        "markers", "slow: mark test as running a whole demo problem"
    )
    config.addinivalue_line(
        "markers", "bench: mark test as hardware dependent timing, only run with '-m bench'"
    )


def pytest_collection_modifyitems(config, items):
    markexpr = config.getoption("-m") or ""
    if "bench" in markexpr:
        return
    skip = pytest.mark.skip(reason="timing test, use '-m bench' to run it")
    for item in items:
        if "bench" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def temp_dir():
    """Provide a temporary directory that is cleaned up after the test."""
    with tempfile.TemporaryDirectory() as tmpdirname:
        yield Path(tmpdirname)


@pytest.fixture
def mixed_knots():
    """Knot vector with four elements and mixed interior multiplicities."""
    from isopatch.utils.splines import KnotVector

    return KnotVector([0, 0, 0, 0, 2, 4, 4, 6, 6, 6, 8, 8, 8, 8], 3)


@pytest.fixture
def annulus():
    """Quarter annulus on its own 9 point quadratic space."""
    from isopatch.utils.patches import quarter_annulus_patch

    return quarter_annulus_patch()


@pytest.fixture
def annulus_disc():
    """Quarter annulus refined onto a 4x4 C1 quadratic space."""
    from isopatch.utils.assembly import Discretization
    from isopatch.utils.patches import make_geometry
    from isopatch.utils.space import uniform_space

    space = uniform_space(2, 4, 2)
    return Discretization(space, make_geometry("annulus", space), 2)


@pytest.fixture
def square_disc():
    """Unit square with a 3x3 C1 quadratic space."""
    from isopatch.utils.assembly import Discretization
    from isopatch.utils.patches import make_geometry
    from isopatch.utils.space import uniform_space

    space = uniform_space(2, 3, 2)
    return Discretization(space, make_geometry("square", space), 1)
