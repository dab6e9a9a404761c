import numpy as np
import pytest

from origami_billiards.constructions import (
    figure_eight_3d,
    figure_eight_4d,
    figure_eight_5d,
    figure_eight_n,
    twisted_tower,
)
from origami_billiards.geom_core import box, polygon

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)


@pytest.fixture(scope="session")
def triangle():
    return polygon([(0, 0), (2, 0), (1, SQRT3)], ids=["F1", "F2", "F3"])


@pytest.fixture(scope="session")
def square_y2():
    return box([-2, -1], [0, 1], ids=["F2", "F0", "F3", "F1"])


@pytest.fixture(scope="session")
def towers():
    return {n: twisted_tower(n, 0.05) for n in (3, 4, 5)}


@pytest.fixture(scope="session")
def fig3():
    return figure_eight_3d(0.08)


@pytest.fixture(scope="session")
def fig3_small():
    return figure_eight_3d(0.04)


@pytest.fixture(scope="session")
def fig4():
    return figure_eight_4d()


@pytest.fixture(scope="session")
def fig5():
    return figure_eight_5d()


@pytest.fixture(scope="session")
def fig6():
    return figure_eight_n(6, (0.08, 0.04))


@pytest.fixture(scope="session")
def fig7():
    return figure_eight_n(7, (0.08, 0.04))
