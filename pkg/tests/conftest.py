import math

import numpy as np
import pytest

from isokam.actions import (GOLDEN_TURNS, GroupPresentation,
                            TorusTranslationAction)
from isokam.models import abelian_presentation


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def golden_action():
    return TorusTranslationAction([[GOLDEN_TURNS]])


@pytest.fixture
def free1():
    return GroupPresentation.free(1)


@pytest.fixture
def t2_abelian():
    """Simultaneously Diophantine pair on T^2 with the Z^2 presentation."""
    a1 = [math.sqrt(2) - 1, math.sqrt(3) - 1]
    a2 = [math.sqrt(5) - 2, math.sqrt(7) - 2]
    return TorusTranslationAction([a1, a2]), abelian_presentation(2)
