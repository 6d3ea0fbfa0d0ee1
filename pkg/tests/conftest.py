import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import ofsmpc as m


@pytest.fixture(scope="session")
def paper_scenario():
    return m.paper_scenario()


@pytest.fixture(scope="session")
def paper_model(paper_scenario):
    return paper_scenario.model


@pytest.fixture(scope="session")
def fitted_proposed(paper_scenario):
    return m.build_controller(paper_scenario).fit(paper_scenario.model)


@pytest.fixture(scope="session")
def fitted_baseline(paper_scenario):
    return m.build_baseline(paper_scenario).fit(paper_scenario.model)


@pytest.fixture(scope="session")
def scalar_model():
    """Scalar system with hand-recursable filter quantities."""
    return m.SystemModel(
        a=[[1.0]], b=[[1.0]], c=[[1.0]],
        noise_cov_w=[[0.1]], noise_cov_v=[[0.1]],
        init_mean=[0.0], init_cov=[[0.1]], horizon=6,
    )
