import importlib.resources as res
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fleetplan.buchi import import_nba
from fleetplan.workspace import load_workspace


DATA = res.files("fleetplan") / "data"


@pytest.fixture(scope="session")
def office():
    return load_workspace(DATA / "office_delivery.json")


@pytest.fixture(scope="session")
def task_i_nba(office):
    return import_nba(DATA / "task_i_nba.json", office.fleet())


@pytest.fixture(scope="session")
def task_ii_nba(office):
    return import_nba(DATA / "task_ii_nba.json", office.fleet())
