import pytest

from lunar_descent.cli import packaged_design
from lunar_descent.config import MissionConfig, load_design
from lunar_descent.mission import assemble


@pytest.fixture(scope="session")
def config():
    return MissionConfig()


@pytest.fixture(scope="session")
def default_design():
    return load_design(packaged_design())


@pytest.fixture(scope="session")
def table4_design():
    return load_design(packaged_design("table4_design.yaml"))


@pytest.fixture(scope="session")
def nominal(default_design, config):
    return assemble(default_design, "N", config)


@pytest.fixture(scope="session")
def table4_nominal(table4_design, config):
    return assemble(table4_design, "N", config)
