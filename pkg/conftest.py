import os
import sys

import pytest

# 项目根目录加入 sys.path，使各层包可直接导入
project_root = os.path.dirname(os.path.abspath(__file__))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from dataLAYER.data_manager import DataManager  # noqa: E402


@pytest.fixture(scope="session")
def data_manager():
    return DataManager()


@pytest.fixture(scope="session")
def vaccination(data_manager):
    return data_manager.load_example("vaccination.json")


@pytest.fixture(scope="session")
def matching_pennies(data_manager):
    return data_manager.load_example("matching_pennies_uniform.json")


@pytest.fixture(scope="session")
def asym_mp(data_manager):
    return data_manager.load_example("asym_mp_gumbel5.json")


@pytest.fixture(scope="session")
def coordination(data_manager):
    return data_manager.load_example("coordination_2x2.json")


@pytest.fixture(scope="session")
def serial_3x2(data_manager):
    return data_manager.load_example("serial_3x2.json")
