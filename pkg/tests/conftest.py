import pytest

from swarmfab import config


@pytest.fixture
def bridge_config():
    return config.default_config("bridge_xy")


@pytest.fixture
def wire2d_config():
    return config.default_config("wire2d_wall")


@pytest.fixture
def wire3d_config():
    return config.default_config("wire3d_printer")


@pytest.fixture
def printer_bridge_config():
    return config.default_config("printer_bridge")


SQUARE_PRINT = """G92 E0
G1 X210 Y110 F1200
G1 X230 Y110 E1 F600
G1 X230 Y130 E2
G1 X210 Y130 E3
G1 X210 Y110 E4
"""


@pytest.fixture
def square_print_program():
    return SQUARE_PRINT
