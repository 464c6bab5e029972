import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rtlopt.backend import BackendConfig


@pytest.fixture
def bcfg():
    return BackendConfig()


@pytest.fixture
def chain8():
    from corpus import CHAIN_ADDER_8
    from rtlopt.dsl import parse
    return parse(CHAIN_ADDER_8, "chain.rtl")
