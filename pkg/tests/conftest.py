from __future__ import annotations

from pathlib import Path

import pytest

from vslice import v2x
from vslice.broker import Exposure, NetworkSliceBroker, SliceRequest
from vslice.catalogue import Catalogue
from vslice.infrastructure import Substrate
from vslice.model import ProvisioningMode
from vslice.orchestration import Nsmf
from vslice.simulator import data_dir

DATA = data_dir() / "v2x"


@pytest.fixture
def data() -> Path:
    return DATA


@pytest.fixture
def catalogue() -> Catalogue:
    return Catalogue.load(DATA / "catalogue.yaml")


@pytest.fixture
def substrate() -> Substrate:
    return Substrate.from_dict(v2x.substrate_doc())


@pytest.fixture
def vertical():
    return v2x.build_vertical()


class Stack:
    """NSMF + exposure + broker over one substrate, as the simulator wires them."""

    def __init__(self, substrate: Substrate, catalogue: Catalogue):
        self.nsmf = Nsmf(substrate, catalogue)
        self.exposure = Exposure(self.nsmf)
        self.broker = NetworkSliceBroker(self.nsmf, self.exposure)

    def request(self, mode: ProvisioningMode, *template_ids: str, tenant="tenant-1", vertical="v2x"):
        rid = self.nsmf.new_id("req")
        return self.broker.admit(SliceRequest(rid, tenant, vertical, mode, tuple(template_ids)))


@pytest.fixture
def stack(substrate, catalogue) -> Stack:
    return Stack(substrate, catalogue)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request) -> list:
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
