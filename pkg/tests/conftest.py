import pathlib

import pytest

from phasefront import irgraph

DATA = pathlib.Path(__file__).parent / "data"
IR_DIR = DATA / "ir"

ADD_RET = (IR_DIR / "add_ret.ll").read_text()


def corpus_paths():
    return sorted(IR_DIR.glob("*.ll"))


@pytest.fixture
def add_ret_graph():
    return irgraph.parse_ir(ADD_RET)


@pytest.fixture
def corpus_graphs():
    return {p.name: irgraph.parse_ir(p.read_text()) for p in corpus_paths()}
