import pytest

from modelbench import fixtures
from modelbench.workbench import Workbench


@pytest.fixture
def erd():
    bench = Workbench()
    fx = fixtures.build_erd(bench)
    return bench, fx


@pytest.fixture
def expr():
    bench = Workbench()
    fx = fixtures.build_expression(bench)
    return bench, fx


@pytest.fixture
def expr_mirrored():
    bench = Workbench()
    fx = fixtures.build_expression(bench, mirrored=True)
    return bench, fx


def single_value(store, object_id, feature_name):
    val = store.registry.named_child(object_id, feature_name)
    return val.values[0] if val.values else None
