import hypothesis
import numpy as np
import pytest

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5)
hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run Monte Carlo calibration tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def spread_family():
    from rc_sccc.puncturing import CodeFamily

    return CodeFamily.spread()


@pytest.fixture(scope="session")
def greedy_family(tmp_path_factory):
    """Tables regenerated by the full greedy search; only the slow tests use it."""
    from rc_sccc.optimizer import generate_tables

    return generate_tables(tmp_path_factory.mktemp("tables"))


@pytest.fixture
def synthetic_banks():
    """
    Hand-made EXIT banks for d1 = d2 = 100. The upper transfer is the
    identity; the lower one jumps from 0 to 1 at Es/N0 = 0 dB.
    """
    import xarray as xr

    ia = np.linspace(0.0, 1.0, 5)
    es = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    upper = xr.Dataset(
        {
            "ie": (("d", "es_n0_db", "ia"), np.broadcast_to(ia, (1, es.size, ia.size)).copy()),
            "app": (("d", "es_n0_db", "ia"), np.broadcast_to(ia, (1, es.size, ia.size)).copy()),
            "channel_mi": (("d", "es_n0_db"), np.zeros((1, es.size))),
        },
        coords={"d": [100], "es_n0_db": es, "ia": ia},
        attrs={"component": "upper"},
    )
    opened = np.where(es >= 0.0, 1.0, 0.0)
    lower = xr.Dataset(
        {"ie": (("d", "es_n0_db", "ia"), np.repeat(opened[None, :, None], ia.size, axis=2))},
        coords={"d": [100], "es_n0_db": es, "ia": ia},
        attrs={"component": "lower"},
    )
    return upper, lower
