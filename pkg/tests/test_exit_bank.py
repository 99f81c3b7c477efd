import math

import numpy as np
import pytest
import xarray as xr

from rc_sccc.errors import DomainError
from rc_sccc.exit_bank import (
    bank_coverage_db,
    bank_threshold,
    build_bank,
    curves_from_bank,
    load_bank,
    save_bank,
)
from rc_sccc.exit_chart import exit_curve_upper
from rc_sccc.puncturing import CodeDimensions

IA = np.linspace(0.0, 1.0, 5)
ESTIMATION = dict(ia_grid=IA, n_samples=600, frame_length=200)


def test_build_bank_layout(spread_family):
    ds = build_bank(spread_family, "upper", [50, 100], [-1.0, 1.0], **ESTIMATION)
    assert ds["ie"].dims == ("d", "es_n0_db", "ia")
    assert ds["ie"].shape == (2, 2, 5)
    assert ds["channel_mi"].shape == (2, 2)
    assert ds.attrs["component"] == "upper"
    low = build_bank(spread_family, "lower", [0, 300], [0.0], **ESTIMATION)
    assert set(low.data_vars) == {"ie"}
    np.testing.assert_allclose(low["ie"].sel(d=0).values, 0.0, atol=1e-6)


def test_bank_matches_direct_curve(spread_family):
    dims = CodeDimensions(d1=100, d2=100)
    ds = build_bank(spread_family, "upper", [100], [0.0], **ESTIMATION)
    eb = -10.0 * math.log10(0.5)
    direct = exit_curve_upper(spread_family, dims, eb, **ESTIMATION)
    np.testing.assert_allclose(ds["ie"].sel(d=100, es_n0_db=0.0).values, direct.ie, atol=1e-6)


def test_unknown_component(spread_family):
    with pytest.raises(DomainError):
        build_bank(spread_family, "middle", [0], [0.0])


def test_save_and_load(tmp_path, synthetic_banks):
    upper, _ = synthetic_banks
    save_bank(upper, tmp_path / "upper.zarr")
    loaded = load_bank(tmp_path / "upper.zarr")
    xr.testing.assert_allclose(loaded, upper)
    assert loaded.attrs["component"] == "upper"


def test_curves_from_bank_interpolates(synthetic_banks):
    upper, lower = synthetic_banks
    dims = CodeDimensions(d1=100, d2=100)
    # Es/N0 = -0.5 dB sits half way between the closed and the open lower curve
    eb = -0.5 - 10.0 * math.log10(0.5)
    up, low = curves_from_bank(upper, lower, dims, eb)
    np.testing.assert_allclose(low.ie, 0.5)
    np.testing.assert_allclose(up.ie, IA)
    assert up.eb_n0_db == eb


def test_bank_coverage(synthetic_banks):
    upper, lower = synthetic_banks
    lo, hi = bank_coverage_db(upper, lower, 0.5)
    assert lo == pytest.approx(-2.0 + 10.0 * math.log10(2.0))
    assert hi == pytest.approx(2.0 + 10.0 * math.log10(2.0))
    with pytest.raises(DomainError):
        curves_from_bank(upper, lower, CodeDimensions(d1=100, d2=100), 10.0)
    with pytest.raises(DomainError):
        curves_from_bank(upper, lower, CodeDimensions(d1=90, d2=110), 3.0)


def test_bank_threshold(synthetic_banks):
    upper, lower = synthetic_banks
    dims = CodeDimensions(d1=100, d2=100)
    result = bank_threshold(upper, lower, dims, 1e-5, 10, tol=0.02)
    assert result.eb_n0_db_min == pytest.approx(10.0 * math.log10(2.0), abs=0.03)
