import importlib
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rc_sccc.errors import ContractError, DomainError, InfeasibleDimensionsError, UndefinedRateError
from rc_sccc.puncturing import (
    CodeDimensions,
    CodeFamily,
    PuncturePattern,
    RateCompatibleTable,
    apply_pattern,
    d2_compromise,
    d2_grid,
    depuncture,
    dimensions_for,
    feasible_d2,
    length_for_rate,
    pattern_at,
    rate_from_dimensions,
    spread_table,
)


@pytest.mark.parametrize("module", ["puncturing", "sccc", "exit_chart", "exit_bank", "wef", "optimizer", "harness", "cli"])
def test_modules_built_on_puncturing_import(module):
    importlib.import_module(f"rc_sccc.{module}")


@pytest.mark.parametrize(
    "rhos, expected",
    [
        ((1, Fraction(20, 100), Fraction(20, 300)), Fraction(5, 6)),
        ((1, 1, 1), Fraction(1, 3)),
        ((1, 0, 0), Fraction(1)),
        (("1", "0", "1/3"), Fraction(2, 3)),
    ],
)
def test_rate_from_dimensions(rhos, expected):
    assert rate_from_dimensions(*rhos) == expected


def test_float_rate():
    assert rate_from_dimensions(1.0, 0.0, 0.0) == pytest.approx(1.0)


def test_rate_errors():
    with pytest.raises(UndefinedRateError):
        rate_from_dimensions(0, 0, 0)
    with pytest.raises(DomainError):
        rate_from_dimensions(1, Fraction(3, 2), 0)


@given(st.integers(0, 100), st.integers(0, 300))
def test_dimensions_round_trip(d1, d2):
    dims = CodeDimensions(d1=d1, d2=d2)
    assert dims.R == Fraction(200, dims.L)
    again = dimensions_for(rate=dims.R, d2=d2)
    assert again == dims


def test_dimensions_examples():
    assert dimensions_for(rate=Fraction(1, 2), d2=200).D == [200, 0, 200]
    dims = dimensions_for(rate=Fraction(5, 6), d2=20)
    assert dims.D == [200, 20, 20]
    assert dims.L == 240
    assert dimensions_for(rate=Fraction(1, 3), d2=300).D == [200, 100, 300]


def test_infeasible_dimensions_report_interval():
    with pytest.raises(InfeasibleDimensionsError) as info:
        dimensions_for(rate=Fraction(1, 2), d2=50)
    assert info.value.feasible == (100, 200)
    assert "[100, 200]" in str(info.value)

    with pytest.raises(InfeasibleDimensionsError) as info:
        dimensions_for(rate=Fraction(1, 3), d2=299)
    assert info.value.feasible == (300, 300)


def test_rate_outside_family():
    with pytest.raises(DomainError):
        length_for_rate(Fraction(1, 4))
    with pytest.raises(DomainError):
        length_for_rate(Fraction(7, 9))  # 200 * 9 / 7 is not an integer


def test_float_rate_resolves_to_length():
    assert length_for_rate(0.5) == 400
    assert length_for_rate("2/3") == 300


def test_code_dimensions_validation():
    with pytest.raises(InfeasibleDimensionsError):
        CodeDimensions(d1=101, d2=0)
    with pytest.raises(DomainError):
        CodeDimensions(d1=0, d2=0, d0=199)
    with pytest.raises(DomainError):
        CodeDimensions(d1=0, d2=0, K=201)
    assert CodeDimensions(d1=20, d2=20).with_K(2000).N == 3000


@pytest.mark.parametrize("L, expected", [(400, 150), (600, 300), (300, 75), (200, 0)])
def test_d2_compromise(L, expected):
    assert d2_compromise(L) == expected


def test_d2_compromise_rounds_up_to_even():
    # (3 * 241 - 600) / 4 = 30.75
    assert d2_compromise(241) == 32


def test_feasible_interval_and_grid():
    assert feasible_d2(400) == (100, 200)
    assert feasible_d2(200) == (0, 0)
    assert d2_grid(400, 30) == [100, 130, 160, 190, 200]
    assert d2_grid(600, 10) == [300]


def test_apply_pattern_examples():
    pattern = PuncturePattern(np.array([1, 1, 1, 0]))
    frame = np.array(list("abcdefgh"))
    assert apply_pattern(pattern, frame).tolist() == list("abcefg")

    half = PuncturePattern(np.array([1, 0]))
    llrs = np.array([1.0, 2.0, 3.0, 4.0])
    kept = apply_pattern(half, llrs)
    assert kept.tolist() == [1.0, 3.0]
    assert depuncture(half, kept, 4).tolist() == [1.0, 0.0, 3.0, 0.0]


def test_pattern_period_and_mask():
    pattern = PuncturePattern([1, 0, 1])
    assert pattern.n_p == 3
    assert pattern.mask(7).tolist() == [True, False, True, True, False, True, True]
    assert pattern.kept_count(7) == 5
    assert repr(pattern) == "PuncturePattern(n_p=3, zeros=[1])"


def test_all_ones_is_identity(rng):
    pattern = PuncturePattern.all_ones(7)
    frame = rng.normal(size=21)
    np.testing.assert_array_equal(apply_pattern(pattern, frame), frame)
    np.testing.assert_array_equal(depuncture(pattern, frame, 21), frame)


def test_depuncture_length_mismatch():
    with pytest.raises(ContractError):
        depuncture(PuncturePattern(np.array([1, 0])), np.zeros(3), 4)


def test_pattern_zero_list_representation():
    pattern = PuncturePattern(np.array([1, 1, 1, 0]))
    assert pattern.zeros == [3]
    assert PuncturePattern.from_zeros(4, [3]) == pattern


def test_pattern_at():
    table = RateCompatibleTable((3, 0, 2, 1), 4, "upper")
    assert pattern_at(table, 0) == PuncturePattern.all_ones(4)
    assert pattern_at(table, 1).keep.tolist() == [True, True, True, False]
    with pytest.raises(DomainError):
        pattern_at(table, 5)


@given(st.integers(0, 299), st.integers(0, 299))
def test_rate_compatibility_is_nested(a, b):
    table = spread_table(300, "lower")
    low, high = sorted((a, b))
    coarse = pattern_at(table, high).keep
    fine = pattern_at(table, low).keep
    assert not np.any(coarse & ~fine)


def test_spread_table_is_permutation():
    table = spread_table(100, "upper")
    assert table.complete
    assert sorted(table.order) == list(range(100))
    assert pattern_at(table, 50).n_kept == 50


def test_table_text_round_trip(tmp_path):
    table = spread_table(100, "upper")
    path = tmp_path / "upper.txt"
    table.save(path)
    assert path.read_text().startswith("# np=100 code=upper\n")
    assert RateCompatibleTable.load(path) == table


def test_malformed_tables():
    with pytest.raises(ContractError):
        RateCompatibleTable.from_text("0\n1\n")
    with pytest.raises(ContractError):
        RateCompatibleTable.from_text("# np=4 code\n0\n1\n")
    with pytest.raises(ContractError):
        RateCompatibleTable.from_text("# np=4 code=upper\n0\nfirst\n")
    with pytest.raises(ContractError):
        RateCompatibleTable((0, 0), 4, "upper")
    with pytest.raises(ContractError):
        RateCompatibleTable((0,), 4, "middle")


def test_family_patterns(spread_family):
    assert spread_family.upper_pattern(20).n_kept == 20
    assert spread_family.lower_pattern(300).n_kept == 300
    assert spread_family.lower_pattern(0).n_kept == 0


def test_family_from_missing_dir_falls_back(tmp_path):
    family = CodeFamily.from_config(tmp_path / "missing")
    assert family.name == "spread"


def test_family_load(tmp_path):
    spread_table(100, "upper").save(tmp_path / "upper.txt")
    spread_table(300, "lower").save(tmp_path / "lower.txt")
    family = CodeFamily.from_config(tmp_path)
    assert family.lower.n_p == 300
