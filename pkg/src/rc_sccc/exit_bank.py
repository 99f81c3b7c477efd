"""
Bank of EXIT functions for every puncturing level of one code family.

A constituent's curve depends on the channel only through Es/N0 = R Eb/N0,
so the upper functions are indexed by (d1, es_n0_db, ia) and the lower ones
by (d2, es_n0_db, ia). Once built, any (d1, d2) combination is projected
onto a chart by interpolating along Es/N0, which makes per-unit d2 scans
affordable. Banks are stored as Zarr.
"""

import logging
import math
from pathlib import Path

import numpy as np
import xarray as xr

from .channel import sigma2_from_es_n0
from .errors import DomainError, NonConvergenceError
from .exit_chart import (
    DEFAULT_FRAME_LENGTH,
    DEFAULT_SAMPLES,
    ExitCurve,
    ThresholdResult,
    bisect_threshold,
    default_ia_grid,
    lower_exit_point,
    upper_exit_point,
)
from .parallel import map_ordered
from .puncturing import CodeDimensions, CodeFamily, d2_grid, length_for_rate

logger = logging.getLogger(__name__)


def _bank_cell(component, pattern, frame_length, sigma2, ia_grid, n_frames, seed, max_log):
    rows = []
    for idx, ia in enumerate(ia_grid):
        key = (seed, idx)
        if component == "upper":
            rows.append(upper_exit_point(pattern, frame_length, sigma2, float(ia), n_frames, key, max_log))
        else:
            N = 3 * frame_length // 2
            rows.append((lower_exit_point(pattern, N, sigma2, float(ia), n_frames, key, max_log),))
    return rows


def build_bank(
    family: CodeFamily,
    component: str,
    d_values,
    es_n0_grid,
    ia_grid=None,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    frame_length: int = DEFAULT_FRAME_LENGTH,
    client=None,
    max_log: bool = False,
) -> xr.Dataset:
    if component not in ("upper", "lower"):
        raise DomainError(f"component must be 'upper' or 'lower', got {component!r}")
    d_values = [int(d) for d in d_values]
    es_n0_grid = np.asarray(es_n0_grid, dtype=np.float64)
    ia_grid = default_ia_grid() if ia_grid is None else np.asarray(ia_grid, dtype=np.float64)
    n_frames = max(1, math.ceil(n_samples / (3 * frame_length // 2)))

    pattern_for = family.upper_pattern if component == "upper" else family.lower_pattern
    jobs = [
        (component, pattern_for(d), frame_length, sigma2_from_es_n0(es), ia_grid, n_frames, seed, max_log)
        for d in d_values
        for es in es_n0_grid
    ]
    logger.info(f"Building {component} EXIT bank: {len(d_values)} x {len(es_n0_grid)} curves of {len(ia_grid)} points")
    cells = map_ordered(_bank_cell, jobs, client, desc=f"{component} bank")

    shape = (len(d_values), len(es_n0_grid), len(ia_grid))
    values = np.array(cells, dtype=np.float64).reshape(shape + (-1,))
    coords = {"d": d_values, "es_n0_db": es_n0_grid, "ia": ia_grid}
    data_vars = {"ie": (("d", "es_n0_db", "ia"), values[..., 0])}
    if component == "upper":
        data_vars["app"] = (("d", "es_n0_db", "ia"), values[..., 1])
        data_vars["channel_mi"] = (("d", "es_n0_db"), values[..., 2].mean(axis=-1))

    return xr.Dataset(
        data_vars,
        coords=coords,
        attrs={
            "component": component,
            "family": family.name,
            "seed": seed,
            "n_samples": n_samples,
            "frame_length": frame_length,
            "max_log": int(max_log),
        },
    )


def save_bank(ds: xr.Dataset, path: Path) -> None:
    ds.to_zarr(path, mode="w", consolidated=True)
    logger.info(f"Saved {ds.attrs.get('component')} EXIT bank to {path}")


def load_bank(path: Path) -> xr.Dataset:
    return xr.open_zarr(path, consolidated=True).load()


def _at_es(bank: xr.Dataset, d: int, es: float) -> xr.Dataset:
    if d not in bank["d"].values:
        raise DomainError(f"{bank.attrs.get('component')} bank holds no curve for d={d}")
    es_axis = bank["es_n0_db"].values
    if not es_axis.min() - 1e-9 <= es <= es_axis.max() + 1e-9:
        raise DomainError(f"Es/N0={es:.3f} dB outside bank coverage [{es_axis.min()}, {es_axis.max()}]")
    cell = bank.sel(d=d)
    if np.any(np.isclose(es_axis, es)) or es_axis.size == 1:
        return cell.sel(es_n0_db=es, method="nearest")
    return cell.interp(es_n0_db=es)


def curves_from_bank(upper_bank: xr.Dataset, lower_bank: xr.Dataset, dims: CodeDimensions, eb_n0_db: float):
    """(upper, lower) ExitCurves for ``dims`` at ``eb_n0_db``."""
    es = eb_n0_db + 10.0 * math.log10(float(dims.R))
    up = _at_es(upper_bank, dims.d1, es)
    low = _at_es(lower_bank, dims.d2, es)
    upper = ExitCurve(
        up["ia"].values,
        up["ie"].values,
        "upper",
        "v",
        eb_n0_db,
        dims,
        app=up["app"].values,
        channel_mi=float(up["channel_mi"].values),
    )
    lower = ExitCurve(low["ia"].values, low["ie"].values, "lower", "z", eb_n0_db, dims)
    return upper, lower


def bank_coverage_db(upper_bank: xr.Dataset, lower_bank: xr.Dataset, rate) -> tuple[float, float]:
    """Eb/N0 interval covered by both banks at ``rate``."""
    shift = 10.0 * math.log10(float(rate))
    lo = max(float(upper_bank["es_n0_db"].min()), float(lower_bank["es_n0_db"].min()))
    hi = min(float(upper_bank["es_n0_db"].max()), float(lower_bank["es_n0_db"].max()))
    if lo >= hi:
        raise DomainError("Upper and lower banks share no Es/N0 range")
    return lo - shift, hi - shift


def bank_threshold(
    upper_bank: xr.Dataset,
    lower_bank: xr.Dataset,
    dims: CodeDimensions,
    target_pb: float = 1e-5,
    n_iterations: int = 10,
    tol: float = 0.05,
) -> ThresholdResult:
    lo, hi = bank_coverage_db(upper_bank, lower_bank, dims.R)
    return bisect_threshold(
        lambda eb: curves_from_bank(upper_bank, lower_bank, dims, eb),
        dims,
        target_pb,
        n_iterations,
        lo,
        hi,
        tol,
    )


def bank_wf_grid(
    upper_bank: xr.Dataset,
    lower_bank: xr.Dataset,
    rate,
    target_pb: float = 1e-5,
    n_iterations: int = 10,
    d2_step: int = 1,
    tol: float = 0.05,
) -> list[tuple[int, float]]:
    L = length_for_rate(rate)
    grid = []
    for d2 in d2_grid(L, d2_step):
        dims = CodeDimensions(d1=L - 200 - d2, d2=d2)
        try:
            eb = bank_threshold(upper_bank, lower_bank, dims, target_pb, n_iterations, tol).eb_n0_db_min
        except NonConvergenceError as e:
            logger.warning(f"d2={d2}: {e}")
            eb = math.nan
        grid.append((d2, eb))
    return grid
