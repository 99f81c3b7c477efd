"""
Monte Carlo BER/FER measurement and the combined EXIT + union-bound
prediction curve.

Frame f at SNR index i draws everything (information bits, noise) from
``SeedSequence([seed, i, f])``. Frames are simulated in fixed-size batches
and batches are merged strictly in index order; the stop rule is evaluated
after each merged batch. Results therefore do not depend on how many
workers ran or in which order batches finished.
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from .channel import ChannelParams, channel_llrs, rng_for, transmit
from .errors import ContractError, DomainError
from .exit_chart import (
    DEFAULT_FRAME_LENGTH,
    exit_curve_lower,
    exit_curve_upper,
    pick_d2,
    predict_ber,
    trajectory,
)
from .parallel import map_ordered
from .puncturing import CodeDimensions, CodeFamily, d2_compromise, length_for_rate
from .sccc import ScccConfig, decode, encode
from .wef import EnumLimits, choose_d2_ef, enumerators_for, union_bound

logger = logging.getLogger(__name__)

BER_COLUMNS = ["eb_n0_db", "ber", "fer", "bits", "frames", "bit_errors", "frame_errors"]

COMPOSITION_RULE = (
    "scan from the highest Eb/N0 downward: use the union bound while it is <= 0.5 and not below "
    "the EXIT prediction; every lower Eb/N0 uses the EXIT prediction"
)


@dataclass(frozen=True)
class StopRule:
    min_bit_errors: int = 100
    max_bits: int = 10_000_000
    max_frames: int | None = None

    def done(self, bit_errors: int, bits: int, frames: int) -> bool:
        if bit_errors >= self.min_bit_errors or bits >= self.max_bits:
            return True
        return self.max_frames is not None and frames >= self.max_frames


@dataclass
class BatchCounts:
    bits: int
    frames: int
    bit_errors: int
    frame_errors: int
    iteration_errors: np.ndarray | None = None


@dataclass
class BerPoint:
    eb_n0_db: float
    bits: int
    frames: int
    bit_errors: int
    frame_errors: int
    n_iterations: int
    partial: bool = False
    iteration_ber: list[float] | None = None

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else math.nan

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else math.nan

    def confidence_interval(self, level: float = 0.95) -> tuple[float, float]:
        """Clopper-Pearson interval for the bit error rate."""
        alpha = 1.0 - level
        k, n = self.bit_errors, self.bits
        lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
        hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
        return lo, hi

    def row(self) -> dict:
        return {
            "eb_n0_db": self.eb_n0_db,
            "ber": self.ber,
            "fer": self.fer,
            "bits": self.bits,
            "frames": self.frames,
            "bit_errors": self.bit_errors,
            "frame_errors": self.frame_errors,
        }


@dataclass
class BerCurve:
    points: list[BerPoint]
    seed: int
    n_iterations: int
    descriptor: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([p.row() for p in self.points], columns=BER_COLUMNS)

    def iterations_frame(self) -> pd.DataFrame:
        rows = [
            {"eb_n0_db": p.eb_n0_db, "iteration": it + 1, "ber": ber}
            for p in self.points
            if p.iteration_ber is not None
            for it, ber in enumerate(p.iteration_ber)
        ]
        return pd.DataFrame(rows, columns=["eb_n0_db", "iteration", "ber"])

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "seed_rule": "SeedSequence([seed, snr_index, frame_index]) per frame",
            "n_iterations": self.n_iterations,
            "code": self.descriptor,
            "partial_points": [p.eb_n0_db for p in self.points if p.partial],
        }


def simulate_batch(
    config: ScccConfig | None,
    K: int,
    sigma2: float,
    seed: int,
    snr_index: int,
    first_frame: int,
    n_frames: int,
    n_iterations: int,
    max_log: bool = False,
    record_iterations: bool = False,
    early_stop: bool = False,
) -> BatchCounts:
    """
    Simulate frames first_frame .. first_frame + n_frames - 1. ``config=None``
    is uncoded BPSK with K bits per frame.
    """
    u = np.empty((n_frames, K), dtype=np.uint8)
    llrs = []
    for offset in range(n_frames):
        rng = rng_for(np.random.SeedSequence([seed, snr_index, first_frame + offset]))
        u[offset] = rng.integers(0, 2, size=K, dtype=np.uint8)
        bits = u[offset] if config is None else encode(config, u[offset]).bits
        y = transmit(bits, sigma2, rng)
        llrs.append(channel_llrs(y, sigma2) if sigma2 > 0 else np.where(y > 0, 50.0, -50.0))
    llrs = np.stack(llrs)

    iteration_errors = None
    if config is None:
        u_hat = (llrs < 0).astype(np.uint8)
    else:
        result = decode(config, llrs, n_iterations, max_log=max_log, early_stop=early_stop)
        u_hat = result.bits
        if record_iterations:
            iteration_errors = np.array(
                [int((result.decisions(min(it, result.iterations - 1)) != u).sum()) for it in range(n_iterations)]
            )

    errors = (u_hat != u).sum(axis=1)
    return BatchCounts(
        bits=n_frames * K,
        frames=n_frames,
        bit_errors=int(errors.sum()),
        frame_errors=int((errors > 0).sum()),
        iteration_errors=iteration_errors,
    )


def run_point(
    config: ScccConfig | None,
    eb_n0_db: float,
    snr_index: int,
    stop: StopRule = StopRule(),
    seed: int = 0,
    n_iterations: int = 10,
    max_log: bool = False,
    batch_frames: int = 32,
    record_iterations: bool = False,
    early_stop: bool = False,
    K: int | None = None,
    client=None,
    window: int | None = None,
) -> BerPoint:
    uncoded = config is None
    if uncoded and K is None:
        raise DomainError("Uncoded mode needs the frame length K")
    K = config.K if not uncoded else K
    rate = 1.0 if uncoded else float(config.rate)
    sigma2 = ChannelParams(eb_n0_db, rate).sigma2 if math.isfinite(eb_n0_db) else 0.0
    window = window or (1 if client is None else max(2, 2 * len(client.scheduler_info().get("workers", {}))))

    totals = BatchCounts(0, 0, 0, 0, np.zeros(n_iterations, dtype=np.int64) if record_iterations and not uncoded else None)
    next_batch = 0
    done = False
    while not done:
        jobs = [
            (config, K, sigma2, seed, snr_index, (next_batch + j) * batch_frames, batch_frames, n_iterations, max_log, record_iterations, early_stop)
            for j in range(window)
        ]
        next_batch += window
        for counts in map_ordered(simulate_batch, jobs, client, progress=False):
            totals.bits += counts.bits
            totals.frames += counts.frames
            totals.bit_errors += counts.bit_errors
            totals.frame_errors += counts.frame_errors
            if totals.iteration_errors is not None:
                totals.iteration_errors += counts.iteration_errors
            if stop.done(totals.bit_errors, totals.bits, totals.frames):
                done = True
                break

    partial = totals.bit_errors < stop.min_bit_errors
    point = BerPoint(
        eb_n0_db=eb_n0_db,
        bits=totals.bits,
        frames=totals.frames,
        bit_errors=totals.bit_errors,
        frame_errors=totals.frame_errors,
        n_iterations=0 if uncoded else n_iterations,
        partial=partial,
        iteration_ber=None if totals.iteration_errors is None else (totals.iteration_errors / totals.bits).tolist(),
    )
    logger.info(
        f"Eb/N0={eb_n0_db:.2f} dB: BER={point.ber:.3e} FER={point.fer:.3e} "
        f"({point.bit_errors} errors in {point.bits} bits{', partial' if partial else ''})"
    )
    return point


def run_ber(
    config: ScccConfig | None,
    snr_grid,
    stop: StopRule = StopRule(),
    seed: int = 0,
    n_iterations: int = 10,
    max_log: bool = False,
    batch_frames: int = 32,
    record_iterations: bool = False,
    early_stop: bool = False,
    K: int | None = None,
    client=None,
) -> BerCurve:
    """BER curve over ``snr_grid``; ``config=None`` simulates uncoded BPSK."""
    points = [
        run_point(config, float(eb), idx, stop, seed, n_iterations, max_log, batch_frames, record_iterations, early_stop, K, client)
        for idx, eb in enumerate(snr_grid)
    ]
    descriptor = {"uncoded": True, "K": K} if config is None else config.describe()
    descriptor["stop_rule"] = asdict(stop)
    descriptor["max_log"] = max_log
    descriptor["batch_frames"] = batch_frames
    return BerCurve(points, seed, n_iterations, descriptor)


def _exit_prediction(family, dims, eb_n0_db, n_iterations, estimation):
    upper = exit_curve_upper(family, dims, eb_n0_db, **estimation)
    lower = exit_curve_lower(family, dims, eb_n0_db, **estimation)
    return predict_ber(trajectory(upper, lower, n_iterations).final_app)


def combined_prediction(
    family: CodeFamily,
    dims: CodeDimensions,
    K: int,
    snr_grid,
    n_iterations: int = 10,
    limits: EnumLimits = EnumLimits(),
    client=None,
    **estimation,
) -> pd.DataFrame:
    """
    EXIT prediction in the waterfall, union bound in the floor. Columns
    eb_n0_db, pb_exit, pb_ub, pb_combined, source, flag (see
    ``compose_prediction``).
    """
    grid = np.sort(np.asarray(snr_grid, dtype=np.float64))
    estimation.setdefault("frame_length", DEFAULT_FRAME_LENGTH)
    exit_dims = dims.with_K(estimation["frame_length"])
    jobs = [(family, exit_dims, float(eb), n_iterations, estimation) for eb in grid]
    pb_exit = np.array(map_ordered(_exit_prediction, jobs, client, desc="EXIT prediction"))

    upper, lower = enumerators_for(family, dims, K, limits)
    pb_ub = np.asarray(union_bound(upper, lower, K, 3 * K // 2, float(dims.R), grid))
    return compose_prediction(grid, pb_exit, pb_ub)


def compose_prediction(eb_n0_db, pb_exit, pb_ub) -> pd.DataFrame:
    """
    Join an EXIT waterfall and a union-bound floor sampled on the same
    ascending grid. ``flag`` marks EXIT points below the crossover that the
    bound already undercuts, and every point where the joined curve rises
    with Eb/N0.
    """
    grid = np.asarray(eb_n0_db, dtype=np.float64)
    pb_exit = np.asarray(pb_exit, dtype=np.float64)
    pb_ub = np.asarray(pb_ub, dtype=np.float64)
    if not (grid.shape == pb_exit.shape == pb_ub.shape):
        raise ContractError(f"Grid, EXIT and bound lengths differ: {grid.size}, {pb_exit.size}, {pb_ub.size}")
    if np.any(np.diff(grid) <= 0):
        raise ContractError("Eb/N0 grid must be strictly ascending")

    source = np.full(grid.size, "exit", dtype=object)
    for i in range(grid.size - 1, -1, -1):
        if pb_ub[i] <= 0.5 and pb_exit[i] <= pb_ub[i]:
            source[i] = "ub"
        else:
            break
    combined = np.where(source == "ub", pb_ub, pb_exit)

    overlap = (source == "exit") & (pb_ub <= 0.5) & (pb_exit <= pb_ub)
    rises = np.zeros(grid.size, dtype=bool)
    rises[1:] = combined[1:] > combined[:-1] * (1.0 + 1e-9)
    if overlap.any():
        logger.warning(f"EXIT and UB overlap out of order at Eb/N0 {grid[overlap].tolist()}")
    if rises.any():
        logger.warning(f"Combined prediction rises with Eb/N0 at {grid[rises].tolist()}")

    frame = pd.DataFrame(
        {
            "eb_n0_db": grid,
            "pb_exit": pb_exit,
            "pb_ub": pb_ub,
            "pb_combined": combined,
            "source": source,
            "flag": overlap | rises,
        }
    )
    frame.attrs["composition_rule"] = COMPOSITION_RULE
    return frame


def strategy_d2(rate, mode: str, wf_grid: list[tuple[int, float]] | None = None) -> int:
    """
    d2 for one rate under the error-floor ("ef"), waterfall ("wf") or
    compromise strategy. "wf" picks from a precomputed threshold grid.
    """
    if mode == "ef":
        return choose_d2_ef(rate)
    if mode == "compromise":
        return d2_compromise(length_for_rate(rate))
    if mode == "wf":
        if wf_grid is None:
            raise DomainError("The waterfall strategy needs a threshold grid over d2")
        return pick_d2(wf_grid)
    raise DomainError(f"Unknown d2 strategy {mode!r}")
