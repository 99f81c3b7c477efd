import functools
import logging
import sys
from fractions import Fraction
from pathlib import Path

import click
import numpy as np
import pandas as pd

from .channel import bpsk_capacity_gap, bpsk_limit_db
from .config import load_config, override
from .errors import DomainError, ScccError, exit_code_for
from .exit_bank import bank_threshold, bank_wf_grid, build_bank, load_bank, save_bank
from .exit_chart import (
    curves_to_frame,
    default_ia_grid,
    exit_curve_classical,
    exit_curve_lower,
    exit_curve_upper,
    pick_d2,
    predict_ber,
    threshold_search,
    thresholds_to_frame,
    trajectory,
    tunnel_gap,
    wf_grid,
)
from .harness import StopRule, combined_prediction, run_ber, strategy_d2
from .optimizer import generate_tables
from .parallel import compute_session, prepare_run_dir, write_manifest
from .puncturing import NP_LOWER, NP_UPPER, CodeDimensions, CodeFamily, dimensions_for, length_for_rate
from .sccc import ScccConfig
from .wef import EnumLimits, bound_curve, enumerators_for, truncation_check, ub_grid

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger(__name__)


def handles_errors(func):
    """Log library errors and leave with the matching exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ScccError as e:
            logger.error(f"{type(e).__name__}: {e}")
            sys.exit(exit_code_for(e))

    return wrapper


def config_option(func):
    return click.option(
        "--config-file",
        type=click.Path(path_type=Path),
        default=Path("config.toml"),
        help="Path to the configuration file (defaults apply when it does not exist).",
    )(func)


def dims_options(func):
    options = [
        click.option("--d1", type=int, default=None, help="Transmitted upper parity bits per 200 info bits (0..100)."),
        click.option("--d2", type=int, default=None, help="Transmitted lower parity bits per 200 info bits (0..300)."),
        click.option("--rate", type=str, default=None, help="Code rate, e.g. 1/2; combined with --d2."),
        click.option("--rho1", type=str, default=None, help="Upper permeability rate, e.g. 1/5."),
        click.option("--rho2", type=str, default=None, help="Lower permeability rate, e.g. 1/15."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def parallel_options(func):
    options = [
        click.option("--threads", type=int, default=None, help="Worker count (1 runs serially); overrides config."),
        click.option("--scheduler", type=str, default=None, help="Address of a Dask scheduler (e.g., tcp://127.0.0.1:8786)."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def seed_option(func):
    return click.option("--seed", type=int, default=None, help="Master seed; a random one is drawn and recorded when omitted.")(func)


def tables_option(func):
    return click.option("--tables-dir", type=click.Path(path_type=Path), default=None, help="Directory holding upper.txt and lower.txt.")(func)


def resolve_seed(seed):
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
        logger.info(f"No --seed given, using {seed}")
    return seed


def resolve_dims(d1, d2, rate, rho1, rho2, K=200) -> CodeDimensions:
    if rate is not None:
        if d2 is None:
            raise DomainError("--rate needs --d2 (or use the strategy command)")
        return dimensions_for(Fraction(rate), d2, K=K)
    if rho1 is not None or rho2 is not None:
        if rho1 is None or rho2 is None:
            raise DomainError("--rho1 and --rho2 go together")
        d1_exact = Fraction(rho1) * NP_UPPER
        d2_exact = Fraction(rho2) * NP_LOWER
        if d1_exact.denominator != 1 or d2_exact.denominator != 1:
            raise DomainError(f"rho1={rho1}, rho2={rho2} do not give integer d1, d2")
        return CodeDimensions(d1=int(d1_exact), d2=int(d2_exact), K=K)
    if d1 is None or d2 is None:
        raise DomainError("Give --d1 and --d2, --rate and --d2, or --rho1 and --rho2")
    return CodeDimensions(d1=d1, d2=d2, K=K)


def resolve_family(config: dict, tables_dir) -> CodeFamily:
    override(config, "code", tables_dir=str(tables_dir) if tables_dir else None)
    return CodeFamily.from_config(config["code"]["tables_dir"])


def curve_kwargs(config: dict, seed: int) -> dict:
    return {
        "ia_grid": default_ia_grid(config["exit"]["ia_points"]),
        "n_samples": config["exit"]["n_samples"],
        "seed": seed,
        "frame_length": config["exit"]["frame_length"],
        "max_log": config["simulation"]["max_log"],
    }


def bound_limits(config: dict) -> EnumLimits:
    b = config["bound"]
    return EnumLimits(b["w_max"], b["h_max"], b["l_max"])


def snr_grid(start, stop, step):
    return np.round(np.arange(start, stop + step / 2, step), 6)


def write_csv(frame: pd.DataFrame, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info(f"Wrote {len(frame)} rows to {path}")


def load_banks(upper_bank, lower_bank):
    if (upper_bank is None) != (lower_bank is None):
        raise DomainError("--upper-bank and --lower-bank go together")
    if upper_bank is None:
        return None
    return load_bank(upper_bank), load_bank(lower_bank)


@click.group()
@click.option("--verbose", is_flag=True, help="Log at DEBUG level.")
def cli(verbose):
    """
    Rate-compatible SCCC toolkit: puncturing tables, EXIT charts,
    union bounds and BER simulation.
    """
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


@cli.command()
@dims_options
@handles_errors
def rate(d1, d2, rate, rho1, rho2):
    """
    Print the code dimensions for (d1, d2), (rate, d2) or (rho1, rho2).
    """
    dims = resolve_dims(d1, d2, rate, rho1, rho2)
    click.echo(f"D=[{dims.d0}, {dims.d1}, {dims.d2}]")
    click.echo(f"rho0={dims.rho0} rho1={dims.rho1} rho2={dims.rho2}")
    click.echo(f"L={dims.L}")
    click.echo(f"R={dims.R}")


@cli.command()
@config_option
@click.option("--output-dir", type=click.Path(path_type=Path), default=Path("tables"), help="Where upper.txt, lower.txt and search_log.json go.")
@click.option("--n-steps", type=int, default=None, help="Stop both searches after this many positions (for quick runs).")
@click.option("--ref-snr-db", type=float, default=None, help="Reference Eb/N0 of the scoring criterion; overrides config.")
@parallel_options
@handles_errors
def tables(config_file, output_dir, n_steps, ref_snr_db, threads, scheduler):
    """
    Regenerate the rate-compatible puncturing tables by greedy search.
    """
    config = load_config(config_file)
    override(config, "optimizer", ref_snr_db=ref_snr_db)
    override(config, "resources", threads=threads)
    opt = config["optimizer"]
    limits = EnumLimits(opt["w_max"], opt["h_max"], opt["l_max"])

    with compute_session(scheduler, config["resources"]["threads"], config["resources"]) as client:
        generate_tables(output_dir, limits, opt["ref_snr_db"], opt["ref_rate"], n_steps, client)
    click.echo(f"Tables written to {output_dir}")


@cli.command("exit-curve")
@config_option
@dims_options
@click.option("--ebn0", "ebn0", type=float, multiple=True, required=True, help="Eb/N0 in dB (repeatable).")
@click.option("--classical", is_flag=True, help="Also compute the classical outer/inner curves.")
@click.option("--iterations", type=int, default=None, help="Iterations for the predicted trajectory; overrides config.")
@click.option("--output", type=click.Path(path_type=Path), default=Path("exit_curves.csv"), help="CSV output path.")
@tables_option
@seed_option
@parallel_options
@handles_errors
def exit_curve(config_file, d1, d2, rate, rho1, rho2, ebn0, classical, iterations, output, tables_dir, seed, threads, scheduler):
    """
    EXIT curves of C_U/C_L (and optionally C_0/C_1) at the given SNRs.
    """
    config = load_config(config_file)
    override(config, "simulation", n_iterations=iterations)
    override(config, "resources", threads=threads)
    seed = resolve_seed(seed)
    family = resolve_family(config, tables_dir)
    dims = resolve_dims(d1, d2, rate, rho1, rho2)
    kwargs = curve_kwargs(config, seed)
    n_iterations = config["simulation"]["n_iterations"]

    curves = []
    with compute_session(scheduler, config["resources"]["threads"], config["resources"]) as client:
        for eb in ebn0:
            upper = exit_curve_upper(family, dims, eb, client=client, **kwargs)
            lower = exit_curve_lower(family, dims, eb, client=client, **kwargs)
            curves += [upper, lower]
            traj = trajectory(upper, lower, n_iterations)
            click.echo(
                f"{eb:.2f} dB equivalent: tunnel gap {tunnel_gap(upper, lower):+.4f}, "
                f"predicted Pb after {n_iterations} iterations {predict_ber(traj.final_app):.3e}"
            )
            if classical:
                outer, inner = exit_curve_classical(family, dims, eb, client=client, **kwargs)
                curves += [outer, inner]
                click.echo(f"{eb:.2f} dB classical: tunnel gap {tunnel_gap(outer, inner, start=0.0):+.4f}")
    write_csv(curves_to_frame(curves), output)


@cli.command()
@config_option
@dims_options
@click.option("--target-pb", type=float, default=1e-5, show_default=True, help="Target bit error probability.")
@click.option("--iterations", type=int, default=None, help="Decoder iterations; overrides config.")
@click.option("--classical", is_flag=True, help="Use the classical outer/inner decomposition.")
@click.option("--upper-bank", type=click.Path(exists=True, path_type=Path), default=None, help="Upper EXIT bank (Zarr).")
@click.option("--lower-bank", type=click.Path(exists=True, path_type=Path), default=None, help="Lower EXIT bank (Zarr).")
@click.option("--output", type=click.Path(path_type=Path), default=None, help="CSV output path for the threshold row.")
@tables_option
@seed_option
@parallel_options
@handles_errors
def threshold(config_file, d1, d2, rate, rho1, rho2, target_pb, iterations, classical, upper_bank, lower_bank, output, tables_dir, seed, threads, scheduler):
    """
    Minimum Eb/N0 whose EXIT trajectory reaches the target Pb.
    """
    config = load_config(config_file)
    override(config, "simulation", n_iterations=iterations)
    override(config, "resources", threads=threads)
    dims = resolve_dims(d1, d2, rate, rho1, rho2)
    n_iterations = config["simulation"]["n_iterations"]
    banks = load_banks(upper_bank, lower_bank)

    if banks is not None:
        result = bank_threshold(*banks, dims, target_pb, n_iterations, config["exit"]["tolerance_db"])
    else:
        seed = resolve_seed(seed)
        family = resolve_family(config, tables_dir)
        kwargs = curve_kwargs(config, seed)
        with compute_session(scheduler, config["resources"]["threads"], config["resources"]) as client:
            result = threshold_search(
                family, dims, target_pb, n_iterations, tol=config["exit"]["tolerance_db"], client=client, classical=classical, **kwargs
            )

    gap = bpsk_capacity_gap(float(dims.R), result.eb_n0_db_min)
    click.echo(f"{dims}: threshold {result.eb_n0_db_min:.2f} dB (Pb={target_pb}, {n_iterations} iterations)")
    click.echo(f"BPSK capacity limit {bpsk_limit_db(float(dims.R)):.2f} dB, gap {gap:.2f} dB")
    if output:
        write_csv(thresholds_to_frame([result]), output)


@cli.command("wf-grid")
@config_option
@click.option("--rate", type=str, required=True, help="Code rate, e.g. 1/2.")
@click.option("--target-pb", type=float, default=1e-5, show_default=True)
@click.option("--iterations", type=int, default=None, help="Decoder iterations; overrides config.")
@click.option("--d2-step", type=int, default=None, help="Grid step over d2; overrides config.")
@click.option("--upper-bank", type=click.Path(exists=True, path_type=Path), default=None, help="Upper EXIT bank (Zarr).")
@click.option("--lower-bank", type=click.Path(exists=True, path_type=Path), default=None, help="Lower EXIT bank (Zarr).")
@click.option("--output", type=click.Path(path_type=Path), default=Path("wf_grid.csv"), help="CSV output path.")
@tables_option
@seed_option
@parallel_options
@handles_errors
def wf_grid_command(config_file, rate, target_pb, iterations, d2_step, upper_bank, lower_bank, output, tables_dir, seed, threads, scheduler):
    """
    Waterfall thresholds over feasible d2 at one rate.
    """
    config = load_config(config_file)
    override(config, "simulation", n_iterations=iterations)
    override(config, "exit", d2_step=d2_step)
    override(config, "resources", threads=threads)
    n_iterations = config["simulation"]["n_iterations"]
    grid, L = _wf_grid(config, rate, target_pb, n_iterations, upper_bank, lower_bank, tables_dir, seed, scheduler)

    rows = [
        {"rate": str(Fraction(rate)), "d2": d2, "eb_n0_db_min": eb, "target_pb": target_pb, "iters": n_iterations}
        for d2, eb in grid
    ]
    write_csv(pd.DataFrame(rows, columns=["rate", "d2", "eb_n0_db_min", "target_pb", "iters"]), output)
    click.echo(f"R={Fraction(rate)}: WF-optimal d2={pick_d2(grid)}")


def _wf_grid(config, rate, target_pb, n_iterations, upper_bank, lower_bank, tables_dir, seed, scheduler):
    L = length_for_rate(Fraction(rate))
    banks = load_banks(upper_bank, lower_bank)
    if banks is not None:
        return bank_wf_grid(*banks, Fraction(rate), target_pb, n_iterations, config["exit"]["d2_step"], config["exit"]["tolerance_db"]), L
    seed = resolve_seed(seed)
    family = resolve_family(config, tables_dir)
    estimation = {**curve_kwargs(config, seed), "tol": config["exit"]["tolerance_db"]}
    with compute_session(scheduler, config["resources"]["threads"], config["resources"]) as client:
        grid = wf_grid(family, Fraction(rate), target_pb, n_iterations, config["exit"]["d2_step"], client, **estimation)
    return grid, L


@cli.command()
@config_option
@dims_options
@click.option("--K", "K", type=int, default=None, help="Information bits per frame; overrides config.")
@click.option("--ebn0-start", type=float, default=0.0, show_default=True)
@click.option("--ebn0-stop", type=float, default=10.0, show_default=True)
@click.option("--ebn0-step", type=float, default=0.25, show_default=True)
@click.option("--output", type=click.Path(path_type=Path), default=Path("bound.csv"), help="CSV output path.")
@click.option("--enumerators-dir", type=click.Path(path_type=Path), default=None, help="Also dump both enumerators as CSV here.")
@tables_option
@handles_errors
def bound(config_file, d1, d2, rate, rho1, rho2, K, ebn0_start, ebn0_stop, ebn0_step, output, enumerators_dir, tables_dir):
    """
    Union bound on the bit error probability over an Eb/N0 range.
    """
    config = load_config(config_file)
    override(config, "code", K=K)
    K = config["code"]["K"]
    family = resolve_family(config, tables_dir)
    dims = resolve_dims(d1, d2, rate, rho1, rho2)
    limits = bound_limits(config)

    curve = bound_curve(family, dims, K, snr_grid(ebn0_start, ebn0_stop, ebn0_step), limits)
    write_csv(curve.to_frame(), output)
    write_manifest(Path(output).with_suffix(".json"), config, curve.metadata())
    change = truncation_check(family, dims, K, ebn0_stop, limits)
    click.echo(f"{dims}, K={K}: bound changes by {100 * change:.3f}% at {ebn0_stop} dB when h_max grows by 10")

    if enumerators_dir:
        upper, lower = enumerators_for(family, dims, K, limits)
        write_csv(upper.to_frame(), Path(enumerators_dir) / "upper_wef.csv")
        write_csv(lower.to_frame(), Path(enumerators_dir) / "lower_wef.csv")


@cli.command("ub-grid")
@config_option
@click.option("--rate", type=str, required=True, help="Code rate, e.g. 1/2.")
@click.option("--K", "K", type=int, default=None, help="Information bits per frame; overrides config.")
@click.option("--target-pb", type=float, default=1e-9, show_default=True)
@click.option("--d2-step", type=int, default=None, help="Grid step over d2; overrides config.")
@click.option("--output", type=click.Path(path_type=Path), default=Path("ub_grid.csv"), help="CSV output path.")
@tables_option
@parallel_options
@handles_errors
def ub_grid_command(config_file, rate, K, target_pb, d2_step, output, tables_dir, threads, scheduler):
    """
    Union-bound required Eb/N0 over feasible d2 at one rate.
    """
    config = load_config(config_file)
    override(config, "code", K=K)
    override(config, "exit", d2_step=d2_step)
    override(config, "resources", threads=threads)
    family = resolve_family(config, tables_dir)
    K = config["code"]["K"]

    with compute_session(scheduler, config["resources"]["threads"], config["resources"]) as client:
        grid = ub_grid(family, Fraction(rate), K, target_pb, config["exit"]["d2_step"], bound_limits(config), client)
    rows = [{"rate": str(Fraction(rate)), "d2": d2, "eb_n0_db_min": eb, "target_pb": target_pb, "K": K} for d2, eb in grid]
    write_csv(pd.DataFrame(rows, columns=["rate", "d2", "eb_n0_db_min", "target_pb", "K"]), output)


@cli.command()
@config_option
@click.option("--rate", type=str, default=None, help="Code rate, e.g. 2/3.")
@click.option("--mode", type=click.Choice(["ef", "wf", "compromise"]), default="compromise", show_default=True)
@click.option("--all-rates", is_flag=True, help="Emit d2 for every L in [200, 600] as CSV.")
@click.option("--target-pb", type=float, default=1e-5, show_default=True, help="WF target Pb.")
@click.option("--upper-bank", type=click.Path(exists=True, path_type=Path), default=None, help="Upper EXIT bank (Zarr).")
@click.option("--lower-bank", type=click.Path(exists=True, path_type=Path), default=None, help="Lower EXIT bank (Zarr).")
@click.option("--output", type=click.Path(path_type=Path), default=Path("strategy.csv"), help="CSV output path for --all-rates.")
@tables_option
@seed_option
@parallel_options
@handles_errors
def strategy(config_file, rate, mode, all_rates, target_pb, upper_bank, lower_bank, output, tables_dir, seed, threads, scheduler):
    """
    d2 chosen by the EF, WF or compromise strategy.
    """
    config = load_config(config_file)
    override(config, "resources", threads=threads)
    n_iterations = config["simulation"]["n_iterations"]

    def choose(r):
        grid = None
        if mode == "wf":
            grid, _ = _wf_grid(config, r, target_pb, n_iterations, upper_bank, lower_bank, tables_dir, seed, scheduler)
        return strategy_d2(r, mode, grid)

    if all_rates:
        if mode == "wf" and upper_bank is None:
            raise DomainError("--all-rates with --mode wf needs --upper-bank and --lower-bank")
        rows = []
        for L in range(200, 601):
            r = Fraction(200, L)
            d2 = choose(r)
            rows.append({"L": L, "rate": str(r), "mode": mode, "d2": d2, "rho2": d2 / NP_LOWER})
        write_csv(pd.DataFrame(rows), output)
        return

    if rate is None:
        raise DomainError("--rate is required unless --all-rates is given")
    d2 = choose(Fraction(rate))
    dims = dimensions_for(Fraction(rate), d2)
    click.echo(f"R={Fraction(rate)} mode={mode}: d2={d2} rho2={dims.rho2} D={dims.D}")


@cli.command()
@config_option
@dims_options
@click.option("--K", "K", type=int, default=None, help="Information bits per frame; overrides config.")
@click.option("--ebn0-start", type=float, default=0.0, show_default=True)
@click.option("--ebn0-stop", type=float, default=3.0, show_default=True)
@click.option("--ebn0-step", type=float, default=0.25, show_default=True)
@click.option("--iterations", type=int, default=None, help="Decoder iterations; overrides config.")
@click.option("--uncoded", is_flag=True, help="Simulate uncoded BPSK instead of the SCCC.")
@click.option("--record-iterations", is_flag=True, help="Also record BER after every iteration.")
@click.option("--min-bit-errors", type=int, default=None, help="Stop rule; overrides config.")
@click.option("--max-bits", type=int, default=None, help="Stop rule; overrides config.")
@click.option("--output-dir", type=click.Path(path_type=Path), default=Path("runs"), help="Base directory for run folders.")
@tables_option
@seed_option
@parallel_options
@handles_errors
def simulate(config_file, d1, d2, rate, rho1, rho2, K, ebn0_start, ebn0_stop, ebn0_step, iterations, uncoded, record_iterations,
             min_bit_errors, max_bits, output_dir, tables_dir, seed, threads, scheduler):
    """
    Monte Carlo BER/FER over an Eb/N0 range.
    """
    config = load_config(config_file)
    override(config, "code", K=K)
    override(config, "simulation", n_iterations=iterations, record_iterations=record_iterations or None,
             min_bit_errors=min_bit_errors, max_bits=max_bits)
    override(config, "resources", threads=threads)
    seed = resolve_seed(seed)
    sim = config["simulation"]
    K = config["code"]["K"]

    scc = None
    if not uncoded:
        family = resolve_family(config, tables_dir)
        dims = resolve_dims(d1, d2, rate, rho1, rho2, K=K)
        scc = ScccConfig.build(family, dims, seed=seed, kind=config["code"]["interleaver"], s=config["code"]["s"])

    run_dir = prepare_run_dir(output_dir, config, {"seed": seed})
    stop = StopRule(sim["min_bit_errors"], sim["max_bits"])
    with compute_session(scheduler, config["resources"]["threads"], config["resources"]) as client:
        curve = run_ber(
            scc,
            snr_grid(ebn0_start, ebn0_stop, ebn0_step),
            stop,
            seed,
            sim["n_iterations"],
            sim["max_log"],
            sim["batch_frames"],
            sim["record_iterations"],
            K=K,
            client=client,
        )

    write_csv(curve.to_frame(), run_dir / "ber.csv")
    if sim["record_iterations"] and not uncoded:
        write_csv(curve.iterations_frame(), run_dir / "iterations.csv")
    if scc is not None:
        scc.interleaver.save(run_dir / "interleaver.txt")
    write_manifest(run_dir / "metadata.json", config, curve.manifest())
    click.echo(f"Results in {run_dir}")


@cli.command()
@config_option
@dims_options
@click.option("--K", "K", type=int, default=None, help="Information bits per frame for the bound; overrides config.")
@click.option("--ebn0-start", type=float, default=0.0, show_default=True)
@click.option("--ebn0-stop", type=float, default=8.0, show_default=True)
@click.option("--ebn0-step", type=float, default=0.25, show_default=True)
@click.option("--iterations", type=int, default=None, help="Decoder iterations; overrides config.")
@click.option("--output", type=click.Path(path_type=Path), default=Path("prediction.csv"), help="CSV output path.")
@tables_option
@seed_option
@parallel_options
@handles_errors
def predict(config_file, d1, d2, rate, rho1, rho2, K, ebn0_start, ebn0_stop, ebn0_step, iterations, output, tables_dir, seed, threads, scheduler):
    """
    Combined prediction: EXIT in the waterfall, union bound in the floor.
    """
    config = load_config(config_file)
    override(config, "code", K=K)
    override(config, "simulation", n_iterations=iterations)
    override(config, "resources", threads=threads)
    seed = resolve_seed(seed)
    family = resolve_family(config, tables_dir)
    dims = resolve_dims(d1, d2, rate, rho1, rho2)

    with compute_session(scheduler, config["resources"]["threads"], config["resources"]) as client:
        frame = combined_prediction(
            family,
            dims,
            config["code"]["K"],
            snr_grid(ebn0_start, ebn0_stop, ebn0_step),
            config["simulation"]["n_iterations"],
            bound_limits(config),
            client,
            **curve_kwargs(config, seed),
        )
    write_csv(frame, output)
    write_manifest(Path(output).with_suffix(".json"), config, {"seed": seed, "composition_rule": frame.attrs["composition_rule"]})


@cli.command("exit-bank")
@config_option
@click.option("--component", type=click.Choice(["upper", "lower", "both"]), default="both", show_default=True)
@click.option("--es-start", type=float, default=-6.0, show_default=True, help="Lowest Es/N0 in dB.")
@click.option("--es-stop", type=float, default=8.0, show_default=True, help="Highest Es/N0 in dB.")
@click.option("--es-step", type=float, default=0.25, show_default=True)
@click.option("--d-step", type=int, default=1, show_default=True, help="Step over d1 / d2.")
@click.option("--output-dir", type=click.Path(path_type=Path), default=Path("banks"), help="Where upper.zarr / lower.zarr go.")
@tables_option
@seed_option
@parallel_options
@handles_errors
def exit_bank(config_file, component, es_start, es_stop, es_step, d_step, output_dir, tables_dir, seed, threads, scheduler):
    """
    Precompute EXIT functions for every d1 and d2 over an Es/N0 grid.
    """
    config = load_config(config_file)
    override(config, "resources", threads=threads)
    seed = resolve_seed(seed)
    family = resolve_family(config, tables_dir)
    kwargs = curve_kwargs(config, seed)
    es_grid = snr_grid(es_start, es_stop, es_step)
    output_dir.mkdir(parents=True, exist_ok=True)

    components = ["upper", "lower"] if component == "both" else [component]
    with compute_session(scheduler, config["resources"]["threads"], config["resources"]) as client:
        for comp in components:
            n_p = NP_UPPER if comp == "upper" else NP_LOWER
            d_values = sorted(set(range(0, n_p + 1, d_step)) | {n_p})
            ds = build_bank(family, comp, d_values, es_grid, client=client, **kwargs)
            save_bank(ds, output_dir / f"{comp}.zarr")
    write_manifest(output_dir / "metadata.json", config, {"seed": seed})


@cli.command()
@click.option("--rate", type=str, required=True, help="Code rate, e.g. 1/2.")
@click.option("--ebn0", type=float, default=None, help="Operating point whose gap to the limit is reported.")
@handles_errors
def capacity(rate, ebn0):
    """
    BPSK-input AWGN capacity limit (Eb/N0) for a rate.
    """
    r = float(Fraction(rate))
    limit = bpsk_limit_db(r)
    click.echo(f"R={Fraction(rate)}: BPSK limit {limit:.3f} dB")
    if ebn0 is not None:
        click.echo(f"Gap at {ebn0:.2f} dB: {bpsk_capacity_gap(r, ebn0):.3f} dB")


if __name__ == "__main__":
    cli()
