"""
Dask session handling and order-preserving fan-out of independent jobs.

Every analysis in the package (EXIT points, grid cells, greedy candidates,
simulation batches) is an independent pure job. ``map_ordered`` runs a list of
them either serially or on a dask.distributed cluster and always returns the
results in job order, so outputs never depend on completion order.
"""

import gc
import json
import logging
import sys
import threading
from contextlib import contextmanager
from datetime import datetime
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Sequence

import dask
import psutil
from dask.distributed import Client, as_completed
from tqdm import tqdm

logger = logging.getLogger(__name__)


def package_version() -> str:
    try:
        return metadata.version("rc-sccc")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def monitor_resources(interval=5, stop_event=None):
    """
    Monitor system resources in a background thread.
    """
    while not stop_event.is_set():
        cpu_percent = psutil.cpu_percent(interval=1)
        memory = psutil.virtual_memory()

        logger.debug(f"Resource Monitor - CPU: {cpu_percent}%, Memory: {memory.percent}% (Used: {memory.used / (1024**3):.2f} GB)")

        if memory.percent > 90:
            logger.warning("High memory usage detected!")

        stop_event.wait(interval)


def start_client(scheduler: str | None = None, threads: int = 1, resources: dict | None = None) -> Client | None:
    """
    Connect to a scheduler, start a local cluster, or return None for serial runs.
    """
    if not scheduler and threads <= 1:
        logger.info("Running serially (threads=1)")
        return None

    dask_config = {
        "distributed.scheduler.allowed-failures": 0,
    }
    if resources:
        if "memory_target" in resources:
            dask_config["distributed.worker.memory.target"] = resources["memory_target"]
        if "memory_spill" in resources:
            dask_config["distributed.worker.memory.spill"] = resources["memory_spill"]
        if "memory_pause" in resources:
            dask_config["distributed.worker.memory.pause"] = resources["memory_pause"]
        dask_config["distributed.worker.memory.terminate"] = False
    dask.config.set(dask_config)

    if scheduler:
        logger.info(f"Connecting to Dask scheduler at {scheduler}...")
        client = Client(scheduler)
    else:
        logger.info(f"Starting local Dask cluster with {threads} workers...")
        client = Client(n_workers=threads, threads_per_worker=1)

    logger.info(f"Dask Dashboard link: {client.dashboard_link}")
    return client


@contextmanager
def compute_session(scheduler: str | None = None, threads: int = 1, resources: dict | None = None, monitor: bool = True):
    """Client plus resource monitor, both torn down on exit."""
    client = start_client(scheduler, threads, resources)
    stop_monitor = threading.Event()
    monitor_thread = None
    if monitor and client is not None:
        monitor_thread = threading.Thread(target=monitor_resources, args=(5, stop_monitor), daemon=True)
        monitor_thread.start()
    try:
        yield client
    finally:
        stop_monitor.set()
        if monitor_thread is not None:
            monitor_thread.join()
        if client is not None:
            client.close()


def map_ordered(
    func: Callable[..., Any],
    jobs: Sequence[tuple],
    client: Client | None = None,
    desc: str | None = None,
    batch_size: int | None = None,
    progress: bool = True,
) -> list:
    """
    Evaluate ``func(*job)`` for every job and return results in job order.

    With a client, jobs are submitted in batches of ``batch_size`` (all at once
    when None). A failed job is logged and its exception re-raised after the
    batch has settled.
    """
    results: list = [None] * len(jobs)
    if not jobs:
        return results

    if client is None:
        for idx, job in enumerate(tqdm(jobs, desc=desc, disable=not progress)):
            results[idx] = func(*job)
        return results

    batch_size = batch_size or len(jobs)
    n_batches = (len(jobs) + batch_size - 1) // batch_size
    with tqdm(total=len(jobs), desc=desc, disable=not progress) as bar:
        for start in range(0, len(jobs), batch_size):
            batch = jobs[start:start + batch_size]
            if n_batches > 1:
                logger.debug(f"Submitting batch {start // batch_size + 1}/{n_batches}...")
            futures = {}
            for offset, job in enumerate(batch):
                future = client.submit(func, *job, pure=False)
                futures[future] = start + offset

            failure = None
            for future in as_completed(list(futures)):
                idx = futures[future]
                if future.status == "error":
                    exc = future.exception()
                    logger.error(f"Job {idx} failed with error: {exc}")
                    failure = failure or exc
                else:
                    results[idx] = future.result()
                bar.update(1)

            del futures
            gc.collect()
            if failure is not None:
                raise failure
    return results


def prepare_run_dir(output_dir: Path, config: dict, extra: dict | None = None) -> Path:
    """
    Create ``run_<timestamp>`` under output_dir and write metadata.json.
    """
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    run_dir = Path(output_dir) / f"run_{timestamp}"
    suffix = 1
    while run_dir.exists():
        run_dir = Path(output_dir) / f"run_{timestamp}_{suffix}"
        suffix += 1
    run_dir.mkdir(parents=True)
    logger.info(f"Output will be saved to: {run_dir}")

    write_manifest(run_dir / "metadata.json", config, extra, timestamp=timestamp)
    return run_dir


def write_manifest(path: Path, config: dict, extra: dict | None = None, timestamp: str | None = None) -> None:
    metadata_doc = {
        "timestamp": timestamp or datetime.now().strftime("%Y%m%d_%H%M%S"),
        "version": package_version(),
        "config": config,
        "command": " ".join(sys.argv),
    }
    if extra:
        metadata_doc.update(extra)
    with open(path, "w") as f:
        json.dump(metadata_doc, f, indent=2, default=str)
    logger.info(f"Saved {Path(path).name}")
