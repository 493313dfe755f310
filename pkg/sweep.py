"""
Sweep runner: one output directory per (model, σ) cell, cells run serially
or on a ray worker pool, and a manifest written once by the coordinator.
"""
import json
import logging
import os
from dataclasses import replace

from tqdm import tqdm

import commands
import utils
from exceptions import ConfigError, NumericalError
from models import ModelTag

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
PROJECT_DIR = os.path.dirname(os.path.abspath(__file__))
SWEEP_COMMANDS = ("spectrum", "otoc", "echo", "classical")


def run_cell(config, command_names):
    """
    Run the requested commands for a single-cell config.

    Failures are caught and reported in the returned status record so one bad
    cell never aborts the sweep.
    """
    model, sigma = config.model, config.sigmas[0]
    cell = commands.cell_name(model, sigma)
    record = {"cell": cell, "model": model, "sigma": sigma, "status": "ok", "error": None}
    try:
        for name in command_names:
            if name == "echo":
                commands.cmd_echo(config, compare={}, out=os.path.join(config.out, cell, "echo"))
            elif name == "classical":
                commands.cmd_classical(config, family=False)
            else:
                commands.COMMANDS[name](config)
    except (NumericalError, ValueError) as err:
        logger.error("cell %s failed: %s", cell, err)
        record.update(status="failed", error=f"{type(err).__name__}: {err}")
    return record


def run_family(config):
    """Region map and bifurcation branches of one preset family."""
    cell = f"{config.model}_family"
    record = {"cell": cell, "model": config.model, "sigma": None, "status": "ok", "error": None}
    try:
        commands.family_maps(config)
    except (NumericalError, ValueError) as err:
        logger.error("cell %s failed: %s", cell, err)
        record.update(status="failed", error=f"{type(err).__name__}: {err}")
    return record


def _plan(config, models=None, sigmas=None):
    section = config.section("sweep")
    names = [str(c) for c in section.get("commands") or []]
    unknown = [c for c in names if c not in SWEEP_COMMANDS]
    if unknown:
        raise ConfigError(f"unknown sweep commands {unknown}, expected a subset of {list(SWEEP_COMMANDS)}")
    try:
        models = [ModelTag(m).value for m in (section.get("models") or [] if models is None else models)]
        sigmas = [float(s) for s in (section.get("sigmas") or [] if sigmas is None else sigmas)]
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid sweep axes: {err}") from err
    if any(s < 0 for s in sigmas):
        raise ConfigError(f"sweep sigmas must be >= 0, got {sigmas}")
    cells = [config.for_cell(m, s, config.out) for m in models for s in sigmas]
    families = []
    if "classical" in names and sigmas:
        families = [
            replace(config.for_cell(m, sigmas[0], config.out), sigmas=tuple(sigmas))
            for m in models
            if ModelTag(m) in commands.FAMILIES
        ]
    return names, cells, families


def _run_serial(tasks, quiet):
    return [fn(*args) for fn, args in tqdm(tasks, desc="Sweep cells", disable=quiet)]


def _run_pool(tasks, workers):
    import ray

    ray.init(
        num_cpus=workers,
        include_dashboard=False,
        ignore_reinit_error=True,
        logging_level=logging.WARNING,
        runtime_env={"env_vars": {"PYTHONPATH": PROJECT_DIR}},
    )
    try:
        futures = [ray.remote(fn).remote(*args) for fn, args in tasks]
        return ray.get(futures)
    finally:
        ray.shutdown()


def cmd_sweep(config, models=None, sigmas=None):
    """
    Run every (model, σ) cell of the ``sweep`` section.

    Parameters
    ----------
    config : RunConfig
        Resolved configuration; ``sweep.commands``, ``sweep.models`` and
        ``sweep.sigmas`` span the cells, ``workers`` sizes the pool
    models, sigmas : list, optional
        Replace the ``sweep`` section axes

    Returns
    -------
    dict
        The manifest, also written to ``<out>/manifest.json``
    """
    names, cells, families = _plan(config, models, sigmas)
    os.makedirs(config.out, exist_ok=True)
    tasks = [(run_cell, (cell, names)) for cell in cells] + [(run_family, (family,)) for family in families]
    logger.info("sweep: %d cells, commands %s, %d worker(s)", len(tasks), names, config.workers)

    if config.workers > 1 and len(tasks) > 1:
        records = _run_pool(tasks, config.workers)
    else:
        records = _run_serial(tasks, config.quiet)

    files = {path: digest for path, digest in utils.checksums(config.out).items() if path != MANIFEST}
    for record in records:
        prefix = record["cell"] + "/"
        record["files"] = {path: digest for path, digest in files.items() if path.startswith(prefix)}

    manifest = {
        "inputs": {
            **config.to_dict(),
            "commands": names,
            "models": sorted({c.model for c in cells}),
            "sweep_sigmas": sorted({c.sigmas[0] for c in cells}),
        },
        "versions": utils.package_versions(),
        "cells": sorted(records, key=lambda r: r["cell"]),
        "status": "ok" if all(r["status"] == "ok" for r in records) else "partial",
    }
    with open(os.path.join(config.out, MANIFEST), "w", newline="") as f:
        f.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    failed = [r["cell"] for r in records if r["status"] != "ok"]
    if failed:
        logger.warning("sweep finished with failed cells: %s", failed)
    return manifest
