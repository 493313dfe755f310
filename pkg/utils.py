import copy
import hashlib
import logging
import os
from dataclasses import dataclass, field, replace
from importlib import metadata

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns
import yaml

from exceptions import ConfigError
from models import ModelTag

logger = logging.getLogger(__name__)

plt.style.use("ggplot")

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.yaml")
CONVENTIONS = ("half", "canonical")
MIN_GRID_POINTS = 64
VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "PyYAML")


def get_config(config_file=DEFAULT_CONFIG):
    """
    Read config file which contains model, solver and output settings.

    Parameters
    ----------
    config_file : str, optional
        Path of config file, by default the config.yaml next to this module

    Returns
    -------
    dict
        Configuration as dictionary
    """
    try:
        with open(config_file, "r") as f:
            config = yaml.safe_load(f)
    except OSError as err:
        raise ConfigError(f"cannot read config file {config_file}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"config file {config_file} is not valid YAML: {err}") from err
    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError(f"config file {config_file} must hold a mapping at the top level")
    return config


def merge_config(base, override):
    """Recursive merge; values of ``override`` win, nested mappings are merged key by key."""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@dataclass(frozen=True)
class RunConfig:
    """
    Fully resolved parameter set of one run.

    The typed fields cover what every command needs; ``settings`` keeps the
    merged configuration so commands can read their own section.
    """

    model: str
    sigmas: tuple
    n_points: int
    domain: tuple
    k_states: int
    k_trunc: int
    richardson: bool
    convention: str
    t_max: float
    samples: int
    betas: tuple
    out: str
    workers: int = 1
    quiet: bool = False
    settings: dict = field(default_factory=dict, compare=False)

    @property
    def times(self):
        return np.linspace(0.0, self.t_max, self.samples)

    def section(self, name):
        return self.settings.get(name) or {}

    def model_block(self, sigma):
        block = {"model": self.model, "sigma": float(sigma)}
        custom = self.section("model")
        if self.model == ModelTag.CUSTOM.value:
            block["coefficients"] = custom.get("coefficients")
            block["lambda"] = custom.get("lambda")
        return block

    def for_cell(self, model, sigma, out, betas=None):
        """Copy restricted to one (model, σ) cell of a sweep."""
        return replace(
            self, model=model, sigmas=(float(sigma),), out=out, betas=self.betas if betas is None else tuple(betas)
        )

    def to_dict(self):
        return {
            "model": self.model,
            "sigmas": list(self.sigmas),
            "n_points": self.n_points,
            "domain": list(self.domain) if self.domain else None,
            "k_states": self.k_states,
            "k_trunc": self.k_trunc,
            "richardson": self.richardson,
            "convention": self.convention,
            "t_max": self.t_max,
            "samples": self.samples,
            "betas": list(self.betas),
        }


def _as_list(value):
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _flag(args, name):
    return getattr(args, name, None) if args is not None else None


def resolve_run_config(args=None, config_file=None):
    """
    Merge built-in defaults, an optional user config file and command-line flags.

    Parameters
    ----------
    args : argparse.Namespace, optional
        Parsed flags; attributes that are None leave the file values alone
    config_file : str, optional
        User config, deep-merged over the built-in config.yaml

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigError
        On any invalid or inconsistent value
    """
    settings = get_config(DEFAULT_CONFIG)
    if config_file:
        settings = merge_config(settings, get_config(config_file))

    model = settings.get("model") or {}
    grid = settings.get("grid") or {}
    solver = settings.get("solver") or {}
    operators = settings.get("operators") or {}
    otoc = settings.get("otoc") or {}
    thermal = settings.get("thermal") or {}
    output = settings.get("output") or {}
    sweep = settings.get("sweep") or {}

    def pick(flag, value):
        chosen = _flag(args, flag)
        return value if chosen is None else chosen

    try:
        name = str(pick("model", model.get("name", ModelTag.MODEL_I.value)))
        tag = ModelTag(name)
    except ValueError:
        raise ConfigError(f"unknown model {name!r}, expected one of {[t.value for t in ModelTag]}") from None
    if tag is ModelTag.CUSTOM and (model.get("coefficients") is None or model.get("lambda") is None):
        raise ConfigError("Custom model needs model.coefficients and model.lambda in the config file")

    try:
        sigmas = tuple(float(s) for s in _as_list(pick("sigma", model.get("sigma", 0.0))))
        n_points = int(pick("grid_points", grid.get("n_points", 4096)))
        k_states = int(pick("k_states", solver.get("k_states", 120)))
        k_trunc = int(pick("k_trunc", operators.get("k_trunc", 100)))
        t_max = float(pick("tmax", otoc.get("t_max", 10.0)))
        samples = int(pick("samples", otoc.get("samples", 500)))
        workers = int(pick("workers", sweep.get("workers", 1)))
        domain = grid.get("domain")
        domain = None if domain is None else tuple(float(v) for v in domain)
        betas = _flag(args, "beta")
        if betas is None:
            temperatures = [float(t) for t in _as_list(thermal.get("temperatures", []))]
            if any(t <= 0 for t in temperatures):
                raise ConfigError(f"temperatures must be positive, got {temperatures}")
            betas = [1.0 / t for t in temperatures]
        betas = tuple(float(b) for b in _as_list(betas))
    except (TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"malformed numeric setting: {err}") from err

    convention = str(pick("convention", operators.get("convention", "half"))).lower()
    if convention not in CONVENTIONS:
        raise ConfigError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    if any(s < 0 for s in sigmas):
        raise ConfigError(f"sigma must be >= 0, got {list(sigmas)}")
    if n_points < MIN_GRID_POINTS:
        raise ConfigError(f"grid needs at least {MIN_GRID_POINTS} points, got {n_points}")
    if domain is not None and (len(domain) != 2 or not domain[1] > domain[0]):
        raise ConfigError(f"grid.domain must be [x_min, x_max] with x_max > x_min, got {list(domain)}")
    if k_states < 1:
        raise ConfigError(f"k_states must be positive, got {k_states}")
    if not 1 <= k_trunc <= k_states:
        raise ConfigError(f"k_trunc must lie in 1..k_states={k_states}, got {k_trunc}")
    if any(b <= 0 for b in betas):
        raise ConfigError(f"beta must be > 0, got {list(betas)}")
    if t_max <= 0 or samples < 2:
        raise ConfigError(f"time grid needs t_max > 0 and at least 2 samples, got t_max={t_max}, samples={samples}")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    quiet = bool(_flag(args, "quiet")) or bool(output.get("quiet", False))
    out = str(pick("out", output.get("dir", "runs")))
    return RunConfig(
        model=tag.value,
        sigmas=sigmas,
        n_points=n_points,
        domain=domain,
        k_states=k_states,
        k_trunc=k_trunc,
        richardson=bool(solver.get("richardson", True)),
        convention=convention,
        t_max=t_max,
        samples=samples,
        betas=betas,
        out=out,
        workers=workers,
        quiet=quiet,
        settings=settings,
    )


def write_csv(path, frame, metadata=None):
    """
    Write a table as CSV preceded by ``# key: value`` metadata lines.

    Floats carry 17 significant digits, so identical inputs give identical bytes.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as f:
        for key, value in (metadata or {}).items():
            f.write(f"# {key}: {value}\n")
        frame.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def read_csv(path):
    """Inverse of write_csv: (DataFrame, metadata dict)."""
    metadata = {}
    with open(path, "r") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
    return pd.read_csv(path, comment="#"), metadata


def write_gnuplot(path, title, plots, xlabel="t", ylabel="", logscale_y=False, image=None):
    """
    Gnuplot script drawing columns of CSV files that sit next to it.

    Parameters
    ----------
    path : str
        Script path, CSV names in ``plots`` are relative to its directory
    title : str
        Chart title
    plots : list[dict]
        Entries with ``csv``, ``using`` (e.g. "1:2"), optional ``title`` and ``style``
    image : str, optional
        PNG name the script renders to, by default the script name
    """
    image = image or os.path.splitext(os.path.basename(path))[0] + ".png"
    lines = [
        'set datafile separator ","',
        'set datafile commentschars "#"',
        "set key autotitle columnhead",
        "set terminal pngcairo size 1200,800",
        f'set output "{image}"',
        f'set title "{title}"',
        f'set xlabel "{xlabel}"',
        f'set ylabel "{ylabel}"',
    ]
    if logscale_y:
        lines.append("set logscale y")
    clauses = []
    for entry in plots:
        clause = f'"{entry["csv"]}" using {entry.get("using", "1:2")} with {entry.get("style", "lines")}'
        if entry.get("title"):
            clause += f' title "{entry["title"]}"'
        clauses.append(clause)
    lines.append("plot " + ", \\\n     ".join(clauses) if clauses else "# nothing to plot")
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")
    return path


def sha256_file(path, chunk_bytes=1 << 20):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_bytes), b""):
            digest.update(chunk)
    return digest.hexdigest()


def checksums(directory):
    """SHA-256 of every file under ``directory`` keyed by sorted relative path."""
    result = {}
    for root, _, files in os.walk(directory):
        for name in files:
            path = os.path.join(root, name)
            result[os.path.relpath(path, directory).replace(os.sep, "/")] = sha256_file(path)
    return dict(sorted(result.items()))


def package_versions():
    versions = {}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def save_fig(
    fig, fig_name, fig_dir, tight_layout=True, padding=False, fig_extension="png", resolution=300, transparent=True
):
    """
    Save figure

    Parameters
    ----------
    fig : Matplotlib.figure.Figure
        Figure to be saved
    fig_name : str
        Name of figure
    fig_dir : str
        Directory to save figure
    tight_layout : bool, optional
        Automatically adjusts subplot params so that the subplot(s) fits in to the figure area, by default True
    padding: bool, optional
        Paddings around figure, by default False
    fig_extension : str, optional
        Extension of figure, by default "png"
    resolution : int, optional
        The resolution in dots per inch, by default 300
    transparent : bool, optional
        Use transparent background, by default True
    """
    os.makedirs(fig_dir, exist_ok=True)
    path = os.path.join(fig_dir, fig_name + "." + fig_extension)

    if tight_layout:
        fig.tight_layout()

    if not padding:
        fig.savefig(
            path, format=fig_extension, dpi=resolution, bbox_inches="tight", pad_inches=0, transparent=transparent
        )
    else:
        fig.savefig(path, format=fig_extension, dpi=resolution, transparent=transparent)
    plt.close(fig)
    logger.info("saved %s.%s in %s", fig_name, fig_extension, fig_dir)
    return path


def plot_curves(frames, x, y, title, fig_name, fig_dir, labels=None, logy=False, xlabel=None, ylabel=None):
    """
    Overlay one column of several tables

    Parameters
    ----------
    frames : list[pandas.DataFrame]
        Tables sharing the ``x`` and ``y`` columns
    labels : list[str], optional
        Legend entries, one per frame
    logy : bool, optional
        Logarithmic y axis, by default False
    """
    fig, ax = plt.subplots(figsize=(12, 8))
    for i, frame in enumerate(frames):
        label = labels[i] if labels else None
        ax.plot(frame[x], frame[y], label=label, linewidth=1.0)
    if logy:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel or x)
    ax.set_ylabel(ylabel or y)
    if labels:
        ax.legend(fontsize="small", ncol=2)
    return save_fig(fig, fig_name, fig_dir, transparent=False)


def plot_spectrum(potential, levels, title, fig_name, fig_dir):
    """Potential curve with each level drawn as a horizontal line across its classically allowed region."""
    fig, ax = plt.subplots(figsize=(12, 8))
    ax.plot(potential["x"], potential["V"], color="black", linewidth=1.5)
    for energy in levels["E"]:
        allowed = potential["x"][potential["V"] <= energy]
        if len(allowed):
            ax.hlines(energy, allowed.min(), allowed.max(), linewidth=0.6)
    top = float(levels["E"].max())
    ax.set_ylim(-0.05 * top, 1.1 * top)
    ax.set_title(title)
    ax.set_xlabel("x")
    ax.set_ylabel("E")
    return save_fig(fig, fig_name, fig_dir, transparent=False)


def plot_region_map(regions, fig_name, fig_dir, fig_size=10):
    """
    Heat map of fixed-point counts over a (parameter, Λ) plane

    Parameters
    ----------
    regions : pandas.DataFrame
        Long table with columns parameter, lambda, count
    """
    table = regions.pivot(index="parameter", columns="lambda", values="count").sort_index(ascending=False)
    fig = plt.figure(figsize=(fig_size, fig_size))
    ax = sns.heatmap(
        table,
        cmap="Blues",
        linecolor="black",
        linewidth=0,
        cbar_kws={"label": "fixed points"},
        xticklabels=max(1, table.shape[1] // 8),
        yticklabels=max(1, table.shape[0] // 8),
    )
    ax.set(xlabel="Λ", ylabel="parameter")
    return save_fig(fig, fig_name, fig_dir, transparent=False)
