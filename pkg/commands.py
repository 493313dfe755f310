"""
Per-figure pipelines. Each command takes a resolved RunConfig, writes CSV
tables and gnuplot scripts under ``config.out`` and returns the written paths.
"""
import logging
import os

import numpy as np
import pandas as pd

import classical_dynamics
import echo
import otoc
import spectral_stats
import utils
from exceptions import NoGrowthWindow
from models import MODELS, ModelTag, region_builder, spec_from_config
from models.potential import lambda_to_sigma
from operators import position_elements
from schrodinger import build_hamiltonian, convergence_report, eigensolve, solver_grid

logger = logging.getLogger(__name__)

FAMILIES = (ModelTag.MODEL_I, ModelTag.MODEL_IA, ModelTag.MODEL_II)


def cell_name(model, sigma):
    return f"{model}_sigma{float(sigma):g}"


def _cell_dir(config, model, sigma):
    path = os.path.join(config.out, cell_name(model, sigma))
    os.makedirs(path, exist_ok=True)
    return path


def _solve(config, spec):
    grid = solver_grid(spec, config.k_states, config.n_points, config.domain)
    return eigensolve(build_hamiltonian(spec, grid), config.k_states, config.richardson)


def _metadata(config, eig, **extra):
    spec = eig.spec
    return {
        "model": spec.model_tag.value,
        "sigma": f"{spec.sigma:.17g}",
        "lambda": f"{spec.lam:.17g}",
        "shift": f"{spec.shift:.17g}",
        "domain": f"[{eig.grid.x_min:.17g}, {eig.grid.x_max:.17g}]",
        "n_points": eig.grid.n_points,
        "K": eig.k_states,
        **extra,
    }


def _barrier(spec):
    tops = classical_dynamics.hilltops(spec)
    return max((p.energy for p in tops), default=None)


def cmd_spectrum(config):
    """
    Potential curve, eigenvalues and eigenfunction overlays, spectral statistics,
    the classical hilltop and turning-point tables, and a grid-refinement report.
    """
    spectral = config.section("spectral")
    written = []
    for sigma in config.sigmas:
        spec = spec_from_config(config.model_block(sigma))
        eig = _solve(config, spec)
        out = _cell_dir(config, spec.model_tag.value, sigma)
        meta = _metadata(config, eig)
        logger.info("spectrum %s sigma=%g: E_0=%.10g", spec.model_tag.value, sigma, eig.energies[0])

        def path(name):
            return os.path.join(out, name)

        written.append(utils.write_csv(path("potential.csv"), pd.DataFrame({"x": eig.x, "V": eig.potential}), meta))
        written.append(
            utils.write_csv(path("spectrum.csv"), pd.DataFrame({"n": np.arange(eig.k_states), "E": eig.energies}), meta)
        )
        shown = min(int(spectral.get("state_samples", 12)), eig.k_states)
        states = pd.DataFrame({"x": eig.x, **{f"psi_{n}": eig.states[n] for n in range(shown)}})
        written.append(utils.write_csv(path("states.csv"), states, meta))

        stats = spectral_stats.spectrum_stats(
            eig,
            smoothing_factor=float(spectral.get("smoothing_factor", spectral_stats.SMOOTHING_FACTOR)),
            prominence=float(spectral.get("dip_prominence", spectral_stats.DIP_PROMINENCE)),
            cluster_factor=float(spectral.get("cluster_factor", spectral_stats.CLUSTER_FACTOR)),
            mass=float(spectral.get("support_mass", spectral_stats.SUPPORT_MASS)),
            points=int(spectral.get("dos_points", spectral_stats.DOS_POINTS)),
        )
        levels_meta = {**meta, "dips": stats.levels.dips, "clusters": stats.levels.clusters}
        written.append(utils.write_csv(path("level_differences.csv"), stats.levels.to_frame(), levels_meta))
        written.append(
            utils.write_csv(path("dos.csv"), stats.dos, {**meta, "smoothing_width": f"{stats.smoothing_width:.17g}"})
        )
        written.append(utils.write_csv(path("state_moments.csv"), stats.per_state, meta))

        points = classical_dynamics.fixed_points(spec)
        fixed = pd.DataFrame(
            [(p.x, p.stability.value, p.energy) for p in points.points], columns=["x", "stability", "V"]
        )
        written.append(utils.write_csv(path("fixed_points.csv"), fixed, {**meta, "region": points.region.value}))
        turning = pd.DataFrame(
            [vars(m) for m in classical_dynamics.slope_minima(spec)],
            columns=["x", "slope", "turning_energy", "curvature", "is_global", "at_hilltop"],
        )
        written.append(utils.write_csv(path("turning_points.csv"), turning, meta))
        alignment = spectral_stats.dip_alignment(stats.levels, turning["turning_energy"])
        written.append(utils.write_csv(path("dip_alignment.csv"), alignment, meta))

        barrier = _barrier(spec)
        if barrier is not None:
            doublets = pd.DataFrame(
                spectral_stats.doublet_splittings(eig, barrier), columns=["pair", "splitting"]
            )
            written.append(
                utils.write_csv(path("doublets.csv"), doublets, {**meta, "barrier_energy": f"{barrier:.17g}"})
            )

        report = convergence_report(spec, eig.grid, eig.k_states, config.richardson)
        convergence = pd.DataFrame(
            {
                "n": np.arange(eig.k_states),
                "E_coarse": report.coarse,
                "E_fine": report.fine,
                "relative_change": report.relative_change,
            }
        )
        written.append(
            utils.write_csv(path("convergence.csv"), convergence, {**meta, "max_change": f"{report.max_change:.3g}"})
        )

        top = float(eig.energies[-1])
        written.append(
            utils.write_gnuplot(
                path("spectrum.gp"),
                f"{spec.model_tag.value} sigma={sigma:g}",
                [{"csv": "potential.csv", "using": "1:2", "title": "V(x)"}]
                + [{"csv": "states.csv", "using": f"1:{n + 2}", "title": f"psi_{n}"} for n in range(shown)],
                xlabel="x",
                ylabel="E",
            )
        )
        written.append(
            utils.write_gnuplot(
                path("level_differences.gp"),
                f"Successive level differences, E up to {top:.4g}",
                [
                    {"csv": "level_differences.csv", "using": "2:3", "title": "dE", "style": "linespoints"},
                    {"csv": "level_differences.csv", "using": "2:4", "title": "smoothed"},
                ],
                xlabel="E",
                ylabel="dE",
            )
        )
        written.append(
            utils.write_gnuplot(path("dos.gp"), "Density of states", [{"csv": "dos.csv", "using": "1:2"}], "E", "rho")
        )
    return written


def _growth_settings(config):
    growth = config.section("otoc").get("growth") or {}
    return {
        "start": float(growth.get("start", otoc.GROWTH_START)),
        "max_variation": float(growth.get("max_variation", otoc.MAX_VARIATION)),
        "min_length": float(growth.get("min_length", otoc.MIN_WINDOW)),
        "min_samples": int(growth.get("min_samples", otoc.MIN_SAMPLES)),
    }


def cmd_otoc(config):
    """Microcanonical series with their growth-band report, thermal series per β, and plot scripts."""
    section = config.section("otoc")
    cutoff = float(config.section("thermal").get("cutoff", otoc.BOLTZMANN_CUTOFF))
    growth = _growth_settings(config)
    peak_ratio = float((section.get("growth") or {}).get("peak_ratio", otoc.PEAK_RATIO))
    times = config.times
    written = []
    for sigma in config.sigmas:
        spec = spec_from_config(config.model_block(sigma))
        eig = _solve(config, spec)
        elements = position_elements(eig, config.k_trunc, config.convention)
        out = _cell_dir(config, spec.model_tag.value, sigma)
        meta = _metadata(config, eig, K_t=config.k_trunc, convention=config.convention)

        first, last = section.get("states", [0, config.k_trunc])
        states = range(max(0, int(first)), min(int(last), config.k_trunc))
        report, series = otoc.growth_bands(
            elements,
            states,
            times,
            quiet=config.quiet,
            peak_ratio=peak_ratio,
            max_variation=growth["max_variation"],
        )
        for m, s in series.items():
            name = os.path.join(out, "microcanonical", f"m_{m:03d}.csv")
            written.append(utils.write_csv(name, s.to_frame(), {**meta, **s.metadata()}))
        spectral = config.section("spectral")
        levels = spectral_stats.level_differences(
            eig,
            prominence=float(spectral.get("dip_prominence", spectral_stats.DIP_PROMINENCE)),
            cluster_factor=float(spectral.get("cluster_factor", spectral_stats.CLUSTER_FACTOR)),
        )
        overlap = spectral_stats.jaccard(report.growing_states, levels.cluster_states() & set(states))
        logger.info("growth bands vs level clusters: Jaccard %.3f", overlap)
        band_meta = {**meta, "bands": report.bands, "cluster_jaccard": f"{overlap:.6g}"}
        written.append(utils.write_csv(os.path.join(out, "growth_bands.csv"), report.table, band_meta))

        rows = []
        for beta in config.betas:
            s = otoc.thermal_otoc(elements, beta, times, cutoff, quiet=config.quiet)
            name = os.path.join(out, "thermal", f"beta_{beta:.6g}.csv")
            written.append(utils.write_csv(name, s.to_frame(), {**meta, **s.metadata()}))
            row = {"beta": beta, "T": 1.0 / beta, "has_window": False}
            try:
                fit = otoc.fit_growth_rate(s, **growth)
            except NoGrowthWindow:
                row.update(lambda_hat=np.nan, r_squared=np.nan, slope_stderr=np.nan, t_lo=np.nan, t_hi=np.nan)
            else:
                row.update(
                    has_window=True,
                    lambda_hat=fit.lambda_hat,
                    r_squared=fit.r_squared,
                    slope_stderr=fit.slope_stderr,
                    t_lo=fit.window[0],
                    t_hi=fit.window[1],
                )
            rows.append(row)
        thermal = pd.DataFrame(
            rows, columns=["beta", "T", "has_window", "lambda_hat", "r_squared", "slope_stderr", "t_lo", "t_hi"]
        )
        written.append(utils.write_csv(os.path.join(out, "thermal_growth.csv"), thermal, meta))

        written.append(
            utils.write_gnuplot(
                os.path.join(out, "otoc_microcanonical.gp"),
                f"Microcanonical OTOC, {spec.model_tag.value} sigma={sigma:g}",
                [{"csv": f"microcanonical/m_{m:03d}.csv", "title": f"m={m}"} for m in series],
                ylabel="c_m(t)",
                logscale_y=True,
            )
        )
        written.append(
            utils.write_gnuplot(
                os.path.join(out, "otoc_thermal.gp"),
                f"Thermal OTOC, {spec.model_tag.value} sigma={sigma:g}",
                [{"csv": f"thermal/beta_{b:.6g}.csv", "title": f"T={1.0 / b:.4g}"} for b in config.betas],
                ylabel="C_beta(t)",
                logscale_y=True,
            )
        )
    return written


def _echo_cells(config, compare):
    if compare:
        return [(str(model), float(sigma)) for model, sigma in compare.items()]
    return [(config.model, sigma) for sigma in config.sigmas]


def cmd_echo(config, compare=None, out=None):
    """
    Loschmidt echo of one or several wells with matched perturbation.

    λ is chosen per well so that λ times the position spread of the initial
    state equals ``echo.strength``. With ``compare`` (by default the
    ``echo.compare`` mapping of model -> σ) all wells land in one chart,
    written to ``out`` (by default ``<config.out>/echo``).
    """
    section = config.section("echo")
    if compare is None:
        compare = section.get("compare") or {}
    method = str(section.get("method", "exact")).lower()
    state = str(section.get("state", "ground")).lower()
    if method not in ("exact", "peres"):
        raise ValueError(f"echo.method must be exact or peres, got {method!r}")
    if state not in ("ground", "gaussian"):
        raise ValueError(f"echo.state must be ground or gaussian, got {state!r}")
    center = float(section.get("center", 0.0))
    width = float(section.get("width", np.sqrt(0.5)))
    strength = float(section.get("strength", np.sqrt(0.5)))
    times = np.linspace(0.0, float(section.get("t_max", 30.0)), int(section.get("samples", 1500)))

    out = out or os.path.join(config.out, "echo")
    os.makedirs(out, exist_ok=True)
    written, rows, plots = [], [], []
    for model, sigma in _echo_cells(config, compare):
        spec = spec_from_config({**config.model_block(sigma), "model": model})
        eig = _solve(config, spec)
        psi0 = echo.ground_state(eig) if state == "ground" else echo.gaussian_packet(eig.grid, center, width)
        label = echo.state_label(state, center, width)
        spread = echo.position_spread(psi0, eig.grid)
        lam = strength / spread
        if method == "exact":
            series = echo.exact_echo(eig, echo.perturbed_system(eig, lam, config.richardson), psi0, times, label)
        else:
            series = echo.peres_echo(psi0, eig.grid, lam, times, label)
        stats = echo.post_decay_fluctuation(series)
        name = f"{cell_name(model, sigma)}.csv"
        meta = {**_metadata(config, eig), **series.metadata()}
        written.append(utils.write_csv(os.path.join(out, name), series.to_frame(), meta))
        plots.append({"csv": name, "title": f"{model} sigma={sigma:g}"})
        rows.append(
            {
                "model": model,
                "sigma": sigma,
                "lambda": lam,
                "spread": spread,
                "mean": stats.mean,
                "amplitude_std": stats.amplitude_std,
                "t_settle": stats.t_settle,
            }
        )
        logger.info("echo %s sigma=%g: tail mean %.4g, std %.4g", model, sigma, stats.mean, stats.amplitude_std)

    summary = pd.DataFrame(rows, columns=["model", "sigma", "lambda", "spread", "mean", "amplitude_std", "t_settle"])
    written.append(
        utils.write_csv(os.path.join(out, "fluctuation.csv"), summary, {"method": method, "strength": strength})
    )
    written.append(utils.write_gnuplot(os.path.join(out, "echo.gp"), "Loschmidt echo", plots, ylabel="M(t)"))
    return written


def _axis(section, key, default_high, points):
    bounds = section.get(key) or [0.0, default_high]
    return np.linspace(float(bounds[0]), float(bounds[1]), points)


def cmd_classical(config, family=True):
    """
    Fixed points, critical tilt, turning points and Verlet phase portraits per σ,
    plus the (parameter, Λ) region map, saddle-node locus and bifurcation branches
    of the preset family unless ``family`` is False.
    """
    section = config.section("classical")
    dt = float(section.get("dt", 0.005))
    t_max = float(section.get("t_max", 20.0))
    initial = section.get("initial_conditions") or [[0.01, 0.0]]
    written = []
    tag = ModelTag(config.model)

    for sigma in config.sigmas:
        spec = spec_from_config(config.model_block(sigma))
        out = _cell_dir(config, tag.value, sigma)
        meta = {"model": tag.value, "sigma": f"{spec.sigma:.17g}", "lambda": f"{spec.lam:.17g}"}

        points = classical_dynamics.fixed_points(spec)
        fixed = pd.DataFrame(
            [(p.x, p.stability.value, p.energy) for p in points.points], columns=["x", "stability", "V"]
        )
        region_meta = {**meta, "region": points.region.value}
        written.append(utils.write_csv(os.path.join(out, "fixed_points.csv"), fixed, region_meta))

        lam_c = classical_dynamics.critical_lambda(spec)
        summary = {"critical_lambda": lam_c}
        if spec.a0 is not None and tag is not ModelTag.HARMONIC:
            summary["critical_sigma"] = lambda_to_sigma(lam_c, spec.a0, spec.a1)
        written.append(utils.write_csv(os.path.join(out, "critical.csv"), pd.DataFrame([summary]), meta))

        trajectories = classical_dynamics.phase_portrait(spec, initial, t_max, dt)
        frames = [
            pd.DataFrame({"trajectory": j, "t": tr.times, "x": tr.x, "p": tr.p, "H": tr.energy})
            for j, tr in enumerate(trajectories)
        ]
        drift = max(tr.energy_drift for tr in trajectories)
        table = pd.concat(frames, ignore_index=True)
        portrait_meta = {**meta, "dt": dt, "max_energy_drift": f"{drift:.3g}"}
        written.append(utils.write_csv(os.path.join(out, "trajectories.csv"), table, portrait_meta))
        written.append(
            utils.write_gnuplot(
                os.path.join(out, "phase_portrait.gp"),
                f"Phase portrait, {tag.value} sigma={sigma:g}",
                [{"csv": "trajectories.csv", "using": "3:4", "style": "dots", "title": "trajectories"}],
                xlabel="x",
                ylabel="p",
            )
        )

    if family and tag in FAMILIES:
        written.extend(family_maps(config))
    return written


def family_maps(config):
    """Region map over (parameter, Λ), saddle-node locus and bifurcation branches of a preset family."""
    tag = ModelTag(config.model)
    section = config.section("classical")
    name, preset, builder = region_builder(tag)
    n = int(section.get("region_points", 61))
    lam_c = classical_dynamics.critical_lambda(MODELS[tag].build(0.0))
    parameters = _axis(section, "parameter_range", 2.0 * preset, n)
    lambdas = _axis(section, "lambda_range", 2.0 * lam_c, n)
    counts = classical_dynamics.region_grid(builder, parameters, lambdas, quiet=config.quiet)
    a, lam = np.meshgrid(parameters, lambdas, indexing="ij")
    regions = pd.DataFrame({"parameter": a.ravel(), "lambda": lam.ravel(), "count": counts.ravel()})

    out = os.path.join(config.out, f"{tag.value}_family")
    os.makedirs(out, exist_ok=True)
    meta = {"model": tag.value, "parameter": name}
    written = [utils.write_csv(os.path.join(out, "regions.csv"), regions, meta)]

    if tag is ModelTag.MODEL_I:
        locus_lambdas = np.linspace(0.0, lambdas[-1], int(section.get("bifurcation_points", 201)))
        a1 = [classical_dynamics.saddle_node_a1(MODELS[tag].A0, x) for x in locus_lambdas]
        locus = pd.DataFrame({"lambda": locus_lambdas, "a1": a1})
        written.append(utils.write_csv(os.path.join(out, "saddle_node_locus.csv"), locus, meta))

    axis = np.linspace(parameters[0], parameters[-1], int(section.get("bifurcation_points", 201)))
    for sigma in config.sigmas:
        lam = spec_from_config(config.model_block(sigma)).lam
        branches = pd.DataFrame(
            classical_dynamics.bifurcation_branches(builder, axis, lam), columns=["parameter", "x", "stability"]
        )
        written.append(
            utils.write_csv(
                os.path.join(out, f"bifurcation_sigma{sigma:g}.csv"), branches, {**meta, "lambda": f"{lam:.17g}"}
            )
        )
    written.append(
        utils.write_gnuplot(
            os.path.join(out, "regions.gp"),
            f"Fixed-point regions, {tag.value}",
            [{"csv": "regions.csv", "using": "2:1:3", "style": "points pt 5 ps 0.6 palette", "title": "count"}],
            xlabel="lambda",
            ylabel=name,
        )
    )
    return written


def render(run_dir):
    """Draw PNG figures next to the CSV tables of a finished run."""
    written = []
    for root, _, files in sorted(os.walk(run_dir)):
        figures = os.path.join(root, "figures")
        if "potential.csv" in files and "spectrum.csv" in files:
            potential, _ = utils.read_csv(os.path.join(root, "potential.csv"))
            levels, _ = utils.read_csv(os.path.join(root, "spectrum.csv"))
            written.append(utils.plot_spectrum(potential, levels, os.path.basename(root), "spectrum", figures))
        if "level_differences.csv" in files:
            diffs, _ = utils.read_csv(os.path.join(root, "level_differences.csv"))
            written.append(utils.plot_curves([diffs], "E", "dE", "Level differences", "level_differences", figures))
        if "dos.csv" in files:
            dos, _ = utils.read_csv(os.path.join(root, "dos.csv"))
            written.append(utils.plot_curves([dos], "E", "rho", "Density of states", "dos", figures))
        if os.path.basename(root) in ("microcanonical", "thermal"):
            names = sorted(f for f in files if f.endswith(".csv"))
            frames = [utils.read_csv(os.path.join(root, f))[0] for f in names]
            labels = [os.path.splitext(f)[0] for f in names]
            if frames:
                title = f"{os.path.basename(root)} OTOC"
                written.append(utils.plot_curves(frames, "t", "value", title, "otoc", figures, labels, logy=True))
        if "fluctuation.csv" in files:
            names = sorted(f for f in files if f.endswith(".csv") and f != "fluctuation.csv")
            frames = [utils.read_csv(os.path.join(root, f))[0] for f in names]
            labels = [os.path.splitext(f)[0] for f in names]
            written.append(utils.plot_curves(frames, "t", "M", "Loschmidt echo", "echo", figures, labels))
        if "trajectories.csv" in files:
            table, _ = utils.read_csv(os.path.join(root, "trajectories.csv"))
            frames = [group for _, group in table.groupby("trajectory")]
            written.append(utils.plot_curves(frames, "x", "p", "Phase portrait", "phase_portrait", figures))
        if "regions.csv" in files:
            regions, _ = utils.read_csv(os.path.join(root, "regions.csv"))
            written.append(utils.plot_region_map(regions, "regions", figures))
    return written


COMMANDS = {
    "spectrum": cmd_spectrum,
    "otoc": cmd_otoc,
    "echo": cmd_echo,
    "classical": cmd_classical,
}
