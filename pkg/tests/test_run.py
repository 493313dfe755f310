import argparse
import json
import os

import pytest
import yaml

import commands
import utils
from exceptions import ConvergenceFailure, NoClassicalSolution
from run import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from sweep import MANIFEST, cmd_sweep

SMALL = ["--grid-points", "257", "--k-states", "20", "--k-trunc", "10", "--tmax", "2", "--samples", "50", "-q"]
HARMONIC = ["-m", "Harmonic", "--sigma", "0"] + SMALL


def _write_config(tmp_path, settings):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(settings))
    return str(path)


@pytest.fixture
def classical_config(tmp_path):
    settings = {
        "classical": {
            "t_max": 2.0,
            "initial_conditions": [[1.0, 0.0], [0.0, 1.0]],
            "region_points": 5,
            "bifurcation_points": 11,
        }
    }
    return _write_config(tmp_path, settings)


@pytest.fixture
def sweep_config(tmp_path):
    return _write_config(tmp_path, {"sweep": {"commands": ["spectrum"], "workers": 1}})


def test_spectrum_run(tmp_path):
    out = tmp_path / "out"
    assert main(["spectrum", *HARMONIC, "--out", str(out)]) == EXIT_OK
    cell = out / "Harmonic_sigma0"
    files = ["potential.csv", "spectrum.csv", "states.csv", "level_differences.csv", "dos.csv", "dip_alignment.csv"]
    for name in [*files, "spectrum.gp"]:
        assert (cell / name).exists()
    assert not (cell / "doublets.csv").exists()
    levels, metadata = utils.read_csv(str(cell / "spectrum.csv"))
    assert len(levels) == 20
    assert levels["E"][0] == pytest.approx(0.5, abs=1e-3)
    assert metadata["model"] == "Harmonic"


def test_runs_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["spectrum", *HARMONIC, "--out", str(tmp_path / name)]) == EXIT_OK
    first = utils.checksums(str(tmp_path / "a"))
    assert first
    assert first == utils.checksums(str(tmp_path / "b"))


def test_otoc_run(tmp_path):
    out = tmp_path / "out"
    assert main(["otoc", *HARMONIC, "--beta", "0.2", "--out", str(out)]) == EXIT_OK
    cell = out / "Harmonic_sigma0"
    table, metadata = utils.read_csv(str(cell / "growth_bands.csv"))
    assert table["m"].tolist() == list(range(10))
    assert {"t_dip", "t_peak", "peak_ratio"} <= set(table.columns)
    assert 0.0 <= float(metadata["cluster_jaccard"]) <= 1.0
    assert (cell / "microcanonical" / "m_000.csv").exists()
    assert (cell / "thermal" / "beta_0.2.csv").exists()
    assert (cell / "otoc_thermal.gp").exists()


def test_echo_run(tmp_path):
    out = tmp_path / "out"
    assert main(["echo", *HARMONIC, "--out", str(out)]) == EXIT_OK
    summary, metadata = utils.read_csv(str(out / "echo" / "fluctuation.csv"))
    assert summary["model"].tolist() == ["Harmonic"]
    assert summary["lambda"][0] == pytest.approx(1.0, rel=1e-2)
    assert metadata["method"] == "exact"
    assert (out / "echo" / "Harmonic_sigma0.csv").exists()


def test_classical_run_and_render(tmp_path, classical_config):
    out = tmp_path / "out"
    argv = ["classical", "-m", "ModelI", "--sigma", "0", "-q", "--config", classical_config, "--out", str(out)]
    assert main(argv) == EXIT_OK
    critical, _ = utils.read_csv(str(out / "ModelI_sigma0" / "critical.csv"))
    assert critical["critical_lambda"][0] == pytest.approx(1.9707, abs=1e-4)
    regions, _ = utils.read_csv(str(out / "ModelI_family" / "regions.csv"))
    assert len(regions) == 25
    assert (out / "ModelI_family" / "saddle_node_locus.csv").exists()
    assert (out / "ModelI_family" / "bifurcation_sigma0.csv").exists()

    assert main(["render", str(out), "-q"]) == EXIT_OK
    assert (out / "ModelI_sigma0" / "figures" / "phase_portrait.png").exists()
    assert (out / "ModelI_family" / "figures" / "regions.png").exists()


def test_invalid_input_exit_code(tmp_path):
    assert main(["spectrum", "--sigma", "-1", "-q", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["spectrum", *HARMONIC, "--k-trunc", "30", "--out", str(tmp_path)]) == EXIT_CONFIG


@pytest.mark.parametrize("error", [ConvergenceFailure, NoClassicalSolution])
def test_numerical_failure_exit_code(tmp_path, monkeypatch, error):
    def failing(config):
        raise error("search failed")

    monkeypatch.setitem(commands.COMMANDS, "spectrum", failing)
    assert main(["spectrum", *HARMONIC, "--out", str(tmp_path)]) == EXIT_NUMERICAL


def test_empty_sweep(tmp_path):
    config = utils.resolve_run_config(argparse.Namespace(out=str(tmp_path), quiet=True))
    manifest = cmd_sweep(config, models=[], sigmas=[])
    assert manifest["cells"] == []
    assert manifest["status"] == "ok"
    with open(tmp_path / MANIFEST) as f:
        assert json.load(f)["cells"] == []


def test_sweep_is_reproducible(tmp_path, sweep_config):
    manifests = []
    for name in ("a", "b"):
        out = tmp_path / name
        argv = ["sweep", "-m", "Harmonic", "--sigma", "0", "0.5", *SMALL, "--config", sweep_config, "--out", str(out)]
        assert main(argv) == EXIT_OK
        with open(out / MANIFEST) as f:
            manifests.append(json.load(f))
    assert manifests[0] == manifests[1]
    cells = manifests[0]["cells"]
    assert [c["cell"] for c in cells] == ["Harmonic_sigma0", "Harmonic_sigma0.5"]
    assert all(c["status"] == "ok" for c in cells)
    assert all(path.startswith(c["cell"] + "/") for c in cells for path in c["files"])
    assert "Harmonic_sigma0/spectrum.csv" in cells[0]["files"]


def test_sweep_reports_failed_cells(tmp_path, sweep_config, monkeypatch):
    spectrum = commands.COMMANDS["spectrum"]

    def flaky(config):
        if config.sigmas[0] > 0:
            raise ConvergenceFailure("iteration cap reached")
        return spectrum(config)

    monkeypatch.setitem(commands.COMMANDS, "spectrum", flaky)
    argv = ["sweep", "-m", "Harmonic", "--sigma", "0", "0.5", *SMALL, "--config", sweep_config, "--out", str(tmp_path)]
    assert main(argv) == EXIT_NUMERICAL
    with open(os.path.join(tmp_path, MANIFEST)) as f:
        manifest = json.load(f)
    assert manifest["status"] == "partial"
    failed = [c for c in manifest["cells"] if c["status"] == "failed"]
    assert [c["cell"] for c in failed] == ["Harmonic_sigma0.5"]
    assert failed[0]["error"].startswith("ConvergenceFailure")


@pytest.mark.slow
def test_oscillator_echo_fluctuates_most(tmp_path):
    assert main(["echo", "-q", "--out", str(tmp_path)]) == EXIT_OK
    summary, _ = utils.read_csv(str(tmp_path / "echo" / "fluctuation.csv"))
    spread = summary.set_index("model")["amplitude_std"]
    assert set(spread.index) == {"Harmonic", "ModelI", "ModelIa", "ModelII"}
    assert (spread.drop("Harmonic") < spread["Harmonic"]).all()
